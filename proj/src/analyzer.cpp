#include "loopcert/analyzer.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "loopcert/format.hpp"

namespace loopcert {

namespace {

void walk_stmts(const std::vector<Stmt>& body, const std::function<void(const Stmt&)>& f) {
    for (const Stmt& s : body) {
        f(s);
        if (s.kind == Stmt::Kind::Loop) walk_stmts(s.body, f);
    }
}

// Steady-state slice of the order: the span between the last two occurrences
// of the first label that repeats.
std::pair<std::size_t, std::size_t> steady_cycle(const std::vector<OrderEntry>& order) {
    for (std::size_t i = 0; i < order.size(); ++i) {
        std::size_t last = 0, prev = 0;
        int count = 0;
        for (std::size_t j = 0; j < order.size(); ++j) {
            if (order[j].label == order[i].label && order[j].stmt == order[i].stmt) {
                prev = last;
                last = j;
                ++count;
            }
        }
        if (count >= 2) return {prev, last};
    }
    return {0, order.size()};  // no loops: the whole order
}

std::vector<std::string> stmt_reads(const Stmt& s) {
    switch (s.kind) {
        case Stmt::Kind::AffineAssign: {
            std::vector<std::string> r;
            for (const auto& t : s.terms) r.push_back(t.var);
            return r;
        }
        case Stmt::Kind::Saturate:
            return {s.sat_source};
        case Stmt::Kind::Send:
            return {s.channel};
        default:
            return {};
    }
}

std::optional<std::string> stmt_write(const Stmt& s) {
    switch (s.kind) {
        case Stmt::Kind::AffineAssign:
        case Stmt::Kind::Saturate:
        case Stmt::Kind::VecInit:
            return s.target;
        default:
            return std::nullopt;
    }
}

}  // namespace

std::string AbstractState::render() const {
    switch (kind) {
        case Kind::Bottom: return "bottom";
        case Kind::Top: return "top";
        case Kind::False_: return "false";
        case Kind::Set:
            if (set->label == "EP") return set->layout.tuple_string() + " in E_P";
            return set->layout.tuple_string() + " in G_" + set->label;
    }
    return "";
}

std::map<std::string, std::vector<std::string>> liveness_release_points(const SystemSpec& spec) {
    std::map<std::string, std::vector<std::string>> out;

    // variables never read anywhere: released right where they are written
    std::map<std::string, int> total_reads;
    for (const auto& p : spec.processes)
        walk_stmts(p.body, [&](const Stmt& s) {
            for (const auto& v : stmt_reads(s)) ++total_reads[v];
        });
    for (const auto& p : spec.processes)
        walk_stmts(p.body, [&](const Stmt& s) {
            if (auto w = stmt_write(s); w && total_reads[*w] == 0) out[s.label].push_back(*w);
        });

    std::vector<OrderEntry> order;
    try {
        order = serialize_order(spec, 3);
    } catch (const DeadlockError&) {
        return out;  // release analysis is meaningless for a deadlocked system
    }
    const auto [begin, end] = steady_cycle(order);
    const std::size_t len = end - begin;
    if (len == 0) return out;

    std::vector<std::string> all_vars;
    for (const auto& p : spec.processes)
        for (const auto& v : p.vars) all_vars.push_back(v.first);

    for (const auto& var : all_vars) {
        if (total_reads[var] == 0) continue;  // handled above
        std::vector<std::size_t> reads, writes;
        for (std::size_t k = 0; k < len; ++k) {
            const Stmt& s = *order[begin + k].stmt;
            for (const auto& v : stmt_reads(s))
                if (v == var) reads.push_back(k);
            if (auto w = stmt_write(s); w && *w == var) writes.push_back(k);
        }
        if (reads.empty() || writes.empty()) continue;  // live across the cycle
        for (std::size_t r : reads) {
            // distance to the next write and to the next read, cyclically
            auto cyc_dist = [len](std::size_t from, std::size_t to) {
                return (to + len - from - 1) % len + 1;  // in [1, len]
            };
            std::size_t dw = len + 1;
            for (std::size_t w : writes) dw = std::min(dw, cyc_dist(r, w));
            // a read at the same statement as a write still sees the old
            // value, so reads at distance == dw keep the variable live;
            // r2 == r covers a self-recurring read next cycle
            bool later_read = false;
            for (std::size_t r2 : reads)
                if (cyc_dist(r, r2) <= dw && (r2 != r || dw == len)) later_read = true;
            if (!later_read && dw <= len) {
                auto& vec = out[order[begin + r].label];
                if (std::find(vec.begin(), vec.end(), var) == vec.end()) vec.push_back(var);
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// ForwardAnalyzer
// ---------------------------------------------------------------------------

ForwardAnalyzer::ForwardAnalyzer(const SystemSpec& spec, double psd_tol, double contain_tol)
    : spec_(spec), psd_tol_(psd_tol), contain_tol_(contain_tol) {
    consts_.resize(spec.processes.size());
    for (std::size_t i = 0; i < spec.processes.size(); ++i)
        walk_stmts(spec.processes[i].body, [&](const Stmt& s) {
            if (s.kind == Stmt::Kind::MatInit) consts_[i].emplace(s.const_name, s.value);
        });
    release_after_ = liveness_release_points(spec);
}

std::string ForwardAnalyzer::fresh_label() {
    static const char* sequence[] = {"R", "V", "W", "X", "Y", "Z"};
    const auto key = std::make_pair(current_line_, current_slot_++);
    if (auto it = line_labels_.find(key); it != line_labels_.end()) return it->second;
    const int i = next_label_++;
    const std::string label = i < 6 ? sequence[i] : "S" + std::to_string(i + 1);
    line_labels_.emplace(key, label);
    return label;
}

void ForwardAnalyzer::fail(const std::string& what) {
    if (!verdict_) return;
    // revisited lines report the same failure once
    for (const auto& f : verdict_->failures)
        if (f == what) return;
    verdict_->failures.push_back(what);
}

void ForwardAnalyzer::record_set(const QuadSet& q) {
    if (result_) result_->named_sets.emplace(q.label, q);
}

AbstractState ForwardAnalyzer::drop_if_tracked(const AbstractState& s, const std::string& var) {
    if (!s.is_set() || !s.set->layout.has(var)) return s;
    if (s.set->layout.vars().size() == 1) return AbstractState::top();
    QuadSet dropped = release(*s.set, var, s.set->label);
    return AbstractState::of(std::move(dropped));
}

TransferOutcome ForwardAnalyzer::do_affine(const AbstractState& state, const Stmt& stmt, int pi) {
    if (!state.is_set()) return {state, std::nullopt};
    const QuadSet& g = *state.set;

    for (double c : stmt.constant)
        if (c != 0.0) {
            fail("unsupported-affine-constant at " + stmt.label);
            return {drop_if_tracked(state, stmt.target), std::nullopt};
        }

    // a read of an unconstrained variable leaves the target unconstrained
    for (const auto& t : stmt.terms)
        if (!g.layout.has(t.var)) return {drop_if_tracked(state, stmt.target), std::nullopt};

    std::vector<std::string> dying;
    if (auto it = release_after_.find(stmt.label); it != release_after_.end()) dying = it->second;
    auto dies = [&](const std::string& v) {
        return std::find(dying.begin(), dying.end(), v) != dying.end();
    };

    const int target_dim = spec_.var_dim(stmt.target);
    // A tracked target keeps its tuple position; a fresh one slots in right
    // after the leading run of invariant-tuple variables, so the state block
    // stays in front and derived quantities follow in computation order.
    std::vector<VarLayout::Entry> ordered;
    bool placed = false;
    for (const auto& e : g.layout.vars()) {
        if (e.name == stmt.target) {
            if (!dies(stmt.target)) {
                ordered.push_back({stmt.target, target_dim});
                placed = true;
            }
            continue;
        }
        if (!dies(e.name)) ordered.push_back(e);
    }
    if (!placed && !dies(stmt.target)) {
        auto is_invariant_var = [&](const std::string& name) {
            return std::find(spec_.invariant_vars.begin(), spec_.invariant_vars.end(), name) !=
                   spec_.invariant_vars.end();
        };
        auto at = ordered.begin();
        while (at != ordered.end() && is_invariant_var(at->name)) ++at;
        ordered.insert(at, {stmt.target, target_dim});
    }
    if (ordered.empty()) return {AbstractState::top(), std::nullopt};
    VarLayout out_layout(ordered);

    Matrix m(out_layout.total_dim(), g.layout.total_dim());
    for (const auto& e : out_layout.vars()) {
        const int row = out_layout.offset_of(e.name);
        if (e.name == stmt.target) {
            for (const auto& t : stmt.terms) {
                const int col = g.layout.offset_of(t.var);
                if (!t.coeff_name.empty()) {
                    const Matrix& coeff = consts_[pi].at(t.coeff_name);
                    Matrix scaled = coeff.scaled(t.coeff_scalar);
                    for (int r = 0; r < scaled.rows(); ++r)
                        for (int c = 0; c < scaled.cols(); ++c)
                            m(row + r, col + c) += scaled(r, c);
                } else {
                    for (int r = 0; r < target_dim; ++r) m(row + r, col + r) += t.coeff_scalar;
                }
            }
        } else {
            const int col = g.layout.offset_of(e.name);
            for (int r = 0; r < e.dim; ++r) m(row + r, col + r) = 1.0;
        }
    }

    QuadSet image = affine_image(g, m, out_layout, fresh_label());
    record_set(image);
    return {AbstractState::of(std::move(image)), std::nullopt};
}

TransferOutcome ForwardAnalyzer::do_saturate(const AbstractState& state, const Stmt& stmt) {
    if (!state.is_set()) return {state, std::nullopt};

    AbstractState base = drop_if_tracked(state, stmt.target);
    if (!base.is_set() || !base.set->layout.has(stmt.sat_source))
        return {drop_if_tracked(state, stmt.target), std::nullopt};
    const QuadSet& g = *base.set;

    if (stmt.sat_lo != -stmt.sat_hi) {
        fail("asymmetric-saturation at " + stmt.label);
        return {base, std::nullopt};
    }
    if (spec_.sector.alpha <= 0.0 || spec_.sector.alpha > spec_.sector.beta) {
        fail("invalid-sector at " + stmt.label);
        return {base, std::nullopt};
    }

    // The sector bound only holds while the input stays within sat_limit/alpha;
    // its reach over G is bounded by the Gram diagonal.
    const int y_off = g.layout.offset_of(stmt.sat_source);
    const double reach = std::sqrt(std::max(0.0, g.gram(y_off, y_off)));
    const double bound = stmt.sat_hi / spec_.sector.alpha;
    if (verdict_ && !verdict_->has_sector) {
        verdict_->has_sector = true;
        verdict_->sector_reach = reach;
        verdict_->sector_bound = bound;
    }
    if (reach > bound + 1e-9) {
        fail("sector-invalid at " + stmt.label + " (reach " + fmt_sci(reach) + " > " +
             fmt_sci(bound) + ")");
        return {base, std::nullopt};
    }

    const int n = g.layout.total_dim();
    const SymMatrix t = spec_.sector.matrix(n + 1, y_off, n);
    LemmaResult lemma{SymMatrix(1), 0.0, false};
    try {
        lemma = combine_lemma_checked(g.gram, t, -spec_.lambda, psd_tol_);
    } catch (const SingularMatrixError& e) {
        fail("lemma-pencil-singular at " + stmt.label + " (pivot " +
             std::to_string(e.pivot_index) + ")");
        return {base, std::nullopt};
    }
    if (verdict_ && !verdict_->has_lemma) {
        verdict_->has_lemma = true;
        verdict_->lemma_min_eig = lemma.min_eig;
    }
    if (!lemma.valid) {
        fail("lemma-inapplicable at " + stmt.label + " (V min eig " + fmt_sci(lemma.min_eig) +
             ")");
        return {base, std::nullopt};
    }

    QuadSet v(g.layout.with_appended(stmt.target, 1), lemma.v, fresh_label());
    record_set(v);
    TransferOutcome out{AbstractState::of(v), std::nullopt};

    if (auto it = release_after_.find(stmt.label); it != release_after_.end()) {
        QuadSet current = v;
        bool went_top = false;
        for (const auto& var : it->second) {
            if (!current.layout.has(var)) continue;
            if (current.layout.vars().size() == 1) { went_top = true; break; }
            current = release(current, var, fresh_label());
            record_set(current);
        }
        if (went_top)
            out.released = AbstractState::top();
        else if (!(current.layout == v.layout))
            out.released = AbstractState::of(std::move(current));
    }
    return out;
}

TransferOutcome ForwardAnalyzer::transfer(const AbstractState& state, const Stmt& stmt,
                                          int process_index) {
    if (state.kind == AbstractState::Kind::Bottom) return {state, std::nullopt};
    if (current_line_ != stmt.label) {
        current_line_ = stmt.label;
        current_slot_ = 0;
    }

    switch (stmt.kind) {
        case Stmt::Kind::MatInit:
        case Stmt::Kind::Send:
        case Stmt::Kind::Receive:
        case Stmt::Kind::Loop:
        case Stmt::Kind::LoopEnd:
            return {state, std::nullopt};
        case Stmt::Kind::VecInit:
            // init-section zero writes keep the postulated condition; the
            // initial-embedding check of the verdict covers them
            return {state, std::nullopt};
        case Stmt::Kind::AffineAssign:
            return do_affine(state, stmt, process_index);
        case Stmt::Kind::Saturate:
            return do_saturate(state, stmt);
    }
    return {state, std::nullopt};
}

std::optional<double> initial_embedding_margin(const SystemSpec& spec) {
    if (!spec.p) return std::nullopt;
    std::vector<VarLayout::Entry> entries;
    for (const auto& v : spec.invariant_vars) entries.push_back({v, spec.var_dim(v)});
    const VarLayout layout(entries);
    for (const auto& v : spec.invariant_vars)
        if (spec.initial.find(v) == spec.initial.end()) return std::nullopt;
    Matrix ginit(layout.total_dim(), layout.total_dim());
    for (const auto& v : spec.invariant_vars) {
        const auto& ic = spec.initial.at(v);
        if (ic.kind == InitialCondition::Kind::Ellipse)
            ginit.set_block(layout.offset_of(v), layout.offset_of(v),
                            inverse(*ic.q).to_matrix());
    }
    return min_eigenvalue(inverse(*spec.p) - SymMatrix(ginit));
}

AnalysisResult ForwardAnalyzer::run() {
    AnalysisResult result;
    result_ = &result;
    verdict_ = &result.verdict;
    next_label_ = 0;

    // entry state: the postulated invariant over its tuple, or top
    AbstractState state = AbstractState::top();
    if (spec_.p) {
        std::vector<VarLayout::Entry> entries;
        for (const auto& v : spec_.invariant_vars) entries.push_back({v, spec_.var_dim(v)});
        VarLayout layout(entries);
        QuadSet entry(layout, inverse(*spec_.p), "EP");
        record_set(entry);
        state = AbstractState::of(std::move(entry));

        // initial embedding: the declared initial set must sit inside E_P
        if (auto margin = initial_embedding_margin(spec_)) {
            verdict_->has_embed = true;
            verdict_->embed_margin = *margin;
            if (*margin < -contain_tol_)
                fail("initial-embedding (margin " + fmt_sci(*margin) + ")");
        } else {
            fail("initial-embedding: invariant variable without initial condition");
        }
    }

    std::vector<OrderEntry> order = serialize_order(spec_, 2);

    // map each synthetic LoopEnd back to its loop
    std::map<const Stmt*, const Stmt*> loop_of_end;
    for (const auto& p : spec_.processes)
        walk_stmts(p.body, [&](const Stmt& s) {
            if (s.kind == Stmt::Kind::Loop)
                for (const Stmt& b : s.body)
                    if (b.kind == Stmt::Kind::LoopEnd) loop_of_end[&b] = &s;
        });

    std::map<const Stmt*, AbstractState> loop_invariants;
    std::string prev_label;

    for (std::size_t i = 0; i < order.size(); ++i) {
        const OrderEntry& e = order[i];
        const Stmt& stmt = *e.stmt;
        AbstractState pre = state;

        TransferOutcome outcome{state, std::nullopt};
        AbstractState post_for_annotation = state;

        if (stmt.kind == Stmt::Kind::Loop) {
            if (loop_invariants.find(&stmt) == loop_invariants.end())
                loop_invariants.emplace(&stmt, state);
            post_for_annotation = loop_invariants.at(&stmt);
            state = post_for_annotation;
        } else if (stmt.kind == Stmt::Kind::LoopEnd) {
            const Stmt* loop = loop_of_end.at(&stmt);
            const AbstractState& inv = loop_invariants.at(loop);
            bool compatible = true;
            if (inv.is_set()) {
                if (!state.is_set()) {
                    compatible = state.kind == AbstractState::Kind::Bottom;
                    if (!compatible)
                        fail("loop-invariance at " + stmt.label + " (state widened to top)");
                } else if (!(state.set->layout == inv.set->layout)) {
                    compatible = false;
                    fail("loop-invariance at " + stmt.label + " (tracked tuples differ: " +
                         state.set->layout.tuple_string() + " vs " +
                         inv.set->layout.tuple_string() + ")");
                } else {
                    const double margin = min_eigenvalue(inv.set->gram - state.set->gram);
                    verdict_->loop_margins[stmt.label] = margin;
                    if (margin < -contain_tol_) {
                        compatible = false;
                        fail("loop-invariance at " + stmt.label + " (margin " +
                             fmt_sci(margin) + ")");
                    }
                    // rendered as a skip row: weakening back to the invariant
                    if (compatible && state.set->label != inv.set->label && !prev_label.empty()) {
                        auto it = result.by_label.find(prev_label);
                        if (it != result.by_label.end() && !it->second.weakened_post)
                            it->second.weakened_post = inv;
                    }
                }
            }
            if (compatible) pre = inv;  // the end line is entered at the invariant
            post_for_annotation = AbstractState::falsum();
            state = inv;  // the next iteration starts from the invariant
        } else {
            outcome = transfer(state, stmt, e.process);
            post_for_annotation = outcome.post;
            state = outcome.released ? *outcome.released : outcome.post;
        }

        auto it = result.by_label.find(e.label);
        if (it == result.by_label.end()) {
            Annotation ann;
            ann.label = e.label;
            ann.pre = e.blocked_wait ? std::optional<AbstractState>() : std::optional(pre);
            ann.post = post_for_annotation;
            ann.unlock = e.unlock;
            ann.blocked = e.blocked_wait;
            if (outcome.released) ann.weakened_post = *outcome.released;
            result.by_label.emplace(e.label, std::move(ann));
            result.label_order.push_back(e.label);
        } else if (e.label == prev_label) {
            it->second.post = post_for_annotation;  // same source line, later statement
        } else {
            // revisit on a later cycle: the stored annotation must be stable
            const Annotation& old = it->second;
            bool same = old.post.kind == post_for_annotation.kind;
            if (same && old.post.is_set() && post_for_annotation.is_set()) {
                same = old.post.set->label == post_for_annotation.set->label &&
                       old.post.set->layout == post_for_annotation.set->layout &&
                       max_abs_diff(old.post.set->gram.to_matrix(),
                                    post_for_annotation.set->gram.to_matrix()) <=
                           1e-9 * std::max(1.0, old.post.set->gram.max_abs());
            }
            if (!same) fail("unstable-annotation at " + e.label);
        }
        prev_label = e.label;
    }

    result.verdict.inductive = result.verdict.failures.empty();
    verdict_ = nullptr;
    result_ = nullptr;
    return result;
}

AnalysisResult analyze(const SystemSpec& spec, double psd_tol, double contain_tol) {
    ForwardAnalyzer a(spec, psd_tol, contain_tol);
    return a.run();
}

// ---------------------------------------------------------------------------
// Closed-loop extraction
// ---------------------------------------------------------------------------

ClosedLoopSpec extract_closed_loop(const SystemSpec& spec) {
    if (!spec.p) throw std::runtime_error("closed-loop extraction needs an invariant section");
    std::vector<VarLayout::Entry> entries;
    for (const auto& v : spec.invariant_vars) entries.push_back({v, spec.var_dim(v)});
    const VarLayout layout(entries);
    const int n = layout.total_dim();

    std::vector<OrderEntry> order = serialize_order(spec, 3);
    const auto [begin, end] = steady_cycle(order);
    if (begin == end) throw std::runtime_error("closed-loop extraction needs a loop");

    std::vector<std::map<std::string, Matrix>> consts(spec.processes.size());
    for (std::size_t i = 0; i < spec.processes.size(); ++i)
        walk_stmts(spec.processes[i].body, [&](const Stmt& s) {
            if (s.kind == Stmt::Kind::MatInit) consts[i].emplace(s.const_name, s.value);
        });

    // symbolic value of each variable over columns [invariant tuple | yc]
    std::map<std::string, Matrix> expr;
    for (const auto& v : spec.invariant_vars) {
        Matrix m(spec.var_dim(v), n + 1);
        m.set_block(0, layout.offset_of(v), Matrix::identity(spec.var_dim(v)));
        expr[v] = m;
    }

    std::optional<Matrix> c_row;
    std::optional<double> sat_limit;

    for (std::size_t k = begin; k < end; ++k) {
        const OrderEntry& e = order[k];
        const Stmt& s = *e.stmt;
        switch (s.kind) {
            case Stmt::Kind::AffineAssign: {
                for (double cv : s.constant)
                    if (cv != 0.0)
                        throw std::runtime_error(
                            "closed-loop extraction: affine constant at " + s.label);
                Matrix acc(spec.var_dim(s.target), n + 1);
                for (const auto& t : s.terms) {
                    auto it = expr.find(t.var);
                    if (it == expr.end())
                        throw std::runtime_error("closed-loop extraction: " + t.var +
                                                 " has no value at " + s.label);
                    if (!t.coeff_name.empty())
                        acc = acc + consts[e.process].at(t.coeff_name).scaled(t.coeff_scalar) *
                                        it->second;
                    else
                        acc = acc + it->second.scaled(t.coeff_scalar);
                }
                expr[s.target] = acc;
                break;
            }
            case Stmt::Kind::Saturate: {
                if (c_row) throw std::runtime_error("closed-loop extraction: several saturations");
                auto it = expr.find(s.sat_source);
                if (it == expr.end())
                    throw std::runtime_error("closed-loop extraction: saturation input unset");
                for (int j = 0; j < spec.var_dim(s.sat_source); ++j)
                    if (it->second(j, n) != 0.0)
                        throw std::runtime_error(
                            "closed-loop extraction: algebraic loop through the saturation");
                c_row = it->second.block(0, 0, 1, n);
                if (s.sat_lo != -s.sat_hi)
                    throw std::runtime_error("closed-loop extraction: asymmetric saturation");
                sat_limit = s.sat_hi;
                Matrix yc(1, n + 1);
                yc(0, n) = 1.0;
                expr[s.target] = yc;
                break;
            }
            case Stmt::Kind::VecInit:
                expr[s.target] = Matrix(spec.var_dim(s.target), n + 1);
                break;
            default:
                break;
        }
    }
    if (!c_row) throw std::runtime_error("closed-loop extraction: no saturation in the loop");

    Matrix a(n, n), b(n, 1);
    for (const auto& v : spec.invariant_vars) {
        auto it = expr.find(v);
        const int off = layout.offset_of(v);
        a.set_block(off, 0, it->second.block(0, 0, spec.var_dim(v), n));
        b.set_block(off, 0, it->second.block(0, n, spec.var_dim(v), 1));
    }

    ClosedLoopSpec cl{a, b, *c_row, *spec.p, spec.lambda, spec.sector, *sat_limit};
    return cl;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

std::string render_report(const AnalysisResult& result, const SystemSpec& spec) {
    const Verdict& v = result.verdict;
    std::string out;
    out += "=== invariant analysis report ===\n";
    out += "verdict: " + std::string(v.inductive ? "INDUCTIVE" : "NOT-INDUCTIVE") + "\n";

    if (v.has_embed)
        out += "initial embedding margin (min eig of P^-1 - G_init): " +
               fmt_sci(v.embed_margin) + "\n";
    if (v.has_sector) {
        out += "sector reach max|y| over invariant: " + fmt_sci(v.sector_reach) +
               " (bound " + fmt_sci(v.sector_bound) + ")\n";
    }
    if (v.has_lemma)
        out += "sector lemma min eigenvalue of V: " + fmt_sci(v.lemma_min_eig) + "\n";
    for (const auto& [label, margin] : v.loop_margins)
        out += "loop invariance margin at " + label + ": " + fmt_sci(margin) + "\n";

    try {
        ClosedLoopSpec cl = extract_closed_loop(spec);
        out += "S-procedure max eigenvalue at lambda = " + fmt_double(cl.lambda) + ": " +
               fmt_sci(sproc_max_eig(cl)) + "\n";
    } catch (const std::exception&) {
        // no closed-loop form; the forward results above stand on their own
    }

    if (!v.failures.empty()) {
        out += "failed checks:\n";
        for (const auto& f : v.failures) out += "  - " + f + "\n";
    }

    out += "named sets (Gram form, 4 decimals):\n";
    for (const auto& [label, set] : result.named_sets) {
        out += "  " + (label == "EP" ? std::string("P^-1 (entry set E_P)")
                                     : "G_" + label + " over " + set.layout.tuple_string()) +
               "  (min eig " + fmt_sci(min_eigenvalue(set.gram)) + "):\n";
        out += fmt_matrix_block(set.gram, 4, "    ");
    }
    return out;
}

std::string report_keyvalues(const AnalysisResult& result, const SystemSpec& spec) {
    const Verdict& v = result.verdict;
    std::string out;
    out += "verdict=" + std::string(v.inductive ? "INDUCTIVE" : "NOT-INDUCTIVE") + "\n";
    if (v.has_embed) out += "embed.margin=" + fmt_sci(v.embed_margin) + "\n";
    if (v.has_sector) {
        out += "sector.reach=" + fmt_sci(v.sector_reach) + "\n";
        out += "sector.bound=" + fmt_sci(v.sector_bound) + "\n";
    }
    if (v.has_lemma) out += "lemma.min_eig=" + fmt_sci(v.lemma_min_eig) + "\n";
    for (const auto& [label, margin] : v.loop_margins)
        out += "loop." + label + ".margin=" + fmt_sci(margin) + "\n";
    try {
        ClosedLoopSpec cl = extract_closed_loop(spec);
        out += "sproc.lambda=" + fmt_double(cl.lambda) + "\n";
        out += "sproc.max_eig=" + fmt_sci(sproc_max_eig(cl)) + "\n";
    } catch (const std::exception&) {
    }
    for (std::size_t i = 0; i < v.failures.size(); ++i)
        out += "failure." + std::to_string(i) + "=" + v.failures[i] + "\n";
    for (const auto& [label, set] : result.named_sets) {
        out += "set." + label + ".vars=" + set.layout.tuple_string() + "\n";
        for (int r = 0; r < set.gram.dim(); ++r) {
            out += "set." + label + ".row" + std::to_string(r) + "=";
            for (int c = 0; c < set.gram.dim(); ++c)
                out += (c ? "," : "") + fmt_double(set.gram(r, c));
            out += "\n";
        }
    }
    return out;
}

std::map<std::string, ListingAnnotation> listing_annotations(const AnalysisResult& result) {
    std::map<std::string, ListingAnnotation> out;
    for (const auto& [label, ann] : result.by_label) {
        ListingAnnotation la;
        la.pre = ann.pre ? ann.pre->render() : "";
        la.post = ann.post.render();
        la.unlock = ann.unlock;
        la.blocked = ann.blocked;
        if (ann.weakened_post) la.skip_post = ann.weakened_post->render();
        out.emplace(label, std::move(la));
    }
    return out;
}

}  // namespace loopcert
