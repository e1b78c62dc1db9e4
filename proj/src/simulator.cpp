#include "loopcert/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <thread>

#include "loopcert/format.hpp"

namespace loopcert {

namespace {

// ---------------------------------------------------------------------------
// Compiled program image: integer slots instead of name lookups.
// ---------------------------------------------------------------------------

struct VarInfo {
    std::string name;
    int offset;
    int dim;
};

struct CompiledTerm {
    Matrix coeff{0, 0};  // already scaled; empty means scalar identity
    double scalar = 1.0;
    int src_offset = 0;
    int src_dim = 0;
    bool has_matrix = false;
};

struct CompiledStmt {
    const Stmt* stmt;
    int target_offset = -1;
    int target_dim = 0;
    std::vector<CompiledTerm> terms;
    std::vector<double> constant;
    int src_offset = -1;  // saturate
    int channel = -1;
    int var_index = -1;  // target's VarInfo index, for init tracking
};

struct Image {
    std::vector<VarInfo> vars;
    std::map<std::string, int> var_index;
    int total = 0;
    std::vector<std::vector<CompiledStmt>> bodies;  // per process, flattened? no: mirror of Stmt tree
    std::map<const Stmt*, CompiledStmt> compiled;
    std::vector<std::string> channels;
    std::map<std::string, int> channel_index;

    // invariant data
    std::vector<std::pair<int, int>> inv_spans;  // offsets/dims of invariant tuple
    const SymMatrix* p = nullptr;

    const Stmt* update_stmt = nullptr;  // assignment writing the ellipse variable
    int ellipse_offset = -1, ellipse_dim = 0;
    const SymMatrix* ellipse_q = nullptr;
};

Image compile(const SystemSpec& spec) {
    Image img;
    for (const auto& p : spec.processes) {
        for (const auto& [name, dim] : p.vars) {
            if (auto it = img.var_index.find(name); it != img.var_index.end()) {
                if (img.vars[it->second].dim != dim)
                    throw DimensionError("variable " + name + " declared with two dimensions");
                continue;
            }
            img.var_index[name] = static_cast<int>(img.vars.size());
            img.vars.push_back({name, img.total, dim});
            img.total += dim;
        }
    }
    for (const auto& ch : spec.channels) {
        img.channel_index[ch.name] = static_cast<int>(img.channels.size());
        img.channels.push_back(ch.name);
    }

    for (std::size_t pi = 0; pi < spec.processes.size(); ++pi) {
        std::map<std::string, Matrix> consts;
        std::function<void(const std::vector<Stmt>&)> gather = [&](const std::vector<Stmt>& body) {
            for (const Stmt& s : body) {
                if (s.kind == Stmt::Kind::MatInit) consts.emplace(s.const_name, s.value);
                if (s.kind == Stmt::Kind::Loop) gather(s.body);
            }
        };
        gather(spec.processes[pi].body);

        std::function<void(const std::vector<Stmt>&)> comp = [&](const std::vector<Stmt>& body) {
            for (const Stmt& s : body) {
                CompiledStmt cs;
                cs.stmt = &s;
                switch (s.kind) {
                    case Stmt::Kind::VecInit:
                    case Stmt::Kind::AffineAssign:
                    case Stmt::Kind::Saturate: {
                        const int vi = img.var_index.at(s.target);
                        cs.var_index = vi;
                        cs.target_offset = img.vars[vi].offset;
                        cs.target_dim = img.vars[vi].dim;
                        break;
                    }
                    default:
                        break;
                }
                if (s.kind == Stmt::Kind::AffineAssign) {
                    cs.constant = s.constant;
                    for (const auto& t : s.terms) {
                        CompiledTerm ct;
                        const int vi = img.var_index.at(t.var);
                        ct.src_offset = img.vars[vi].offset;
                        ct.src_dim = img.vars[vi].dim;
                        if (!t.coeff_name.empty()) {
                            ct.coeff = consts.at(t.coeff_name).scaled(t.coeff_scalar);
                            ct.has_matrix = true;
                        } else {
                            ct.scalar = t.coeff_scalar;
                        }
                        cs.terms.push_back(std::move(ct));
                    }
                }
                if (s.kind == Stmt::Kind::Saturate)
                    cs.src_offset = img.vars[img.var_index.at(s.sat_source)].offset;
                if (s.kind == Stmt::Kind::Send || s.kind == Stmt::Kind::Receive)
                    cs.channel = img.channel_index.at(s.channel);
                img.compiled.emplace(&s, std::move(cs));
                if (s.kind == Stmt::Kind::Loop) comp(s.body);
            }
        };
        comp(spec.processes[pi].body);
    }

    if (spec.p) {
        img.p = &*spec.p;
        for (const auto& v : spec.invariant_vars) {
            const VarInfo& info = img.vars[img.var_index.at(v)];
            img.inv_spans.emplace_back(info.offset, info.dim);
        }
    }
    for (const auto& [name, ic] : spec.initial) {
        if (ic.kind == InitialCondition::Kind::Ellipse) {
            const VarInfo& info = img.vars[img.var_index.at(name)];
            img.ellipse_offset = info.offset;
            img.ellipse_dim = info.dim;
            img.ellipse_q = &*ic.q;
            break;
        }
    }
    if (img.ellipse_offset >= 0) {
        // the statement that advances the physical state marks one update
        for (const auto& p : spec.processes) {
            std::function<void(const std::vector<Stmt>&, bool)> find =
                [&](const std::vector<Stmt>& body, bool in_loop) {
                    for (const Stmt& s : body) {
                        if (s.kind == Stmt::Kind::Loop) find(s.body, true);
                        if (in_loop && s.kind == Stmt::Kind::AffineAssign &&
                            img.vars[img.var_index.at(s.target)].offset == img.ellipse_offset &&
                            !img.update_stmt)
                            img.update_stmt = &s;
                    }
                };
            find(p.body, false);
        }
    }
    return img;
}

double lyapunov_of(const Image& img, const std::vector<double>& state) {
    if (!img.p) return 0.0;
    std::vector<double> x;
    for (const auto& [off, dim] : img.inv_spans)
        for (int i = 0; i < dim; ++i) x.push_back(state[off + i]);
    return img.p->quadratic_form(x);
}

// ---------------------------------------------------------------------------
// Concrete executor, same scheduling rules as serialize_order.
// ---------------------------------------------------------------------------

struct ExecFrame {
    const std::vector<Stmt>* stmts;
    std::size_t idx = 0;
};

struct ExecWalker {
    std::vector<ExecFrame> stack;
    bool done() const { return stack.empty(); }
    std::string current_label;
};

class Executor {
public:
    Executor(const SystemSpec& spec, const Image& img, const std::vector<double>& x_p0,
             bool force_initial)
        : img_(img), state_(img.total, 0.0), initialized_(img.vars.size(), false) {
        walkers_.resize(spec.processes.size());
        for (std::size_t i = 0; i < spec.processes.size(); ++i)
            walkers_[i].stack.push_back({&spec.processes[i].body, 0});
        buffers_.assign(img.channels.size(), std::nullopt);

        for (const auto& [name, ic] : spec.initial) {
            const int vi = img.var_index.at(name);
            initialized_[vi] = true;
            if (ic.kind == InitialCondition::Kind::Ellipse) {
                const VarInfo& info = img.vars[vi];
                if (static_cast<int>(x_p0.size()) != info.dim)
                    throw DimensionError("initial state has wrong dimension");
                if (!force_initial && ic.q->quadratic_form(x_p0) > 1.0 + 1e-9)
                    throw InitialConditionError(name + " starts outside its initial ellipse");
                for (int i = 0; i < info.dim; ++i) state_[info.offset + i] = x_p0[i];
            }
        }
    }

    // Runs until `steps` plant updates have completed; invokes sink after
    // every executed statement. Returns completed updates. Without an update
    // statement, every statement counts as one step. A generous budget on
    // total executed statements turns runaway decoupled loops into an error
    // instead of a hang.
    template <class Sink>
    long run(long steps, Sink&& sink) {
        long k = 0;
        long executed = 0;
        long total_stmts = 0;
        for (const auto& [stmt, cs] : img_.compiled) {
            (void)stmt;
            (void)cs;
            ++total_stmts;
        }
        const long budget = steps * (4 * total_stmts + 8) + 1000;
        const std::size_t np = walkers_.size();
        bool stop = false;
        while (!stop) {
            bool progressed = false;
            for (std::size_t pi = 0; pi < np && !stop; ++pi) {
                ExecWalker& w = walkers_[pi];
                while (!w.done()) {
                    ExecFrame& f = w.stack.back();
                    if (f.idx >= f.stmts->size()) {
                        w.stack.pop_back();
                        continue;
                    }
                    const Stmt& s = (*f.stmts)[f.idx];
                    w.current_label = s.label;
                    if (s.kind == Stmt::Kind::Receive &&
                        !buffers_[img_.compiled.at(&s).channel])
                        break;
                    if (s.kind == Stmt::Kind::Send && buffers_[img_.compiled.at(&s).channel])
                        break;

                    execute(s, k);
                    progressed = true;
                    if (++executed > budget)
                        throw std::runtime_error(
                            "execution exceeded its statement budget before reaching the "
                            "requested updates (runaway loop?)");
                    if (s.kind == Stmt::Kind::Loop) {
                        w.stack.push_back({&s.body, 0});
                    } else {
                        ++f.idx;
                    }
                    const bool counts = &s == img_.update_stmt || !img_.update_stmt;
                    if (counts) ++k;
                    sink(s, k);
                    if (counts && k >= steps) {
                        stop = true;
                        break;
                    }
                }
            }
            if (stop) break;
            if (!progressed) {
                bool all_done = true;
                for (const auto& w : walkers_) all_done = all_done && w.done();
                if (all_done) break;
                std::vector<std::string> blocked;
                for (const auto& w : walkers_)
                    if (!w.done()) blocked.push_back(w.current_label);
                throw DeadlockError(std::move(blocked));
            }
        }
        return k;
    }

    const std::vector<double>& state() const { return state_; }
    bool var_initialized(int var_index) const { return initialized_[var_index]; }

private:
    void execute(const Stmt& s, long k) {
        const CompiledStmt& cs = img_.compiled.at(&s);
        switch (s.kind) {
            case Stmt::Kind::MatInit:
            case Stmt::Kind::Loop:
            case Stmt::Kind::LoopEnd:
                break;
            case Stmt::Kind::VecInit:
                for (int i = 0; i < cs.target_dim; ++i) state_[cs.target_offset + i] = 0.0;
                initialized_[cs.var_index] = true;
                break;
            case Stmt::Kind::AffineAssign: {
                double buf[8];
                for (int i = 0; i < cs.target_dim; ++i)
                    buf[i] = cs.constant.empty() ? 0.0 : cs.constant[i];
                for (const auto& t : cs.terms) {
                    if (t.has_matrix) {
                        for (int i = 0; i < cs.target_dim; ++i) {
                            double acc = 0.0;
                            for (int j = 0; j < t.src_dim; ++j)
                                acc += t.coeff(i, j) * state_[t.src_offset + j];
                            buf[i] += acc;
                        }
                    } else {
                        for (int i = 0; i < cs.target_dim; ++i)
                            buf[i] += t.scalar * state_[t.src_offset + i];
                    }
                }
                bool finite = true;
                for (int i = 0; i < cs.target_dim; ++i) {
                    state_[cs.target_offset + i] = buf[i];
                    finite = finite && std::isfinite(buf[i]);
                }
                initialized_[cs.var_index] = true;
                if (!finite) throw DivergenceError(k);
                break;
            }
            case Stmt::Kind::Saturate: {
                const double y = state_[cs.src_offset];
                state_[cs.target_offset] = std::max(std::min(y, s.sat_hi), s.sat_lo);
                initialized_[cs.var_index] = true;
                break;
            }
            case Stmt::Kind::Send: {
                const VarInfo& info = img_.vars[img_.var_index.at(s.channel)];
                buffers_[cs.channel] =
                    std::vector<double>(state_.begin() + info.offset,
                                        state_.begin() + info.offset + info.dim);
                break;
            }
            case Stmt::Kind::Receive: {
                const VarInfo& info = img_.vars[img_.var_index.at(s.channel)];
                const auto& payload = *buffers_[cs.channel];
                for (int i = 0; i < info.dim; ++i) state_[info.offset + i] = payload[i];
                initialized_[img_.var_index.at(s.channel)] = true;
                buffers_[cs.channel] = std::nullopt;
                break;
            }
        }
    }

    const Image& img_;
    std::vector<double> state_;
    std::vector<bool> initialized_;
    std::vector<ExecWalker> walkers_;
    std::vector<std::optional<std::vector<double>>> buffers_;
};

}  // namespace

std::optional<std::string> ellipse_variable(const SystemSpec& spec) {
    for (const auto& [name, ic] : spec.initial)
        if (ic.kind == InitialCondition::Kind::Ellipse) return name;
    return std::nullopt;
}

std::vector<double> sample_initial(const SystemSpec& spec, std::uint64_t seed, int index) {
    const auto var = ellipse_variable(spec);
    if (!var) throw InitialConditionError("no ellipse-initialized variable to sample");
    const SymMatrix& q = *spec.initial.at(*var).q;
    // splitmix-style scramble keeps per-index streams decorrelated
    std::uint64_t s = seed + 0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(index) + 1);
    s ^= s >> 30;
    s *= 0xBF58476D1CE4E5B9ULL;
    s ^= s >> 27;
    Rng rng(s);
    const double radius = index % 2 == 0 ? 1.0 : std::sqrt(rng.uniform());
    return sample_ellipsoid(q, rng, radius);
}

std::vector<TraceRecord> simulate(const SystemSpec& spec, const std::vector<double>& x_p0,
                                  long steps, bool force_initial) {
    if (steps < 1) throw DimensionError("steps must be >= 1");
    const Image img = compile(spec);
    Executor ex(spec, img, x_p0, force_initial);

    std::vector<TraceRecord> trace;
    ex.run(steps, [&](const Stmt& s, long k) {
        TraceRecord rec;
        rec.k = k;
        rec.label = s.label;
        for (std::size_t vi = 0; vi < img.vars.size(); ++vi) {
            if (!ex.var_initialized(static_cast<int>(vi))) continue;
            const VarInfo& info = img.vars[vi];
            std::vector<double> vals(ex.state().begin() + info.offset,
                                     ex.state().begin() + info.offset + info.dim);
            rec.values.emplace_back(info.name, std::move(vals));
        }
        rec.lyapunov = lyapunov_of(img, ex.state());
        trace.push_back(std::move(rec));
    });
    return trace;
}

std::vector<std::pair<long, double>> lyapunov_profile(const std::vector<TraceRecord>& trace) {
    std::vector<std::pair<long, double>> out;
    long last_k = 0;
    for (const auto& rec : trace) {
        if (rec.k > last_k) {
            out.emplace_back(rec.k, rec.lyapunov);
            last_k = rec.k;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Annotation membership
// ---------------------------------------------------------------------------

namespace {

// Precomputed fast membership test for one Gram set: eigendecomposition of R
// plus the secular equation of the bordered arrowhead matrix. In the rotated
// basis the bordered matrix is [[1, w^T],[w, diag(lam)]], whose smallest
// eigenvalue below lam[0] is the unique root of the decreasing function g.
struct FastMember {
    VarLayout layout;
    Matrix u{0, 0};            // eigenvectors (columns)
    std::vector<double> lam;   // ascending
    int dim = 0;

    explicit FastMember(const QuadSet& q) : layout(q.layout), dim(q.gram.dim()) {
        if (dim > 15) throw DimensionError("membership fast path supports dim <= 15");
        EigenDecomposition ed = sym_eigen(q.gram);
        u = std::move(ed.vectors);
        lam = std::move(ed.values);
    }

    void rotate(const double* z, double* w, double& wnorm2) const {
        wnorm2 = 0.0;
        for (int j = 0; j < dim; ++j) {
            double acc = 0.0;
            for (int i = 0; i < dim; ++i) acc += u(i, j) * z[i];
            w[j] = acc;
            wnorm2 += acc * acc;
        }
    }

    double secular(const double* w, double theta) const {
        double acc = 1.0 - theta;
        for (int j = 0; j < dim; ++j) acc -= w[j] * w[j] / (lam[j] - theta);
        return acc;
    }

    // true iff the min eigenvalue of the bordered matrix is < theta
    bool margin_below(const double* w, double theta) const {
        if (theta > lam[0]) return true;  // interlacing: min eig <= lam[0]
        return secular(w, theta) < 0.0;
    }

    // min eigenvalue of [[1, z^T],[z, R]], already rotated
    double margin_rotated(const double* w, double wnorm2) const {
        const double dmin = lam[0];
        double lo = std::min(1.0, dmin) - std::sqrt(wnorm2) - 1e-12;
        double hi = dmin;
        const double eps = 1e-14 * (std::fabs(dmin) + 1.0);
        if (secular(w, hi - eps) >= 0.0) return dmin;  // no root below lam[0]
        for (int it = 0; it < 60; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (secular(w, mid) >= 0.0) lo = mid;
            else hi = mid;
        }
        return 0.5 * (lo + hi);
    }

    double margin(const double* z) const {
        double w[16];
        double wnorm2;
        rotate(z, w, wnorm2);
        return margin_rotated(w, wnorm2);
    }
};

}  // namespace

std::vector<Violation> check_annotations(const std::vector<TraceRecord>& trace,
                                         const AnalysisResult& analysis, double tol) {
    std::vector<Violation> out;
    std::map<std::string, FastMember> fast;
    for (const auto& [label, ann] : analysis.by_label)
        if (ann.post.is_set()) fast.emplace(label, FastMember(*ann.post.set));

    for (std::size_t i = 0; i < trace.size(); ++i) {
        const TraceRecord& rec = trace[i];
        auto it = fast.find(rec.label);
        if (it == fast.end()) continue;  // top/false/bottom: nothing to check
        const FastMember& fm = it->second;

        double z[16];
        int pos = 0;
        bool have_all = true;
        for (const auto& e : fm.layout.vars()) {
            const auto v = std::find_if(rec.values.begin(), rec.values.end(),
                                        [&](const auto& p) { return p.first == e.name; });
            if (v == rec.values.end()) { have_all = false; break; }
            for (double x : v->second) z[pos++] = x;
        }
        if (!have_all) {
            out.push_back({i, rec.label, -1e300});
            continue;
        }
        const double m = fm.margin(z);
        if (m < -tol) out.push_back({i, rec.label, m});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Streaming bulk checks
// ---------------------------------------------------------------------------

namespace {

struct LabelCheck {
    FastMember fm;
    std::vector<std::pair<int, int>> spans;  // (offset, dim) per layout var
};

struct SectorCheck {
    int y_off, yc_off;
    double limit;
};

void merge_bulk(BulkStats& into, const BulkStats& part) {
    into.runs += part.runs;
    into.plant_updates += part.plant_updates;
    into.membership_checks += part.membership_checks;
    into.violations += part.violations;
    if (part.worst_member_margin < into.worst_member_margin) {
        into.worst_member_margin = part.worst_member_margin;
        into.worst_member_label = part.worst_member_label;
    }
    into.max_v_increase = std::max(into.max_v_increase, part.max_v_increase);
    into.max_quadform = std::max(into.max_quadform, part.max_quadform);
    into.ep_violations += part.ep_violations;
    into.max_sector_product = std::max(into.max_sector_product, part.max_sector_product);
    into.sector_violations += part.sector_violations;
    into.diverged += part.diverged;
}

}  // namespace

BulkStats run_bulk(const SystemSpec& spec, const AnalysisResult* analysis,
                   const BulkConfig& cfg) {
    const Image img = compile(spec);

    std::map<const Stmt*, LabelCheck> checks;
    if (analysis && cfg.check_annotations) {
        for (const auto& [stmt, cs] : img.compiled) {
            (void)cs;
            auto it = analysis->by_label.find(stmt->label);
            if (it == analysis->by_label.end() || !it->second.post.is_set()) continue;
            LabelCheck lc{FastMember(*it->second.post.set), {}};
            bool ok = true;
            int total = 0;
            for (const auto& e : lc.fm.layout.vars()) {
                auto vi = img.var_index.find(e.name);
                if (vi == img.var_index.end()) { ok = false; break; }
                lc.spans.emplace_back(img.vars[vi->second].offset, img.vars[vi->second].dim);
                total += img.vars[vi->second].dim;
            }
            if (ok && total <= 15) checks.emplace(stmt, std::move(lc));
        }
    }

    std::map<const Stmt*, SectorCheck> sector_checks;
    for (const auto& [stmt, cs] : img.compiled)
        if (stmt->kind == Stmt::Kind::Saturate)
            sector_checks.emplace(stmt, SectorCheck{cs.src_offset, cs.target_offset,
                                                    std::min(-stmt->sat_lo, stmt->sat_hi)});

    auto run_samples = [&](int begin, int end, BulkStats& stats) {
        for (int sample = begin; sample < end; ++sample) {
            std::vector<double> x0 = sample_initial(spec, cfg.seed, sample);
            Executor ex(spec, img, x0, false);
            ++stats.runs;

            double v_prev = lyapunov_of(img, ex.state());
            long k_prev = 0;
            try {
                stats.plant_updates += ex.run(cfg.steps, [&](const Stmt& s, long k) {
                    const auto& state = ex.state();

                    if (auto it = checks.find(&s); it != checks.end()) {
                        double z[16], w[16];
                        double wnorm2;
                        int pos = 0;
                        for (const auto& [off, dim] : it->second.spans)
                            for (int i = 0; i < dim; ++i) z[pos++] = state[off + i];
                        ++stats.membership_checks;
                        const FastMember& fm = it->second.fm;
                        fm.rotate(z, w, wnorm2);
                        // one secular evaluation decides each question in the
                        // common case; the bisection runs only on record lows
                        // and actual violations
                        const bool violating = fm.margin_below(w, -cfg.member_tol);
                        if (violating) ++stats.violations;
                        if (violating || fm.margin_below(w, stats.worst_member_margin)) {
                            const double m = fm.margin_rotated(w, wnorm2);
                            if (m < stats.worst_member_margin) {
                                stats.worst_member_margin = m;
                                stats.worst_member_label = s.label;
                            }
                        }
                    }

                    if (auto it = sector_checks.find(&s); it != sector_checks.end()) {
                        const double y = state[it->second.y_off];
                        const double yc = state[it->second.yc_off];
                        if (spec.sector.alpha > 0.0 &&
                            std::fabs(y) <= it->second.limit / spec.sector.alpha) {
                            const double prod =
                                (yc - spec.sector.alpha * y) * (yc - spec.sector.beta * y);
                            stats.max_sector_product =
                                std::max(stats.max_sector_product, prod);
                            if (prod > 1e-12) ++stats.sector_violations;
                        }
                    }

                    if (k > k_prev) {  // one full plant update completed
                        const double v = lyapunov_of(img, ex.state());
                        stats.max_v_increase = std::max(stats.max_v_increase, v - v_prev);
                        stats.max_quadform = std::max(stats.max_quadform, v);
                        if (img.p && v > 1.0 + cfg.ellipsoid_tol) ++stats.ep_violations;
                        v_prev = v;
                        k_prev = k;
                    }
                });
            } catch (const DivergenceError&) {
                ++stats.diverged;
            }
        }
    };

    int threads = cfg.threads > 0 ? cfg.threads
                                  : static_cast<int>(std::thread::hardware_concurrency());
    threads = std::max(1, std::min(threads, cfg.samples));
    if (threads == 1) {
        BulkStats stats;
        run_samples(0, cfg.samples, stats);
        return stats;
    }

    std::vector<BulkStats> partials(threads);
    std::vector<std::thread> pool;
    const int chunk = (cfg.samples + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
        const int begin = t * chunk;
        const int end = std::min(cfg.samples, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back(run_samples, begin, end, std::ref(partials[t]));
    }
    for (auto& th : pool) th.join();

    BulkStats stats;  // merged in sample-index order, so fully deterministic
    for (const auto& part : partials) merge_bulk(stats, part);
    return stats;
}

std::string trace_csv(const SystemSpec& spec, const std::vector<TraceRecord>& trace) {
    std::vector<std::pair<std::string, int>> cols;
    for (const auto& p : spec.processes)
        for (const auto& [name, dim] : p.vars)
            if (std::find_if(cols.begin(), cols.end(),
                             [&](const auto& c) { return c.first == name; }) == cols.end())
                cols.emplace_back(name, dim);

    std::string out = "step,line";
    for (const auto& [name, dim] : cols) {
        if (dim == 1) {
            out += "," + name;
        } else {
            for (int i = 1; i <= dim; ++i) out += "," + name + std::to_string(i);
        }
    }
    out += ",V\n";

    for (const auto& rec : trace) {
        out += std::to_string(rec.k) + "," + rec.label;
        for (const auto& [name, dim] : cols) {
            const auto v = std::find_if(rec.values.begin(), rec.values.end(),
                                        [&](const auto& p) { return p.first == name; });
            for (int i = 0; i < dim; ++i) {
                out += ",";
                if (v != rec.values.end()) out += fmt_double(v->second[i]);
            }
        }
        out += "," + fmt_double(rec.lyapunov) + "\n";
    }
    return out;
}

}  // namespace loopcert
