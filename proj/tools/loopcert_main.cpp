#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "loopcert/analyzer.hpp"
#include "loopcert/format.hpp"
#include "loopcert/ir.hpp"
#include "loopcert/simulator.hpp"

namespace {

using namespace loopcert;

constexpr int kExitOk = 0;
constexpr int kExitPropertyFailure = 1;
constexpr int kExitInputFailure = 2;

struct Options {
    std::string spec_path;
    double psd_tol = 1e-9;
    double contain_tol = 1e-8;
    double lambda_override = std::nan("");
    long steps = 10000;
    int samples = 1000;
    std::uint64_t seed = 0;
    std::string out_path;
    bool force_initial = false;
    int trace_sample = 0;
    std::string initial;  // explicit start, "v1,v2"
};

void add_common(CLI::App* cmd, Options& o) {
    cmd->add_option("--spec", o.spec_path, "system spec file")->required();
    cmd->add_option("--psd-tol", o.psd_tol, "PSD decision tolerance");
    cmd->add_option("--contain-tol", o.contain_tol, "containment tolerance");
    cmd->add_option("--lambda", o.lambda_override, "override the spec multiplier");
    cmd->add_option("--out", o.out_path, "write machine-readable output here");
}

bool load(const Options& o, SystemSpec& spec, bool apply_validate = true) {
    if (o.psd_tol <= 0.0 || o.contain_tol <= 0.0 || o.steps < 1 || o.samples < 1) {
        std::cout << "error: tolerances must be positive and steps/samples >= 1\n";
        return false;
    }
    std::ifstream in(o.spec_path);
    if (!in) {
        std::cout << "error: cannot open " << o.spec_path << "\n";
        return false;
    }
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        spec = parse_spec(ss.str());
    } catch (const ParseError& e) {
        std::cout << "error: " << e.what() << "\n";
        return false;
    }
    if (apply_validate) {
        const auto diags = validate(spec);
        if (!diags.empty()) {
            for (const auto& d : diags) std::cout << "invalid: " << d << "\n";
            return false;
        }
    }
    if (!std::isnan(o.lambda_override)) spec.lambda = o.lambda_override;
    return true;
}

void write_out(const Options& o, const std::string& content) {
    if (o.out_path.empty()) return;
    std::ofstream out(o.out_path, std::ios::binary);
    out << content;
}

int cmd_check_spec(const Options& o) {
    SystemSpec spec;
    if (!load(o, spec)) return kExitInputFailure;

    ClosedLoopSpec cl{Matrix(1, 1), Matrix(1, 1), Matrix(1, 1), SymMatrix(1), 0.0, {}, 1.0};
    try {
        cl = extract_closed_loop(spec);
    } catch (const std::exception& e) {
        std::cout << "error: " << e.what() << "\n";
        return kExitInputFailure;
    }

    const double sproc = sproc_max_eig(cl);
    const bool sproc_ok = sproc <= o.psd_tol;

    const Ellipsoid ep(VarLayout({{"x", cl.dim()}}), cl.p, "EP");
    const double reach = sector_reach(ep, cl.c);
    const double bound = cl.sat_limit / cl.sector.alpha;
    const bool sector_ok = sector_valid_on(ep, cl.c, cl.sector, cl.sat_limit);

    const auto embed = initial_embedding_margin(spec);
    const bool embed_ok = embed && *embed >= -o.contain_tol;

    std::string kv;
    std::cout << "S-procedure max eigenvalue at lambda = " << fmt_double(cl.lambda) << ": "
              << fmt_sci(sproc) << "  [" << (sproc_ok ? "pass" : "FAIL") << "]\n";
    std::cout << "sector reach sqrt(C P^-1 C^T) = " << fmt_sci(reach) << " vs bound "
              << fmt_sci(bound) << "  [" << (sector_ok ? "pass" : "FAIL") << "]\n";
    std::cout << "initial embedding margin = " << (embed ? fmt_sci(*embed) : "n/a") << "  ["
              << (embed_ok ? "pass" : "FAIL") << "]\n";
    kv += "sproc.lambda=" + fmt_double(cl.lambda) + "\n";
    kv += "sproc.max_eig=" + fmt_sci(sproc) + "\n";
    kv += "sector.reach=" + fmt_sci(reach) + "\n";
    kv += "sector.bound=" + fmt_sci(bound) + "\n";
    if (embed) kv += "embed.margin=" + fmt_sci(*embed) + "\n";
    const bool all = sproc_ok && sector_ok && embed_ok;
    kv += std::string("result=") + (all ? "pass" : "fail") + "\n";
    write_out(o, kv);

    std::cout << (all ? "check-spec: all checks passed\n" : "check-spec: checks FAILED\n");
    return all ? kExitOk : kExitPropertyFailure;
}

int cmd_analyze(const Options& o) {
    SystemSpec spec;
    if (!load(o, spec)) return kExitInputFailure;

    AnalysisResult result = analyze(spec, o.psd_tol, o.contain_tol);
    const auto ann = listing_annotations(result);
    std::cout << emit_listing(spec, &ann) << "\n";
    std::cout << render_report(result, spec);
    write_out(o, report_keyvalues(result, spec));
    return result.verdict.inductive ? kExitOk : kExitPropertyFailure;
}

int cmd_simulate(const Options& o) {
    SystemSpec spec;
    if (!load(o, spec)) return kExitInputFailure;

    AnalysisResult result = analyze(spec, o.psd_tol, o.contain_tol);
    if (!result.verdict.inductive)
        std::cout << "warning: invariant analysis is NOT-INDUCTIVE; annotation checks "
                     "are skipped\n";

    try {
        if (!o.initial.empty()) {
            // single run from an explicit starting point
            std::vector<double> x0;
            std::stringstream ss(o.initial);
            std::string piece;
            while (std::getline(ss, piece, ',')) x0.push_back(std::strtod(piece.c_str(), nullptr));
            const auto trace = simulate(spec, x0, o.steps, o.force_initial);
            const auto viols = result.verdict.inductive
                                   ? check_annotations(trace, result)
                                   : std::vector<Violation>{};
            std::cout << "single run: " << trace.size() << " records, "
                      << viols.size() << " annotation violations\n";
            write_out(o, trace_csv(spec, trace));
            return viols.empty() ? kExitOk : kExitPropertyFailure;
        }

        BulkConfig cfg;
        cfg.steps = o.steps;
        cfg.samples = o.samples;
        cfg.seed = o.seed;
        cfg.check_annotations = result.verdict.inductive;
        const BulkStats stats = run_bulk(spec, &result, cfg);

        std::cout << "runs: " << stats.runs << "  plant updates: " << stats.plant_updates
                  << "\n";
        std::cout << "annotation checks: " << stats.membership_checks
                  << "  violations: " << stats.violations << "\n";
        if (stats.membership_checks > 0)
            std::cout << "worst membership margin: " << fmt_sci(stats.worst_member_margin)
                      << " at " << stats.worst_member_label << "\n";
        std::cout << "max Lyapunov increase per update: " << fmt_sci(stats.max_v_increase)
                  << "\n";
        std::cout << "max invariant quadratic form: " << fmt_sci(stats.max_quadform)
                  << "  violations: " << stats.ep_violations << "\n";
        std::cout << "max sector product: " << fmt_sci(stats.max_sector_product)
                  << "  violations: " << stats.sector_violations << "\n";
        std::cout << "diverged runs: " << stats.diverged << "\n";

        if (!o.out_path.empty()) {
            // fine-grained trace of one deterministic sample
            const auto x0 = sample_initial(spec, cfg.seed, o.trace_sample);
            write_out(o, trace_csv(spec, simulate(spec, x0, o.steps)));
        }
        const bool ok = stats.clean() && result.verdict.inductive;
        return ok ? kExitOk : kExitPropertyFailure;
    } catch (const DivergenceError& e) {
        std::cout << "error: " << e.what() << "\n";
        return kExitPropertyFailure;
    } catch (const InitialConditionError& e) {
        std::cout << "error: " << e.what() << " (use --force-initial to override)\n";
        return kExitInputFailure;
    }
}

int cmd_equivalence(const Options& o) {
    SystemSpec spec;
    if (!load(o, spec)) return kExitInputFailure;

    try {
        const ClosedLoopSpec cl = extract_closed_loop(spec);
        const EquivalenceReport rep = verify_equivalence(cl, 1e-8, o.psd_tol, o.contain_tol);

        std::cout << "closed-form W identity:   err " << fmt_sci(rep.w_closed_form_err) << "  ["
                  << (rep.w_closed_form ? "pass" : "FAIL") << "]\n";
        std::cout << "W factorization identity: err " << fmt_sci(rep.w_factorization_err)
                  << "  [" << (rep.w_factorization ? "pass" : "FAIL") << "]  Ptilde min eig "
                  << fmt_sci(rep.ptilde_min_eig) << "\n";
        std::cout << "Schur chain identities:   err " << fmt_sci(rep.schur_err_forward) << " / "
                  << fmt_sci(rep.schur_err_lmi) << "  ["
                  << (rep.schur_chain ? "pass" : "FAIL") << "]\n";
        for (const auto& s : rep.iff)
            std::cout << "iff at lambda " << fmt_double(s.lambda) << ": forward "
                      << (s.forward_ok ? "true" : "false") << " (margin "
                      << fmt_sci(s.contain_margin) << "), LMI "
                      << (s.lmi_ok ? "true" : "false") << " (max eig "
                      << fmt_sci(s.lmi_max_eig) << ")  ["
                      << (s.agree() ? "agree" : "DISAGREE") << "]\n";

        std::string kv;
        kv += "w_closed_form.err=" + fmt_sci(rep.w_closed_form_err) + "\n";
        kv += "w_factorization.err=" + fmt_sci(rep.w_factorization_err) + "\n";
        kv += "schur.err_forward=" + fmt_sci(rep.schur_err_forward) + "\n";
        kv += "schur.err_lmi=" + fmt_sci(rep.schur_err_lmi) + "\n";
        for (const auto& s : rep.iff)
            kv += "iff." + fmt_double(s.lambda) + ".agree=" + (s.agree() ? "1" : "0") + "\n";
        kv += std::string("result=") + (rep.all_pass() ? "pass" : "fail") + "\n";
        write_out(o, kv);

        std::cout << (rep.all_pass() ? "equivalence: all checks passed\n"
                                     : "equivalence: checks FAILED\n");
        return rep.all_pass() ? kExitOk : kExitPropertyFailure;
    } catch (const EquivalenceError& e) {
        std::cout << "error: " << e.what() << "\n";
        return kExitPropertyFailure;
    } catch (const std::exception& e) {
        std::cout << "error: " << e.what() << "\n";
        return kExitInputFailure;
    }
}

// Heuristic grid search for a feasible multiplier; refines the best margin
// and reports the feasible window when one exists.
int cmd_search_lambda(const Options& o) {
    SystemSpec spec;
    if (!load(o, spec)) return kExitInputFailure;

    ClosedLoopSpec cl{Matrix(1, 1), Matrix(1, 1), Matrix(1, 1), SymMatrix(1), 0.0, {}, 1.0};
    try {
        cl = extract_closed_loop(spec);
    } catch (const std::exception& e) {
        std::cout << "error: " << e.what() << "\n";
        return kExitInputFailure;
    }

    auto margin_at = [&](double lam) {
        ClosedLoopSpec s = cl;
        s.lambda = lam;
        return sproc_max_eig(s);
    };

    double best_lam = 0.0, best = 1e300;
    for (int i = 0; i <= 2000; ++i) {
        const double lam = std::pow(10.0, -5.0 + 7.0 * i / 2000.0);  // 1e-5 .. 1e2
        if (lam > 100.0) break;
        const double m = margin_at(lam);
        if (m < best) { best = m; best_lam = lam; }
    }
    {
        double lo = best_lam * 0.5, hi = best_lam * 2.0;
        for (int it = 0; it < 120; ++it) {  // golden-section refine
            const double m1 = lo + (hi - lo) * 0.382, m2 = lo + (hi - lo) * 0.618;
            if (margin_at(m1) < margin_at(m2)) hi = m2;
            else lo = m1;
        }
        best_lam = 0.5 * (lo + hi);
        best = margin_at(best_lam);
    }

    std::cout << "best multiplier: lambda = " << fmt_double(best_lam) << " (max eigenvalue "
              << fmt_sci(best) << ")\n";
    if (best <= o.psd_tol) {
        auto bisect = [&](double lo, double hi, bool feasible_left) {
            for (int i = 0; i < 100; ++i) {
                const double mid = 0.5 * (lo + hi);
                const bool feas = margin_at(mid) <= o.psd_tol;
                if (feas == feasible_left) lo = mid;
                else hi = mid;
            }
            return 0.5 * (lo + hi);
        };
        const double left = bisect(best_lam, best_lam * 1e-3, true);
        const double right = bisect(best_lam, best_lam * 1e3, true);
        std::cout << "feasible window: [" << fmt_double(std::min(left, right)) << ", "
                  << fmt_double(std::max(left, right)) << "]\n";
        return kExitOk;
    }
    std::cout << "no feasible multiplier in (0, 100]\n";
    return kExitPropertyFailure;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"loopcert: closed-loop invariant certification for sampled-data control code"};
    app.require_subcommand(1);

    Options o;
    auto* check = app.add_subcommand("check-spec", "S-procedure, sector and embedding checks");
    add_common(check, o);

    auto* analyze_cmd = app.add_subcommand("analyze", "forward analysis and annotated listing");
    add_common(analyze_cmd, o);

    auto* sim = app.add_subcommand("simulate", "rendezvous simulation with annotation checks");
    add_common(sim, o);
    sim->add_option("--steps", o.steps, "plant updates per run");
    sim->add_option("--samples", o.samples, "number of sampled initial conditions");
    sim->add_option("--seed", o.seed, "sampling seed")->envname("LOOPCERT_SEED");
    sim->add_option("--trace-sample", o.trace_sample, "sample index written to --out");
    sim->add_option("--initial", o.initial, "explicit initial state, comma separated");
    sim->add_flag("--force-initial", o.force_initial, "allow starts outside the initial set");

    auto* equiv = app.add_subcommand("equivalence",
                                     "forward-analysis vs LMI equivalence identities");
    add_common(equiv, o);

    auto* search = app.add_subcommand("search-lambda",
                                      "heuristic grid search for a feasible multiplier");
    add_common(search, o);

    CLI11_PARSE(app, argc, argv);

    try {
        if (check->parsed()) return cmd_check_spec(o);
        if (analyze_cmd->parsed()) return cmd_analyze(o);
        if (sim->parsed()) return cmd_simulate(o);
        if (equiv->parsed()) return cmd_equivalence(o);
        if (search->parsed()) return cmd_search_lambda(o);
    } catch (const std::exception& e) {
        std::cout << "error: " << e.what() << "\n";
        return kExitInputFailure;
    }
    return kExitInputFailure;
}
