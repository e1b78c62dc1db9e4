// Acceptance suite: one pass/fail line per criterion, exit status = number
// of failed criteria. Heavy simulation loads run single-threaded and
// deterministic.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "loopcert/analyzer.hpp"
#include "loopcert/format.hpp"
#include "loopcert/ir.hpp"
#include "loopcert/simulator.hpp"

using namespace loopcert;

namespace {

int failures = 0;
std::chrono::steady_clock::time_point t0;

void start() { t0 = std::chrono::steady_clock::now(); }

void report(int criterion, const std::string& name, bool pass, const std::string& detail) {
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("[%s] criterion %d: %s (%s; %.2fs)\n", pass ? "PASS" : "FAIL", criterion,
                name.c_str(), detail.c_str(), secs);
    if (!pass) ++failures;
}

SystemSpec load_spec() {
    std::ifstream in(std::string(LOOPCERT_DATA_DIR) + "/benchmark.sys");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_spec(ss.str());
}

}  // namespace

int main() {
    const SystemSpec spec = load_spec();
    const ClosedLoopSpec bench = extract_closed_loop(spec);
    const SymMatrix& p = *spec.p;
    const SymMatrix& q = *spec.initial.at("xp").q;

    // ------------------------------------------------------------------
    // 1. S-procedure feasibility at the published numbers: lambda = 6.76.
    //    The displayed P admits multipliers only in [0.0603, 0.0617]; this
    //    criterion states the published value and is reported as found.
    // ------------------------------------------------------------------
    start();
    {
        ClosedLoopSpec published = bench;
        published.lambda = 6.76;
        const double max_eig = sproc_max_eig(published);
        report(1, "S-procedure NSD at lambda=6.76", max_eig <= 1e-6,
               "max eig " + fmt_sci(max_eig));
        const double shipped = sproc_max_eig(bench);
        std::printf("       info: at the bundled lambda=%s the same matrix has max eig %s "
                    "(feasible window [0.0603, 0.0617], see search-lambda)\n",
                    fmt_double(bench.lambda).c_str(), fmt_sci(shipped).c_str());
    }

    // ------------------------------------------------------------------
    // 2. Claim (i): embedded E_Q samples satisfy x'Px <= 1 + 1e-9.
    // ------------------------------------------------------------------
    start();
    {
        Rng rng(2024);
        double worst = -1e300;
        for (int i = 0; i < 10000; ++i) {
            const double radius = i % 2 == 0 ? 1.0 : std::sqrt(rng.uniform());
            const auto xp = sample_ellipsoid(q, rng, radius);
            const std::vector<double> x{0.0, 0.0, xp[0], xp[1]};
            worst = std::max(worst, p.quadratic_form(x));
        }
        report(2, "embedded initial set inside E_P", worst <= 1.0 + 1e-9,
               "max x'Px " + fmt_double(worst));
    }

    // ------------------------------------------------------------------
    // 3. Claim (ii): sector reach and the pointwise sector inequality.
    // ------------------------------------------------------------------
    start();
    {
        const Ellipsoid ep(VarLayout({{"x", 4}}), p, "EP");
        const double reach = sector_reach(ep, bench.c);
        bool pointwise = true;
        double worst = -1e300;
        Rng rng(2025);
        for (int i = 0; i < 10000; ++i) {
            const double radius = i % 2 == 0 ? 1.0 : std::sqrt(rng.uniform());
            const auto x = sample_ellipsoid(p, rng, radius);
            const double y = bench.c.apply(x)[0];
            const double yc = std::max(std::min(y, 1.0), -1.0);
            const double prod = (yc - 0.2 * y) * (yc - y);
            worst = std::max(worst, prod);
            pointwise = pointwise && prod <= 1e-12;
        }
        report(3, "sector validity on E_P", reach <= 5.0 + 1e-9 && pointwise,
               "reach " + fmt_double(reach) + ", max sector product " + fmt_sci(worst));
    }

    // ------------------------------------------------------------------
    // 4. Inductiveness of the forward chain over the serialized order.
    // ------------------------------------------------------------------
    start();
    AnalysisResult analysis = analyze(spec);
    {
        const bool have_z = analysis.named_sets.count("Z") == 1;
        double margin = -1e300;
        if (have_z)
            margin = min_eigenvalue(inverse(p) - analysis.named_sets.at("Z").gram);
        report(4, "forward chain R..Z inductive",
               analysis.verdict.inductive && have_z && margin >= -1e-8,
               "P^-1 - Z min eig " + fmt_sci(margin));
    }

    // ------------------------------------------------------------------
    // 5. The closed-form identities and the iff-agreement at the published
    //    multiplier family {3.38, 6.76, 13.52}.
    // ------------------------------------------------------------------
    start();
    {
        bool identities = true, agreement = true;
        double worst_err = 0.0;
        for (double lam : {3.38, 6.76, 13.52}) {
            ClosedLoopSpec s = bench;
            s.lambda = lam;
            const EquivalenceReport rep = verify_equivalence(s, 1e-8, 1e-9, 1e-8);
            identities = identities && rep.w_closed_form && rep.w_factorization &&
                         rep.schur_chain;
            agreement = agreement && rep.iff_agreement;
            worst_err = std::max({worst_err, rep.w_closed_form_err, rep.w_factorization_err,
                                  rep.schur_err_forward, rep.schur_err_lmi});
        }
        report(5, "closed-form W/Schur identities and iff-agreement", identities && agreement,
               "worst identity residual " + fmt_sci(worst_err));
    }

    // ------------------------------------------------------------------
    // 6. Simulation soundness: 1000 seeded starts, 1e4 updates each.
    // ------------------------------------------------------------------
    start();
    {
        BulkConfig cfg;
        cfg.samples = 1000;
        cfg.steps = 10000;
        cfg.seed = 0;
        cfg.member_tol = 1e-6;
        cfg.decay_tol = 1e-9;
        cfg.ellipsoid_tol = 1e-8;
        const BulkStats stats = run_bulk(spec, &analysis, cfg);
        const bool pass = stats.violations == 0 && stats.max_v_increase <= 1e-9 &&
                          stats.ep_violations == 0 && stats.diverged == 0 &&
                          stats.runs == 1000;
        report(6, "simulation soundness (1000 x 1e4)", pass,
               std::to_string(stats.membership_checks) + " checks, " +
                   std::to_string(stats.violations) + " violations, max dV " +
                   fmt_sci(stats.max_v_increase) + ", max x'Px " +
                   fmt_double(stats.max_quadform));
    }

    // ------------------------------------------------------------------
    // 7. Rendezvous simulation equals the direct closed-loop recurrence.
    // ------------------------------------------------------------------
    start();
    {
        const auto x0 = sample_initial(spec, 7, 0);
        const auto trace = simulate(spec, x0, 10000);
        double xc[2] = {0.0, 0.0}, xp[2] = {x0[0], x0[1]};
        double max_diff = 0.0;
        std::size_t idx = 0;
        const Matrix &a = bench.a, &b = bench.b, &c = bench.c;
        (void)a;
        (void)b;
        (void)c;
        // direct recurrence with the program's own constants
        const double ac[2][2] = {{0.4990, -0.0500}, {0.0100, 1.0000}};
        const double bc[2] = {1.0, 0.0};
        const double cc[2] = {564.48, 0.0};
        const double dc = -1280.0;
        const double ap[2][2] = {{1.0000, 0.0100}, {-0.0100, 1.0000}};
        const double bp[2] = {0.00005, 0.01};
        for (const auto& rec : trace) {
            if (rec.label != "8p") continue;
            const double y = xp[0];
            const double yc = std::max(std::min(y, 1.0), -1.0);
            const double u = cc[0] * xc[0] + cc[1] * xc[1] + dc * yc;
            const double nxc0 = ac[0][0] * xc[0] + ac[0][1] * xc[1] + bc[0] * yc;
            const double nxc1 = ac[1][0] * xc[0] + ac[1][1] * xc[1] + bc[1] * yc;
            const double nxp0 = ap[0][0] * xp[0] + ap[0][1] * xp[1] + bp[0] * u;
            const double nxp1 = ap[1][0] * xp[0] + ap[1][1] * xp[1] + bp[1] * u;
            xc[0] = nxc0;
            xc[1] = nxc1;
            xp[0] = nxp0;
            xp[1] = nxp1;
            for (const auto& [name, vals] : rec.values) {
                if (name == "xc") {
                    max_diff = std::max(max_diff, std::fabs(vals[0] - xc[0]));
                    max_diff = std::max(max_diff, std::fabs(vals[1] - xc[1]));
                }
                if (name == "xp") {
                    max_diff = std::max(max_diff, std::fabs(vals[0] - xp[0]));
                    max_diff = std::max(max_diff, std::fabs(vals[1] - xp[1]));
                }
            }
            ++idx;
        }
        report(7, "rendezvous equals direct recurrence", idx == 10000 && max_diff <= 1e-12,
               "max abs diff " + fmt_sci(max_diff) + " over " + std::to_string(idx) +
                   " updates");
    }

    // ------------------------------------------------------------------
    // 8. Property suites: congruence PSD preservation, lemma sampling,
    //    release-after-lift identity, format round trip, re-run identity.
    // ------------------------------------------------------------------
    start();
    {
        bool pass = true;
        std::string detail;

        Rng rng(88);
        for (int trial = 0; trial < 50 && pass; ++trial) {
            const int n = 1 + static_cast<int>(rng.raw() % 6);
            const int m = 1 + static_cast<int>(rng.raw() % 6);
            Matrix g(n, n), map(m, n);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) g(i, j) = rng.gaussian();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j) map(i, j) = rng.gaussian();
            const SymMatrix s = congruence(g, SymMatrix::identity(n));
            const SymMatrix out = congruence(map, s);
            if (!is_psd(out, 1e-8 * std::max(1.0, out.max_abs()))) {
                pass = false;
                detail = "congruence PSD preservation failed";
            }
        }

        // lemma sampling soundness: 10 instances x 1000 samples
        int instances = 0;
        long lemma_violations = 0;
        while (instances < 10 && pass) {
            const int nz = 1 + static_cast<int>(rng.raw() % 3);
            Matrix g(nz, nz);
            for (int i = 0; i < nz; ++i)
                for (int j = 0; j < nz; ++j) g(i, j) = rng.gaussian();
            SymMatrix u = congruence(g, SymMatrix::identity(nz));
            u = u + SymMatrix::identity(nz).scaled(0.3);
            SymMatrix t(nz + 1);
            const double alpha = 0.1 + 0.4 * rng.uniform();
            const double beta = 1.0 + rng.uniform();
            t.set(nz - 1, nz - 1, alpha * beta);
            t.set(nz - 1, nz, -(alpha + beta) / 2.0);
            t.set(nz, nz, 1.0);
            const double mu = -(0.05 + rng.uniform());
            const LemmaResult res = combine_lemma_checked(u, t, mu, 1e-9);
            if (!res.valid) continue;
            ++instances;
            const QuadSet gv(VarLayout({{"z", nz}, {"w", 1}}), res.v, "V");
            const double scale = std::max(1.0, res.v.max_abs());
            const auto chol = cholesky(u);
            int kept = 0;
            for (long attempt = 0; attempt < 100000 && kept < 1000; ++attempt) {
                auto dir = rng.unit_vector(nz);
                const double rad = std::sqrt(rng.uniform());
                std::vector<double> zw(nz + 1, 0.0);
                for (int i = 0; i < nz; ++i) {
                    double acc = 0.0;
                    for (int j = 0; j <= i; ++j) acc += (*chol)(i, j) * dir[j] * rad;
                    zw[i] = acc;
                }
                const double y = zw[nz - 1];
                zw[nz] = (alpha + (beta - alpha) * rng.uniform()) * y;
                const double quad = alpha * beta * y * y - (alpha + beta) * y * zw[nz] +
                                    zw[nz] * zw[nz];
                if (quad > 0.0) continue;
                ++kept;
                if (!member(gv, zw, 1e-7 * scale)) ++lemma_violations;
            }
            if (kept < 1000) {
                pass = false;
                detail = "lemma sampling starved at instance " + std::to_string(instances);
            }
        }
        if (lemma_violations != 0) {
            pass = false;
            detail = "lemma sampling violations: " + std::to_string(lemma_violations);
        }

        // release after lift is the identity
        for (int trial = 0; trial < 20 && pass; ++trial) {
            const int n = 1 + static_cast<int>(rng.raw() % 5);
            Matrix g(n, n), row(1, n);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) g(i, j) = rng.gaussian();
            for (int j = 0; j < n; ++j) row(0, j) = rng.gaussian();
            const QuadSet base(VarLayout({{"a", n}}), congruence(g, SymMatrix::identity(n)),
                               "G");
            const QuadSet back = release(lift_output(base, row, "t"), "t");
            if (max_abs_diff(back.gram.to_matrix(), base.gram.to_matrix()) > 1e-12) {
                pass = false;
                detail = "release/lift identity failed";
            }
        }

        // format round trip
        {
            const std::string emitted = format_spec(spec);
            if (format_spec(parse_spec(emitted)) != emitted) {
                pass = false;
                detail = "spec format round trip moved";
            }
        }

        // deterministic re-run byte identity
        {
            const AnalysisResult r1 = analyze(spec);
            const AnalysisResult r2 = analyze(spec);
            if (report_keyvalues(r1, spec) != report_keyvalues(r2, spec)) {
                pass = false;
                detail = "analysis reruns differ";
            }
            BulkConfig cfg;
            cfg.samples = 5;
            cfg.steps = 100;
            const BulkStats s1 = run_bulk(spec, &analysis, cfg);
            const BulkStats s2 = run_bulk(spec, &analysis, cfg);
            if (s1.worst_member_margin != s2.worst_member_margin ||
                s1.max_v_increase != s2.max_v_increase) {
                pass = false;
                detail = "bulk reruns differ";
            }
        }

        report(8, "property suites", pass, pass ? "all property suites green" : detail);
    }

    // ------------------------------------------------------------------
    // 9. Negative controls: lambda = 0 and P scaled by 100 must fail with
    //    named margins.
    // ------------------------------------------------------------------
    start();
    {
        ClosedLoopSpec zero = bench;
        zero.lambda = 0.0;
        const double zero_eig = sproc_max_eig(zero);
        const bool zero_fails = zero_eig > 1e-6;

        SystemSpec shrunk = spec;
        shrunk.p = shrunk.p->scaled(100.0);
        const AnalysisResult bad = analyze(shrunk);
        bool named = false;
        for (const auto& f : bad.verdict.failures)
            named = named || f.find("margin") != std::string::npos;
        const bool shrunk_fails = !bad.verdict.inductive && named;

        report(9, "negative controls fail with named margins", zero_fails && shrunk_fails,
               "lambda=0 max eig " + fmt_sci(zero_eig) + "; 100P failures: " +
                   std::to_string(bad.verdict.failures.size()));
    }

    std::printf("%d/9 criteria passed\n", 9 - failures);
    return failures;
}
