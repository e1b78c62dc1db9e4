#include "doctest.h"

#include <cmath>

#include "loopcert/absstab.hpp"
#include "test_util.hpp"

using namespace loopcert;

namespace {

ClosedLoopSpec benchmark_spec(double lambda) {
    test::Benchmark b;
    return ClosedLoopSpec{b.closed_a(), b.closed_b(), b.closed_c(), b.p,
                          lambda,        SectorBound{0.2, 1.0},      1.0};
}

Matrix random_matrix(Rng& rng, int rows, int cols) {
    Matrix m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m(i, j) = rng.gaussian();
    return m;
}

SymMatrix random_psd(Rng& rng, int n) {
    return congruence(random_matrix(rng, n, n), SymMatrix::identity(n));
}

}  // namespace

TEST_CASE("sector matrices") {
    SectorBound sec{0.2, 1.0};
    const SymMatrix t = sec.matrix(6, 4, 5);
    CHECK(t(4, 4) == doctest::Approx(0.2));
    CHECK(t(4, 5) == doctest::Approx(-0.6));
    CHECK(t(5, 5) == doctest::Approx(1.0));
    CHECK(t(0, 0) == 0.0);

    test::Benchmark b;
    const SymMatrix tx = sec.output_form(b.closed_c());
    CHECK(tx.dim() == 5);
    CHECK(tx(2, 2) == doctest::Approx(0.2));   // 0.2 C^T C hits the y coordinate
    CHECK(tx(2, 4) == doctest::Approx(-0.6));
    CHECK(tx(4, 4) == doctest::Approx(1.0));
}

TEST_CASE("sproc matrix with zero dynamics") {
    // A = B = C = 0, lambda = 0: the matrix is [[-P, 0],[0, 0]]
    test::Benchmark b;
    ClosedLoopSpec spec{Matrix(4, 4), Matrix(4, 1), Matrix(1, 4), b.p, 0.0,
                        SectorBound{0.2, 1.0}, 1.0};
    const SymMatrix m = sproc_matrix(spec);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) CHECK(m(i, j) == doctest::Approx(-b.p(i, j)));
    for (int i = 0; i < 5; ++i) CHECK(m(i, 4) == 0.0);

    // with any lambda > 0 and C = 0 the sector term is -lambda at (yc, yc)
    spec.lambda = 3.0;
    CHECK(check_sproc(spec, 1e-9));
}

TEST_CASE("benchmark S-procedure: feasible window found by verification") {
    // The published multiplier 6.76 does not validate against the displayed
    // P (max eigenvalue +0.81); the feasible window sits near 0.0614.
    // Frozen oracle values from an independent numpy computation.
    CHECK(sproc_max_eig(benchmark_spec(6.76)) == doctest::Approx(0.8066319755).epsilon(1e-6));
    CHECK_FALSE(check_sproc(benchmark_spec(6.76), 1e-6));

    const double margin = sproc_max_eig(benchmark_spec(0.0614));
    CHECK(margin == doctest::Approx(-2.8765e-6).epsilon(1e-3));
    CHECK(check_sproc(benchmark_spec(0.0614), 1e-6));

    CHECK_FALSE(check_sproc(benchmark_spec(0.0590), 1e-9));  // outside the window
    CHECK_FALSE(check_sproc(benchmark_spec(0.0630), 1e-9));
}

TEST_CASE("lambda = 0 fails because B'PB > 0") {
    test::Benchmark b;
    const Matrix bpb = b.closed_b().transposed() * b.p.to_matrix() * b.closed_b();
    CHECK(bpb(0, 0) == doctest::Approx(0.0151263552).epsilon(1e-9));  // oracle
    const SymMatrix m = sproc_matrix(benchmark_spec(0.0));
    CHECK(m(4, 4) == doctest::Approx(bpb(0, 0)).epsilon(1e-12));
    CHECK_FALSE(check_sproc(benchmark_spec(0.0), 1e-6));
}

TEST_CASE("property: sproc matrix is linear in lambda") {
    test::Benchmark b;
    const SymMatrix m1 = sproc_matrix(benchmark_spec(1.0));
    const SymMatrix m3 = sproc_matrix(benchmark_spec(3.0));
    const SymMatrix t = SectorBound{0.2, 1.0}.output_form(b.closed_c());
    CHECK((m3 - m1 + t.scaled(2.0)).frobenius_norm() <= 1e-12);
}

TEST_CASE("combination lemma: hand-evaluated example") {
    // U = [1], T = diag(0, 1), mu = -1:
    // V = (diag(1,0) + diag(1,1) diag(0,1))^-1 diag(1,1) = I
    const SymMatrix v = combine_lemma(SymMatrix{{1.0}}, SymMatrix::diagonal({0.0, 1.0}), -1.0);
    CHECK(max_abs_diff(v.to_matrix(), Matrix::identity(2)) <= 1e-14);
}

TEST_CASE("combination lemma: T = 0 leaves a singular pencil") {
    CHECK_THROWS_AS(combine_lemma(SymMatrix{{1.0}}, SymMatrix(2), -1.0), SingularMatrixError);
}

TEST_CASE("combination lemma on the benchmark sets") {
    test::Benchmark b;
    const ClosedLoopSpec spec = benchmark_spec(b.lambda);
    const ForwardChain chain = forward_chain(spec, 1e-9);
    CHECK(chain.valid);
    CHECK(chain.lemma_min_eig >= -1e-9);

    // frozen oracle values for V at lambda = 0.0614
    CHECK(chain.v.gram(0, 0) == doctest::Approx(138.172683237858).epsilon(1e-9));
    CHECK(chain.v.gram(5, 5) == doctest::Approx(24.78133219704507).epsilon(1e-9));
    CHECK(chain.v.gram(4, 5) == doctest::Approx(14.157812076508343).epsilon(1e-9));

    // the paper multiplier leaves V indefinite: the lemma must refuse
    const ForwardChain bad = forward_chain(benchmark_spec(6.76), 1e-9);
    CHECK_FALSE(bad.valid);
    CHECK(bad.lemma_min_eig < -1.0);
    CHECK_THROWS_AS(
        combine_lemma(bad.r.gram, SectorBound{0.2, 1.0}.matrix(6, 4, 5), -6.76, 1e-9),
        LemmaError);
}

TEST_CASE("property: lemma soundness by sampling") {
    Rng rng(51);
    int instances = 0;
    while (instances < 10) {
        const int nz = 1 + static_cast<int>(rng.raw() % 3);
        SymMatrix u = random_psd(rng, nz);
        u = u + SymMatrix::identity(nz).scaled(0.3);
        // a sector-like coupling between the last z coordinate and w
        SymMatrix t(nz + 1);
        const double a = 0.1 + 0.4 * rng.uniform(), bsl = 1.0 + rng.uniform();
        t.set(nz - 1, nz - 1, a * bsl);
        t.set(nz - 1, nz, -(a + bsl) / 2.0);
        t.set(nz, nz, 1.0);
        const double mu = -(0.05 + rng.uniform());

        LemmaResult res = combine_lemma_checked(u, t, mu, 1e-9);
        if (!res.valid) continue;
        ++instances;
        const QuadSet gv(VarLayout({{"z", nz}, {"w", 1}}), res.v, "V");
        const double scale = std::max(1.0, res.v.max_abs());

        const auto chol = cholesky(u);
        REQUIRE(chol.has_value());
        int kept = 0;
        for (int s = 0; s < 20000 && kept < 1000; ++s) {
            auto dir = rng.unit_vector(nz);
            const double rad = std::sqrt(rng.uniform());
            std::vector<double> z(nz, 0.0);
            for (int i = 0; i < nz; ++i) {
                double acc = 0.0;
                for (int j = 0; j <= i; ++j) acc += (*chol)(i, j) * dir[j] * rad;
                z[i] = acc;
            }
            // w within the sector of the coupled coordinate
            const double y = z[nz - 1];
            const double w = (a + (bsl - a) * rng.uniform()) * y;
            std::vector<double> zw = z;
            zw.push_back(w);
            const double quad =
                a * bsl * y * y - (a + bsl) * y * w + w * w;
            if (quad > 0.0) continue;
            ++kept;
            CHECK(member(gv, zw, 1e-7 * scale));
        }
        CHECK(kept == 1000);
    }
}

TEST_CASE("sector_valid_on") {
    const VarLayout l({{"x", 2}});
    const Ellipsoid unit(l, SymMatrix::identity(2), "E");
    CHECK(sector_valid_on(unit, Matrix(1, 2), SectorBound{0.2, 1.0}, 1.0));  // C = 0

    Matrix big(1, 2);
    big(0, 0) = 10.0;
    CHECK_FALSE(sector_valid_on(unit, big, SectorBound{0.2, 1.0}, 1.0));  // reach 10 > 5

    test::Benchmark b;
    const Ellipsoid ep(VarLayout({{"x", 4}}), b.p, "EP");
    const double reach = sector_reach(ep, b.closed_c());
    CHECK(reach == doctest::Approx(4.3767373199).epsilon(1e-9));  // frozen oracle
    CHECK(sector_valid_on(ep, b.closed_c(), SectorBound{0.2, 1.0}, 1.0));
}

TEST_CASE("sector reach agrees with boundary sampling") {
    test::Benchmark b;
    const Ellipsoid ep(VarLayout({{"x", 4}}), b.p, "EP");
    const double reach = sector_reach(ep, b.closed_c());
    Rng rng(61);
    double sampled = 0.0;
    for (int s = 0; s < 10000; ++s) {
        const auto x = sample_ellipsoid(b.p, rng, 1.0);
        const auto y = b.closed_c().apply(x);
        sampled = std::max(sampled, std::fabs(y[0]));
        // claim (ii): the sector inequality holds pointwise on E_P
        const double yc = std::max(std::min(y[0], 1.0), -1.0);
        CHECK((yc - 0.2 * y[0]) * (yc - y[0]) <= 1e-12);
    }
    CHECK(sampled <= reach + 1e-9);
    CHECK(sampled >= 0.9 * reach);  // the bound is attained up to sampling
}

TEST_CASE("verify_equivalence at the working multiplier") {
    test::Benchmark b;
    const EquivalenceReport rep = verify_equivalence(benchmark_spec(b.lambda));
    CHECK(rep.w_closed_form);
    CHECK(rep.w_closed_form_err <= 1e-8);
    CHECK(rep.w_factorization);
    CHECK(rep.w_factorization_err <= 1e-8);
    CHECK(rep.schur_chain);
    CHECK(rep.schur_err_forward <= 1e-8);
    CHECK(rep.schur_err_lmi <= 1e-8);
    CHECK(rep.iff_agreement);
    REQUIRE(rep.iff.size() == 3);
    CHECK(rep.iff[1].forward_ok);
    CHECK(rep.iff[1].lmi_ok);
    CHECK_FALSE(rep.iff[0].lmi_ok);  // 0.5x multiplier: both sides fail together
    CHECK_FALSE(rep.iff[0].forward_ok);
    CHECK_FALSE(rep.iff[2].lmi_ok);  // 2x multiplier
    CHECK_FALSE(rep.iff[2].forward_ok);
    CHECK(rep.all_pass());
}

TEST_CASE("verify_equivalence identities are algebraic in the multiplier") {
    for (double lam : {3.38, 6.76, 13.52, 676.0}) {
        const EquivalenceReport rep = verify_equivalence(benchmark_spec(lam));
        CHECK(rep.w_closed_form);
        CHECK(rep.w_factorization);
        CHECK(rep.schur_chain);
        CHECK(rep.iff_agreement);  // both sides false together off the window
        for (const auto& s : rep.iff) CHECK(s.agree());
    }
}

TEST_CASE("verify_equivalence degenerates cleanly at C = 0") {
    test::Benchmark b;
    ClosedLoopSpec spec = benchmark_spec(0.5);
    spec.c = Matrix(1, 4);
    const EquivalenceReport rep = verify_equivalence(spec);
    CHECK(rep.w_closed_form);
    CHECK(rep.w_factorization);
    CHECK(rep.schur_chain);
    // Ptilde = P and W = diag(P^-1, 1/lambda)
    const ForwardChain chain = forward_chain(spec, 1e-9);
    const SymMatrix pinv = inverse(b.p);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            CHECK(chain.w.gram(i, j) == doctest::Approx(pinv(i, j)).epsilon(1e-9));
    CHECK(chain.w.gram(4, 4) == doctest::Approx(2.0).epsilon(1e-9));  // 1/lambda
    for (int i = 0; i < 4; ++i) CHECK(chain.w.gram(i, 4) == doctest::Approx(0.0));
}

TEST_CASE("property: forward containment iff LMI feasibility across multipliers") {
    test::Benchmark b;
    const Ellipsoid ep(VarLayout({{"x", 4}}), b.p, "EP");
    for (double lam : {0.01, 0.03, 0.0614, 0.1, 0.3, 1.0, 6.76}) {
        const ClosedLoopSpec spec = benchmark_spec(lam);
        const ForwardChain chain = forward_chain(spec, 1e-9);
        const bool fwd = chain.valid && containment_margin(ep, chain.z) >= -1e-8;
        const bool lmi = check_sproc(spec, 1e-9);
        CHECK(fwd == lmi);
    }
}
