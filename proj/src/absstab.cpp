#include "loopcert/absstab.hpp"

#include <cmath>

namespace loopcert {

namespace {

Matrix hstack(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) throw DimensionError("hstack row mismatch");
    Matrix out(a.rows(), a.cols() + b.cols());
    out.set_block(0, 0, a);
    out.set_block(0, a.cols(), b);
    return out;
}

// Gauss-Jordan solve A X = B for a general (not necessarily symmetric) A.
Matrix solve_general(Matrix a, Matrix b) {
    const int n = a.rows();
    if (a.cols() != n || b.rows() != n) throw DimensionError("solve_general shape mismatch");
    const double pivot_tol = 1e-12 * std::max(1.0, a.max_abs());
    for (int col = 0; col < n; ++col) {
        int pivot = col;
        double best = std::fabs(a(col, col));
        for (int r = col + 1; r < n; ++r) {
            const double v = std::fabs(a(r, col));
            if (v > best) { best = v; pivot = r; }
        }
        if (best <= pivot_tol) throw SingularMatrixError(col);
        if (pivot != col) {
            for (int j = 0; j < n; ++j) std::swap(a(col, j), a(pivot, j));
            for (int j = 0; j < b.cols(); ++j) std::swap(b(col, j), b(pivot, j));
        }
        const double scale = a(col, col);
        for (int j = 0; j < n; ++j) a(col, j) /= scale;
        for (int j = 0; j < b.cols(); ++j) b(col, j) /= scale;
        for (int r = 0; r < n; ++r) {
            if (r == col) continue;
            const double f = a(r, col);
            if (f == 0.0) continue;
            for (int j = 0; j < n; ++j) a(r, j) -= f * a(col, j);
            for (int j = 0; j < b.cols(); ++j) b(r, j) -= f * b(col, j);
        }
    }
    return b;
}

void check_shapes(const ClosedLoopSpec& spec) {
    const int n = spec.p.dim();
    if (spec.a.rows() != n || spec.a.cols() != n) throw DimensionError("A must be n x n");
    if (spec.b.rows() != n || spec.b.cols() != 1) throw DimensionError("B must be n x 1");
    if (spec.c.rows() != 1 || spec.c.cols() != n) throw DimensionError("C must be 1 x n");
}

}  // namespace

SymMatrix SectorBound::matrix(int dim, int y_offset, int yc_offset) const {
    if (y_offset < 0 || yc_offset < 0 || y_offset >= dim || yc_offset >= dim ||
        y_offset == yc_offset)
        throw DimensionError("sector matrix offsets out of range");
    SymMatrix t(dim);
    t.set(y_offset, y_offset, alpha * beta);
    t.set(y_offset, yc_offset, -(alpha + beta) / 2.0);
    t.set(yc_offset, yc_offset, 1.0);
    return t;
}

SymMatrix SectorBound::output_form(const Matrix& c) const {
    const int n = c.cols();
    Matrix t(n + 1, n + 1);
    const Matrix ctc = c.transposed() * c;
    t.set_block(0, 0, ctc.scaled(alpha * beta));
    t.set_block(0, n, c.transposed().scaled(-(alpha + beta) / 2.0));
    t.set_block(n, 0, c.scaled(-(alpha + beta) / 2.0));
    t(n, n) = 1.0;
    return SymMatrix(t);
}

SymMatrix sproc_matrix(const ClosedLoopSpec& spec) {
    check_shapes(spec);
    const int n = spec.dim();
    const Matrix ab = hstack(spec.a, spec.b);
    SymMatrix m = congruence(ab.transposed(), spec.p);

    Matrix shift(n + 1, n + 1);
    shift.set_block(0, 0, spec.p.to_matrix());
    m = m - SymMatrix(shift);

    return m - spec.sector.output_form(spec.c).scaled(spec.lambda);
}

double sproc_max_eig(const ClosedLoopSpec& spec) { return max_eigenvalue(sproc_matrix(spec)); }

bool check_sproc(const ClosedLoopSpec& spec, double tol) {
    return is_nsd(sproc_matrix(spec), tol);
}

LemmaResult combine_lemma_checked(const SymMatrix& u, const SymMatrix& t, double mu,
                                  double psd_tol) {
    const int nz = u.dim();
    const int total = t.dim();
    if (total <= nz) throw DimensionError("combine_lemma: T must extend U");

    Matrix g(total, total);
    g.set_block(0, 0, u.to_matrix());
    g.set_block(nz, nz, Matrix::identity(total - nz));

    Matrix j(total, total);
    j.set_block(0, 0, Matrix::identity(nz));

    const Matrix pencil = j - (g * t.to_matrix()).scaled(mu);
    const Matrix v_raw = solve_general(pencil, g);

    LemmaResult out{SymMatrix(v_raw), 0.0, false};
    out.min_eig = min_eigenvalue(out.v);
    out.valid = out.min_eig >= -psd_tol;
    return out;
}

SymMatrix combine_lemma(const SymMatrix& u, const SymMatrix& t, double mu, double psd_tol) {
    LemmaResult r = combine_lemma_checked(u, t, mu, psd_tol);
    if (!r.valid) throw LemmaError(r.min_eig);
    return r.v;
}

double sector_reach(const Ellipsoid& e, const Matrix& c) {
    if (c.rows() != 1 || c.cols() != e.shape.dim())
        throw DimensionError("sector_reach: C must be a row over the ellipsoid space");
    const SymMatrix pinv = inverse(e.shape);
    return std::sqrt(std::max(0.0, congruence(c, pinv)(0, 0)));
}

bool sector_valid_on(const Ellipsoid& e, const Matrix& c, const SectorBound& sector,
                     double sat_limit) {
    if (sat_limit <= 0.0) throw DimensionError("sector_valid_on: sat_limit must be > 0");
    if (sector.alpha <= 0.0) return false;
    return sector_reach(e, c) <= sat_limit / sector.alpha + 1e-9;
}

ForwardChain forward_chain(const ClosedLoopSpec& spec, double psd_tol) {
    check_shapes(spec);
    const int n = spec.dim();
    const VarLayout lx({{"x", n}});
    const Ellipsoid ep(lx, spec.p, "EP");

    QuadSet r = lift_output(from_ellipsoid(ep), spec.c, "y", "R");
    const SymMatrix t = spec.sector.matrix(n + 2, n, n + 1);
    LemmaResult lemma = combine_lemma_checked(r.gram, t, -spec.lambda, psd_tol);

    QuadSet v(r.layout.with_appended("yc", 1), lemma.v, "V");
    QuadSet w = release(v, "y", "W");
    QuadSet z = affine_image(w, hstack(spec.a, spec.b), lx, "Z");

    ForwardChain out{std::move(r), std::move(v), std::move(w), std::move(z),
                     lemma.min_eig, lemma.valid};
    return out;
}

EquivalenceReport verify_equivalence(const ClosedLoopSpec& spec, double ident_tol,
                                     double psd_tol, double contain_tol) {
    check_shapes(spec);
    const int n = spec.dim();
    const double lam = spec.lambda;
    EquivalenceReport rep{};
    rep.lambda = lam;

    const Ellipsoid ep(VarLayout({{"x", n}}), spec.p, "EP");
    const Matrix ab = hstack(spec.a, spec.b);

    ForwardChain chain = forward_chain(spec, psd_tol);

    // (a) the released W equals (diag(P,0) + lambda * sector output form)^-1.
    SymMatrix w_inv_closed = spec.sector.output_form(spec.c).scaled(lam);
    {
        Matrix padded(n + 1, n + 1);
        padded.set_block(0, 0, spec.p.to_matrix());
        w_inv_closed = w_inv_closed + SymMatrix(padded);
    }
    SymMatrix w_closed(1);
    try {
        w_closed = inverse(w_inv_closed);
    } catch (const SingularMatrixError& e) {
        throw EquivalenceError("(a) closed-form W", e.what());
    }
    rep.w_closed_form_err = (chain.w.gram - w_closed).frobenius_norm();
    rep.w_closed_form = rep.w_closed_form_err <= ident_tol;

    // (b) W = L diag(Ptilde^-1, 1/lambda) L^T with Ptilde = P - 0.16 lambda C^T C.
    const double cross = (spec.sector.alpha + spec.sector.beta) / 2.0;  // 0.6 for (0.2, 1)
    const SymMatrix ptilde =
        spec.p - SymMatrix(spec.c.transposed() * spec.c)
                     .scaled(lam * (cross * cross - spec.sector.alpha * spec.sector.beta));
    rep.ptilde_min_eig = min_eigenvalue(ptilde);
    Matrix lmat = Matrix::identity(n + 1);
    lmat.set_block(n, 0, spec.c.scaled(cross));
    SymMatrix w_fact(1);
    try {
        Matrix d(n + 1, n + 1);
        d.set_block(0, 0, inverse(ptilde).to_matrix());
        d(n, n) = 1.0 / lam;
        w_fact = congruence(lmat, SymMatrix(d));
    } catch (const SingularMatrixError& e) {
        throw EquivalenceError("(b) W factorization", e.what());
    }
    rep.w_factorization_err = (chain.w.gram - w_fact).frobenius_norm();
    rep.w_factorization = rep.w_factorization_err <= ident_tol;

    // (c) forward containment iff LMI feasibility, at perturbed multipliers.
    // An invalid chain (V not PSD) certifies nothing, so the forward side is
    // false by invalidity.
    rep.iff_agreement = true;
    for (double factor : {0.5, 1.0, 2.0}) {
        ClosedLoopSpec s = spec;
        s.lambda = lam * factor;
        EquivalenceReport::IffSample sample{};
        sample.lambda = s.lambda;
        ForwardChain fc = forward_chain(s, psd_tol);
        sample.chain_valid = fc.valid;
        sample.contain_margin = containment_margin(ep, fc.z);
        sample.forward_ok = fc.valid && sample.contain_margin >= -contain_tol;
        sample.lmi_max_eig = sproc_max_eig(s);
        sample.lmi_ok = sample.lmi_max_eig <= psd_tol;
        rep.iff_agreement = rep.iff_agreement && sample.agree();
        rep.iff.push_back(sample);
    }

    // (d) two Schur-complement steps plus the L^-1 congruence reproduce the
    // invariance difference and the LMI matrix.
    try {
        const Matrix abl = ab * lmat;
        Matrix h(2 * n + 1, 2 * n + 1);
        const SymMatrix pinv = inverse(spec.p);
        h.set_block(0, 0, pinv.to_matrix().scaled(-1.0));
        h.set_block(0, n, abl);
        h.set_block(n, 0, abl.transposed());
        Matrix dinv(n + 1, n + 1);
        dinv.set_block(0, 0, ptilde.to_matrix());
        dinv(n, n) = lam;
        h.set_block(n, n, dinv.scaled(-1.0));
        const SymMatrix hsym(h);

        std::vector<int> tail, head;
        for (int i = 0; i < n + 1; ++i) tail.push_back(n + i);
        for (int i = 0; i < n; ++i) head.push_back(i);

        const SymMatrix step1 = schur_complement(hsym, tail);  // should be Z - P^-1
        rep.schur_err_forward = (step1 - (chain.z.gram - pinv)).frobenius_norm();

        const SymMatrix step2 = schur_complement(hsym, head);
        Matrix linv_t = Matrix::identity(n + 1);
        linv_t.set_block(0, n, spec.c.transposed().scaled(-cross));
        const SymMatrix recovered = congruence(linv_t, step2);
        rep.schur_err_lmi = (recovered - sproc_matrix(spec)).frobenius_norm();
    } catch (const SingularMatrixError& e) {
        throw EquivalenceError("(d) Schur chain", e.what());
    }
    rep.schur_chain =
        rep.schur_err_forward <= ident_tol && rep.schur_err_lmi <= ident_tol;

    return rep;
}

}  // namespace loopcert
