#pragma once

#include <string>
#include <vector>

#include "loopcert/quadset.hpp"
#include "loopcert/symmat.hpp"

namespace loopcert {

/// Raised when the quadratic-constraint combination lemma does not apply
/// (the combined matrix V exists but is not PSD within tolerance).
struct LemmaError : std::runtime_error {
    double min_eig;
    explicit LemmaError(double e)
        : std::runtime_error("combination lemma inapplicable: V min eigenvalue " +
                             std::to_string(e)),
          min_eig(e) {}
};

/// Raised by verify_equivalence with the algebraic step that failed.
struct EquivalenceError : std::runtime_error {
    std::string step;
    EquivalenceError(std::string s, const std::string& what)
        : std::runtime_error("equivalence step " + s + ": " + what), step(std::move(s)) {}
};

/// Sector constraint (y_c - alpha*y)(y_c - beta*y) <= 0 on a scalar
/// saturation, 0 <= alpha <= beta.
struct SectorBound {
    double alpha = 0.2;
    double beta = 1.0;

    /// dim x dim matrix, zero except [[alpha*beta, -(alpha+beta)/2],
    /// [-(alpha+beta)/2, 1]] at scalar coordinates (y_offset, yc_offset).
    SymMatrix matrix(int dim, int y_offset, int yc_offset) const;

    /// (n+1)-dim form over (x, y_c) with y = C x:
    /// [[alpha*beta C^T C, -(alpha+beta)/2 C^T], [-(alpha+beta)/2 C, 1]].
    SymMatrix output_form(const Matrix& c) const;
};

/// Closed-loop data x_{k+1} = A x_k + B SAT(C x_k) with candidate Lyapunov
/// matrix P and S-procedure multiplier lambda.
struct ClosedLoopSpec {
    Matrix a;       // n x n
    Matrix b;       // n x 1
    Matrix c;       // 1 x n
    SymMatrix p;    // n
    double lambda = 0.0;
    SectorBound sector;
    double sat_limit = 1.0;

    int dim() const { return p.dim(); }
};

/// [A^T; B^T] P [A B] - [I; 0] P [I 0] - lambda * sector output form.
SymMatrix sproc_matrix(const ClosedLoopSpec& spec);

double sproc_max_eig(const ClosedLoopSpec& spec);

/// True iff sproc_matrix(spec) is NSD within tol.
bool check_sproc(const ClosedLoopSpec& spec, double tol);

struct LemmaResult {
    SymMatrix v;
    double min_eig;
    bool valid;  // V exists (pencil invertible) and is PSD within tolerance
};

/// V = (diag(I,0) - mu diag(U,I) T)^-1 diag(U,I), symmetrized. The block
/// split is U.dim vs T.dim - U.dim. Throws SingularMatrixError when the
/// pencil is singular; the PSD validity is reported, not thrown.
LemmaResult combine_lemma_checked(const SymMatrix& u, const SymMatrix& t, double mu,
                                  double psd_tol);

/// Same, but throws LemmaError when V fails the PSD validity check.
SymMatrix combine_lemma(const SymMatrix& u, const SymMatrix& t, double mu,
                        double psd_tol = 1e-9);

/// max |C x| over the ellipsoid, i.e. sqrt(C P^-1 C^T).
double sector_reach(const Ellipsoid& e, const Matrix& c);

/// True iff the sector (alpha, beta) is a sound bound for the +-sat_limit
/// saturation on all of E: sqrt(C P^-1 C^T) <= sat_limit / alpha.
bool sector_valid_on(const Ellipsoid& e, const Matrix& c, const SectorBound& sector,
                     double sat_limit);

/// The specification-level forward chain over (x, y, y_c): lift, sector
/// lemma, release of y, then image under [A B].
struct ForwardChain {
    QuadSet r;   // (x, y)
    QuadSet v;   // (x, y, y_c)
    QuadSet w;   // (x, y_c)
    QuadSet z;   // (x)
    double lemma_min_eig;
    bool valid;  // lemma applicability
};
ForwardChain forward_chain(const ClosedLoopSpec& spec, double psd_tol);

struct EquivalenceReport {
    struct IffSample {
        double lambda;
        bool forward_ok;     // chain valid and Z <= P^-1 within tolerance
        bool chain_valid;
        bool lmi_ok;
        double contain_margin;
        double lmi_max_eig;
        bool agree() const { return forward_ok == lmi_ok; }
    };

    double lambda;
    bool w_closed_form;        // (a) W == (diag(P,0) + lambda * sector form)^-1
    double w_closed_form_err;
    bool w_factorization;      // (b) W == L diag(Ptilde^-1, 1/lambda) L^T
    double w_factorization_err;
    double ptilde_min_eig;
    std::vector<IffSample> iff;  // (c) at lambda * {0.5, 1, 2}
    bool iff_agreement;
    bool schur_chain;          // (d) two Schur steps + congruence hit the LMI matrix
    double schur_err_forward;
    double schur_err_lmi;

    bool all_pass() const {
        return w_closed_form && w_factorization && iff_agreement && schur_chain;
    }
};

/// The closed-form identities and the forward/LMI agreement. Identity
/// tolerance ident_tol is Frobenius; psd_tol/contain_tol are the decision
/// tolerances for the two sides of (c).
EquivalenceReport verify_equivalence(const ClosedLoopSpec& spec, double ident_tol = 1e-8,
                                     double psd_tol = 1e-9, double contain_tol = 1e-8);

}  // namespace loopcert
