#pragma once

#include <cstddef>
#include <initializer_list>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace loopcert {

/// Shape mismatch between operands.
struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Raised when a (near-)singular matrix is inverted or eliminated.
/// pivot_index is the column at which elimination broke down.
struct SingularMatrixError : std::runtime_error {
    int pivot_index;
    explicit SingularMatrixError(int index)
        : std::runtime_error("singular matrix at pivot " + std::to_string(index)),
          pivot_index(index) {}
};

/// Dense row-major matrix of doubles with value semantics.
class Matrix {
public:
    Matrix() = default;
    Matrix(int rows, int cols);
    Matrix(std::initializer_list<std::initializer_list<double>> init);

    static Matrix identity(int n);
    static Matrix zero(int rows, int cols);
    static Matrix column(const std::vector<double>& v);
    static Matrix row(const std::vector<double>& v);

    int rows() const { return rows_; }
    int cols() const { return cols_; }

    double& operator()(int i, int j) { return a_[static_cast<std::size_t>(i) * cols_ + j]; }
    double operator()(int i, int j) const { return a_[static_cast<std::size_t>(i) * cols_ + j]; }

    Matrix operator*(const Matrix& rhs) const;
    Matrix operator+(const Matrix& rhs) const;
    Matrix operator-(const Matrix& rhs) const;
    Matrix scaled(double s) const;
    Matrix transposed() const;

    std::vector<double> apply(const std::vector<double>& x) const;

    void set_block(int i, int j, const Matrix& m);
    Matrix block(int i, int j, int rows, int cols) const;

    double max_abs() const;
    double frobenius_norm() const;

    bool same_shape(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> a_;
};

double max_abs_diff(const Matrix& a, const Matrix& b);

/// Dense symmetric matrix. Construction symmetrizes via (M + M^T)/2, so
/// entries(i,j) == entries(j,i) holds exactly; dim >= 1.
class SymMatrix {
public:
    explicit SymMatrix(int dim);
    explicit SymMatrix(const Matrix& m);
    SymMatrix(std::initializer_list<std::initializer_list<double>> init);

    static SymMatrix identity(int n);
    static SymMatrix diagonal(const std::vector<double>& d);

    int dim() const { return dim_; }

    double operator()(int i, int j) const { return a_[static_cast<std::size_t>(i) * dim_ + j]; }
    /// Sets both (i,j) and (j,i) to the same value.
    void set(int i, int j, double v);

    Matrix to_matrix() const;
    SymMatrix operator+(const SymMatrix& rhs) const;
    SymMatrix operator-(const SymMatrix& rhs) const;
    SymMatrix scaled(double s) const;
    SymMatrix negated() const { return scaled(-1.0); }

    double quadratic_form(const std::vector<double>& x) const;

    double max_abs() const;
    double frobenius_norm() const;

private:
    int dim_ = 0;
    std::vector<double> a_;
};

/// M * S * M^T; result has dim M.rows().
SymMatrix congruence(const Matrix& m, const SymMatrix& s);

/// Eigenvalues by cyclic Jacobi, ascending. Exact symmetry of the input keeps
/// the iteration well behaved; dims here never exceed ~10.
std::vector<double> sym_eigenvalues(const SymMatrix& s);

struct EigenDecomposition {
    std::vector<double> values;  // ascending
    Matrix vectors;              // columns are eigenvectors, matching values
};
EigenDecomposition sym_eigen(const SymMatrix& s);

double min_eigenvalue(const SymMatrix& s);
double max_eigenvalue(const SymMatrix& s);

/// min eigenvalue >= -tol, decided by the Jacobi eigenvalue routine.
bool is_psd(const SymMatrix& s, double tol);
bool is_nsd(const SymMatrix& s, double tol);

/// Gauss-Jordan with partial pivoting, result symmetrized.
/// Throws SingularMatrixError with the failing pivot index.
SymMatrix inverse(const SymMatrix& s);

/// Lower-triangular L with S = L L^T, or nullopt if S is not positive
/// definite (nonpositive pivot encountered).
std::optional<Matrix> cholesky(const SymMatrix& s);

/// S11 - S12 S22^-1 S21 where S22 is the principal block indexed by
/// `eliminate` (0-based). Throws SingularMatrixError if that block is
/// singular.
SymMatrix schur_complement(const SymMatrix& s, const std::vector<int>& eliminate);

/// max |a(i,j) - a(j,i)| of a raw square array (symmetrization audit).
double max_abs_asym(const Matrix& a);

}  // namespace loopcert
