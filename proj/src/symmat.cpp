#include "loopcert/symmat.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace loopcert {

Matrix::Matrix(int rows, int cols) : rows_(rows), cols_(cols) {
    if (rows < 0 || cols < 0) throw DimensionError("negative matrix dimension");
    a_.assign(static_cast<std::size_t>(rows) * cols, 0.0);
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> init) {
    rows_ = static_cast<int>(init.size());
    cols_ = rows_ > 0 ? static_cast<int>(init.begin()->size()) : 0;
    a_.reserve(static_cast<std::size_t>(rows_) * cols_);
    for (const auto& r : init) {
        if (static_cast<int>(r.size()) != cols_) throw DimensionError("ragged matrix literal");
        a_.insert(a_.end(), r.begin(), r.end());
    }
}

Matrix Matrix::identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::zero(int rows, int cols) { return Matrix(rows, cols); }

Matrix Matrix::column(const std::vector<double>& v) {
    Matrix m(static_cast<int>(v.size()), 1);
    for (int i = 0; i < m.rows(); ++i) m(i, 0) = v[i];
    return m;
}

Matrix Matrix::row(const std::vector<double>& v) {
    Matrix m(1, static_cast<int>(v.size()));
    for (int j = 0; j < m.cols(); ++j) m(0, j) = v[j];
    return m;
}

Matrix Matrix::operator*(const Matrix& rhs) const {
    if (cols_ != rhs.rows_) throw DimensionError("matrix product shape mismatch");
    Matrix out(rows_, rhs.cols_);
    for (int i = 0; i < rows_; ++i) {
        for (int k = 0; k < cols_; ++k) {
            const double aik = (*this)(i, k);
            if (aik == 0.0) continue;
            for (int j = 0; j < rhs.cols_; ++j) out(i, j) += aik * rhs(k, j);
        }
    }
    return out;
}

Matrix Matrix::operator+(const Matrix& rhs) const {
    if (!same_shape(rhs)) throw DimensionError("matrix sum shape mismatch");
    Matrix out(rows_, cols_);
    for (std::size_t k = 0; k < a_.size(); ++k) out.a_[k] = a_[k] + rhs.a_[k];
    return out;
}

Matrix Matrix::operator-(const Matrix& rhs) const {
    if (!same_shape(rhs)) throw DimensionError("matrix difference shape mismatch");
    Matrix out(rows_, cols_);
    for (std::size_t k = 0; k < a_.size(); ++k) out.a_[k] = a_[k] - rhs.a_[k];
    return out;
}

Matrix Matrix::scaled(double s) const {
    Matrix out(rows_, cols_);
    for (std::size_t k = 0; k < a_.size(); ++k) out.a_[k] = s * a_[k];
    return out;
}

Matrix Matrix::transposed() const {
    Matrix out(cols_, rows_);
    for (int i = 0; i < rows_; ++i)
        for (int j = 0; j < cols_; ++j) out(j, i) = (*this)(i, j);
    return out;
}

std::vector<double> Matrix::apply(const std::vector<double>& x) const {
    if (static_cast<int>(x.size()) != cols_) throw DimensionError("matrix-vector shape mismatch");
    std::vector<double> y(rows_, 0.0);
    for (int i = 0; i < rows_; ++i) {
        double acc = 0.0;
        for (int j = 0; j < cols_; ++j) acc += (*this)(i, j) * x[j];
        y[i] = acc;
    }
    return y;
}

void Matrix::set_block(int i, int j, const Matrix& m) {
    if (i + m.rows() > rows_ || j + m.cols() > cols_) throw DimensionError("block out of range");
    for (int r = 0; r < m.rows(); ++r)
        for (int c = 0; c < m.cols(); ++c) (*this)(i + r, j + c) = m(r, c);
}

Matrix Matrix::block(int i, int j, int rows, int cols) const {
    if (i + rows > rows_ || j + cols > cols_) throw DimensionError("block out of range");
    Matrix out(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) out(r, c) = (*this)(i + r, j + c);
    return out;
}

double Matrix::max_abs() const {
    double m = 0.0;
    for (double v : a_) m = std::max(m, std::fabs(v));
    return m;
}

double Matrix::frobenius_norm() const {
    double s = 0.0;
    for (double v : a_) s += v * v;
    return std::sqrt(s);
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) throw DimensionError("max_abs_diff shape mismatch");
    double m = 0.0;
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j) m = std::max(m, std::fabs(a(i, j) - b(i, j)));
    return m;
}

SymMatrix::SymMatrix(int dim) : dim_(dim) {
    if (dim < 1) throw DimensionError("SymMatrix dim must be >= 1");
    a_.assign(static_cast<std::size_t>(dim) * dim, 0.0);
}

SymMatrix::SymMatrix(const Matrix& m) : dim_(m.rows()) {
    if (m.rows() != m.cols()) throw DimensionError("SymMatrix requires a square matrix");
    if (dim_ < 1) throw DimensionError("SymMatrix dim must be >= 1");
    a_.assign(static_cast<std::size_t>(dim_) * dim_, 0.0);
    // (M + M^T)/2, written to both triangles from the same computed value.
    for (int i = 0; i < dim_; ++i) {
        for (int j = i; j < dim_; ++j) {
            const double v = 0.5 * (m(i, j) + m(j, i));
            a_[static_cast<std::size_t>(i) * dim_ + j] = v;
            a_[static_cast<std::size_t>(j) * dim_ + i] = v;
        }
    }
}

SymMatrix::SymMatrix(std::initializer_list<std::initializer_list<double>> init)
    : SymMatrix(Matrix(init)) {}

SymMatrix SymMatrix::identity(int n) {
    SymMatrix s(n);
    for (int i = 0; i < n; ++i) s.set(i, i, 1.0);
    return s;
}

SymMatrix SymMatrix::diagonal(const std::vector<double>& d) {
    SymMatrix s(static_cast<int>(d.size()));
    for (int i = 0; i < s.dim(); ++i) s.set(i, i, d[i]);
    return s;
}

void SymMatrix::set(int i, int j, double v) {
    a_[static_cast<std::size_t>(i) * dim_ + j] = v;
    a_[static_cast<std::size_t>(j) * dim_ + i] = v;
}

Matrix SymMatrix::to_matrix() const {
    Matrix m(dim_, dim_);
    for (int i = 0; i < dim_; ++i)
        for (int j = 0; j < dim_; ++j) m(i, j) = (*this)(i, j);
    return m;
}

SymMatrix SymMatrix::operator+(const SymMatrix& rhs) const {
    if (dim_ != rhs.dim_) throw DimensionError("SymMatrix sum shape mismatch");
    SymMatrix out(dim_);
    for (std::size_t k = 0; k < a_.size(); ++k) out.a_[k] = a_[k] + rhs.a_[k];
    return out;
}

SymMatrix SymMatrix::operator-(const SymMatrix& rhs) const {
    if (dim_ != rhs.dim_) throw DimensionError("SymMatrix difference shape mismatch");
    SymMatrix out(dim_);
    for (std::size_t k = 0; k < a_.size(); ++k) out.a_[k] = a_[k] - rhs.a_[k];
    return out;
}

SymMatrix SymMatrix::scaled(double s) const {
    SymMatrix out(dim_);
    for (std::size_t k = 0; k < a_.size(); ++k) out.a_[k] = s * a_[k];
    return out;
}

double SymMatrix::quadratic_form(const std::vector<double>& x) const {
    if (static_cast<int>(x.size()) != dim_) throw DimensionError("quadratic form shape mismatch");
    double acc = 0.0;
    for (int i = 0; i < dim_; ++i) {
        double row = 0.0;
        for (int j = 0; j < dim_; ++j) row += (*this)(i, j) * x[j];
        acc += x[i] * row;
    }
    return acc;
}

double SymMatrix::max_abs() const {
    double m = 0.0;
    for (double v : a_) m = std::max(m, std::fabs(v));
    return m;
}

double SymMatrix::frobenius_norm() const {
    double s = 0.0;
    for (double v : a_) s += v * v;
    return std::sqrt(s);
}

SymMatrix congruence(const Matrix& m, const SymMatrix& s) {
    if (m.cols() != s.dim()) throw DimensionError("congruence shape mismatch");
    const Matrix ms = m * s.to_matrix();
    const int n = m.rows();
    Matrix out(n, n);
    // Compute the upper triangle of (M S) M^T and mirror it.
    for (int i = 0; i < n; ++i) {
        for (int j = i; j < n; ++j) {
            double acc = 0.0;
            for (int k = 0; k < m.cols(); ++k) acc += ms(i, k) * m(j, k);
            out(i, j) = acc;
            out(j, i) = acc;
        }
    }
    return SymMatrix(out);
}

EigenDecomposition sym_eigen(const SymMatrix& s) {
    const int n = s.dim();
    Matrix a = s.to_matrix();
    Matrix v = Matrix::identity(n);
    const double scale = std::max(1.0, s.max_abs());

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        if (std::sqrt(off) <= 1e-15 * scale) break;

        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (std::fabs(apq) <= 1e-18 * scale) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double sn = t * c;
                for (int k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - sn * akq;
                    a(k, q) = sn * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - sn * aqk;
                    a(q, k) = sn * apk + c * aqk;
                }
                for (int k = 0; k < n; ++k) {
                    const double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp - sn * vkq;
                    v(k, q) = sn * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int i, int j) { return a(i, i) < a(j, j); });

    EigenDecomposition out;
    out.values.resize(n);
    out.vectors = Matrix(n, n);
    for (int j = 0; j < n; ++j) {
        out.values[j] = a(order[j], order[j]);
        for (int i = 0; i < n; ++i) out.vectors(i, j) = v(i, order[j]);
    }
    return out;
}

std::vector<double> sym_eigenvalues(const SymMatrix& s) { return sym_eigen(s).values; }

double min_eigenvalue(const SymMatrix& s) { return sym_eigenvalues(s).front(); }
double max_eigenvalue(const SymMatrix& s) { return sym_eigenvalues(s).back(); }

bool is_psd(const SymMatrix& s, double tol) { return min_eigenvalue(s) >= -tol; }
bool is_nsd(const SymMatrix& s, double tol) { return is_psd(s.negated(), tol); }

SymMatrix inverse(const SymMatrix& s) {
    const int n = s.dim();
    Matrix aug(n, 2 * n);
    aug.set_block(0, 0, s.to_matrix());
    aug.set_block(0, n, Matrix::identity(n));
    const double pivot_tol = 1e-12 * std::max(1.0, s.max_abs());

    for (int col = 0; col < n; ++col) {
        int pivot = col;
        double best = std::fabs(aug(col, col));
        for (int r = col + 1; r < n; ++r) {
            const double v = std::fabs(aug(r, col));
            if (v > best) { best = v; pivot = r; }
        }
        if (best <= pivot_tol) throw SingularMatrixError(col);
        if (pivot != col)
            for (int j = 0; j < 2 * n; ++j) std::swap(aug(col, j), aug(pivot, j));

        const double scale = aug(col, col);
        for (int j = 0; j < 2 * n; ++j) aug(col, j) /= scale;
        for (int r = 0; r < n; ++r) {
            if (r == col) continue;
            const double f = aug(r, col);
            if (f == 0.0) continue;
            for (int j = 0; j < 2 * n; ++j) aug(r, j) -= f * aug(col, j);
        }
    }
    return SymMatrix(aug.block(0, n, n, n));
}

std::optional<Matrix> cholesky(const SymMatrix& s) {
    const int n = s.dim();
    Matrix l(n, n);
    for (int j = 0; j < n; ++j) {
        double d = s(j, j);
        for (int k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
        if (d <= 0.0) return std::nullopt;
        l(j, j) = std::sqrt(d);
        for (int i = j + 1; i < n; ++i) {
            double v = s(i, j);
            for (int k = 0; k < j; ++k) v -= l(i, k) * l(j, k);
            l(i, j) = v / l(j, j);
        }
    }
    return l;
}

SymMatrix schur_complement(const SymMatrix& s, const std::vector<int>& eliminate) {
    const int n = s.dim();
    std::vector<bool> drop(n, false);
    for (int idx : eliminate) {
        if (idx < 0 || idx >= n) throw DimensionError("schur_complement index out of range");
        drop[idx] = true;
    }
    std::vector<int> keep;
    for (int i = 0; i < n; ++i)
        if (!drop[i]) keep.push_back(i);
    const int nk = static_cast<int>(keep.size());
    const int ne = static_cast<int>(eliminate.size());
    if (nk == 0) throw DimensionError("schur_complement eliminates every index");
    if (ne == 0) return s;

    Matrix s11(nk, nk), s12(nk, ne), s22(ne, ne);
    for (int i = 0; i < nk; ++i)
        for (int j = 0; j < nk; ++j) s11(i, j) = s(keep[i], keep[j]);
    for (int i = 0; i < nk; ++i)
        for (int j = 0; j < ne; ++j) s12(i, j) = s(keep[i], eliminate[j]);
    for (int i = 0; i < ne; ++i)
        for (int j = 0; j < ne; ++j) s22(i, j) = s(eliminate[i], eliminate[j]);

    const SymMatrix s22_inv = inverse(SymMatrix(s22));
    const Matrix correction = s12 * s22_inv.to_matrix() * s12.transposed();
    return SymMatrix(s11 - correction);
}

double max_abs_asym(const Matrix& a) {
    if (a.rows() != a.cols()) throw DimensionError("max_abs_asym requires a square array");
    double m = 0.0;
    for (int i = 0; i < a.rows(); ++i)
        for (int j = i + 1; j < a.cols(); ++j) m = std::max(m, std::fabs(a(i, j) - a(j, i)));
    return m;
}

}  // namespace loopcert
