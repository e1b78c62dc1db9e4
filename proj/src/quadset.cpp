#include "loopcert/quadset.hpp"

#include <algorithm>
#include <cmath>

namespace loopcert {

VarLayout::VarLayout(std::vector<Entry> vars) : vars_(std::move(vars)) {
    for (std::size_t i = 0; i < vars_.size(); ++i) {
        if (vars_[i].dim < 1) throw DimensionError("variable dimension must be >= 1");
        for (std::size_t j = 0; j < i; ++j)
            if (vars_[j].name == vars_[i].name)
                throw DimensionError("duplicate variable in layout: " + vars_[i].name);
        total_ += vars_[i].dim;
    }
}

bool VarLayout::has(const std::string& name) const {
    return std::any_of(vars_.begin(), vars_.end(),
                       [&](const Entry& e) { return e.name == name; });
}

int VarLayout::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < vars_.size(); ++i)
        if (vars_[i].name == name) return static_cast<int>(i);
    throw DimensionError("unknown variable in layout: " + name);
}

int VarLayout::offset_of(const std::string& name) const {
    int off = 0;
    for (const Entry& e : vars_) {
        if (e.name == name) return off;
        off += e.dim;
    }
    throw DimensionError("unknown variable in layout: " + name);
}

int VarLayout::dim_of(const std::string& name) const { return vars_[index_of(name)].dim; }

VarLayout VarLayout::with_appended(const std::string& name, int dim) const {
    std::vector<Entry> v = vars_;
    v.push_back({name, dim});
    return VarLayout(std::move(v));
}

VarLayout VarLayout::without(const std::string& name) const {
    std::vector<Entry> v;
    bool found = false;
    for (const Entry& e : vars_) {
        if (e.name == name) { found = true; continue; }
        v.push_back(e);
    }
    if (!found) throw DimensionError("unknown variable in layout: " + name);
    return VarLayout(std::move(v));
}

bool VarLayout::operator==(const VarLayout& other) const {
    if (vars_.size() != other.vars_.size()) return false;
    for (std::size_t i = 0; i < vars_.size(); ++i)
        if (vars_[i].name != other.vars_[i].name || vars_[i].dim != other.vars_[i].dim)
            return false;
    return true;
}

std::string VarLayout::tuple_string() const {
    std::string s = "(";
    for (std::size_t i = 0; i < vars_.size(); ++i) {
        if (i) s += ", ";
        s += vars_[i].name;
    }
    s += ")";
    return s;
}

QuadSet::QuadSet(VarLayout l, SymMatrix g, std::string lbl)
    : layout(std::move(l)), gram(std::move(g)), label(std::move(lbl)) {
    if (gram.dim() != layout.total_dim())
        throw DimensionError("QuadSet Gram dimension does not match layout");
}

Ellipsoid::Ellipsoid(VarLayout l, SymMatrix s, std::string lbl)
    : layout(std::move(l)), shape(std::move(s)), label(std::move(lbl)) {
    if (shape.dim() != layout.total_dim())
        throw DimensionError("Ellipsoid shape dimension does not match layout");
}

QuadSet from_ellipsoid(const Ellipsoid& e) {
    return QuadSet(e.layout, inverse(e.shape), e.label.empty() ? "G" : e.label);
}

QuadSet affine_image(const QuadSet& g, const Matrix& m, const VarLayout& out_layout,
                     const std::string& label) {
    if (m.cols() != g.layout.total_dim())
        throw DimensionError("affine_image: map columns do not match source layout");
    if (m.rows() != out_layout.total_dim())
        throw DimensionError("affine_image: map rows do not match target layout");
    return QuadSet(out_layout, congruence(m, g.gram), label.empty() ? g.label : label);
}

QuadSet lift_output(const QuadSet& g, const Matrix& c, const std::string& new_var,
                    const std::string& label) {
    const int n = g.layout.total_dim();
    if (c.cols() != n) throw DimensionError("lift_output: coefficient columns mismatch");
    if (c.rows() < 1) throw DimensionError("lift_output: empty output");
    Matrix stacked(n + c.rows(), n);
    stacked.set_block(0, 0, Matrix::identity(n));
    stacked.set_block(n, 0, c);
    return affine_image(g, stacked, g.layout.with_appended(new_var, c.rows()), label);
}

QuadSet release(const QuadSet& g, const std::string& var, const std::string& label) {
    const int off = g.layout.offset_of(var);
    const int d = g.layout.dim_of(var);
    const VarLayout out = g.layout.without(var);
    Matrix selector(out.total_dim(), g.layout.total_dim());
    int row = 0;
    for (int col = 0; col < g.layout.total_dim(); ++col) {
        if (col >= off && col < off + d) continue;
        selector(row++, col) = 1.0;
    }
    return affine_image(g, selector, out, label.empty() ? g.label : label);
}

double containment_margin(const Ellipsoid& outer, const QuadSet& inner) {
    if (!(outer.layout == inner.layout))
        throw DimensionError("containment: layouts differ");
    return min_eigenvalue(inverse(outer.shape) - inner.gram);
}

bool contains(const Ellipsoid& outer, const QuadSet& inner, double tol) {
    return containment_margin(outer, inner) >= -tol;
}

static SymMatrix bordered(const QuadSet& g, const std::vector<double>& x) {
    const int n = g.gram.dim();
    if (static_cast<int>(x.size()) != n) throw DimensionError("member: point dimension mismatch");
    Matrix b(n + 1, n + 1);
    b(0, 0) = 1.0;
    for (int i = 0; i < n; ++i) {
        b(0, i + 1) = x[i];
        b(i + 1, 0) = x[i];
        for (int j = 0; j < n; ++j) b(i + 1, j + 1) = g.gram(i, j);
    }
    return SymMatrix(b);
}

bool member(const QuadSet& g, const std::vector<double>& x, double tol) {
    return is_psd(bordered(g, x), tol);
}

double member_margin(const QuadSet& g, const std::vector<double>& x) {
    return min_eigenvalue(bordered(g, x));
}

bool ellipsoid_member(const Ellipsoid& e, const std::vector<double>& x, double tol) {
    return e.shape.quadratic_form(x) <= 1.0 + tol;
}

std::vector<double> sample_ellipsoid(const SymMatrix& shape, Rng& rng, double radius) {
    const auto l = cholesky(shape);
    if (!l) throw SingularMatrixError(0);
    const int n = shape.dim();
    std::vector<double> u = rng.unit_vector(n);
    for (double& v : u) v *= radius;
    // Solve L^T x = u by back substitution: then x^T S x = ||u||^2.
    std::vector<double> x(n, 0.0);
    for (int i = n - 1; i >= 0; --i) {
        double acc = u[i];
        for (int j = i + 1; j < n; ++j) acc -= (*l)(j, i) * x[j];
        x[i] = acc / (*l)(i, i);
    }
    return x;
}

}  // namespace loopcert
