#pragma once

#include <string>
#include <vector>

#include "loopcert/rng.hpp"
#include "loopcert/symmat.hpp"

namespace loopcert {

/// Ordered tuple of named vector variables, e.g. (xc:2, xp:2, y:1).
class VarLayout {
public:
    struct Entry {
        std::string name;
        int dim;
    };

    VarLayout() = default;
    explicit VarLayout(std::vector<Entry> vars);

    const std::vector<Entry>& vars() const { return vars_; }
    int total_dim() const { return total_; }
    bool has(const std::string& name) const;
    int index_of(const std::string& name) const;   // position in the tuple
    int offset_of(const std::string& name) const;  // first coordinate
    int dim_of(const std::string& name) const;

    VarLayout with_appended(const std::string& name, int dim) const;
    VarLayout without(const std::string& name) const;

    bool operator==(const VarLayout& other) const;

    /// "(xc, xp, y)"
    std::string tuple_string() const;

private:
    std::vector<Entry> vars_;
    int total_ = 0;
};

/// Quadratic invariant in Gram form: G_R = { x : [[1, x^T],[x, R]] >= 0 }.
/// R is PSD within tolerance for sets of reachable values; rank-deficient R
/// is permitted (membership and containment never invert R).
struct QuadSet {
    VarLayout layout;
    SymMatrix gram;
    std::string label;  // provenance, e.g. "R", "V", "W", "X", "Y", "Z"

    QuadSet(VarLayout l, SymMatrix g, std::string lbl);
};

/// Ellipsoid { x : x^T shape x <= 1 }; shape PD within tolerance.
struct Ellipsoid {
    VarLayout layout;
    SymMatrix shape;
    std::string label;

    Ellipsoid(VarLayout l, SymMatrix s, std::string lbl);
};

/// Gram form of an ellipsoid: R = shape^-1 over the same layout.
QuadSet from_ellipsoid(const Ellipsoid& e);

/// Simultaneous linear assignment: R' = M R M^T over out_layout.
QuadSet affine_image(const QuadSet& g, const Matrix& m, const VarLayout& out_layout,
                     const std::string& label = "");

/// Appends new_var = C x; R' = [[R, R C^T],[C R, C R C^T]].
QuadSet lift_output(const QuadSet& g, const Matrix& c, const std::string& new_var,
                    const std::string& label = "");

/// Deletes var's rows/columns of the Gram matrix (projection onto the rest).
QuadSet release(const QuadSet& g, const std::string& var, const std::string& label = "");

/// Sufficient containment test: shape^-1 - R >= -tol*I (exact when R > 0,
/// conservative for rank-deficient R).
bool contains(const Ellipsoid& outer, const QuadSet& inner, double tol);

/// min eigenvalue of shape^-1 - R; containment holds iff >= -tol.
double containment_margin(const Ellipsoid& outer, const QuadSet& inner);

/// PSD test on the bordered matrix [[1, x^T],[x, R]].
bool member(const QuadSet& g, const std::vector<double>& x, double tol);

/// min eigenvalue of the bordered matrix.
double member_margin(const QuadSet& g, const std::vector<double>& x);

bool ellipsoid_member(const Ellipsoid& e, const std::vector<double>& x, double tol);

/// Point of { x : x^T shape x <= 1 }; radius 1 samples the boundary.
std::vector<double> sample_ellipsoid(const SymMatrix& shape, Rng& rng, double radius);

}  // namespace loopcert
