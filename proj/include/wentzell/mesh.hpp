#pragma once

// Bulk/boundary grids and the discrete operators Δ, Δ_Γ, ∂_ν, ∇, ∇_Γ.
//
// Every nodal field is stored "stacked": interior (bulk) nodes first, then
// boundary nodes. The boundary slots of a stacked field are its trace, so
// y_Γ = y|_Γ holds by layout.
//
// All operators derive from two weighted edge-difference forms
//     a(u, w)   = Σ_e ω_e (Du)_e (Dw)_e          (bulk, edges touch boundary nodes)
//     a_Γ(u, w) = Σ_f ω_f (D_Γu)_f (D_Γw)_f      (boundary only)
// with lumped nodal weights m (dx) and σ (dσ). With K = DᵀΩD:
//     Δu   = -(Ku)|_interior / m,   ∂_ν u = (Ku)|_boundary / σ,   Δ_Γ u = -K_Γ u / σ,
// so the Green identity and the surface divergence formula hold exactly.

#include "wentzell/errors.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace wentzell {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double>;

enum class MeshMode { interval, disk };

inline std::string to_string(MeshMode mode) { return mode == MeshMode::interval ? "interval" : "disk"; }

struct MeshSpec {
    MeshMode mode = MeshMode::interval;
    double extent = 1.0;  ///< interval length or disk radius
    int interior = 8;     ///< interior nodes (interval) or radial rings (disk)
    int angular = 16;     ///< boundary/angular nodes, disk only

    void validate() const {
        detail::require(std::isfinite(extent) && extent > 0.0,
                        "mesh: extent (length/radius) must be > 0, got " + std::to_string(extent));
        detail::require(interior >= 2, "mesh: interior resolution must be >= 2, got " + std::to_string(interior));
        if (mode == MeshMode::disk)
            detail::require(angular >= 2, "mesh: angular resolution must be >= 2, got " + std::to_string(angular));
    }

    bool operator==(const MeshSpec&) const = default;
};

struct Point {
    double x = 0.0;
    double y = 0.0;
};

class MeshGeometry {
public:
    MeshMode mode = MeshMode::interval;
    double extent = 1.0;
    int rings = 0;    ///< disk: radial rings; interval: interior count
    int sectors = 0;  ///< disk: angular nodes; interval: 0

    std::vector<Point> interior_points;
    std::vector<Point> boundary_points;
    Vector dx;      ///< bulk weights, one per interior node
    Vector dsigma;  ///< surface weights, one per boundary node

    Eigen::Index interior_count() const { return dx.size(); }
    Eigen::Index boundary_count() const { return dsigma.size(); }
    Eigen::Index node_count() const { return dx.size() + dsigma.size(); }

    double bulk_measure() const { return dx.sum(); }
    double surface_measure() const { return dsigma.sum(); }

    /// Stacked lumped mass [dx; dσ].
    Vector stacked_mass() const {
        Vector m(node_count());
        m << dx, dsigma;
        return m;
    }

    double exact_bulk_measure() const {
        return mode == MeshMode::interval ? extent : std::numbers::pi * extent * extent;
    }
    double exact_surface_measure() const {
        return mode == MeshMode::interval ? 2.0 : 2.0 * std::numbers::pi * extent;
    }

    /// Stacked coordinates, interior then boundary.
    Point point(Eigen::Index node) const {
        return node < interior_count() ? interior_points[static_cast<std::size_t>(node)]
                                       : boundary_points[static_cast<std::size_t>(node - interior_count())];
    }
};

class DiscreteOperators {
public:
    DiscreteOperators() = default;

    DiscreteOperators(SparseMatrix grad, Vector edge_weight, SparseMatrix surface_grad, Vector surface_edge_weight,
                      Vector dx, Vector dsigma)
        : grad_(std::move(grad)),
          edge_weight_(std::move(edge_weight)),
          surface_grad_(std::move(surface_grad)),
          surface_edge_weight_(std::move(surface_edge_weight)),
          dx_(std::move(dx)),
          dsigma_(std::move(dsigma)) {
        stiffness_ = SparseMatrix(grad_.transpose() * edge_weight_.asDiagonal() * grad_);
        surface_stiffness_ = SparseMatrix(surface_grad_.transpose() * surface_edge_weight_.asDiagonal() * surface_grad_);
        const Eigen::Index n = node_count();
        const Eigen::Index ni = interior_count();
        std::vector<Eigen::Triplet<double>> trip;
        for (int k = 0; k < stiffness_.outerSize(); ++k)
            for (SparseMatrix::InnerIterator it(stiffness_, k); it; ++it) trip.emplace_back(it.row(), it.col(), it.value());
        for (int k = 0; k < surface_stiffness_.outerSize(); ++k)
            for (SparseMatrix::InnerIterator it(surface_stiffness_, k); it; ++it)
                trip.emplace_back(ni + it.row(), ni + it.col(), it.value());
        total_stiffness_.resize(n, n);
        total_stiffness_.setFromTriplets(trip.begin(), trip.end());
        mass_.resize(n);
        mass_ << dx_, dsigma_;
    }

    Eigen::Index interior_count() const { return dx_.size(); }
    Eigen::Index boundary_count() const { return dsigma_.size(); }
    Eigen::Index node_count() const { return dx_.size() + dsigma_.size(); }
    Eigen::Index edge_count() const { return grad_.rows(); }
    Eigen::Index surface_edge_count() const { return surface_grad_.rows(); }

    const Vector& dx() const { return dx_; }
    const Vector& dsigma() const { return dsigma_; }
    const Vector& mass() const { return mass_; }
    const Vector& edge_weight() const { return edge_weight_; }
    const Vector& surface_edge_weight() const { return surface_edge_weight_; }
    const SparseMatrix& gradient_matrix() const { return grad_; }
    const SparseMatrix& surface_gradient_matrix() const { return surface_grad_; }
    const SparseMatrix& stiffness() const { return stiffness_; }
    const SparseMatrix& surface_stiffness() const { return surface_stiffness_; }
    /// K + K_Γ on stacked fields: the generator of the coupled bulk-surface diffusion is -M⁻¹ times this.
    const SparseMatrix& total_stiffness() const { return total_stiffness_; }

    /// Δu on interior nodes from a stacked field.
    Vector laplacian(const Vector& u) const {
        check_stacked(u, "laplacian");
        Vector ku = stiffness_ * u;
        return -ku.head(interior_count()).cwiseQuotient(dx_);
    }

    /// ∂_ν u on boundary nodes from a stacked field.
    Vector normal_derivative(const Vector& u) const {
        check_stacked(u, "normal_derivative");
        Vector ku = stiffness_ * u;
        return ku.tail(boundary_count()).cwiseQuotient(dsigma_);
    }

    /// Δ_Γ u_Γ from a boundary field.
    Vector laplace_beltrami(const Vector& u_gamma) const {
        check_boundary(u_gamma, "laplace_beltrami");
        return -(surface_stiffness_ * u_gamma).cwiseQuotient(dsigma_);
    }

    Vector trace(const Vector& u) const {
        check_stacked(u, "trace");
        return u.tail(boundary_count());
    }

    Vector interior(const Vector& u) const {
        check_stacked(u, "interior");
        return u.head(interior_count());
    }

    /// Edge-valued ∇u from a stacked field.
    Vector gradient(const Vector& u) const {
        check_stacked(u, "gradient");
        return grad_ * u;
    }

    /// Edge-valued ∇_Γ u_Γ; empty when Γ has no tangential direction.
    Vector surface_gradient(const Vector& u_gamma) const {
        check_boundary(u_gamma, "surface_gradient");
        return surface_grad_ * u_gamma;
    }

    double bulk_inner(const Vector& a, const Vector& b) const {
        detail::require_shape(a.size() == interior_count() && b.size() == interior_count(),
                              "bulk_inner: expected interior-sized fields");
        return (a.array() * b.array() * dx_.array()).sum();
    }

    double surface_inner(const Vector& a, const Vector& b) const {
        detail::require_shape(a.size() == boundary_count() && b.size() == boundary_count(),
                              "surface_inner: expected boundary-sized fields");
        return (a.array() * b.array() * dsigma_.array()).sum();
    }

    /// ⟨∇u, ∇w⟩_dx from edge fields.
    double edge_inner(const Vector& du, const Vector& dw) const {
        detail::require_shape(du.size() == edge_count() && dw.size() == edge_count(), "edge_inner: edge field size");
        return (du.array() * dw.array() * edge_weight_.array()).sum();
    }

    /// ⟨∇_Γu, ∇_Γw⟩_dσ from surface edge fields.
    double surface_edge_inner(const Vector& du, const Vector& dw) const {
        detail::require_shape(du.size() == surface_edge_count() && dw.size() == surface_edge_count(),
                              "surface_edge_inner: surface edge field size");
        return (du.array() * dw.array() * surface_edge_weight_.array()).sum();
    }

    /// |∇u|² integrated over G for a stacked field.
    double gradient_energy(const Vector& u) const {
        Vector g = gradient(u);
        return edge_inner(g, g);
    }

    /// |∇_Γu_Γ|² integrated over Γ for a boundary field.
    double surface_gradient_energy(const Vector& u_gamma) const {
        Vector g = surface_gradient(u_gamma);
        return surface_edge_count() == 0 ? 0.0 : surface_edge_inner(g, g);
    }

    /// ∫_G u² dx + ∫_Γ u_Γ² dσ for a stacked field.
    double stacked_norm_squared(const Vector& u) const {
        check_stacked(u, "stacked_norm_squared");
        return (u.array().square() * mass_.array()).sum();
    }

private:
    void check_stacked(const Vector& u, const char* who) const {
        detail::require_shape(u.size() == node_count(), std::string(who) + ": expected stacked field of size " +
                                                            std::to_string(node_count()) + ", got " +
                                                            std::to_string(u.size()));
    }
    void check_boundary(const Vector& u, const char* who) const {
        detail::require_shape(u.size() == boundary_count(), std::string(who) + ": expected boundary field of size " +
                                                                std::to_string(boundary_count()) + ", got " +
                                                                std::to_string(u.size()));
    }

    SparseMatrix grad_;
    Vector edge_weight_;
    SparseMatrix surface_grad_;
    Vector surface_edge_weight_;
    Vector dx_;
    Vector dsigma_;
    Vector mass_;
    SparseMatrix stiffness_;
    SparseMatrix surface_stiffness_;
    SparseMatrix total_stiffness_;
};

namespace detail {

struct EdgeList {
    std::vector<Eigen::Triplet<double>> entries;
    std::vector<double> weights;

    // One difference (u_b - u_a)/length with weight face*length.
    void add(Eigen::Index a, Eigen::Index b, double length, double face) {
        const auto row = static_cast<Eigen::Index>(weights.size());
        entries.emplace_back(row, a, -1.0 / length);
        entries.emplace_back(row, b, 1.0 / length);
        weights.push_back(face * length);
    }

    std::pair<SparseMatrix, Vector> finish(Eigen::Index cols) const {
        SparseMatrix d(static_cast<Eigen::Index>(weights.size()), cols);
        d.setFromTriplets(entries.begin(), entries.end());
        Vector w = Eigen::Map<const Vector>(weights.data(), static_cast<Eigen::Index>(weights.size()));
        return {std::move(d), std::move(w)};
    }
};

inline std::pair<MeshGeometry, DiscreteOperators> build_interval(const MeshSpec& spec) {
    const int n = spec.interior;
    const double h = spec.extent / n;
    MeshGeometry g;
    g.mode = MeshMode::interval;
    g.extent = spec.extent;
    g.rings = n;
    g.sectors = 0;
    g.dx = Vector::Constant(n, h);
    g.dsigma = Vector::Ones(2);
    for (int i = 0; i < n; ++i) g.interior_points.push_back({(i + 0.5) * h, 0.0});
    g.boundary_points = {{0.0, 0.0}, {spec.extent, 0.0}};

    const Eigen::Index left = n;
    const Eigen::Index right = n + 1;
    EdgeList bulk;
    bulk.add(left, 0, 0.5 * h, 1.0);
    for (int i = 0; i + 1 < n; ++i) bulk.add(i, i + 1, h, 1.0);
    bulk.add(n - 1, right, 0.5 * h, 1.0);
    auto [d, w] = bulk.finish(n + 2);

    SparseMatrix dg(0, 2);
    DiscreteOperators ops(std::move(d), std::move(w), std::move(dg), Vector(0), g.dx, g.dsigma);
    return {std::move(g), std::move(ops)};
}

inline std::pair<MeshGeometry, DiscreteOperators> build_disk(const MeshSpec& spec) {
    const int nr = spec.interior;
    const int na = spec.angular;
    const double radius = spec.extent;
    const double dr = radius / nr;
    const double da = 2.0 * std::numbers::pi / na;

    MeshGeometry g;
    g.mode = MeshMode::disk;
    g.extent = radius;
    g.rings = nr;
    g.sectors = na;
    g.dx.resize(static_cast<Eigen::Index>(nr) * na);
    g.dsigma = Vector::Constant(na, radius * da);
    auto idx = [na](int ring, int sector) { return static_cast<Eigen::Index>(ring) * na + sector; };
    for (int j = 0; j < nr; ++j) {
        const double r = (j + 0.5) * dr;
        for (int k = 0; k < na; ++k) {
            const double a = k * da;
            g.interior_points.push_back({r * std::cos(a), r * std::sin(a)});
            g.dx(idx(j, k)) = r * dr * da;  // exact area of the annular sector
        }
    }
    for (int k = 0; k < na; ++k) {
        const double a = k * da;
        g.boundary_points.push_back({radius * std::cos(a), radius * std::sin(a)});
    }

    const Eigen::Index nint = static_cast<Eigen::Index>(nr) * na;
    EdgeList bulk;
    for (int j = 0; j < nr; ++j) {
        const double r = (j + 0.5) * dr;
        for (int k = 0; k < na; ++k) {
            bulk.add(idx(j, k), idx(j, (k + 1) % na), r * da, dr);
            if (j + 1 < nr)
                bulk.add(idx(j, k), idx(j + 1, k), dr, (j + 1) * dr * da);
            else
                bulk.add(idx(j, k), nint + k, 0.5 * dr, radius * da);
        }
    }
    auto [d, w] = bulk.finish(nint + na);

    EdgeList surface;
    for (int k = 0; k < na; ++k) surface.add(k, (k + 1) % na, radius * da, 1.0);
    auto [dg, wg] = surface.finish(na);

    DiscreteOperators ops(std::move(d), std::move(w), std::move(dg), std::move(wg), g.dx, g.dsigma);
    return {std::move(g), std::move(ops)};
}

}  // namespace detail

/// Builds the grid and its operators. Throws InvalidSpecError on a bad spec.
inline std::pair<MeshGeometry, DiscreteOperators> build_mesh(const MeshSpec& spec) {
    spec.validate();
    return spec.mode == MeshMode::interval ? detail::build_interval(spec) : detail::build_disk(spec);
}

/// |⟨Δu,w⟩_dx + ⟨∇u,∇w⟩_dx − ⟨∂_ν u,w_Γ⟩_dσ| for stacked fields u, w.
inline double green_identity_residual(const DiscreteOperators& ops, const Vector& u, const Vector& w) {
    detail::require_shape(u.size() == ops.node_count() && w.size() == ops.node_count(),
                          "green_identity_residual: fields must be stacked and mesh-sized");
    const double lap = ops.bulk_inner(ops.laplacian(u), ops.interior(w));
    const double grad = ops.edge_inner(ops.gradient(u), ops.gradient(w));
    const double flux = ops.surface_inner(ops.normal_derivative(u), ops.trace(w));
    return std::abs(lap + grad - flux);
}

/// |⟨Δ_Γu,w⟩_dσ + ⟨∇_Γu,∇_Γw⟩_dσ| for boundary fields.
inline double surface_divergence_residual(const DiscreteOperators& ops, const Vector& u_gamma, const Vector& w_gamma) {
    detail::require_shape(u_gamma.size() == ops.boundary_count() && w_gamma.size() == ops.boundary_count(),
                          "surface_divergence_residual: boundary-sized fields required");
    const double lap = ops.surface_inner(ops.laplace_beltrami(u_gamma), w_gamma);
    const double grad = ops.surface_edge_count() == 0
                            ? 0.0
                            : ops.surface_edge_inner(ops.surface_gradient(u_gamma), ops.surface_gradient(w_gamma));
    return std::abs(lap + grad);
}

/// Scale for turning the Green residual into a relative error.
inline double green_identity_scale(const DiscreteOperators& ops, const Vector& u, const Vector& w) {
    const double lap = std::abs(ops.bulk_inner(ops.laplacian(u), ops.interior(w)));
    const double grad = std::abs(ops.edge_inner(ops.gradient(u), ops.gradient(w)));
    const double flux = std::abs(ops.surface_inner(ops.normal_derivative(u), ops.trace(w)));
    return lap + grad + flux;
}

// ---------------------------------------------------------------------------
// Region masks

/// A subset of interior nodes: either an index range or a geometric box
/// (interval: x in [x_lo, x_hi]; disk: polar angle in [theta_lo, theta_hi), radius in [r_lo, r_hi]).
struct RegionSpec {
    std::optional<std::pair<int, int>> index_range;  ///< [lo, hi) over interior node indices
    double x_lo = -INFINITY, x_hi = INFINITY;
    double theta_lo = -INFINITY, theta_hi = INFINITY;
    double r_lo = 0.0, r_hi = INFINITY;

    bool operator==(const RegionSpec&) const = default;
};

using Mask = std::vector<std::uint8_t>;

inline Mask make_mask(const MeshGeometry& geo, const RegionSpec& region, const std::string& name) {
    const auto n = static_cast<std::size_t>(geo.interior_count());
    Mask mask(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        bool in = false;
        if (region.index_range) {
            in = static_cast<int>(i) >= region.index_range->first && static_cast<int>(i) < region.index_range->second;
        } else if (geo.mode == MeshMode::interval) {
            const double x = geo.interior_points[i].x;
            in = x >= region.x_lo && x <= region.x_hi;
        } else {
            const Point p = geo.interior_points[i];
            const double r = std::hypot(p.x, p.y);
            double a = std::atan2(p.y, p.x);
            if (a < 0) a += 2.0 * std::numbers::pi;
            in = a >= region.theta_lo && a < region.theta_hi && r >= region.r_lo && r <= region.r_hi;
        }
        mask[i] = in ? 1 : 0;
    }
    std::size_t count = 0;
    for (auto m : mask) count += m;
    detail::require(count > 0, "regions: mask " + name + " selects no interior node");
    return mask;
}

/// Indicators for G₁, G₂ (controls) and G₁,d, G₂,d (tracking).
struct RegionMasks {
    Mask control[2];
    Mask tracking[2];

    void validate(Eigen::Index interior) const {
        for (int i = 0; i < 2; ++i) {
            for (const Mask* m : {&control[i], &tracking[i]}) {
                detail::require_shape(static_cast<Eigen::Index>(m->size()) == interior, "regions: mask size mismatch");
                std::size_t count = 0;
                for (auto v : *m) count += v;
                detail::require(count > 0, "regions: every mask must be nonempty");
            }
        }
    }
};

inline Vector mask_vector(const Mask& mask) {
    Vector v(static_cast<Eigen::Index>(mask.size()));
    for (std::size_t i = 0; i < mask.size(); ++i) v(static_cast<Eigen::Index>(i)) = mask[i] ? 1.0 : 0.0;
    return v;
}

}  // namespace wentzell
