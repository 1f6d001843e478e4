#pragma once

// Seeded smooth test data: spatial profiles built from a few low cosine modes
// and tree fields that also depend on (t, W).

#include "wentzell/mesh.hpp"
#include "wentzell/noise.hpp"

#include <cmath>
#include <numbers>

namespace wentzell {

/// Σ_m c_m cos(m-th mode) with m ≤ 3 and N(0,1)/m coefficients, stacked.
inline Vector smooth_profile(const MeshGeometry& geo, Rng& rng) {
    constexpr int modes = 3;
    double cx[modes], cy[modes], px[modes], py[modes], amp[modes];
    for (int m = 0; m < modes; ++m) {
        amp[m] = rng.normal() / (m + 1);
        cx[m] = (m + 1) * std::numbers::pi / geo.extent * rng.uniform(0.5, 1.0);
        cy[m] = (m + 1) * std::numbers::pi / geo.extent * rng.uniform(0.5, 1.0);
        px[m] = rng.uniform(0.0, 2.0 * std::numbers::pi);
        py[m] = rng.uniform(0.0, 2.0 * std::numbers::pi);
    }
    Vector v(geo.node_count());
    for (Eigen::Index n = 0; n < geo.node_count(); ++n) {
        const Point p = geo.point(n);
        double s = 0.0;
        for (int m = 0; m < modes; ++m) {
            const double fy = geo.mode == MeshMode::disk ? std::cos(cy[m] * p.y + py[m]) : 1.0;
            s += amp[m] * std::cos(cx[m] * p.x + px[m]) * fy;
        }
        v(n) = s;
    }
    return v;
}

/// exp(−|x − c|²/w²) on the stacked nodes; c is a coordinate along x (interval) or a point (disk).
inline Vector bump_profile(const MeshGeometry& geo, Point center, double width) {
    detail::require(width > 0.0, "bump_profile: width must be > 0");
    Vector v(geo.node_count());
    for (Eigen::Index n = 0; n < geo.node_count(); ++n) {
        const Point p = geo.point(n);
        const double d2 = (p.x - center.x) * (p.x - center.x) + (p.y - center.y) * (p.y - center.y);
        v(n) = std::exp(-d2 / (width * width));
    }
    return v;
}

/// p(x)(1 + a t) + q(x) b sin(W) at every node of levels 0..levels-1.
inline TreeField smooth_tree_field(const MeshGeometry& geo, const ScenarioTree& tree, int levels, Rng& rng) {
    const Vector p = smooth_profile(geo, rng);
    const Vector q = smooth_profile(geo, rng);
    const double a = rng.uniform(-1.0, 1.0);
    const double b = rng.uniform(-1.0, 1.0);
    TreeField f = TreeField::zeros(geo.node_count(), levels);
    for (int k = 0; k < levels; ++k)
        for (int j = 0; j <= k; ++j)
            f.node(k, j) = p * (1.0 + a * tree.time(k)) + q * (b * std::sin(tree.w_value(k, j)));
    return f;
}

/// Deterministic field p(x)(1 + a t), identical across the nodes of a level.
inline TreeField deterministic_tree_field(const MeshGeometry& geo, const ScenarioTree& tree, int levels, Rng& rng) {
    const Vector p = smooth_profile(geo, rng);
    const double a = rng.uniform(-1.0, 1.0);
    TreeField f = TreeField::zeros(geo.node_count(), levels);
    for (int k = 0; k < levels; ++k) f.level(k).colwise() = p * (1.0 + a * tree.time(k));
    return f;
}

/// √(∫_G u² dx + ∫_Γ u² dσ).
inline double stacked_norm(const MeshGeometry& geo, const Vector& u) {
    return std::sqrt((u.array().square() * geo.stacked_mass().array()).sum());
}

}  // namespace wentzell
