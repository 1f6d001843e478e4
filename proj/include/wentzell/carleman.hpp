#pragma once

// Carleman weights φ = e^{λt}, θ = e^{sφ}; the pointwise weighted Itô
// identities for du − bΔu dt (bulk) and du_Γ − bΔ_Γu_Γ dt + b∂_νu dt
// (boundary), integrated on the tree; and both Carleman inequalities
// evaluated term by term over an (s, λ) grid.
//
// Weighted integrals are formed with θ²(t)/θ²(T) = exp(2s(φ(t) − φ(T))).
// Every term of an inequality carries the same dropped factor θ²(T), so
// ratios are unaffected and nothing overflows.

#include "wentzell/dynamics.hpp"
#include "wentzell/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace wentzell {

struct CarlemanWeights {
    double s = 1.0;
    double lambda = 1.0;

    double phi(double t) const { return std::exp(lambda * t); }
    double theta(double t) const { return std::exp(s * phi(t)); }
    /// θ²(t)/θ²(T).
    double theta_sq_ratio(double t, double horizon) const { return std::exp(2.0 * s * (phi(t) - phi(horizon))); }
};

struct WeightValues {
    double phi;
    double theta;
};

inline WeightValues weights_eval(const CarlemanWeights& w, double t) {
    detail::require(t >= 0.0, "weights_eval: t must be >= 0");
    return {w.phi(t), w.theta(t)};
}

/// η ≡ 0 on [0, t₂], η ≡ 1 on [t₁, T], quintic smoothstep in between.
struct CutoffSchedule {
    double t2 = 0.1;
    double t1 = 0.2;
    double t0 = 0.5;

    void validate(double horizon) const {
        detail::require(0.0 < t2 && t2 < t1 && t1 < t0 && t0 <= horizon,
                        "cutoff: ordering 0 < t2 < t1 < t0 <= T violated (t2 = " + std::to_string(t2) +
                            ", t1 = " + std::to_string(t1) + ", t0 = " + std::to_string(t0) +
                            ", T = " + std::to_string(horizon) + ")");
    }

    double eta(double t) const {
        if (t <= t2) return 0.0;
        if (t >= t1) return 1.0;
        const double x = (t - t2) / (t1 - t2);
        return x * x * x * (10.0 + x * (-15.0 + 6.0 * x));
    }

    double eta_prime(double t) const {
        if (t <= t2 || t >= t1) return 0.0;
        const double x = (t - t2) / (t1 - t2);
        return 30.0 * x * x * (1.0 - x) * (1.0 - x) / (t1 - t2);
    }

    bool operator==(const CutoffSchedule&) const = default;
};

/// 2(e^{λ₁t₀} − e^{λ₁t₁}) / (C + 2(e^{λ₁t₀} − e^{λ₁t₁})).
inline double kappa(double lambda1, double t0, double t1, double c) {
    detail::require(t1 < t0, "kappa: requires t1 < t0");
    detail::require(std::isfinite(lambda1) && lambda1 > 0.0, "kappa: lambda1 must be > 0");
    detail::require(std::isfinite(c) && c > 0.0, "kappa: C must be > 0");
    const double gap = 2.0 * std::exp(lambda1 * t1) * std::expm1(lambda1 * (t0 - t1));
    return gap / (c + gap);
}

// ---------------------------------------------------------------------------
// Weighted identities

/// u(t, W) with its martingale integrand g = ∂u/∂W, both as stacked fields.
struct SemimartingaleModel {
    std::function<Vector(double, double)> value;
    std::function<Vector(double, double)> diffusion;

    /// Spatially constant process broadcast to `nodes` stacked slots.
    static SemimartingaleModel spatially_constant(Eigen::Index nodes, std::function<double(double, double)> u,
                                                  std::function<double(double, double)> g) {
        SemimartingaleModel m;
        m.value = [nodes, u](double t, double w) { return Vector::Constant(nodes, u(t, w)); };
        if (g) m.diffusion = [nodes, g](double t, double w) { return Vector::Constant(nodes, g(t, w)); };
        return m;
    }
};

enum class IdentityVariant { bulk, boundary };

inline std::string to_string(IdentityVariant v) { return v == IdentityVariant::bulk ? "bulk" : "boundary"; }

struct IdentitySettings {
    double b = 1.0;
    CarlemanWeights weights{};
    IdentityVariant variant = IdentityVariant::bulk;
    bool ablate_ito = false;  ///< drop every quadratic-variation term
};

struct IdentityLevel {
    int steps = 0;
    double dt = 0.0;
    double residual = 0.0;  ///< |E Σ_k ∫ (LHS − RHS)|
    double scale = 0.0;     ///< E Σ_k ∫ |LHS|, for relative readings
};

namespace detail {

struct IdentityTerms {
    double lhs = 0.0;
    double rhs = 0.0;
};

inline IdentityTerms bulk_identity_step(const DiscreteOperators& ops, const IdentitySettings& cfg, double dt,
                                        double th0, double th1, double ph0, double ph1, const Vector& u0,
                                        const Vector& u1, const Vector& g) {
    const double b = cfg.b;
    const double s = cfg.weights.s;
    const double lam = cfg.weights.lambda;
    const Eigen::Index ni = ops.interior_count();

    const Vector h0 = th0 * u0;
    const Vector h1 = th1 * u1;
    const Vector dh = h1 - h0;
    const Vector lap_u = ops.laplacian(u0);
    const Vector h_int = h0.head(ni);
    const Vector q = b * th0 * lap_u + s * lam * ph0 * h_int;
    const Vector du = (u1 - u0).head(ni);

    IdentityTerms t;
    t.lhs = ops.bulk_inner(th0 * (-q + 0.25 * b * lam * h_int), du - b * dt * lap_u);

    const Vector dn_h = ops.normal_derivative(h0);
    const double div = -b * (ops.surface_inner(dn_h, ops.trace(dh)) +
                             0.25 * b * lam * ops.surface_inner(dn_h, ops.trace(h0)) * dt);
    auto energy = [&](const Vector& h, double ph) {
        const Vector hi = h.head(ni);
        const double m = ops.bulk_inner(hi, hi);
        return b * ops.gradient_energy(h) - s * lam * ph * m + 0.25 * b * lam * m;
    };
    const double hh = ops.bulk_inner(h_int, h_int);
    double rhs = div + 0.5 * (energy(h1, ph1) - energy(h0, ph0)) + 0.25 * b * b * lam * ops.gradient_energy(h0) * dt +
                 (0.5 - 0.25 * b) * s * lam * lam * ph0 * hh * dt + ops.bulk_inner(q, q) * dt;
    if (!cfg.ablate_ito) {
        const Vector gi = g.head(ni);
        const double qv = th0 * th0 * dt;
        rhs += -0.5 * b * qv * ops.gradient_energy(g) + (0.5 * s * lam * ph0 - 0.125 * b * lam) * qv * ops.bulk_inner(gi, gi);
    }
    t.rhs = rhs;
    return t;
}

inline IdentityTerms boundary_identity_step(const DiscreteOperators& ops, const IdentitySettings& cfg, double dt,
                                            double th0, double th1, double ph0, double ph1, const Vector& u0,
                                            const Vector& u1, const Vector& g) {
    const double b = cfg.b;
    const double s = cfg.weights.s;
    const double lam = cfg.weights.lambda;

    const Vector u0g = ops.trace(u0);
    const Vector h0g = th0 * u0g;
    const Vector h1g = th1 * ops.trace(u1);
    const Vector dhg = h1g - h0g;
    const Vector dug = ops.trace(u1) - u0g;
    const Vector lap_u = ops.laplace_beltrami(u0g);
    const Vector lap_h = th0 * lap_u;
    const Vector dn_u = ops.normal_derivative(u0);
    const Vector dn_h = th0 * dn_u;
    const Vector q = b * lap_h + s * lam * ph0 * h0g;

    IdentityTerms t;
    t.lhs = ops.surface_inner(-th0 * q, dug - b * dt * lap_u - b * dt * dn_u) +
            ops.surface_inner(0.25 * b * lam * th0 * h0g, dug - b * dt * lap_u + b * dt * dn_u);

    auto sgrad_inner = [&](const Vector& a, const Vector& c) {
        return ops.surface_edge_count() == 0 ? 0.0 : ops.surface_edge_inner(ops.surface_gradient(a), ops.surface_gradient(c));
    };
    // −b div_Γ[∇_Γh dh + ¼bλ h ∇_Γh dt] integrated over Γ, via the surface divergence formula.
    const double div = -b * (ops.surface_inner(lap_h, dhg) + sgrad_inner(h0g, dhg) +
                             0.25 * b * lam * (ops.surface_inner(h0g, lap_h) + sgrad_inner(h0g, h0g)) * dt);
    auto energy = [&](const Vector& h, double ph) {
        const double m = ops.surface_inner(h, h);
        return b * ops.surface_gradient_energy(h) - s * lam * ph * m + 0.25 * b * lam * m;
    };
    const double hh = ops.surface_inner(h0g, h0g);
    double rhs = div + 0.5 * (energy(h1g, ph1) - energy(h0g, ph0)) +
                 0.25 * b * b * lam * ops.surface_gradient_energy(h0g) * dt +
                 (0.5 - 0.25 * b) * s * lam * lam * ph0 * hh * dt + ops.surface_inner(q, q) * dt +
                 b * ops.surface_inner(q, dn_h) * dt + 0.25 * b * b * lam * ops.surface_inner(h0g, dn_h) * dt;
    if (!cfg.ablate_ito) {
        const Vector gg = ops.trace(g);
        const double qv = th0 * th0 * dt;
        rhs += -0.5 * b * qv * ops.surface_gradient_energy(gg) +
               (0.5 * s * lam * ph0 - 0.125 * b * lam) * qv * ops.surface_inner(gg, gg);
    }
    t.rhs = rhs;
    return t;
}

}  // namespace detail

/// Integrates the weighted identity over [0, T] × (G or Γ) on trees of the given depths and
/// returns |E(LHS − RHS)| per depth. Increments come from the tree; (dh)² and |d∇h|² come from
/// the supplied martingale part as θ²g²Δt and θ²|∇g|²Δt.
inline std::vector<IdentityLevel> weighted_identity_residual(const DiscreteOperators& ops,
                                                             const SemimartingaleModel& model,
                                                             const IdentitySettings& cfg, double horizon,
                                                             const std::vector<int>& depths) {
    detail::require(static_cast<bool>(model.value), "weighted identity: the process value is missing");
    detail::require(static_cast<bool>(model.diffusion),
                    "weighted identity: the martingale part (diffusion) of the process is missing");
    detail::require(cfg.b == 1.0 || cfg.b == -1.0, "weighted identity: b must be +1 or -1");
    detail::require(cfg.weights.s >= 0.0 && cfg.weights.lambda > 0.0, "weighted identity: need s >= 0, lambda > 0");
    detail::require(!depths.empty(), "weighted identity: refinement ladder is empty");

    std::vector<IdentityLevel> out;
    for (int depth : depths) {
        const ScenarioTree tree(depth, horizon);
        const double dt = tree.dt();
        long double total = 0.0L;
        long double scale = 0.0L;
        std::vector<Vector> next;
        for (int k = 0; k < depth; ++k) {
            const double t0 = tree.time(k);
            const double t1 = tree.time(k + 1);
            const double ph0 = cfg.weights.phi(t0), ph1 = cfg.weights.phi(t1);
            const double th0 = cfg.weights.theta(t0), th1 = cfg.weights.theta(t1);
            std::vector<Vector> children(static_cast<std::size_t>(k) + 2);
            for (int c = 0; c <= k + 1; ++c) {
                children[static_cast<std::size_t>(c)] = model.value(t1, tree.w_value(k + 1, c));
                detail::require_shape(children[static_cast<std::size_t>(c)].size() == ops.node_count(),
                                      "weighted identity: model must return stacked fields");
            }
            for (int j = 0; j <= k; ++j) {
                const double w = tree.w_value(k, j);
                const Vector u0 = model.value(t0, w);
                const Vector g = model.diffusion(t0, w);
                detail::require_shape(u0.size() == ops.node_count() && g.size() == ops.node_count(),
                                      "weighted identity: model must return stacked fields");
                for (int c : {j, j + 1}) {
                    const Vector& u1 = children[static_cast<std::size_t>(c)];
                    const auto terms = cfg.variant == IdentityVariant::bulk
                                           ? detail::bulk_identity_step(ops, cfg, dt, th0, th1, ph0, ph1, u0, u1, g)
                                           : detail::boundary_identity_step(ops, cfg, dt, th0, th1, ph0, ph1, u0, u1, g);
                    const double p = 0.5 * tree.probability(k, j);
                    total += static_cast<long double>(p * (terms.lhs - terms.rhs));
                    scale += static_cast<long double>(p * std::abs(terms.lhs));
                }
            }
        }
        out.push_back({depth, dt, static_cast<double>(std::abs(total)), static_cast<double>(scale)});
    }
    return out;
}

/// Least-squares slope of log(residual) against log(Δt).
inline double observed_order(const std::vector<IdentityLevel>& levels) {
    std::vector<double> x, y;
    for (const auto& l : levels) {
        x.push_back(std::log(l.dt));
        y.push_back(std::log(l.residual));
    }
    return [&] {
        const double n = static_cast<double>(x.size());
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            sx += x[i];
            sy += y[i];
            sxx += x[i] * x[i];
            sxy += x[i] * y[i];
        }
        return (n * sxy - sx * sy) / (n * sxx - sx * sx);
    }();
}

// ---------------------------------------------------------------------------
// Carleman inequalities

struct ParameterGrid {
    std::vector<double> s;
    std::vector<double> lambda;
    double span = 10.0;  ///< admissible range is [s_emp, span·s_emp]

    void validate() const {
        detail::require(!s.empty() && !lambda.empty(), "carleman: (s, lambda) grid is empty");
        detail::require(std::isfinite(span) && span >= 1.0, "carleman: admissible span must be >= 1");
        for (std::size_t i = 0; i < s.size(); ++i) {
            detail::require(std::isfinite(s[i]) && s[i] > 0.0, "carleman: s grid values must be > 0");
            if (i > 0) detail::require(s[i] > s[i - 1], "carleman: s grid must be strictly increasing");
        }
        for (double l : lambda) detail::require(std::isfinite(l) && l > 0.0, "carleman: lambda grid values must be > 0");
    }

    bool operator==(const ParameterGrid&) const = default;
};

struct CarlemanPoint {
    double s = 0.0;
    double lambda = 0.0;
    double lhs = 0.0;
    double rhs = 0.0;
    double ratio = 0.0;
    double log_dropped_factor = 0.0;  ///< log θ²(T) removed from both sides
    std::vector<double> lhs_terms;    ///< the six left-hand terms in display order
    std::vector<double> rhs_terms;
};

struct CarlemanReport {
    std::vector<CarlemanPoint> points;  ///< λ-major, s ascending
    std::vector<double> s_emp;          ///< per λ: first grid s after which the ratio decreases
    std::vector<double> c_emp_per_lambda;
    double c_emp = 0.0;
};

/// The general forward system with zero coefficients.
struct ForwardInstance {
    Vector initial;     ///< stacked (z₀, z_Γ,₀)
    TreeField drift;    ///< stacked (f₁, f₂), levels 0..K-1
    TreeField noise;    ///< stacked (g₁, g₂), levels 0..K-1
};

/// The general backward system; the terminal data must be zero.
struct BackwardInstance {
    TreeField source;  ///< stacked (F₁, F₂), levels 0..K-1
    Vector terminal;   ///< must be empty or zero
};

namespace detail {

/// Per-level expectations of nonnegative integrands; weights are applied per grid point.
struct LevelSums {
    std::vector<std::vector<double>> lhs;  ///< [term][level]
    std::vector<std::vector<double>> rhs;
    std::vector<bool> lhs_phi;             ///< term carries a φ factor
    std::vector<int> lhs_s_power, lhs_lambda_power;
    std::vector<double> rhs_fixed;         ///< time-point RHS terms: [|∇z(0)|², |z(T)|², |∇_Γz_Γ(0)|², |z_Γ(T)|²]
};

inline double level_expectation(const ScenarioTree& tree, int k, const Matrix& values,
                                const std::function<double(const Vector&)>& f) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < values.cols(); ++j) s += tree.probability(k, static_cast<int>(j)) * f(values.col(j));
    return s;
}

inline void finalize_report(CarlemanReport& report, const ParameterGrid& grid) {
    const std::size_t ns = grid.s.size();
    report.c_emp = 0.0;
    for (std::size_t l = 0; l < grid.lambda.size(); ++l) {
        const CarlemanPoint* row = &report.points[l * ns];
        std::size_t start = 0;
        while (start + 1 < ns && row[start + 1].ratio >= row[start].ratio * (1.0 - 1e-12)) ++start;
        double c = 0.0;
        for (std::size_t i = start; i < ns && grid.s[i] <= grid.span * grid.s[start] * (1.0 + 1e-12); ++i)
            c = std::max(c, row[i].ratio);
        report.s_emp.push_back(grid.s[start]);
        report.c_emp_per_lambda.push_back(c);
        report.c_emp = std::max(report.c_emp, c);
    }
}

inline CarlemanReport evaluate_grid(const LevelSums& sums, const ScenarioTree& tree, const ParameterGrid& grid,
                                    int threads, bool forward) {
    const std::size_t ns = grid.s.size();
    CarlemanReport report;
    report.points.resize(ns * grid.lambda.size());
    const double horizon = tree.horizon();
    parallel_for(report.points.size(), threads, [&](std::size_t idx) {
        const double lam = grid.lambda[idx / ns];
        const double s = grid.s[idx % ns];
        const CarlemanWeights w{s, lam};
        CarlemanPoint pt;
        pt.s = s;
        pt.lambda = lam;
        pt.log_dropped_factor = 2.0 * s * w.phi(horizon);
        for (std::size_t term = 0; term < sums.lhs.size(); ++term) {
            double acc = 0.0;
            for (int k = 0; k < tree.depth(); ++k) {
                const double t = tree.time(k);
                acc += tree.dt() * w.theta_sq_ratio(t, horizon) * (sums.lhs_phi[term] ? w.phi(t) : 1.0) *
                       sums.lhs[term][static_cast<std::size_t>(k)];
            }
            acc *= std::pow(s, sums.lhs_s_power[term]) * std::pow(lam, sums.lhs_lambda_power[term]);
            pt.lhs_terms.push_back(acc);
        }
        if (forward) {
            const double at0 = w.theta_sq_ratio(0.0, horizon);
            const double atT = s * lam * w.phi(horizon);
            pt.rhs_terms = {at0 * sums.rhs_fixed[0], atT * sums.rhs_fixed[1], at0 * sums.rhs_fixed[2],
                            atT * sums.rhs_fixed[3]};
        }
        for (const auto& series : sums.rhs) {
            double acc = 0.0;
            for (int k = 0; k < tree.depth(); ++k)
                acc += tree.dt() * w.theta_sq_ratio(tree.time(k), horizon) * series[static_cast<std::size_t>(k)];
            pt.rhs_terms.push_back(acc);
        }
        for (double v : pt.lhs_terms) pt.lhs += v;
        for (double v : pt.rhs_terms) pt.rhs += v;
        pt.ratio = pt.rhs > 0.0 ? pt.lhs / pt.rhs : (pt.lhs > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
        report.points[idx] = std::move(pt);
    });
    finalize_report(report, grid);
    return report;
}

}  // namespace detail

/// Solves the forward instance (coefficients forced to zero) and evaluates both sides of the
/// forward Carleman inequality on every grid point.
inline CarlemanReport carleman_forward_check(const System& base, const ForwardInstance& inst, const ParameterGrid& grid,
                                             int threads = 1) {
    grid.validate();
    const System sys = base.with_coefficients(Coefficients::zero(base.ops, base.steps()));
    inst.drift.check(sys.nodes(), sys.steps(), "carleman forward: drift (f1, f2)");
    inst.noise.check(sys.nodes(), sys.steps(), "carleman forward: noise (g1, g2)");
    const StateTrajectory traj = forward_general(sys, inst.initial, inst.drift, inst.noise);
    const auto& ops = sys.ops;
    const auto& tree = sys.tree;
    const Eigen::Index ni = ops.interior_count();

    auto bulk_sq = [&](const Vector& v) { return ops.bulk_inner(v.head(ni), v.head(ni)); };
    auto surf_sq = [&](const Vector& v) { return ops.surface_inner(ops.trace(v), ops.trace(v)); };
    auto grad_sq = [&](const Vector& v) { return ops.gradient_energy(v); };
    auto sgrad_sq = [&](const Vector& v) { return ops.surface_gradient_energy(ops.trace(v)); };

    detail::LevelSums sums;
    sums.lhs.assign(6, std::vector<double>(static_cast<std::size_t>(sys.steps())));
    sums.rhs.assign(2, std::vector<double>(static_cast<std::size_t>(sys.steps())));
    sums.lhs_phi = {true, false, true, true, false, true};
    sums.lhs_s_power = {1, 0, 1, 1, 0, 1};
    sums.lhs_lambda_power = {2, 1, 1, 2, 1, 1};
    for (int k = 0; k < sys.steps(); ++k) {
        const auto K = static_cast<std::size_t>(k);
        const Matrix& z = traj.y.level(k);
        const Matrix& f = inst.drift.level(k);
        const Matrix& g = inst.noise.level(k);
        sums.lhs[0][K] = detail::level_expectation(tree, k, z, bulk_sq);
        sums.lhs[1][K] = detail::level_expectation(tree, k, z, grad_sq);
        sums.lhs[2][K] = detail::level_expectation(tree, k, g, bulk_sq);
        sums.lhs[3][K] = detail::level_expectation(tree, k, z, surf_sq);
        sums.lhs[4][K] = detail::level_expectation(tree, k, z, sgrad_sq);
        sums.lhs[5][K] = detail::level_expectation(tree, k, g, surf_sq);
        sums.rhs[0][K] = detail::level_expectation(tree, k, f, bulk_sq) + detail::level_expectation(tree, k, g, grad_sq);
        sums.rhs[1][K] = detail::level_expectation(tree, k, f, surf_sq) + detail::level_expectation(tree, k, g, sgrad_sq);
    }
    const int K = sys.steps();
    sums.rhs_fixed = {grad_sq(inst.initial), detail::level_expectation(tree, K, traj.y.level(K), bulk_sq),
                      sgrad_sq(inst.initial), detail::level_expectation(tree, K, traj.y.level(K), surf_sq)};
    return detail::evaluate_grid(sums, tree, grid, threads, true);
}

/// Solves the backward instance with zero coefficients and zero terminal data and evaluates
/// both sides of the backward Carleman inequality on every grid point.
inline CarlemanReport carleman_backward_check(const System& base, const BackwardInstance& inst,
                                              const ParameterGrid& grid, int threads = 1) {
    grid.validate();
    detail::require(inst.terminal.size() == 0 || inst.terminal.cwiseAbs().maxCoeff() == 0.0,
                    "carleman backward: terminal data must be (0, 0)");
    const System sys = base.with_coefficients(Coefficients::zero(base.ops, base.steps()));
    inst.source.check(sys.nodes(), sys.steps(), "carleman backward: sources (F1, F2)");
    const AdjointTrajectory adj = backward_solve(sys, inst.source);
    const auto& ops = sys.ops;
    const auto& tree = sys.tree;
    const Eigen::Index ni = ops.interior_count();

    auto bulk_sq = [&](const Vector& v) { return ops.bulk_inner(v.head(ni), v.head(ni)); };
    auto surf_sq = [&](const Vector& v) { return ops.surface_inner(ops.trace(v), ops.trace(v)); };
    auto grad_sq = [&](const Vector& v) { return ops.gradient_energy(v); };
    auto sgrad_sq = [&](const Vector& v) { return ops.surface_gradient_energy(ops.trace(v)); };

    detail::LevelSums sums;
    sums.lhs.assign(6, std::vector<double>(static_cast<std::size_t>(sys.steps())));
    sums.rhs.assign(2, std::vector<double>(static_cast<std::size_t>(sys.steps())));
    sums.lhs_phi = {true, false, true, true, false, true};
    sums.lhs_s_power = {1, 0, 1, 1, 0, 1};
    sums.lhs_lambda_power = {2, 1, 1, 2, 1, 1};
    for (int k = 0; k < sys.steps(); ++k) {
        const auto K = static_cast<std::size_t>(k);
        const Matrix& z = adj.z.level(k);
        const Matrix& m = adj.martingale.level(k);
        const Matrix& f = inst.source.level(k);
        sums.lhs[0][K] = detail::level_expectation(tree, k, z, bulk_sq);
        sums.lhs[1][K] = detail::level_expectation(tree, k, z, grad_sq);
        sums.lhs[2][K] = detail::level_expectation(tree, k, m, bulk_sq);
        sums.lhs[3][K] = detail::level_expectation(tree, k, z, surf_sq);
        sums.lhs[4][K] = detail::level_expectation(tree, k, z, sgrad_sq);
        sums.lhs[5][K] = detail::level_expectation(tree, k, m, surf_sq);
        sums.rhs[0][K] = detail::level_expectation(tree, k, f, bulk_sq);
        sums.rhs[1][K] = detail::level_expectation(tree, k, f, surf_sq);
    }
    return detail::evaluate_grid(sums, tree, grid, threads, false);
}

}  // namespace wentzell
