#pragma once

// The interpolation inequality, backward uniqueness and conditional stability,
// each measured on Nash equilibria of the lattice game.

#include "wentzell/carleman.hpp"
#include "wentzell/instances.hpp"
#include "wentzell/nash.hpp"
#include "wentzell/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace wentzell {

/// E∫_G y² + E∫_Γ y_Γ² at one level.
inline double level_energy(const DiscreteOperators& ops, const ScenarioTree& tree, int k, const Matrix& values) {
    const Vector per_node = (values.array().square().colwise() * ops.mass().array()).colwise().sum().transpose();
    return per_node.dot(tree.probabilities(k));
}

/// Σ_{k<K} Δt (E∫_G y_k² + E∫_Γ y_Γ,k²).
inline double space_time_energy(const DiscreteOperators& ops, const ScenarioTree& tree, const TreeField& f) {
    double s = 0.0;
    for (int k = 0; k < tree.depth(); ++k) s += tree.dt() * level_energy(ops, tree, k, f.level(k));
    return s;
}

/// Nearest scheme level to t, clamped to [1, K].
inline int snap_level(const ScenarioTree& tree, double t) {
    const int k = static_cast<int>(std::lround(t / tree.dt()));
    return std::clamp(k, 1, tree.depth());
}

struct InterpolationReport {
    double t0_requested = 0.0;
    double t0 = 0.0;  ///< snapped to the time grid
    int level = 0;
    double lhs = 0.0;
    double a = 0.0;
    double b = 0.0;
    double m0 = 0.0;
    double m1 = 0.0;
    double kappa = 0.0;
    double c_fit = 0.0;
    double kappa_constant = 0.0;  ///< the C entering κ (C_fit, or 1 when the data vanish)
    bool holds = false;
};

namespace detail {

/// Solves C = LHS / (A^{1−κ(C)} B^{κ(C)}) for C by bisection in log C.
inline double fit_interpolation_constant(double lhs, double a, double b, double lambda1, double t0, double t1) {
    if (lhs == 0.0) return 0.0;
    if (a == 0.0 || b == 0.0) return std::numeric_limits<double>::infinity();
    const double la = std::log(a), lb = std::log(b), ll = std::log(lhs);
    auto f = [&](double x) {
        const double k = kappa(lambda1, t0, t1, std::exp(x));
        return x - ll + (1.0 - k) * la + k * lb;
    };
    double lo = -1.0, hi = 1.0;
    while (f(lo) > 0.0 && lo > -700.0) lo *= 2.0;
    while (f(hi) < 0.0 && hi < 700.0) hi *= 2.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (f(mid) > 0.0 ? hi : lo) = mid;
    }
    return std::exp(0.5 * (lo + hi));
}

}  // namespace detail

inline InterpolationReport interpolation_probe(const GameProblem& problem, const NashSolution& nash,
                                               const CutoffSchedule& cutoff, double lambda1) {
    const ScenarioTree& tree = problem.tree();
    const DiscreteOperators& ops = problem.ops();
    detail::require(cutoff.t0 > 0.0 && cutoff.t0 <= tree.horizon(), "interpolation: t0 must lie in (0, T]");
    cutoff.validate(tree.horizon());
    detail::require(std::isfinite(lambda1) && lambda1 > 0.0, "interpolation: lambda1 must be > 0");
    nash.state.y.check(problem.system.nodes(), tree.depth() + 1, "interpolation: state");

    InterpolationReport r;
    r.t0_requested = cutoff.t0;
    r.level = snap_level(tree, cutoff.t0);
    r.t0 = tree.time(r.level);
    const int K = tree.depth();
    r.lhs = level_energy(ops, tree, r.level, nash.state.y.level(r.level));

    for (const auto& adj : nash.adjoints) r.m0 += space_time_energy(ops, tree, adj.z);
    for (Player p : players)
        r.m1 += tree_time_norm_squared(tree, problem.objectives.targets[index(p)],
                                       mask_vector(problem.objectives.masks.tracking[index(p)]).cwiseProduct(ops.dx()));
    r.a = space_time_energy(ops, tree, nash.state.y) + r.m0;
    r.b = level_energy(ops, tree, K, nash.state.y.level(K)) + r.m1;

    // κ needs t₁ < t₀ on the snapped grid as well.
    const double t1 = std::min(cutoff.t1, r.t0 - 1e-12 * tree.horizon());
    r.c_fit = detail::fit_interpolation_constant(r.lhs, r.a, r.b, lambda1, r.t0, t1);
    r.kappa_constant = (r.c_fit > 0.0 && std::isfinite(r.c_fit)) ? r.c_fit : 1.0;
    r.kappa = kappa(lambda1, r.t0, t1, r.kappa_constant);
    const double bound = r.c_fit * std::pow(r.a, 1.0 - r.kappa) * std::pow(r.b, r.kappa);
    r.holds = r.lhs <= bound * (1.0 + 1e-10) || r.lhs == 0.0;
    return r;
}

struct UniquenessMember {
    double initial_norm = 0.0;   ///< ∫y₀² + ∫y_Γ,₀²
    double terminal_norm = 0.0;  ///< E∫y²(T) + E∫y_Γ²(T)
    double t0_norm = 0.0;
    double ratio = 0.0;          ///< terminal / initial
};

struct UniquenessReport {
    double zero_branch_max_abs = 0.0;
    bool zero_branch_exact = false;
    std::vector<UniquenessMember> members;
    double min_terminal_norm = 0.0;
    double min_ratio = 0.0;
    double floor = 1e-3;
    bool above_floor = false;
    double scale = 2.0;
    double scaling_defect_terminal = 0.0;  ///< |norm(c y₀) / (c² norm(y₀)) − 1| for member 0
    double scaling_defect_t0 = 0.0;
};

inline void require_zero_targets(const GameProblem& problem, const char* who) {
    for (const auto& t : problem.objectives.targets)
        detail::require(t.max_abs() == 0.0, std::string(who) + ": desired targets must be zero");
}

/// Solves the game from y₀ and returns the equilibrium state.
inline StateTrajectory equilibrium_state(const GameProblem& problem, const Vector& y0, const NashSettings& settings) {
    const GameProblem member(problem.system, problem.objectives, y0);
    return nash_solve(member, settings).state;
}

inline UniquenessReport backward_uniqueness_probe(const GameProblem& problem, const std::vector<Vector>& family,
                                                  const NashSettings& settings, double t0, double floor,
                                                  int threads = 1, double scale = 2.0) {
    require_zero_targets(problem, "uniqueness");
    detail::require(!family.empty(), "uniqueness: the initial-state family is empty");
    detail::require(floor >= 0.0, "uniqueness: floor must be >= 0");
    const ScenarioTree& tree = problem.tree();
    const DiscreteOperators& ops = problem.ops();
    detail::require(t0 > 0.0 && t0 <= tree.horizon(), "uniqueness: t0 must lie in (0, T]");
    const int K = tree.depth();
    const int l0 = snap_level(tree, t0);

    UniquenessReport r;
    r.floor = floor;
    r.scale = scale;
    {
        const StateTrajectory zero = equilibrium_state(problem, Vector::Zero(problem.system.nodes()), settings);
        r.zero_branch_max_abs = zero.y.max_abs();
        r.zero_branch_exact = r.zero_branch_max_abs == 0.0;
    }

    r.members.resize(family.size());
    parallel_for(family.size(), threads, [&](std::size_t i) {
        const StateTrajectory y = equilibrium_state(problem, family[i], settings);
        UniquenessMember m;
        m.initial_norm = ops.stacked_norm_squared(family[i]);
        m.terminal_norm = level_energy(ops, tree, K, y.y.level(K));
        m.t0_norm = level_energy(ops, tree, l0, y.y.level(l0));
        m.ratio = m.initial_norm > 0.0 ? m.terminal_norm / m.initial_norm : 0.0;
        r.members[i] = m;
    });
    r.min_terminal_norm = std::numeric_limits<double>::infinity();
    r.min_ratio = std::numeric_limits<double>::infinity();
    for (const auto& m : r.members) {
        r.min_terminal_norm = std::min(r.min_terminal_norm, m.terminal_norm);
        r.min_ratio = std::min(r.min_ratio, m.ratio);
    }
    r.above_floor = r.min_ratio > floor;

    const StateTrajectory scaled = equilibrium_state(problem, scale * family.front(), settings);
    const UniquenessMember& base = r.members.front();
    const double c2 = scale * scale;
    r.scaling_defect_terminal = std::abs(level_energy(ops, tree, K, scaled.y.level(K)) / (c2 * base.terminal_norm) - 1.0);
    r.scaling_defect_t0 = std::abs(level_energy(ops, tree, l0, scaled.y.level(l0)) / (c2 * base.t0_norm) - 1.0);
    return r;
}

struct StabilityMember {
    double initial_norm = 0.0;  ///< √(∫y₀² + ∫y_Γ,₀²)
    double lhs = 0.0;
    double b = 0.0;
    double log_lhs = 0.0;
    double log_b = 0.0;
    double bound_ratio = 0.0;  ///< LHS / B^κ
};

struct StabilityReport {
    double radius = 0.0;
    double t0 = 0.0;
    double kappa = 0.0;
    double slope = 0.0;
    double intercept = 0.0;
    double c_emp = 0.0;  ///< max LHS / B^κ over the family
    bool envelope_holds = false;
    std::vector<StabilityMember> members;
};

inline StabilityReport stability_probe(const GameProblem& problem, const std::vector<Vector>& family, double radius,
                                       double t0, double kappa_value, const NashSettings& settings, int threads = 1) {
    require_zero_targets(problem, "stability");
    detail::require(family.size() >= 2, "stability: the family needs at least two members");
    detail::require(radius > 0.0, "stability: the ball radius M must be > 0");
    detail::require(kappa_value > 0.0 && kappa_value < 1.0, "stability: kappa must lie in (0, 1)");
    const ScenarioTree& tree = problem.tree();
    const DiscreteOperators& ops = problem.ops();
    detail::require(t0 > 0.0 && t0 <= tree.horizon(), "stability: t0 must lie in (0, T]");
    for (std::size_t i = 0; i < family.size(); ++i)
        detail::require(std::sqrt(ops.stacked_norm_squared(family[i])) <= radius,
                        "stability: family member " + std::to_string(i) + " lies outside the ball |y0| <= M");
    const int K = tree.depth();
    const int l0 = snap_level(tree, t0);

    StabilityReport r;
    r.radius = radius;
    r.t0 = tree.time(l0);
    r.kappa = kappa_value;
    r.members.resize(family.size());
    parallel_for(family.size(), threads, [&](std::size_t i) {
        const StateTrajectory y = equilibrium_state(problem, family[i], settings);
        StabilityMember m;
        m.initial_norm = std::sqrt(ops.stacked_norm_squared(family[i]));
        m.lhs = level_energy(ops, tree, l0, y.y.level(l0));
        m.b = level_energy(ops, tree, K, y.y.level(K));
        m.log_lhs = std::log(m.lhs);
        m.log_b = std::log(m.b);
        m.bound_ratio = m.lhs / std::pow(m.b, kappa_value);
        r.members[i] = m;
    });

    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(r.members.size());
    for (const auto& m : r.members) {
        sx += m.log_b;
        sy += m.log_lhs;
        sxx += m.log_b * m.log_b;
        sxy += m.log_b * m.log_lhs;
        r.c_emp = std::max(r.c_emp, m.bound_ratio);
    }
    r.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    r.intercept = (sy - r.slope * sx) / n;
    r.envelope_holds = true;
    for (const auto& m : r.members)
        if (m.lhs > r.c_emp * std::pow(m.b, kappa_value) * (1.0 + 1e-12)) r.envelope_holds = false;
    return r;
}

/// Profiles c·p for the listed scalings.
inline std::vector<Vector> scaling_family(const Vector& profile, const std::vector<double>& scales) {
    std::vector<Vector> out;
    for (double c : scales) out.push_back(c * profile);
    return out;
}

/// n seeded smooth profiles with norms spread in [0.2 M, M].
inline std::vector<Vector> random_family(const MeshGeometry& geo, int n, double radius, std::uint64_t seed) {
    std::vector<Vector> out;
    for (int i = 0; i < n; ++i) {
        Rng rng(derive_seed(seed, stream_id("family"), static_cast<std::uint64_t>(i)));
        Vector p = smooth_profile(geo, rng);
        const double norm = stacked_norm(geo, p);
        if (norm > 0.0) p *= rng.uniform(0.2, 0.999) * radius / norm;
        out.push_back(std::move(p));
    }
    return out;
}

}  // namespace wentzell
