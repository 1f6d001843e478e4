#pragma once

// Damped best-response iteration on the adjoint characterization
//   v_i ← (1 − ρ) v_i + ρ (−(1/β_i) χ_{G_i} E_k[z^i_{k+1}]),
// and an a-posteriori check of the Nash conditions by finite differences.

#include "wentzell/coupled.hpp"
#include "wentzell/objectives.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <vector>

namespace wentzell {

struct NashSettings {
    double damping = 0.5;
    double tol = 1e-8;
    int maxit = 200;
    int gateaux_directions = 4;  ///< random directions per player for the report's derivative check
    double gateaux_eps = 1e-3;
    std::uint64_t seed = 0;

    void validate() const {
        detail::require(damping > 0.0 && damping <= 1.0, "nash: damping rho must lie in (0, 1]");
        detail::require(std::isfinite(tol) && tol > 0.0, "nash: tol must be > 0");
        detail::require(maxit >= 1, "nash: maxit must be >= 1");
        detail::require(gateaux_directions >= 0, "nash: gateaux_directions must be >= 0");
        detail::require(std::isfinite(gateaux_eps) && gateaux_eps > 0.0, "nash: gateaux_eps must be > 0");
    }
};

struct NashReport {
    int iterations = 0;
    std::vector<double> update_norms;  ///< ‖v⁺ − v‖ / max(‖v⁺‖, ‖v‖), one per applied update
    std::array<double, 2> fixed_point_residual{0.0, 0.0};           ///< ‖v_i + (1/β_i)χ z^i‖
    std::array<double, 2> relative_fixed_point_residual{0.0, 0.0};  ///< same over max(‖v_i‖, ‖(1/β_i)χ z^i‖); the stopping test
    std::array<double, 2> max_gateaux{0.0, 0.0};
    double contraction_factor = 0.0;
    bool converged = false;
};

struct NashSolution {
    ControlPair controls;
    std::array<AdjointTrajectory, 2> adjoints;
    StateTrajectory state;
    NashReport report;
};

/// Pseudorandom direction for player p, supported in its control region and of unit tree norm.
inline TreeField random_direction(const GameProblem& problem, Player p, Rng& rng) {
    const Eigen::Index ni = problem.system.interior();
    const int steps = problem.system.steps();
    const Vector chi = mask_vector(problem.objectives.masks.control[index(p)]);
    TreeField d = TreeField::zeros(ni, steps);
    for (int k = 0; k < steps; ++k)
        for (int j = 0; j <= k; ++j)
            for (Eigen::Index x = 0; x < ni; ++x) d.level(k)(x, j) = chi(x) * rng.normal();
    const double n = tree_norm(problem.tree(), d, problem.control_weight(p));
    if (n > 0.0) d *= 1.0 / n;
    return d;
}

namespace detail {

struct Evaluation {
    StateTrajectory state;
    std::array<AdjointTrajectory, 2> adjoints;
    std::array<TreeField, 2> best;
};

inline Evaluation evaluate(const GameProblem& problem, const ControlPair& controls) {
    Evaluation e;
    e.state = forward_solve(problem.system, controls, problem.initial);
    for (Player p : players) {
        e.adjoints[index(p)] = player_adjoint(problem, p, e.state);
        e.best[index(p)] = adjoint_control(problem, p, e.adjoints[index(p)]);
    }
    return e;
}

inline std::string beta_message(const GameProblem& problem, const std::string& why) {
    std::ostringstream os;
    os.precision(6);
    os << "nash: best-response iteration does not contract (" << why << ") with beta1 = "
       << problem.objectives.beta[0] << ", beta2 = " << problem.objectives.beta[1]
       << "; uniqueness is only guaranteed for sufficiently large beta_i, increase beta or reduce the damping";
    return os.str();
}

}  // namespace detail

/// Max |J_p'(v)e| over `count` random unit directions per player.
inline std::array<double, 2> max_gateaux_derivative(const GameProblem& problem, const ControlPair& controls, int count,
                                                     double eps, std::uint64_t seed) {
    std::array<double, 2> out{0.0, 0.0};
    for (Player p : players) {
        Rng rng(derive_seed(seed, stream_id("gateaux"), index(p)));
        for (int m = 0; m < count; ++m) {
            const TreeField d = random_direction(problem, p, rng);
            out[index(p)] = std::max(out[index(p)], std::abs(gateaux_derivative(p, problem, controls, d, eps)));
        }
    }
    return out;
}

inline NashSolution nash_solve(const GameProblem& problem, const NashSettings& settings = {},
                               const ControlPair* start = nullptr) {
    settings.validate();
    const System& sys = problem.system;
    ControlPair v = start ? *start : ControlPair::zeros(sys.interior(), sys.steps());
    for (Player p : players) require_supported(problem, p, v.v[index(p)], "nash: initial control");

    NashReport report;
    detail::Evaluation eval;
    std::vector<double> steps;  // absolute update sizes; relative ones saturate when iterates blow up
    for (int it = 1;; ++it) {
        eval = detail::evaluate(problem, v);
        report.iterations = it;

        double residual = 0.0;
        for (Player p : players) {
            const Vector w = problem.control_weight(p);
            const double r = tree_norm(sys.tree, eval.best[index(p)] - v.v[index(p)], w);
            const double s = std::max(tree_norm(sys.tree, v.v[index(p)], w), tree_norm(sys.tree, eval.best[index(p)], w));
            report.fixed_point_residual[index(p)] = r;
            report.relative_fixed_point_residual[index(p)] = r == 0.0 ? 0.0 : r / s;
            residual = std::max(residual, report.relative_fixed_point_residual[index(p)]);
        }
        if (!std::isfinite(residual)) throw NonContractionError(detail::beta_message(problem, "non-finite iterate"));
        if (residual <= settings.tol) {
            report.converged = true;
            break;
        }
        if (it >= settings.maxit) break;

        ControlPair next = v;
        double update = 0.0, step = 0.0;
        for (Player p : players) {
            const Vector w = problem.control_weight(p);
            next.v[index(p)] = (1.0 - settings.damping) * v.v[index(p)] + settings.damping * eval.best[index(p)];
            const double d = tree_norm(sys.tree, next.v[index(p)] - v.v[index(p)], w);
            const double s = std::max(tree_norm(sys.tree, next.v[index(p)], w), tree_norm(sys.tree, v.v[index(p)], w));
            update = std::max(update, d == 0.0 ? 0.0 : d / s);
            step = std::max(step, d);
        }
        report.update_norms.push_back(update);
        steps.push_back(step);
        const std::size_t n = steps.size();
        if (n > 5 && steps[n - 1] > 10.0 * steps[n - 6])
            throw NonContractionError(detail::beta_message(problem, "update norm grew more than 10x over 5 iterations"));
        v = std::move(next);
    }

    const std::size_t n = steps.size();
    if (n >= 2) {
        const std::size_t span = std::min<std::size_t>(n - 1, 5);
        const double a = steps[n - 1 - span];
        const double b = steps[n - 1];
        report.contraction_factor = (a > 0.0 && b > 0.0) ? std::pow(b / a, 1.0 / static_cast<double>(span)) : 0.0;
    }
    report.max_gateaux =
        max_gateaux_derivative(problem, v, settings.gateaux_directions, settings.gateaux_eps, settings.seed);
    return {std::move(v), std::move(eval.adjoints), std::move(eval.state), std::move(report)};
}

struct NashVerification {
    std::array<double, 2> max_gateaux{0.0, 0.0};
    std::array<double, 2> cost{0.0, 0.0};
    std::array<double, 2> min_deviation_gain{0.0, 0.0};  ///< min over perturbations of J_i(perturbed) − J_i(candidate)
    int perturbed_points = 0;
    bool stationary = false;
    bool no_improving_deviation = false;
    bool verified = false;
};

/// Checks a candidate by `m` random directional derivatives per player and 8 unilateral deviations v_i ± δe.
inline NashVerification verify_nash(const GameProblem& problem, const ControlPair& candidate, int m, double tol,
                                    std::uint64_t seed, double delta = 1e-2, double eps = 1e-3) {
    detail::require(m >= 1, "verify_nash: basis size must be >= 1");
    for (Player p : players) require_supported(problem, p, candidate.v[index(p)], "verify_nash: candidate");
    NashVerification out;
    out.max_gateaux = max_gateaux_derivative(problem, candidate, m, eps, seed);
    for (Player p : players) out.cost[index(p)] = evaluate_functional(p, problem, candidate);

    out.no_improving_deviation = true;
    for (Player p : players) {
        Rng rng(derive_seed(seed, stream_id("deviation"), index(p)));
        double gain = std::numeric_limits<double>::infinity();
        for (int d = 0; d < 2; ++d) {
            const TreeField e = random_direction(problem, p, rng);
            for (double sign : {1.0, -1.0}) {
                ControlPair moved = candidate;
                moved.v[index(p)] += (sign * delta) * e;
                gain = std::min(gain, evaluate_functional(p, problem, moved) - out.cost[index(p)]);
                ++out.perturbed_points;
            }
        }
        out.min_deviation_gain[index(p)] = gain;
        if (gain < -1e-10) out.no_improving_deviation = false;
    }
    out.stationary = std::max(out.max_gateaux[0], out.max_gateaux[1]) <= 10.0 * tol;
    out.verified = out.stationary && out.no_improving_deviation;
    return out;
}

}  // namespace wentzell
