#pragma once

// Cost functionals
//   J_i(v) = (α_i/2) E∫∫_{G_i,d} |y − y_i,d|² + (β_i/2) E∫∫_{G_i} v_i²
// on the tree (exact expectation), the mesh (lumped quadrature) and the left
// rectangle rule in time, together with their central-difference derivatives.

#include "wentzell/dynamics.hpp"

#include <array>
#include <cmath>
#include <string>

namespace wentzell {

enum class Player : int { first = 0, second = 1 };

constexpr std::size_t index(Player p) { return static_cast<std::size_t>(p); }
constexpr Player other(Player p) { return p == Player::first ? Player::second : Player::first; }
inline std::string to_string(Player p) { return p == Player::first ? "1" : "2"; }
constexpr std::array<Player, 2> players{Player::first, Player::second};

struct ObjectiveSpec {
    std::array<double, 2> alpha{1.0, 1.0};
    std::array<double, 2> beta{1.0, 1.0};
    std::array<TreeField, 2> targets;  ///< interior rows, levels 0..K-1
    RegionMasks masks;

    double alpha_of(Player p) const { return alpha[index(p)]; }
    double beta_of(Player p) const { return beta[index(p)]; }

    /// Zero targets on every level.
    static std::array<TreeField, 2> zero_targets(Eigen::Index interior, int steps) {
        return {TreeField::zeros(interior, steps), TreeField::zeros(interior, steps)};
    }

    void validate(Eigen::Index interior, int steps) const {
        masks.validate(interior);
        for (Player p : players) {
            const std::string who = "objectives: player " + to_string(p);
            detail::require(std::isfinite(alpha_of(p)) && alpha_of(p) >= 0.0, who + ": alpha must be >= 0");
            detail::require(std::isfinite(beta_of(p)) && beta_of(p) > 0.0, who + ": beta must be > 0");
            const TreeField& t = targets[index(p)];
            t.check(interior, steps, who + " target");
            const Vector outside = Vector::Ones(interior) - mask_vector(masks.tracking[index(p)]);
            for (int k = 0; k < steps; ++k) {
                detail::require(t.level(k).allFinite(), who + ": target must be finite");
                const double leak = (t.level(k).array().colwise() * outside.array()).abs().maxCoeff();
                detail::require(leak == 0.0, who + ": target must vanish outside the tracking region");
            }
        }
    }
};

/// Everything needed to evaluate a control pair: dynamics, costs, initial state.
struct GameProblem {
    System system;
    ObjectiveSpec objectives;
    Vector initial;

    GameProblem(System sys, ObjectiveSpec obj, Vector y0)
        : system(std::move(sys)), objectives(std::move(obj)), initial(std::move(y0)) {
        objectives.validate(system.interior(), system.steps());
        detail::require_shape(initial.size() == system.nodes(), "problem: initial state must be a stacked field");
        detail::require(initial.allFinite(), "problem: initial state must be finite");
    }

    const ScenarioTree& tree() const { return system.tree; }
    const DiscreteOperators& ops() const { return system.ops; }
    Vector control_weight(Player p) const {
        return mask_vector(objectives.masks.control[index(p)]).cwiseProduct(system.ops.dx());
    }
    Vector tracking_weight(Player p) const {
        return mask_vector(objectives.masks.tracking[index(p)]).cwiseProduct(system.ops.dx());
    }
};

/// Interior rows of levels 0..K-1 of the state.
inline TreeField interior_levels(const StateTrajectory& traj, Eigen::Index interior, int steps) {
    TreeField out;
    for (int k = 0; k < steps; ++k) out.push_level(traj.y.level(k).topRows(interior));
    return out;
}

inline double evaluate_functional(Player p, const ObjectiveSpec& spec, const StateTrajectory& traj,
                                  const ControlPair& controls, const ScenarioTree& tree,
                                  const DiscreteOperators& ops) {
    const Eigen::Index ni = ops.interior_count();
    const int steps = tree.depth();
    traj.y.check(ops.node_count(), steps + 1, "functional: state");
    const TreeField& v = controls.v[index(p)];
    v.check(ni, steps, "functional: control");
    const TreeField& target = spec.targets[index(p)];
    target.check(ni, steps, "functional: target");

    const Vector wd = mask_vector(spec.masks.tracking[index(p)]).cwiseProduct(ops.dx());
    const Vector wc = mask_vector(spec.masks.control[index(p)]).cwiseProduct(ops.dx());
    const TreeField miss = interior_levels(traj, ni, steps) - target;
    return 0.5 * spec.alpha_of(p) * tree_time_norm_squared(tree, miss, wd) +
           0.5 * spec.beta_of(p) * tree_time_norm_squared(tree, v, wc);
}

/// J_i of a control pair, solving the state first.
inline double evaluate_functional(Player p, const GameProblem& problem, const ControlPair& controls) {
    const StateTrajectory traj = forward_solve(problem.system, controls, problem.initial);
    return evaluate_functional(p, problem.objectives, traj, controls, problem.tree(), problem.ops());
}

/// Throws unless the field vanishes outside player p's control region.
inline void require_supported(const GameProblem& problem, Player p, const TreeField& f, const std::string& what) {
    f.check(problem.system.interior(), problem.system.steps(), what);
    const Vector outside = Vector::Ones(problem.system.interior()) - mask_vector(problem.objectives.masks.control[index(p)]);
    for (int k = 0; k < f.levels(); ++k) {
        const double leak = (f.level(k).array().colwise() * outside.array()).abs().maxCoeff();
        detail::require(leak == 0.0, what + ": must vanish outside the control region of player " + to_string(p));
    }
}

/// (J_i(v + εe) − J_i(v − εe)) / 2ε with the perturbation in player i's slot.
inline double gateaux_derivative(Player p, const GameProblem& problem, const ControlPair& controls,
                                 const TreeField& direction, double eps) {
    detail::require(std::isfinite(eps) && eps > 0.0, "gateaux_derivative: epsilon must be > 0");
    require_supported(problem, p, direction, "gateaux_derivative: direction");
    ControlPair plus = controls;
    ControlPair minus = controls;
    plus.v[index(p)] += eps * direction;
    minus.v[index(p)] -= eps * direction;
    return (evaluate_functional(p, problem, plus) - evaluate_functional(p, problem, minus)) / (2.0 * eps);
}

/// Stacked adjoint source for player p: −α_p χ_{G_p,d}(y − y_p,d) in the bulk, zero on Γ.
inline TreeField tracking_source(const GameProblem& problem, Player p, const StateTrajectory& traj) {
    const Eigen::Index ni = problem.system.interior();
    const int steps = problem.system.steps();
    traj.y.check(problem.system.nodes(), steps + 1, "tracking_source: state");
    const Vector chi = mask_vector(problem.objectives.masks.tracking[index(p)]);
    const double a = problem.objectives.alpha_of(p);
    TreeField f = TreeField::zeros(problem.system.nodes(), steps);
    for (int k = 0; k < steps; ++k) {
        const Matrix miss = traj.y.level(k).topRows(ni) - problem.objectives.targets[index(p)].level(k);
        f.level(k).topRows(ni) = -a * (miss.array().colwise() * chi.array()).matrix();
    }
    return f;
}

/// Lattice form of v_p = −(1/β_p) χ_{G_p} z^p: at node (k, j) the control uses E_k[z^p_{k+1}],
/// which makes it the exact discrete gradient condition of the scheme.
inline TreeField adjoint_control(const GameProblem& problem, Player p, const AdjointTrajectory& adj) {
    const Eigen::Index ni = problem.system.interior();
    const int steps = problem.system.steps();
    adj.z.check(problem.system.nodes(), steps + 1, "adjoint_control: adjoint");
    const Vector chi = mask_vector(problem.objectives.masks.control[index(p)]);
    const double scale = -1.0 / problem.objectives.beta_of(p);
    TreeField v;
    for (int k = 0; k < steps; ++k) {
        const Matrix& next = adj.z.level(k + 1);
        const Matrix e = 0.5 * (next.topRows(ni).leftCols(k + 1) + next.topRows(ni).rightCols(k + 1));
        v.push_level(scale * (e.array().colwise() * chi.array()).matrix());
    }
    return v;
}

/// Adjoint of player p for the given state.
inline AdjointTrajectory player_adjoint(const GameProblem& problem, Player p, const StateTrajectory& traj) {
    return backward_solve(problem.system, tracking_source(problem, p, traj));
}

/// √(E∫∫ weight·f²) on the tree.
inline double tree_norm(const ScenarioTree& tree, const TreeField& f, const Vector& weight) {
    return std::sqrt(tree_time_norm_squared(tree, f, weight));
}

}  // namespace wentzell
