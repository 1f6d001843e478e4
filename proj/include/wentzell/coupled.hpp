#pragma once

// Defects of the coupled forward-backward system: the state equation driven by
// the adjoint controls and the two adjoint equations, each evaluated as
// M⁻¹(A x − M r) node by node.

#include "wentzell/objectives.hpp"

#include <algorithm>
#include <array>

namespace wentzell {

struct EquationDefect {
    double max_abs = 0.0;
    double mean_abs = 0.0;
};

struct CoupledResidual {
    EquationDefect forward;
    std::array<EquationDefect, 2> backward;
    std::array<double, 2> martingale{0.0, 0.0};  ///< max |Z√Δt − ½(z_up − z_down)|
    std::array<double, 2> terminal{0.0, 0.0};    ///< max |z(T)|

    double max_abs() const {
        return std::max({forward.max_abs, backward[0].max_abs, backward[1].max_abs, martingale[0], martingale[1],
                         terminal[0], terminal[1]});
    }
};

namespace detail {

struct DefectAccumulator {
    double max_abs = 0.0;
    double sum = 0.0;
    std::size_t count = 0;

    void add(const Matrix& d) {
        if (d.size() == 0) return;
        max_abs = std::max(max_abs, d.cwiseAbs().maxCoeff());
        sum += d.cwiseAbs().sum();
        count += static_cast<std::size_t>(d.size());
    }
    EquationDefect result() const { return {max_abs, count ? sum / static_cast<double>(count) : 0.0}; }
};

}  // namespace detail

inline CoupledResidual coupled_residual(const GameProblem& problem, const StateTrajectory& traj,
                                        const std::array<AdjointTrajectory, 2>& adjoints) {
    const System& sys = problem.system;
    const int steps = sys.steps();
    traj.y.check(sys.nodes(), steps + 1, "coupled_residual: state");
    for (Player p : players) {
        adjoints[index(p)].z.check(sys.nodes(), steps + 1, "coupled_residual: adjoint z" + to_string(p));
        adjoints[index(p)].martingale.check(sys.nodes(), steps, "coupled_residual: adjoint Z" + to_string(p));
    }

    CoupledResidual out;
    ControlPair controls;
    for (Player p : players) controls.v[index(p)] = adjoint_control(problem, p, adjoints[index(p)]);
    const TreeField drift = control_drift(sys, controls);

    detail::DefectAccumulator fwd;
    fwd.add(traj.y.level(0) - problem.initial);
    for (int k = 0; k < steps; ++k) {
        const Matrix rhs = detail::forward_rhs(sys, k, traj.y.level(k), &drift.level(k), nullptr);
        fwd.add(sys.solver->defect(traj.y.level(k + 1), rhs));
    }
    out.forward = fwd.result();

    for (Player p : players) {
        const AdjointTrajectory& adj = adjoints[index(p)];
        const TreeField source = tracking_source(problem, p, traj);
        detail::DefectAccumulator bwd;
        for (int k = 0; k < steps; ++k) {
            auto [rhs, mart] = detail::backward_rhs(sys, k, adj.z.level(k + 1), source.level(k));
            bwd.add(sys.solver->defect(adj.z.level(k), rhs));
        }
        out.backward[index(p)] = bwd.result();
        out.martingale[index(p)] = martingale_defect(adj, sys.tree);
        out.terminal[index(p)] = adj.z.level(steps).cwiseAbs().maxCoeff();
    }
    return out;
}

}  // namespace wentzell
