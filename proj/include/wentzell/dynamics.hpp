#pragma once

// Semi-implicit Euler–Maruyama on the scenario tree for
//
//   forward    dy − Δy dt = [a₁y + f] dt + [a₂y + g] dW,   dy_Γ − Δ_Γy_Γ dt + ∂_νy dt = [b₁y_Γ + f_Γ] dt + [b₂y_Γ + g_Γ] dW
//   backward   dz + Δz dt = [−a₁z − a₂Z + F₁] dt + Z dW,    dz_Γ + Δ_Γz_Γ dt − ∂_νz dt = [−b₁z_Γ − b₂Ẑ + F₂] dt + Ẑ dW
//
// In stacked form both share the SPD operator A = M + Δt(K + K_Γ), factorized
// once. Forward: A y(child) = M Σ_parents q(parent|child)[(I + Δt r)y + Δt f ± √Δt(n∘y + g)].
// Backward: with E = ½(z_up + z_down) and Z = (z_up − z_down)/(2√Δt),
// A z = M[E + Δt r∘E + Δt n∘Z − Δt F]. Here r stacks (a₁, b₁) and n stacks (a₂, b₂).

#include "wentzell/errors.hpp"
#include "wentzell/mesh.hpp"
#include "wentzell/noise.hpp"

#include <Eigen/SparseCholesky>

#include <array>
#include <cmath>
#include <memory>
#include <string>

namespace wentzell {

/// Reaction and noise-intensity fields; column k applies on the step t_k → t_{k+1}.
struct Coefficients {
    Matrix reaction;  ///< stacked rows: a₁ on interior, b₁ on boundary
    Matrix noise;     ///< stacked rows: a₂ on interior, b₂ on boundary

    static Coefficients constant(const DiscreteOperators& ops, int steps, double a1, double a2, double b1, double b2) {
        const Eigen::Index ni = ops.interior_count();
        const Eigen::Index nb = ops.boundary_count();
        Coefficients c;
        c.reaction.resize(ni + nb, steps);
        c.noise.resize(ni + nb, steps);
        c.reaction.topRows(ni).setConstant(a1);
        c.reaction.bottomRows(nb).setConstant(b1);
        c.noise.topRows(ni).setConstant(a2);
        c.noise.bottomRows(nb).setConstant(b2);
        return c;
    }

    static Coefficients zero(const DiscreteOperators& ops, int steps) { return constant(ops, steps, 0, 0, 0, 0); }

    /// Assembles from per-part fields (rows = nodes of the part, columns = time steps).
    static Coefficients from_parts(const Matrix& a1, const Matrix& a2, const Matrix& b1, const Matrix& b2) {
        detail::require_shape(a1.rows() == a2.rows() && b1.rows() == b2.rows() && a1.cols() == a2.cols() &&
                                  a1.cols() == b1.cols() && b1.cols() == b2.cols(),
                              "coefficients: inconsistent part shapes");
        Coefficients c;
        c.reaction.resize(a1.rows() + b1.rows(), a1.cols());
        c.noise.resize(a1.rows() + b1.rows(), a1.cols());
        c.reaction << a1, b1;
        c.noise << a2, b2;
        return c;
    }

    int steps() const { return static_cast<int>(reaction.cols()); }

    void validate(Eigen::Index nodes, int steps) const {
        detail::require_shape(reaction.rows() == nodes && noise.rows() == nodes,
                              "coefficients: expected " + std::to_string(nodes) + " stacked rows");
        detail::require_shape(reaction.cols() == steps && noise.cols() == steps,
                              "coefficients: expected " + std::to_string(steps) + " time steps");
        detail::require(reaction.allFinite() && noise.allFinite(), "coefficients: fields must be bounded (finite)");
    }

    bool deterministic_noise_free() const { return noise.size() == 0 || noise.cwiseAbs().maxCoeff() == 0.0; }
};

/// Factorization of A = M + Δt(K + K_Γ), reused for every node and step.
class ImplicitSolver {
public:
    ImplicitSolver(const DiscreteOperators& ops, double dt) : mass_(ops.mass()), dt_(dt) {
        detail::require(dt > 0.0, "implicit solver: dt must be > 0");
        SparseMatrix a = ops.total_stiffness() * dt;
        for (Eigen::Index i = 0; i < a.rows(); ++i) a.coeffRef(i, i) += mass_(i);
        a.makeCompressed();
        matrix_ = a;
        ldlt_.compute(a);
        if (ldlt_.info() != Eigen::Success) throw NumericalError("implicit solver: factorization of M + dt K failed");
    }

    ImplicitSolver(const ImplicitSolver&) = delete;
    ImplicitSolver& operator=(const ImplicitSolver&) = delete;

    /// Solves A X = M∘R column-wise.
    Matrix solve_mass(const Matrix& r) const {
        Matrix rhs = r.array().colwise() * mass_.array();
        Matrix x = ldlt_.solve(rhs);
        if (ldlt_.info() != Eigen::Success || !x.allFinite()) throw NumericalError("implicit solver: solve failed");
        return x;
    }

    double dt() const { return dt_; }
    const Vector& mass() const { return mass_; }
    const SparseMatrix& matrix() const { return matrix_; }

    /// Row-scaled defect M⁻¹(A X − M∘R) of a candidate solution X.
    Matrix defect(const Matrix& x, const Matrix& r) const {
        Matrix ax = matrix_ * x;
        return (ax.array().colwise() / mass_.array()) - r.array();
    }

private:
    Vector mass_;
    SparseMatrix matrix_;
    double dt_;
    Eigen::SimplicialLDLT<SparseMatrix> ldlt_;
};

/// Immutable context shared by every solve: operators, tree, coefficients, factorization.
struct System {
    DiscreteOperators ops;
    ScenarioTree tree;
    Coefficients coeffs;
    std::shared_ptr<const ImplicitSolver> solver;

    System(DiscreteOperators ops_in, ScenarioTree tree_in, Coefficients coeffs_in)
        : ops(std::move(ops_in)), tree(std::move(tree_in)), coeffs(std::move(coeffs_in)) {
        coeffs.validate(ops.node_count(), tree.depth());
        solver = std::make_shared<const ImplicitSolver>(ops, tree.dt());
    }

    int steps() const { return tree.depth(); }
    Eigen::Index nodes() const { return ops.node_count(); }
    Eigen::Index interior() const { return ops.interior_count(); }

    /// Same mesh and tree, different coefficients (the factorization does not depend on them).
    System with_coefficients(Coefficients c) const {
        System s(*this);
        c.validate(ops.node_count(), tree.depth());
        s.coeffs = std::move(c);
        return s;
    }
};

struct StateTrajectory {
    TreeField y;  ///< stacked rows, levels 0..K
};

/// v₁, v₂ on interior nodes, zero outside their masks; levels 0..K-1.
struct ControlPair {
    std::array<TreeField, 2> v;

    static ControlPair zeros(Eigen::Index interior, int steps) {
        return {{TreeField::zeros(interior, steps), TreeField::zeros(interior, steps)}};
    }
};

/// (z, z_Γ) stacked on levels 0..K and (Z, Ẑ) stacked on levels 0..K-1.
struct AdjointTrajectory {
    TreeField z;
    TreeField martingale;
};

namespace detail {

inline Matrix scale_rows(const Matrix& m, const Vector& col) { return m.array().colwise() * col.array(); }

/// Right-hand side (before the mass factor) of the forward step from level k.
inline Matrix forward_rhs(const System& sys, int k, const Matrix& state, const Matrix* drift, const Matrix* noise_src) {
    const double dt = sys.tree.dt();
    const double sq = sys.tree.sqrt_dt();
    const Vector r = sys.coeffs.reaction.col(k);
    const Vector n = sys.coeffs.noise.col(k);
    Matrix base = state + dt * scale_rows(state, r);
    if (drift) base += dt * *drift;
    Matrix diff = scale_rows(state, n);
    if (noise_src) diff += *noise_src;

    const int parents = k + 1;
    Matrix rhs = Matrix::Zero(state.rows(), parents + 1);
    for (int c = 0; c <= parents; ++c) {
        if (c <= k) rhs.col(c) += ScenarioTree::parent_weight(k, c, false) * (base.col(c) - sq * diff.col(c));
        if (c >= 1) rhs.col(c) += ScenarioTree::parent_weight(k, c, true) * (base.col(c - 1) + sq * diff.col(c - 1));
    }
    return rhs;
}

inline Matrix forward_step(const System& sys, int k, const Matrix& state, const Matrix* drift, const Matrix* noise_src) {
    return sys.solver->solve_mass(forward_rhs(sys, k, state, drift, noise_src));
}

/// Right-hand side of the backward step at level k and the martingale part {rhs, Z_k}.
inline std::pair<Matrix, Matrix> backward_rhs(const System& sys, int k, const Matrix& next, const Matrix& source) {
    const double dt = sys.tree.dt();
    const int cols = k + 1;
    const Matrix expect = 0.5 * (next.leftCols(cols) + next.rightCols(cols));
    Matrix mart = (next.rightCols(cols) - next.leftCols(cols)) / (2.0 * sys.tree.sqrt_dt());
    const Vector r = sys.coeffs.reaction.col(k);
    const Vector n = sys.coeffs.noise.col(k);
    Matrix rhs = expect + dt * scale_rows(expect, r) + dt * scale_rows(mart, n) - dt * source;
    return {std::move(rhs), std::move(mart)};
}

/// One backward step: level k from level k+1. Returns {z_k, Z_k}.
inline std::pair<Matrix, Matrix> backward_step(const System& sys, int k, const Matrix& next, const Matrix& source) {
    auto [rhs, mart] = backward_rhs(sys, k, next, source);
    return {sys.solver->solve_mass(rhs), std::move(mart)};
}

}  // namespace detail

/// Interior-supported drift Σᵢ χ_{Gᵢ}vᵢ embedded in stacked fields (boundary rows zero).
inline TreeField control_drift(const System& sys, const ControlPair& controls) {
    const Eigen::Index ni = sys.interior();
    const int steps = sys.steps();
    for (int i = 0; i < 2; ++i) controls.v[static_cast<std::size_t>(i)].check(ni, steps, "controls v" + std::to_string(i + 1));
    TreeField f = TreeField::zeros(sys.nodes(), steps);
    for (int k = 0; k < steps; ++k) f.level(k).topRows(ni) = controls.v[0].level(k) + controls.v[1].level(k);
    return f;
}

/// General forward system with multiplicative coefficients plus optional additive drift f and noise g
/// (stacked, levels 0..K-1; pass empty fields to omit).
inline StateTrajectory forward_general(const System& sys, const Vector& initial, const TreeField& drift,
                                       const TreeField& noise_src) {
    detail::require_shape(initial.size() == sys.nodes(), "forward: initial state must be a stacked field");
    if (!drift.empty()) drift.check(sys.nodes(), sys.steps(), "forward drift source");
    if (!noise_src.empty()) noise_src.check(sys.nodes(), sys.steps(), "forward noise source");
    StateTrajectory out;
    out.y.push_level(initial);
    for (int k = 0; k < sys.steps(); ++k) {
        const Matrix* f = drift.empty() ? nullptr : &drift.level(k);
        const Matrix* g = noise_src.empty() ? nullptr : &noise_src.level(k);
        out.y.push_level(detail::forward_step(sys, k, out.y.level(k), f, g));
    }
    return out;
}

/// State system driven by the two controls.
inline StateTrajectory forward_solve(const System& sys, const ControlPair& controls, const Vector& initial) {
    return forward_general(sys, initial, control_drift(sys, controls), TreeField{});
}

/// Backward system with zero terminal data and stacked source (F₁ interior, F₂ boundary), levels 0..K-1.
inline AdjointTrajectory backward_solve(const System& sys, const TreeField& sources) {
    sources.check(sys.nodes(), sys.steps(), "backward sources");
    const int steps = sys.steps();
    std::vector<Matrix> z(static_cast<std::size_t>(steps) + 1);
    std::vector<Matrix> mart(static_cast<std::size_t>(steps));
    z[static_cast<std::size_t>(steps)] = Matrix::Zero(sys.nodes(), steps + 1);
    for (int k = steps - 1; k >= 0; --k) {
        auto [zk, mk] = detail::backward_step(sys, k, z[static_cast<std::size_t>(k) + 1], sources.level(k));
        z[static_cast<std::size_t>(k)] = std::move(zk);
        mart[static_cast<std::size_t>(k)] = std::move(mk);
    }
    AdjointTrajectory out;
    for (auto& m : z) out.z.push_level(std::move(m));
    for (auto& m : mart) out.martingale.push_level(std::move(m));
    return out;
}

/// Per-level probability-weighted node average; stacked rows × (K+1) columns.
inline Matrix mean_trajectory(const StateTrajectory& traj, const ScenarioTree& tree) {
    Matrix out(traj.y.rows(), traj.y.levels());
    for (int k = 0; k < traj.y.levels(); ++k) out.col(k) = tree.expectation(k, traj.y.level(k));
    return out;
}

/// Max over nodes of |Z√Δt − ½(z_up − z_down)|.
inline double martingale_defect(const AdjointTrajectory& adj, const ScenarioTree& tree) {
    double m = 0.0;
    for (int k = 0; k < adj.martingale.levels(); ++k) {
        const Matrix& next = adj.z.level(k + 1);
        const int c = k + 1;
        Matrix d = adj.martingale.level(k) * tree.sqrt_dt() - 0.5 * (next.rightCols(c) - next.leftCols(c));
        if (d.size() > 0) m = std::max(m, d.cwiseAbs().maxCoeff());
    }
    return m;
}

}  // namespace wentzell
