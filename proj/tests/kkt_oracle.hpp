#pragma once

// Dense monolithic optimality system of the lattice game, assembled entry by
// entry from the mesh operators and tree weights. It shares no code with the
// forward/backward solvers: unknowns are the states at levels 1..K, one
// multiplier vector per player and the masked control values.

#include "wentzell/objectives.hpp"

#include <Eigen/Dense>

#include <array>
#include <optional>
#include <vector>

namespace testing_support {

using namespace wentzell;

struct KktResult {
    ControlPair controls;
    std::vector<Matrix> state;  ///< levels 0..K
};

class KktOracle {
public:
    explicit KktOracle(const GameProblem& p) : p_(p), n_(p.system.nodes()), ni_(p.system.interior()), K_(p.system.steps()) {
        for (int k = 0, off = 0; k <= K_; ++k) {
            state_off_.push_back(off);
            if (k >= 1) off += (k + 1) * static_cast<int>(n_);
            state_count_ = off;
        }
        for (int i = 0; i < 2; ++i) {
            const Mask& m = p.objectives.masks.control[i];
            for (int k = 0; k < K_; ++k)
                for (int j = 0; j <= k; ++j)
                    for (Eigen::Index x = 0; x < ni_; ++x)
                        if (m[static_cast<std::size_t>(x)]) controls_[i].push_back({k, j, x});
        }
        assemble();
    }

    /// Both players' first-order conditions together.
    KktResult nash() const {
        const int ny = state_count_;
        const int n1 = static_cast<int>(controls_[0].size()), n2 = static_cast<int>(controls_[1].size());
        const int total = 3 * ny + n1 + n2;
        Matrix S = Matrix::Zero(total, total);
        Vector rhs = Vector::Zero(total);
        const int oy = 0, ol1 = ny, ol2 = 2 * ny, ov1 = 3 * ny, ov2 = 3 * ny + n1;

        S.block(oy, oy, ny, ny) = by_;
        S.block(oy, ov1, ny, n1) = bv_[0];
        S.block(oy, ov2, ny, n2) = bv_[1];
        rhs.segment(oy, ny) = e0_;
        for (int i = 0; i < 2; ++i) {
            const int ol = i == 0 ? ol1 : ol2;
            const int ov = i == 0 ? ov1 : ov2;
            const int nv = i == 0 ? n1 : n2;
            S.block(ol, oy, ny, ny) = hy_[i];
            S.block(ol, ol, ny, ny) = by_.transpose();
            rhs.segment(ol, ny) = hrhs_[i];
            S.block(ov, ov, nv, nv) = rv_[i];
            S.block(ov, ol, nv, ny) = bv_[i].transpose();
        }
        const Vector sol = S.fullPivLu().solve(rhs);
        return unpack(sol.segment(oy, ny), sol.segment(ov1, n1), sol.segment(ov2, n2));
    }

    /// Player 1's optimality system with player 2's control frozen.
    KktResult best_response_first(const TreeField& v2) const {
        const int ny = state_count_;
        const int n1 = static_cast<int>(controls_[0].size());
        const Vector fixed = pack(1, v2);
        const int total = 2 * ny + n1;
        Matrix S = Matrix::Zero(total, total);
        Vector rhs = Vector::Zero(total);
        S.block(0, 0, ny, ny) = by_;
        S.block(0, 2 * ny, ny, n1) = bv_[0];
        rhs.head(ny) = e0_ - bv_[1] * fixed;
        S.block(ny, 0, ny, ny) = hy_[0];
        S.block(ny, ny, ny, ny) = by_.transpose();
        rhs.segment(ny, ny) = hrhs_[0];
        S.block(2 * ny, 2 * ny, n1, n1) = rv_[0];
        S.block(2 * ny, ny, n1, ny) = bv_[0].transpose();
        const Vector sol = S.fullPivLu().solve(rhs);
        return unpack(sol.head(ny), sol.tail(n1), fixed);
    }

private:
    struct ControlSlot {
        int k, j;
        Eigen::Index x;
    };

    int yrow(int k, int j, Eigen::Index x) const { return state_off_[static_cast<std::size_t>(k)] + j * static_cast<int>(n_) + static_cast<int>(x); }

    void assemble() {
        const auto& sys = p_.system;
        const auto& tree = sys.tree;
        const double dt = tree.dt(), sq = tree.sqrt_dt();
        const Matrix A = Matrix(sys.ops.mass().asDiagonal()) + dt * Matrix(sys.ops.total_stiffness());
        const Vector& m = sys.ops.mass();
        const int ny = state_count_;
        by_ = Matrix::Zero(ny, ny);
        e0_ = Vector::Zero(ny);
        for (int i = 0; i < 2; ++i) bv_[i] = Matrix::Zero(ny, static_cast<int>(controls_[i].size()));

        // Row block (k+1, c): A y_{k+1}(c) − M Σ_p q(p|c)[(1 + Δt r) y_k(p) ± √Δt n y_k(p) + Δt v_k(p)] = 0.
        for (int k = 0; k < K_; ++k) {
            for (int c = 0; c <= k + 1; ++c) {
                for (Eigen::Index x = 0; x < n_; ++x)
                    for (Eigen::Index z = 0; z < n_; ++z)
                        if (A(x, z) != 0.0) by_(yrow(k + 1, c, x), yrow(k + 1, c, z)) += A(x, z);
                for (int side = 0; side < 2; ++side) {
                    const bool up = side == 1;
                    const int parent = up ? c - 1 : c;
                    if (parent < 0 || parent > k) continue;
                    const double q = up ? double(c) / (k + 1) : double(k + 1 - c) / (k + 1);
                    const double xi = up ? sq : -sq;
                    for (Eigen::Index x = 0; x < n_; ++x) {
                        const double coef = m(x) * q * (1.0 + dt * sys.coeffs.reaction(x, k) + xi * sys.coeffs.noise(x, k));
                        if (k == 0)
                            e0_(yrow(k + 1, c, x)) += coef * p_.initial(x);
                        else
                            by_(yrow(k + 1, c, x), yrow(k, parent, x)) -= coef;
                    }
                    for (int i = 0; i < 2; ++i)
                        for (std::size_t s = 0; s < controls_[i].size(); ++s) {
                            const auto& slot = controls_[i][s];
                            if (slot.k == k && slot.j == parent)
                                bv_[i](yrow(k + 1, c, slot.x), static_cast<int>(s)) -= m(slot.x) * q * dt;
                        }
                }
            }
        }

        // Costs: Hessians in the state (levels 1..K-1 enter; level 0 is data) and in the own control.
        for (int i = 0; i < 2; ++i) {
            const double alpha = p_.objectives.alpha[static_cast<std::size_t>(i)];
            const double beta = p_.objectives.beta[static_cast<std::size_t>(i)];
            const Mask& md = p_.objectives.masks.tracking[i];
            hy_[i] = Matrix::Zero(ny, ny);
            hrhs_[i] = Vector::Zero(ny);
            for (int k = 1; k < K_; ++k)
                for (int j = 0; j <= k; ++j)
                    for (Eigen::Index x = 0; x < ni_; ++x) {
                        if (!md[static_cast<std::size_t>(x)]) continue;
                        const double w = alpha * dt * tree.probability(k, j) * m(x);
                        hy_[i](yrow(k, j, x), yrow(k, j, x)) += w;
                        hrhs_[i](yrow(k, j, x)) += w * p_.objectives.targets[static_cast<std::size_t>(i)].level(k)(x, j);
                    }
            const int nv = static_cast<int>(controls_[i].size());
            rv_[i] = Matrix::Zero(nv, nv);
            for (int s = 0; s < nv; ++s) {
                const auto& slot = controls_[i][static_cast<std::size_t>(s)];
                rv_[i](s, s) = beta * dt * tree.probability(slot.k, slot.j) * m(slot.x);
            }
        }
    }

    Vector pack(int i, const TreeField& v) const {
        Vector out(static_cast<Eigen::Index>(controls_[i].size()));
        for (std::size_t s = 0; s < controls_[i].size(); ++s) {
            const auto& slot = controls_[i][s];
            out(static_cast<Eigen::Index>(s)) = v.level(slot.k)(slot.x, slot.j);
        }
        return out;
    }

    KktResult unpack(const Vector& y, const Vector& v1, const Vector& v2) const {
        KktResult r;
        r.controls = ControlPair::zeros(ni_, K_);
        const Vector* vs[2] = {&v1, &v2};
        for (int i = 0; i < 2; ++i)
            for (std::size_t s = 0; s < controls_[i].size(); ++s) {
                const auto& slot = controls_[i][s];
                r.controls.v[static_cast<std::size_t>(i)].level(slot.k)(slot.x, slot.j) = (*vs[i])(static_cast<Eigen::Index>(s));
            }
        r.state.push_back(p_.initial);
        for (int k = 1; k <= K_; ++k) {
            Matrix lvl(n_, k + 1);
            for (int j = 0; j <= k; ++j)
                for (Eigen::Index x = 0; x < n_; ++x) lvl(x, j) = y(yrow(k, j, x));
            r.state.push_back(lvl);
        }
        return r;
    }

    const GameProblem& p_;
    Eigen::Index n_, ni_;
    int K_;
    std::vector<int> state_off_;
    int state_count_ = 0;
    std::array<std::vector<ControlSlot>, 2> controls_;
    Matrix by_;
    Vector e0_;
    std::array<Matrix, 2> bv_, hy_, rv_;
    std::array<Vector, 2> hrhs_;
};

}  // namespace testing_support
