#pragma once

// Recombining binomial tree for the Brownian motion W, lattice-indexed fields
// on it, and a seeded Gaussian path sampler for Monte Carlo cross-checks.
//
// Level k holds nodes j = 0..k with W = (2j - k)√Δt and probability C(k,j)/2^k.
// Node (k,j) branches down to (k+1,j) and up to (k+1,j+1), each with
// probability 1/2 and increment ∓√Δt.

#include "wentzell/errors.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <string>
#include <vector>

namespace wentzell {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

class ScenarioTree {
public:
    ScenarioTree() = default;

    ScenarioTree(int depth, double horizon) : depth_(depth), horizon_(horizon) {
        detail::require(depth >= 1, "tree: depth K must be >= 1, got " + std::to_string(depth));
        detail::require(std::isfinite(horizon) && horizon > 0.0, "tree: horizon T must be > 0");
        dt_ = horizon_ / depth_;
        sqrt_dt_ = std::sqrt(dt_);
        prob_.resize(static_cast<std::size_t>(depth_) + 1);
        prob_[0] = {1.0};
        for (int k = 0; k < depth_; ++k) {
            const auto& p = prob_[static_cast<std::size_t>(k)];
            auto& q = prob_[static_cast<std::size_t>(k) + 1];
            q.assign(static_cast<std::size_t>(k) + 2, 0.0);
            for (int j = 0; j <= k; ++j) {
                q[static_cast<std::size_t>(j)] += 0.5 * p[static_cast<std::size_t>(j)];
                q[static_cast<std::size_t>(j) + 1] += 0.5 * p[static_cast<std::size_t>(j)];
            }
        }
    }

    int depth() const { return depth_; }
    double horizon() const { return horizon_; }
    double dt() const { return dt_; }
    double sqrt_dt() const { return sqrt_dt_; }
    double time(int level) const { return level * dt_; }

    int nodes_at(int level) const { return level + 1; }
    std::size_t total_nodes() const {
        return static_cast<std::size_t>(depth_ + 1) * static_cast<std::size_t>(depth_ + 2) / 2;
    }

    double w_value(int level, int node) const { return (2.0 * node - level) * sqrt_dt_; }
    double probability(int level, int node) const {
        return prob_[static_cast<std::size_t>(level)][static_cast<std::size_t>(node)];
    }
    Eigen::Map<const Vector> probabilities(int level) const {
        const auto& p = prob_[static_cast<std::size_t>(level)];
        return {p.data(), static_cast<Eigen::Index>(p.size())};
    }

    /// Weight of parent (k, node) in the conditional law of the parent given child (k+1, child).
    /// up = true for the parent one step below the child index (it moved up).
    static double parent_weight(int level, int child, bool up) {
        const double k1 = level + 1.0;
        return up ? child / k1 : (k1 - child) / k1;
    }

    /// Probability-weighted sum of one value per node of a level.
    double expectation(int level, std::span<const double> values) const {
        detail::require_shape(level >= 0 && level <= depth_, "tree_expectation: level out of range");
        detail::require_shape(values.size() == static_cast<std::size_t>(level) + 1,
                              "tree_expectation: level " + std::to_string(level) + " has " +
                                  std::to_string(level + 1) + " nodes, got " + std::to_string(values.size()));
        const auto& p = prob_[static_cast<std::size_t>(level)];
        double s = 0.0;
        for (std::size_t j = 0; j < values.size(); ++j) s += p[j] * values[j];
        return s;
    }

    /// Node-wise probability-weighted average of a (rows × nodes) level matrix.
    Vector expectation(int level, const Matrix& values) const {
        detail::require_shape(level >= 0 && level <= depth_, "tree_expectation: level out of range");
        detail::require_shape(values.cols() == level + 1, "tree_expectation: column count must equal node count");
        return values * probabilities(level);
    }

private:
    int depth_ = 0;
    double horizon_ = 0.0;
    double dt_ = 0.0;
    double sqrt_dt_ = 0.0;
    std::vector<std::vector<double>> prob_;
};

inline ScenarioTree build_tree(int depth, double horizon) { return ScenarioTree(depth, horizon); }

/// Values on a contiguous range of tree levels; level k is a (rows × (k+1)) matrix.
class TreeField {
public:
    TreeField() = default;

    /// Zero field on levels [0, levels).
    static TreeField zeros(Eigen::Index rows, int levels) {
        TreeField f;
        f.rows_ = rows;
        f.levels_.reserve(static_cast<std::size_t>(levels));
        for (int k = 0; k < levels; ++k) f.levels_.push_back(Matrix::Zero(rows, k + 1));
        return f;
    }

    /// Same column vector on every node of every level.
    static TreeField broadcast(const Vector& value, int levels) {
        TreeField f = zeros(value.size(), levels);
        for (auto& m : f.levels_) m.colwise() = value;
        return f;
    }

    Eigen::Index rows() const { return rows_; }
    int levels() const { return static_cast<int>(levels_.size()); }
    bool empty() const { return levels_.empty(); }

    Matrix& level(int k) { return levels_.at(static_cast<std::size_t>(k)); }
    const Matrix& level(int k) const { return levels_.at(static_cast<std::size_t>(k)); }

    auto node(int k, int j) { return level(k).col(j); }
    auto node(int k, int j) const { return level(k).col(j); }

    /// Checks rows and the one-column-per-node lattice shape on `levels` levels.
    void check(Eigen::Index rows, int levels, const std::string& what) const {
        detail::require_shape(rows_ == rows, what + ": expected " + std::to_string(rows) + " rows, got " +
                                                 std::to_string(rows_));
        detail::require_shape(this->levels() == levels, what + ": expected " + std::to_string(levels) +
                                                             " levels, got " + std::to_string(this->levels()));
        for (int k = 0; k < levels; ++k) {
            const Matrix& m = level(k);
            detail::require_shape(m.rows() == rows, what + ": ragged rows at level " + std::to_string(k));
            if (m.cols() != k + 1)
                throw AdaptednessError(what + ": level " + std::to_string(k) + " carries " +
                                       std::to_string(m.cols()) + " node values, a field adapted to the tree has " +
                                       std::to_string(k + 1));
        }
    }

    TreeField& operator+=(const TreeField& o) {
        for (std::size_t k = 0; k < levels_.size(); ++k) levels_[k] += o.levels_.at(k);
        return *this;
    }
    TreeField& operator-=(const TreeField& o) {
        for (std::size_t k = 0; k < levels_.size(); ++k) levels_[k] -= o.levels_.at(k);
        return *this;
    }
    TreeField& operator*=(double c) {
        for (auto& m : levels_) m *= c;
        return *this;
    }
    friend TreeField operator+(TreeField a, const TreeField& b) { return a += b; }
    friend TreeField operator-(TreeField a, const TreeField& b) { return a -= b; }
    friend TreeField operator*(double c, TreeField a) { return a *= c; }

    double max_abs() const {
        double m = 0.0;
        for (const auto& l : levels_)
            if (l.size() > 0) m = std::max(m, l.cwiseAbs().maxCoeff());
        return m;
    }

    /// Sibling-order relabeling W ↦ −W: node j of level k becomes node k − j.
    TreeField mirrored() const {
        TreeField f = *this;
        for (auto& m : f.levels_) m = m.rowwise().reverse().eval();
        return f;
    }

    /// Appends a level; used by builders that grow a field level by level.
    void push_level(Matrix m) {
        if (levels_.empty()) rows_ = m.rows();
        levels_.push_back(std::move(m));
    }

private:
    Eigen::Index rows_ = 0;
    std::vector<Matrix> levels_;
};

/// Σ_k Δt Σ_j P(k,j) Σ_x weight_x · value², over levels [0, levels()).
inline double tree_time_norm_squared(const ScenarioTree& tree, const TreeField& f, const Vector& weight) {
    detail::require_shape(f.rows() == weight.size(), "tree_time_norm_squared: weight size mismatch");
    double s = 0.0;
    for (int k = 0; k < f.levels(); ++k) {
        const Vector per_node = (f.level(k).array().square().colwise() * weight.array()).colwise().sum().transpose();
        s += tree.dt() * per_node.dot(tree.probabilities(k));
    }
    return s;
}

/// Σ_k Δt Σ_j P(k,j) Σ_x weight_x a b.
inline double tree_time_inner(const ScenarioTree& tree, const TreeField& a, const TreeField& b, const Vector& weight) {
    detail::require_shape(a.rows() == weight.size() && b.rows() == weight.size() && a.levels() == b.levels(),
                          "tree_time_inner: shape mismatch");
    double s = 0.0;
    for (int k = 0; k < a.levels(); ++k) {
        const Vector per_node =
            ((a.level(k).array() * b.level(k).array()).colwise() * weight.array()).colwise().sum().transpose();
        s += tree.dt() * per_node.dot(tree.probabilities(k));
    }
    return s;
}

// ---------------------------------------------------------------------------
// Seeded randomness

/// SplitMix64 finalizer; used to derive independent subseeds from (seed, stream, index).
constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// FNV-1a of a stream label, so named streams get stable distinct subseeds.
constexpr std::uint64_t stream_id(std::string_view label) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : label) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index) {
    return splitmix64(splitmix64(master ^ splitmix64(stream)) + index);
}

/// mt19937_64 with explicit uniform and Box–Muller transforms, so the output
/// sequence depends only on the seed and not on the standard library.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

private:
    std::mt19937_64 eng_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

struct PathBundle {
    int paths = 0;
    int steps = 0;
    double horizon = 0.0;
    std::uint64_t seed = 0;
    Matrix increments;  ///< paths × steps

    Vector terminal() const { return increments.rowwise().sum(); }
};

/// n Gaussian paths with increments of variance T/K; path p uses subseed derive_seed(seed, "paths", p).
inline PathBundle sample_paths(int n, int steps, double horizon, std::uint64_t seed) {
    detail::require(n >= 1, "sample_paths: need at least one path");
    detail::require(steps >= 1, "sample_paths: need at least one step");
    detail::require(std::isfinite(horizon) && horizon > 0.0, "sample_paths: horizon must be > 0");
    PathBundle b{n, steps, horizon, seed, Matrix(n, steps)};
    const double sd = std::sqrt(horizon / steps);
    for (int p = 0; p < n; ++p) {
        Rng rng(derive_seed(seed, stream_id("paths"), static_cast<std::uint64_t>(p)));
        for (int k = 0; k < steps; ++k) b.increments(p, k) = sd * rng.normal();
    }
    return b;
}

}  // namespace wentzell
