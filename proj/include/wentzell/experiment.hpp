#pragma once

// Turns a parsed configuration into the solver objects it describes.

#include "wentzell/config.hpp"
#include "wentzell/instances.hpp"

#include <optional>

namespace wentzell {

struct Experiment {
    ExperimentConfig config;
    MeshGeometry geo;
    std::optional<GameProblem> problem;  ///< optional only because GameProblem has no default state

    const GameProblem& game() const { return *problem; }
};

namespace detail {

inline Matrix field_matrix(const ScalarField& f, Eigen::Index rows, int steps) {
    Matrix m(rows, steps);
    for (int k = 0; k < steps; ++k)
        for (Eigen::Index i = 0; i < rows; ++i) m(i, k) = f.at(k, static_cast<int>(i));
    return m;
}

inline TreeField target_field(const ScalarField& f, const Mask& mask, Eigen::Index interior, int steps) {
    TreeField out = TreeField::zeros(interior, steps);
    for (int k = 0; k < steps; ++k) {
        Vector column(interior);
        for (Eigen::Index i = 0; i < interior; ++i)
            column(i) = mask[static_cast<std::size_t>(i)] ? f.at(k, static_cast<int>(i)) : 0.0;
        for (int j = 0; j <= k; ++j) out.node(k, j) = column;
    }
    return out;
}

inline Vector initial_state(const InitialConfig& in, const MeshGeometry& geo, std::uint64_t seed) {
    const Eigen::Index n = geo.node_count();
    Vector y0;
    if (in.profile == "smooth") {
        Rng rng(derive_seed(seed, stream_id("initial"), 0));
        y0 = smooth_profile(geo, rng);
    } else if (in.profile == "bump") {
        y0 = bump_profile(geo, {in.center_x, in.center_y}, in.width);
    } else if (in.profile == "constant") {
        y0 = Vector::Constant(n, in.value);
    } else if (in.profile == "csv") {
        y0 = Eigen::Map<const Vector>(in.data.data(), static_cast<Eigen::Index>(in.data.size()));
    } else {
        y0 = Vector::Zero(n);
    }
    y0 *= in.scale;
    if (in.norm > 0.0) {
        const double current = stacked_norm(geo, y0);
        require(current > 0.0, "initial: cannot rescale a zero profile to norm " + std::to_string(in.norm));
        y0 *= in.norm / current;
    }
    return y0;
}

}  // namespace detail

/// Builds and validates every object the configuration describes.
inline Experiment build_experiment(const ExperimentConfig& cfg) {
    auto [geo, ops] = build_mesh(cfg.mesh);
    const Eigen::Index ni = ops.interior_count(), nb = ops.boundary_count();
    const int K = cfg.steps;
    const Coefficients coeffs = Coefficients::from_parts(
        detail::field_matrix(cfg.coefficients[0], ni, K), detail::field_matrix(cfg.coefficients[1], ni, K),
        detail::field_matrix(cfg.coefficients[2], nb, K), detail::field_matrix(cfg.coefficients[3], nb, K));
    System sys(ops, build_tree(K, cfg.horizon), coeffs);

    ObjectiveSpec spec;
    spec.alpha = cfg.alpha;
    spec.beta = cfg.beta;
    for (int i = 0; i < 2; ++i) {
        spec.masks.control[i] = make_mask(geo, cfg.regions[static_cast<std::size_t>(i)], region_names[static_cast<std::size_t>(i)]);
        spec.masks.tracking[i] =
            make_mask(geo, cfg.regions[static_cast<std::size_t>(i) + 2], region_names[static_cast<std::size_t>(i) + 2]);
    }
    for (std::size_t i = 0; i < 2; ++i)
        spec.targets[i] = detail::target_field(cfg.targets[i], spec.masks.tracking[i], ni, K);

    Experiment out{cfg, geo, std::nullopt};
    out.config.nash.seed = cfg.seed;
    out.problem.emplace(std::move(sys), std::move(spec), detail::initial_state(cfg.initial, geo, cfg.seed));
    return out;
}

}  // namespace wentzell
