#pragma once

// Shared builders for test games.

#include "wentzell/instances.hpp"
#include "wentzell/nash.hpp"

#include <optional>

namespace testing_support {

using namespace wentzell;

struct GameSetup {
    MeshGeometry geo;
    std::optional<GameProblem> problem;
};

inline RegionSpec index_range(int lo, int hi) {
    RegionSpec r;
    r.index_range = std::pair{lo, hi};
    return r;
}

/// Tracking targets p(x)·(1 + c·W) on each tracking mask.
inline std::array<TreeField, 2> adapted_targets(const MeshGeometry& geo, const ScenarioTree& tree,
                                                const RegionMasks& masks, double c, std::uint64_t seed) {
    std::array<TreeField, 2> out;
    const Eigen::Index ni = geo.interior_count();
    for (int i = 0; i < 2; ++i) {
        Rng rng(seed + static_cast<std::uint64_t>(i));
        const Vector p = smooth_profile(geo, rng).head(ni).cwiseProduct(mask_vector(masks.tracking[i]));
        out[static_cast<std::size_t>(i)] = TreeField::zeros(ni, tree.depth());
        for (int k = 0; k < tree.depth(); ++k)
            for (int j = 0; j <= k; ++j) out[static_cast<std::size_t>(i)].node(k, j) = p * (1.0 + c * tree.w_value(k, j));
    }
    return out;
}

struct GameOptions {
    MeshSpec mesh{MeshMode::interval, 1.0, 3, 0};
    int steps = 2;
    double horizon = 1.0;
    double a1 = 0.3, a2 = 0.4, b1 = -0.2, b2 = 0.3;
    std::array<double, 2> alpha{1.0, 2.0};
    std::array<double, 2> beta{0.5, 0.8};
    double target_noise = 0.5;
    bool zero_targets = false;
    std::uint64_t seed = 42;
};

/// Control regions overlap in the middle; player 1 tracks on all of G, player 2 on the right half.
inline GameSetup make_game(const GameOptions& o = {}) {
    auto [geo, ops] = build_mesh(o.mesh);
    const int n = static_cast<int>(ops.interior_count());
    System sys(ops, build_tree(o.steps, o.horizon), Coefficients::constant(ops, o.steps, o.a1, o.a2, o.b1, o.b2));
    ObjectiveSpec spec;
    spec.alpha = o.alpha;
    spec.beta = o.beta;
    spec.masks.control[0] = make_mask(geo, index_range(0, (n + 1) / 2 + 1), "G1");
    spec.masks.control[1] = make_mask(geo, index_range(n / 2, n), "G2");
    spec.masks.tracking[0] = make_mask(geo, index_range(0, n), "G1d");
    spec.masks.tracking[1] = make_mask(geo, index_range(n / 2, n), "G2d");
    spec.targets = o.zero_targets ? ObjectiveSpec::zero_targets(n, o.steps)
                                  : adapted_targets(geo, sys.tree, spec.masks, o.target_noise, o.seed);
    Rng rng(o.seed + 100);
    Vector y0 = smooth_profile(geo, rng);
    GameSetup out{geo, std::nullopt};
    out.problem.emplace(std::move(sys), std::move(spec), std::move(y0));
    return out;
}

}  // namespace testing_support
