#include "wentzell/noise.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

using namespace wentzell;

TEST(Tree, SingleStepHasTwoEquallyLikelyLeaves) {
    const ScenarioTree tree = build_tree(1, 1.0);
    ASSERT_EQ(tree.nodes_at(1), 2);
    EXPECT_DOUBLE_EQ(tree.w_value(1, 0), -1.0);
    EXPECT_DOUBLE_EQ(tree.w_value(1, 1), 1.0);
    EXPECT_DOUBLE_EQ(tree.probability(1, 0), 0.5);
    EXPECT_DOUBLE_EQ(tree.probability(1, 1), 0.5);
}

TEST(Tree, RecombinationCountAndSupport) {
    const ScenarioTree tree = build_tree(3, 1.5);
    ASSERT_EQ(tree.nodes_at(3), 4);
    const double s = tree.sqrt_dt();
    EXPECT_NEAR(tree.w_value(3, 0), -3 * s, 1e-15);
    EXPECT_NEAR(tree.w_value(3, 1), -s, 1e-15);
    EXPECT_NEAR(tree.w_value(3, 2), s, 1e-15);
    EXPECT_NEAR(tree.w_value(3, 3), 3 * s, 1e-15);
    EXPECT_EQ(tree.total_nodes(), 10u);
}

TEST(Tree, TerminalVarianceIsHorizon) {
    for (int K : {1, 2, 5, 17, 40}) {
        const double T = 0.7;
        const ScenarioTree tree = build_tree(K, T);
        std::vector<double> w2;
        for (int j = 0; j <= K; ++j) w2.push_back(tree.w_value(K, j) * tree.w_value(K, j));
        EXPECT_NEAR(tree.expectation(K, w2), T, 1e-12);
    }
}

TEST(Tree, ProbabilitiesSumToOneAndMomentsPerStep) {
    const ScenarioTree tree = build_tree(12, 2.0);
    for (int k = 0; k <= 12; ++k) EXPECT_NEAR(tree.probabilities(k).sum(), 1.0, 1e-14);
    const double dx = tree.sqrt_dt();
    // ±√Δt with probability ½: moments (0, Δt, 0).
    EXPECT_DOUBLE_EQ(0.5 * dx - 0.5 * dx, 0.0);
    EXPECT_NEAR(0.5 * dx * dx + 0.5 * dx * dx, tree.dt(), 1e-15);
}

TEST(Tree, ConstantAndMartingaleMeans) {
    const ScenarioTree tree = build_tree(9, 1.0);
    for (int k = 0; k <= 9; ++k) {
        std::vector<double> c(static_cast<std::size_t>(k) + 1, 3.25), w;
        for (int j = 0; j <= k; ++j) w.push_back(tree.w_value(k, j));
        EXPECT_NEAR(tree.expectation(k, c), 3.25, 1e-13);
        EXPECT_NEAR(tree.expectation(k, w), 0.0, 1e-13);
    }
}

TEST(Tree, ExpectationsMatchBruteForceOverAllPaths) {
    // Enumerate all 2^K raw increment sequences and average an adapted functional.
    const int K = 12;
    const ScenarioTree tree = build_tree(K, 1.0);
    auto functional = [](double w) { return w * w * w + std::cos(w); };
    double brute = 0.0, brute_cube = 0.0;
    const unsigned paths = 1u << K;
    for (unsigned p = 0; p < paths; ++p) {
        double w = 0.0;
        for (int k = 0; k < K; ++k) w += ((p >> k) & 1u) ? tree.sqrt_dt() : -tree.sqrt_dt();
        brute += functional(w) / paths;
        brute_cube += w * w * w / paths;
    }
    std::vector<double> values, cubes;
    for (int j = 0; j <= K; ++j) {
        values.push_back(functional(tree.w_value(K, j)));
        cubes.push_back(std::pow(tree.w_value(K, j), 3));
    }
    EXPECT_NEAR(tree.expectation(K, values), brute, 1e-12);
    EXPECT_NEAR(tree.expectation(K, cubes), 0.0, 1e-12);
    EXPECT_NEAR(brute_cube, 0.0, 1e-12);
}

TEST(Tree, InvalidInputs) {
    EXPECT_THROW(build_tree(0, 1.0), InvalidSpecError);
    EXPECT_THROW(build_tree(3, 0.0), InvalidSpecError);
    const ScenarioTree tree = build_tree(3, 1.0);
    std::vector<double> wrong(3, 1.0);
    EXPECT_THROW(tree.expectation(3, wrong), ShapeError);
}

TEST(Tree, AdaptednessCheckOnFields) {
    TreeField f = TreeField::zeros(2, 3);
    EXPECT_NO_THROW(f.check(2, 3, "f"));
    f.level(2) = Matrix::Zero(2, 4);
    EXPECT_THROW(f.check(2, 3, "f"), AdaptednessError);
    EXPECT_THROW(TreeField::zeros(3, 3).check(2, 3, "g"), ShapeError);
}

TEST(Paths, SameSeedSameBundle) {
    const PathBundle a = sample_paths(50, 8, 1.0, 99);
    const PathBundle b = sample_paths(50, 8, 1.0, 99);
    EXPECT_TRUE((a.increments.array() == b.increments.array()).all());
    const PathBundle c = sample_paths(50, 8, 1.0, 100);
    EXPECT_FALSE((a.increments.array() == c.increments.array()).all());
}

TEST(Paths, TerminalMeanAndVariance) {
    const int n = 10000;
    const PathBundle b = sample_paths(n, 10, 1.0, 2024);
    const Vector wt = b.terminal();
    const double mean = wt.mean();
    const double var = (wt.array() - mean).square().sum() / (n - 1);
    EXPECT_LT(std::abs(mean), 3.0 / std::sqrt(n));
    EXPECT_LT(std::abs(var - 1.0), 0.1);
}

TEST(Paths, ZeroPathsRejected) { EXPECT_THROW(sample_paths(0, 4, 1.0, 1), InvalidSpecError); }

TEST(Rng, SubseedsAreStable) {
    EXPECT_EQ(derive_seed(1, stream_id("paths"), 0), derive_seed(1, stream_id("paths"), 0));
    EXPECT_NE(derive_seed(1, stream_id("paths"), 0), derive_seed(1, stream_id("paths"), 1));
    EXPECT_NE(stream_id("a"), stream_id("b"));
    Rng r(5);
    for (int i = 0; i < 1000; ++i) {
        const double u = r.uniform();
        EXPECT_GE(u, 0.0);
        EXPECT_LT(u, 1.0);
    }
}
