#include "wentzell/carleman.hpp"
#include "wentzell/instances.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace wentzell;

namespace {

std::vector<double> log_grid(double lo, double hi, int per_decade) {
    std::vector<double> s;
    const int n = static_cast<int>(std::lround(std::log10(hi / lo) * per_decade));
    for (int i = 0; i <= n; ++i) s.push_back(lo * std::pow(10.0, static_cast<double>(i) / per_decade));
    return s;
}

System zero_system(const MeshSpec& spec, int steps, double horizon = 1.0) {
    auto [geo, ops] = build_mesh(spec);
    return System(ops, build_tree(steps, horizon), Coefficients::zero(ops, steps));
}

SemimartingaleModel geometric_brownian(Eigen::Index nodes, double sigma) {
    return SemimartingaleModel::spatially_constant(
        nodes, [=](double t, double w) { return std::exp(sigma * w - 0.5 * sigma * sigma * t); },
        [=](double t, double w) { return sigma * std::exp(sigma * w - 0.5 * sigma * sigma * t); });
}

void expect_same_report(const CarlemanReport& a, const CarlemanReport& b, double tol) {
    ASSERT_EQ(a.points.size(), b.points.size());
    for (std::size_t i = 0; i < a.points.size(); ++i) {
        EXPECT_NEAR(a.points[i].ratio, b.points[i].ratio, tol * std::max(1.0, a.points[i].ratio));
        EXPECT_NEAR(a.points[i].lhs, b.points[i].lhs, tol * std::max(1.0, a.points[i].lhs));
    }
    EXPECT_EQ(a.s_emp, b.s_emp);
    EXPECT_NEAR(a.c_emp, b.c_emp, tol * std::max(1.0, a.c_emp));
}

}  // namespace

TEST(Weights, ClosedFormValues) {
    const auto v0 = weights_eval({2.5, 3.0}, 0.0);
    EXPECT_DOUBLE_EQ(v0.phi, 1.0);
    EXPECT_DOUBLE_EQ(v0.theta, std::exp(2.5));
    EXPECT_NEAR(weights_eval({1.0, std::numbers::ln2}, 1.0).phi, 2.0, 1e-15);
    for (double t : {0.0, 0.3, 2.0}) EXPECT_EQ(weights_eval({0.0, 1.7}, t).theta, 1.0);
    EXPECT_THROW(weights_eval({1.0, 1.0}, -0.1), InvalidSpecError);
}

TEST(Weights, BoundedBelowAndIncreasing) {
    Rng rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        const CarlemanWeights w{rng.uniform(0.0, 5.0), rng.uniform(0.1, 3.0)};
        const double t = rng.uniform(0.0, 1.0), dt = rng.uniform(1e-3, 0.5);
        EXPECT_GE(w.theta(t) * w.theta(t), std::exp(2.0 * w.s) * (1.0 - 1e-15));
        EXPECT_GT(w.phi(t + dt), w.phi(t));
        if (w.s > 0.0) { EXPECT_GT(w.theta(t + dt), w.theta(t)); }
        EXPECT_NEAR(w.theta_sq_ratio(t, t + dt), std::pow(w.theta(t) / w.theta(t + dt), 2), 1e-12);
    }
}

TEST(Cutoff, SupportAndRange) {
    const CutoffSchedule c{0.1, 0.3, 0.5};
    EXPECT_NO_THROW(c.validate(1.0));
    for (int i = 0; i <= 400; ++i) {
        const double t = i / 400.0;
        const double e = c.eta(t);
        EXPECT_GE(e, 0.0);
        EXPECT_LE(e, 1.0);
        if (t <= c.t2) { EXPECT_EQ(e, 0.0); }
        if (t >= c.t1) { EXPECT_EQ(e, 1.0); }
        if (t <= c.t2 || t >= c.t1) { EXPECT_EQ(c.eta_prime(t), 0.0); }
        if (t > c.t2 + 1e-3 && t < c.t1 - 1e-3) {
            const double h = 1e-6;
            EXPECT_NEAR(c.eta_prime(t), (c.eta(t + h) - c.eta(t - h)) / (2 * h), 1e-6);
            EXPECT_GE(c.eta_prime(t), 0.0);
        }
    }
}

TEST(Cutoff, OrderingViolationsNameTheInvariant) {
    for (const CutoffSchedule& bad : {CutoffSchedule{0.0, 0.2, 0.5}, CutoffSchedule{0.3, 0.2, 0.5},
                                      CutoffSchedule{0.1, 0.5, 0.5}, CutoffSchedule{0.1, 0.2, 1.5}}) {
        try {
            bad.validate(1.0);
            ADD_FAILURE() << "accepted t2=" << bad.t2 << " t1=" << bad.t1 << " t0=" << bad.t0;
        } catch (const InvalidSpecError& e) {
            EXPECT_NE(std::string(e.what()).find("ordering"), std::string::npos);
        }
    }
}

TEST(Kappa, ReferenceValueAgainstExtendedPrecision) {
    const long double gap = 2.0L * (std::exp(0.5L) - std::exp(0.4L));
    const long double ref = gap / (1.0L + gap);
    EXPECT_NEAR(kappa(1.0, 0.5, 0.4, 1.0), static_cast<double>(ref), 1e-15);
    EXPECT_NEAR(kappa(1.0, 0.5, 0.4, 1.0), 0.23885, 5e-6);
}

TEST(Kappa, Limits) {
    EXPECT_LT(kappa(1.0, 0.5, 0.4, 1e12), 1e-9);
    EXPECT_LT(kappa(1.0, 0.5, 0.5 - 1e-9, 1.0), 1e-8);
    EXPECT_GT(kappa(1.0, 0.5, 0.5 - 1e-9, 1.0), 0.0);
    EXPECT_THROW(kappa(1.0, 0.4, 0.5, 1.0), InvalidSpecError);
    EXPECT_THROW(kappa(1.0, 0.4, 0.4, 1.0), InvalidSpecError);
    EXPECT_THROW(kappa(0.0, 0.5, 0.4, 1.0), InvalidSpecError);
    EXPECT_THROW(kappa(1.0, 0.5, 0.4, 0.0), InvalidSpecError);
}

TEST(Kappa, AlwaysStrictlyInsideUnitInterval) {
    Rng rng(12);
    for (int trial = 0; trial < 2000; ++trial) {
        const double t0 = rng.uniform(1e-3, 2.0);
        const double t1 = t0 * rng.uniform(0.0, 0.999);
        const double lam = std::exp(rng.uniform(-3.0, 2.0));
        const double c = std::exp(rng.uniform(-10.0, 10.0));
        const double k = kappa(lam, t0, t1, c);
        EXPECT_GT(k, 0.0);
        EXPECT_LT(k, 1.0);
    }
}

TEST(Identity, ZeroProcessHasZeroResidual) {
    auto [geo, ops] = build_mesh({MeshMode::disk, 1.0, 3, 8});
    const auto zero = SemimartingaleModel::spatially_constant(
        ops.node_count(), [](double, double) { return 0.0; }, [](double, double) { return 0.0; });
    for (auto variant : {IdentityVariant::bulk, IdentityVariant::boundary})
        for (const auto& l : weighted_identity_residual(ops, zero, {1.0, {1.0, 1.0}, variant, false}, 1.0, {4, 8, 16}))
            EXPECT_EQ(l.residual, 0.0);
}

TEST(Identity, DeterministicGrowthConvergesAtFirstOrder) {
    auto [geo, ops] = build_mesh({MeshMode::interval, 1.0, 9, 0});
    const auto ode = SemimartingaleModel::spatially_constant(
        ops.node_count(), [](double t, double) { return std::exp(0.8 * t); }, [](double, double) { return 0.0; });
    for (auto variant : {IdentityVariant::bulk, IdentityVariant::boundary})
        for (double b : {1.0, -1.0}) {
            const auto lv = weighted_identity_residual(ops, ode, {b, {1.0, 1.0}, variant, false}, 1.0, {8, 16, 32, 64});
            EXPECT_GE(observed_order(lv), 0.9) << to_string(variant) << " b=" << b;
            for (std::size_t i = 1; i < lv.size(); ++i) EXPECT_LT(lv[i].residual, 0.6 * lv[i - 1].residual);
        }
}

TEST(Identity, ItoTermsAreEssential) {
    for (const MeshSpec& spec : {MeshSpec{MeshMode::interval, 1.0, 9, 0}, MeshSpec{MeshMode::disk, 1.0, 2, 6}}) {
        auto [geo, ops] = build_mesh(spec);
        const auto gbm = geometric_brownian(ops.node_count(), 1.0);
        const std::vector<int> ladder{64, 128, 256, 512};
        for (auto variant : {IdentityVariant::bulk, IdentityVariant::boundary})
            for (double b : {1.0, -1.0}) {
                if (spec.mode == MeshMode::disk && (variant == IdentityVariant::bulk) != (b > 0.0)) continue;
                const auto full = weighted_identity_residual(ops, gbm, {b, {1.0, 1.0}, variant, false}, 1.0, ladder);
                const auto ablated = weighted_identity_residual(ops, gbm, {b, {1.0, 1.0}, variant, true}, 1.0, ladder);
                EXPECT_GE(observed_order(full), 0.9);
                EXPECT_GE(ablated.back().residual, 10.0 * full.back().residual);
                EXPECT_LT(observed_order(ablated), 0.5);
            }
    }
}

TEST(Identity, SpaceDependentProcessConverges) {
    auto [geo, ops] = build_mesh({MeshMode::disk, 1.0, 3, 8});
    Rng rng(3);
    const Vector p = smooth_profile(geo, rng), q = smooth_profile(geo, rng);
    SemimartingaleModel model;
    model.value = [=](double t, double w) -> Vector { return p * std::exp(0.7 * w - 0.245 * t) + q * t; };
    model.diffusion = [=](double t, double w) -> Vector { return 0.7 * p * std::exp(0.7 * w - 0.245 * t); };
    for (auto variant : {IdentityVariant::bulk, IdentityVariant::boundary})
        for (double b : {1.0, -1.0}) {
            const auto lv = weighted_identity_residual(ops, model, {b, {1.0, 1.0}, variant, false}, 1.0, {16, 32, 64, 128});
            EXPECT_GE(observed_order(lv), 0.9) << to_string(variant) << " b=" << b;
        }
}

TEST(Identity, InvalidInputs) {
    auto [geo, ops] = build_mesh({MeshMode::interval, 1.0, 4, 0});
    auto model = SemimartingaleModel::spatially_constant(ops.node_count(), [](double, double) { return 1.0; }, {});
    EXPECT_THROW(weighted_identity_residual(ops, model, {}, 1.0, {4}), InvalidSpecError);
    model = geometric_brownian(ops.node_count(), 0.3);
    EXPECT_THROW(weighted_identity_residual(ops, model, {0.5, {}, IdentityVariant::bulk, false}, 1.0, {4}),
                 InvalidSpecError);
    EXPECT_THROW(weighted_identity_residual(ops, model, {}, 1.0, {}), InvalidSpecError);
    const auto wrong = geometric_brownian(3, 0.3);
    EXPECT_THROW(weighted_identity_residual(ops, wrong, {}, 1.0, {4}), ShapeError);
}

TEST(CarlemanForward, ZeroDataGivesZeroReport) {
    const System sys = zero_system({MeshMode::disk, 1.0, 3, 8}, 6);
    const ForwardInstance inst{Vector::Zero(sys.nodes()), TreeField::zeros(sys.nodes(), 6), TreeField::zeros(sys.nodes(), 6)};
    const CarlemanReport r = carleman_forward_check(sys, inst, {log_grid(0.1, 10.0, 4), {0.5, 1.0}});
    for (const auto& p : r.points) {
        EXPECT_EQ(p.lhs, 0.0);
        EXPECT_EQ(p.rhs, 0.0);
        EXPECT_EQ(p.ratio, 0.0);
    }
    EXPECT_EQ(r.c_emp, 0.0);
}

TEST(CarlemanForward, IgnoresSuppliedCoefficients) {
    auto [geo, ops] = build_mesh({MeshMode::interval, 1.0, 8, 0});
    const ScenarioTree tree = build_tree(6, 1.0);
    const System with(ops, tree, Coefficients::constant(ops, 6, 0.5, 0.4, -0.3, 0.2));
    const System without(ops, tree, Coefficients::zero(ops, 6));
    Rng rng(4);
    const ForwardInstance inst{smooth_profile(geo, rng), smooth_tree_field(geo, tree, 6, rng),
                               smooth_tree_field(geo, tree, 6, rng)};
    const ParameterGrid grid{log_grid(0.1, 10.0, 4), {1.0}};
    expect_same_report(carleman_forward_check(with, inst, grid), carleman_forward_check(without, inst, grid), 0.0);
}

TEST(CarlemanForward, RatioBoundedOverOneDecadeAboveThreshold) {
    auto [geo, ops] = build_mesh({MeshMode::interval, 1.0, 16, 0});
    const ScenarioTree tree = build_tree(16, 1.0);
    const System sys(ops, tree, Coefficients::zero(ops, 16));
    const ParameterGrid grid{log_grid(0.01, 100.0, 8), {1.0}};
    for (int i = 0; i < 10; ++i) {
        Rng rng(derive_seed(5, stream_id("carleman"), static_cast<std::uint64_t>(i)));
        const ForwardInstance inst{smooth_profile(geo, rng), smooth_tree_field(geo, tree, 16, rng),
                                   smooth_tree_field(geo, tree, 16, rng)};
        const CarlemanReport r = carleman_forward_check(sys, inst, grid);
        ASSERT_EQ(r.s_emp.size(), 1u);
        EXPECT_TRUE(std::isfinite(r.c_emp));
        EXPECT_GT(r.c_emp, 0.0);
        for (const auto& p : r.points) {
            EXPECT_GE(p.lhs, 0.0);
            EXPECT_GE(p.rhs, 0.0);
            if (p.s >= r.s_emp[0] && p.s <= 10.0 * r.s_emp[0] * (1 + 1e-12)) { EXPECT_LE(p.ratio, r.c_emp); }
        }
    }
}

TEST(CarlemanForward, WeightedIntegralsIncreaseWithS) {
    auto [geo, ops] = build_mesh({MeshMode::disk, 1.0, 3, 8});
    const ScenarioTree tree = build_tree(8, 1.0);
    const System sys(ops, tree, Coefficients::zero(ops, 8));
    Rng rng(6);
    const ForwardInstance inst{smooth_profile(geo, rng), smooth_tree_field(geo, tree, 8, rng),
                               smooth_tree_field(geo, tree, 8, rng)};
    const ParameterGrid grid{log_grid(0.1, 10.0, 6), {1.0}};
    const CarlemanReport r = carleman_forward_check(sys, inst, grid);
    const int s_power[6] = {1, 0, 1, 1, 0, 1};
    for (std::size_t i = 1; i < r.points.size(); ++i) {
        const auto& a = r.points[i - 1];
        const auto& b = r.points[i];
        for (std::size_t t = 0; t < 6; ++t) {
            // Undo the s power and the common θ²(T) normalization to recover E∫θ²(...).
            const double wa = std::log(a.lhs_terms[t]) + a.log_dropped_factor - s_power[t] * std::log(a.s);
            const double wb = std::log(b.lhs_terms[t]) + b.log_dropped_factor - s_power[t] * std::log(b.s);
            EXPECT_GT(wb, wa);
        }
    }
}

TEST(CarlemanBackward, ZeroSourcesGiveZeroReport) {
    const System sys = zero_system({MeshMode::interval, 1.0, 8, 0}, 5);
    const CarlemanReport r = carleman_backward_check(sys, {TreeField::zeros(sys.nodes(), 5), {}}, {{0.5, 1.0, 2.0}, {1.0}});
    for (const auto& p : r.points) {
        for (double v : p.lhs_terms) EXPECT_EQ(v, 0.0);
        EXPECT_EQ(p.ratio, 0.0);
    }
}

TEST(CarlemanBackward, DeterministicSourcesHaveNoMartingaleTerms) {
    auto [geo, ops] = build_mesh({MeshMode::disk, 1.0, 3, 8});
    const ScenarioTree tree = build_tree(8, 1.0);
    const System sys(ops, tree, Coefficients::zero(ops, 8));
    Rng rng(7);
    const BackwardInstance inst{deterministic_tree_field(geo, tree, 8, rng), {}};
    const CarlemanReport r = carleman_backward_check(sys, inst, {log_grid(0.1, 10.0, 4), {1.0, 2.0}});
    for (const auto& p : r.points) {
        EXPECT_EQ(p.lhs_terms[2], 0.0);
        EXPECT_EQ(p.lhs_terms[5], 0.0);
        EXPECT_GT(p.lhs, 0.0);
        EXPECT_TRUE(std::isfinite(p.ratio));
    }
    EXPECT_EQ(r.s_emp.size(), 2u);
}

TEST(CarlemanBackward, FamilyRatioBoundedAboveThreshold) {
    auto [geo, ops] = build_mesh({MeshMode::interval, 1.0, 16, 0});
    const ScenarioTree tree = build_tree(16, 1.0);
    const System sys(ops, tree, Coefficients::zero(ops, 16));
    const ParameterGrid grid{log_grid(0.01, 100.0, 8), {1.0}};
    for (int i = 0; i < 10; ++i) {
        Rng rng(derive_seed(9, stream_id("carleman"), static_cast<std::uint64_t>(i)));
        const CarlemanReport r = carleman_backward_check(sys, {smooth_tree_field(geo, tree, 16, rng), {}}, grid);
        EXPECT_TRUE(std::isfinite(r.c_emp));
        EXPECT_GT(r.points.front().lhs_terms[2], 0.0);
        for (const auto& p : r.points)
            if (p.s >= r.s_emp[0] && p.s <= 10.0 * r.s_emp[0] * (1 + 1e-12)) { EXPECT_LE(p.ratio, r.c_emp); }
    }
}

TEST(CarlemanBackward, NonzeroTerminalRejected) {
    const System sys = zero_system({MeshMode::interval, 1.0, 4, 0}, 3);
    const BackwardInstance inst{TreeField::zeros(sys.nodes(), 3), Vector::Ones(sys.nodes())};
    EXPECT_THROW(carleman_backward_check(sys, inst, {{1.0}, {1.0}}), InvalidSpecError);
}

TEST(CarlemanGrid, Validation) {
    const System sys = zero_system({MeshMode::interval, 1.0, 4, 0}, 3);
    const ForwardInstance inst{Vector::Zero(sys.nodes()), TreeField::zeros(sys.nodes(), 3), TreeField::zeros(sys.nodes(), 3)};
    EXPECT_THROW(carleman_forward_check(sys, inst, {{}, {1.0}}), InvalidSpecError);
    EXPECT_THROW(carleman_forward_check(sys, inst, {{1.0}, {}}), InvalidSpecError);
    EXPECT_THROW(carleman_forward_check(sys, inst, {{2.0, 1.0}, {1.0}}), InvalidSpecError);
    EXPECT_THROW(carleman_backward_check(sys, {TreeField::zeros(sys.nodes(), 3), {}}, {{}, {1.0}}), InvalidSpecError);
    EXPECT_THROW(carleman_forward_check(sys, {Vector::Zero(2), {}, {}}, {{1.0}, {1.0}}), ShapeError);
}

TEST(CarlemanInvariance, ThreadCountAndSiblingRelabeling) {
    auto [geo, ops] = build_mesh({MeshMode::disk, 1.0, 3, 8});
    const ScenarioTree tree = build_tree(8, 1.0);
    const System sys(ops, tree, Coefficients::zero(ops, 8));
    Rng rng(8);
    const ForwardInstance fwd{smooth_profile(geo, rng), smooth_tree_field(geo, tree, 8, rng),
                              smooth_tree_field(geo, tree, 8, rng)};
    const BackwardInstance bwd{smooth_tree_field(geo, tree, 8, rng), {}};
    const ParameterGrid grid{log_grid(0.05, 20.0, 5), {0.5, 1.0, 1.5}};

    const CarlemanReport f1 = carleman_forward_check(sys, fwd, grid, 1);
    const CarlemanReport b1 = carleman_backward_check(sys, bwd, grid, 1);
    for (int threads : {2, 3, 7}) {
        expect_same_report(f1, carleman_forward_check(sys, fwd, grid, threads), 0.0);
        expect_same_report(b1, carleman_backward_check(sys, bwd, grid, threads), 0.0);
    }
    // W ↦ −W: the drift is mirrored and the noise integrand changes sign.
    const ForwardInstance fwd_m{fwd.initial, fwd.drift.mirrored(), -1.0 * fwd.noise.mirrored()};
    expect_same_report(f1, carleman_forward_check(sys, fwd_m, grid), 1e-10);
    expect_same_report(b1, carleman_backward_check(sys, {bwd.source.mirrored(), {}}, grid), 1e-10);
}

TEST(CarlemanRefinement, EmpiricalConstantStable) {
    auto run = [](int nodes, int steps, bool forward) {
        auto [geo, ops] = build_mesh({MeshMode::interval, 1.0, nodes, 0});
        const ScenarioTree tree = build_tree(steps, 1.0);
        const System sys(ops, tree, Coefficients::zero(ops, steps));
        const ParameterGrid grid{log_grid(0.01, 100.0, 8), {1.0}};
        Rng rng(21);
        if (forward)
            return carleman_forward_check(sys,
                                          {smooth_profile(geo, rng), smooth_tree_field(geo, tree, steps, rng),
                                           smooth_tree_field(geo, tree, steps, rng)},
                                          grid)
                .c_emp;
        return carleman_backward_check(sys, {smooth_tree_field(geo, tree, steps, rng), {}}, grid).c_emp;
    };
    for (bool forward : {true, false}) {
        const double coarse = run(16, 16, forward), fine = run(32, 32, forward);
        EXPECT_LE(fine / coarse, 2.0);
        EXPECT_GE(fine / coarse, 0.5);
    }
}
