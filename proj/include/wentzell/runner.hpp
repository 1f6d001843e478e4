#pragma once

// Subcommand runner: each subcommand builds the experiment, runs one probe
// and writes JSON reports and CSV tables into the output directory. All
// randomness derives from the config seed through derive_seed(seed,
// stream_id(name), index), so files are byte-identical across reruns and
// thread counts.

#include "wentzell/experiment.hpp"
#include "wentzell/parallel.hpp"
#include "wentzell/probes.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace wentzell {

using Json = nlohmann::json;

inline const std::vector<std::string>& subcommands() {
    static const std::vector<std::string> names{"forward",      "nash",        "carleman-forward",
                                                "carleman-backward", "identity", "interpolate",
                                                "uniqueness",   "stability",   "sweep"};
    return names;
}

namespace runner_detail {

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline Json finite(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline Json finite(const std::vector<double>& v) {
    Json a = Json::array();
    for (double x : v) a.push_back(finite(x));
    return a;
}

template <std::size_t N>
Json finite(const std::array<double, N>& v) {
    return finite(std::vector<double>(v.begin(), v.end()));
}

/// Collects CSV rows; every row is written with `\n` and full-precision floats.
class Table {
public:
    explicit Table(const std::string& header) { out_ << header << '\n'; }

    template <class... Cells>
    void row(const Cells&... cells) {
        bool first = true;
        ((out_ << (first ? "" : ",") << cell(cells), first = false), ...);
        out_ << '\n';
    }

    std::string str() const { return out_.str(); }

private:
    static std::string cell(double v) { return num(v); }
    static std::string cell(int v) { return std::to_string(v); }
    static std::string cell(long v) { return std::to_string(v); }
    static std::string cell(std::size_t v) { return std::to_string(v); }
    static std::string cell(const std::string& v) { return v; }
    static std::string cell(const char* v) { return v; }

    std::ostringstream out_;
};

class Output {
public:
    explicit Output(std::filesystem::path dir) : dir_(std::move(dir)) {
        std::error_code ec;
        std::filesystem::create_directories(dir_, ec);
        if (ec) throw IoError("cannot create output directory '" + dir_.string() + "': " + ec.message());
    }

    void write(const std::string& name, const std::string& text) {
        const auto path = dir_ / name;
        std::ofstream f(path, std::ios::binary | std::ios::trunc);
        if (!f) throw IoError("cannot write '" + path.string() + "'");
        f << text;
        if (!f) throw IoError("write failed for '" + path.string() + "'");
        files_.push_back(name);
    }

    void json(const std::string& name, const Json& j) { write(name, j.dump(2) + "\n"); }
    void csv(const std::string& name, const Table& t) { write(name, t.str()); }

    const std::vector<std::string>& files() const { return files_; }

private:
    std::filesystem::path dir_;
    std::vector<std::string> files_;
};

inline Json meta(const Experiment& e, const std::string& name) {
    const auto& c = e.config;
    return {{"subcommand", name},
            {"seed", std::to_string(c.seed)},
            {"mesh",
             {{"mode", c.mesh.mode == MeshMode::interval ? "interval" : "disk"},
              {"extent", c.mesh.extent},
              {"interior", c.mesh.interior},
              {"angular", c.mesh.mode == MeshMode::disk ? c.mesh.angular : 0},
              {"interior_nodes", e.geo.interior_count()},
              {"boundary_nodes", e.geo.boundary_count()}}},
            {"time", {{"horizon", c.horizon}, {"steps", c.steps}, {"dt", e.game().tree().dt()}}}};
}

inline std::uint64_t subseed(const Experiment& e, const std::string& stream, std::size_t index) {
    return derive_seed(e.config.seed, stream_id(stream), static_cast<std::uint64_t>(index));
}

inline Json nash_report_json(const NashReport& r) {
    return {{"iterations", r.iterations},
            {"converged", r.converged},
            {"update_norms", finite(r.update_norms)},
            {"fixed_point_residual", finite(r.fixed_point_residual)},
            {"relative_fixed_point_residual", finite(r.relative_fixed_point_residual)},
            {"max_gateaux", finite(r.max_gateaux)},
            {"contraction_factor", finite(r.contraction_factor)}};
}

/// Same experiment on another grid. Coefficient and target tables are tied to the
/// original grid, so they are dropped; the Carleman checks ignore both.
inline Experiment regridded(const Experiment& e, int interior, int angular, int steps) {
    ExperimentConfig c = e.config;
    c.mesh.interior = interior;
    c.mesh.angular = angular;
    c.steps = steps;
    for (auto& f : c.coefficients) f = ScalarField{};
    for (auto& f : c.targets) f = ScalarField{};
    if (c.initial.profile == "csv") c.initial = InitialConfig{};
    return build_experiment(c);
}

inline Experiment carleman_base(const Experiment& e) {
    const CarlemanConfig& k = e.config.carleman;
    if (k.interior == 0 && k.steps == 0) return e;
    return regridded(e, k.interior ? k.interior : e.config.mesh.interior, e.config.mesh.angular,
                     k.steps ? k.steps : e.config.steps);
}

inline Experiment refined(const Experiment& e) {
    const MeshSpec& m = e.config.mesh;
    return regridded(e, 2 * m.interior, m.mode == MeshMode::disk ? 2 * m.angular : m.angular, 2 * e.config.steps);
}

// ---------------------------------------------------------------------------

inline void run_forward(const Experiment& e, Output& out, int) {
    const GameProblem& p = e.game();
    const ScenarioTree& tree = p.tree();
    const ControlPair zero = ControlPair::zeros(p.system.interior(), p.system.steps());
    const StateTrajectory traj = forward_solve(p.system, zero, p.initial);
    const Matrix mean = mean_trajectory(traj, tree);

    Json j = meta(e, "forward");
    std::vector<double> energy;
    for (int k = 0; k <= tree.depth(); ++k) energy.push_back(level_energy(p.ops(), tree, k, traj.y.level(k)));
    j["level_energy"] = finite(energy);
    j["cost_at_zero_controls"] = finite(
        std::array<double, 2>{evaluate_functional(Player::first, p, zero), evaluate_functional(Player::second, p, zero)});
    j["terminal_mean_max_abs"] = finite(mean.col(tree.depth()).cwiseAbs().maxCoeff());
    out.json("forward.json", j);

    Table m("time_index,time,location_index,value");
    for (int k = 0; k < mean.cols(); ++k)
        for (Eigen::Index i = 0; i < mean.rows(); ++i) m.row(k, tree.time(k), static_cast<long>(i), mean(i, k));
    out.csv("forward_mean.csv", m);

    if (e.config.output.trajectory_csv) {
        Table t("level,node_index,location_index,value");
        for (int k = 0; k <= tree.depth(); ++k)
            for (int n = 0; n <= k; ++n)
                for (Eigen::Index i = 0; i < traj.y.rows(); ++i) t.row(k, n, static_cast<long>(i), traj.y.level(k)(i, n));
        out.csv("trajectory.csv", t);
    }
    if (e.config.output.tree_csv) {
        Table t("level,node_index,w,probability");
        for (int k = 0; k <= tree.depth(); ++k)
            for (int n = 0; n <= k; ++n) t.row(k, n, tree.w_value(k, n), tree.probability(k, n));
        out.csv("tree.csv", t);
    }
}

inline void run_nash(const Experiment& e, Output& out, int) {
    const GameProblem& p = e.game();
    const NashSolution sol = nash_solve(p, e.config.nash);
    const NashVerification v =
        verify_nash(p, sol.controls, e.config.verify_directions, 1e-6, subseed(e, "nash-verify", 0));

    Json j = meta(e, "nash");
    j["report"] = nash_report_json(sol.report);
    j["cost"] = finite(v.cost);
    j["verification"] = {{"max_gateaux", finite(v.max_gateaux)},
                         {"min_deviation_gain", finite(v.min_deviation_gain)},
                         {"directions", e.config.verify_directions},
                         {"stationary", v.stationary},
                         {"no_improving_deviation", v.no_improving_deviation},
                         {"verified", v.verified}};
    out.json("nash.json", j);

    Table c("player,level,node_index,location_index,value");
    for (Player pl : players) {
        const TreeField& f = sol.controls.v[index(pl)];
        for (int k = 0; k < f.levels(); ++k)
            for (int n = 0; n <= k; ++n)
                for (Eigen::Index i = 0; i < f.rows(); ++i)
                    c.row(to_string(pl), k, n, static_cast<long>(i), f.level(k)(i, n));
    }
    out.csv("controls.csv", c);

    Table u("iteration,update_norm");
    for (std::size_t i = 0; i < sol.report.update_norms.size(); ++i) u.row(i + 1, sol.report.update_norms[i]);
    out.csv("nash_updates.csv", u);
}

inline ParameterGrid carleman_grid(const Experiment& e) {
    return {e.config.carleman.s_grid, e.config.carleman.lambda_grid, e.config.carleman.span};
}

inline void run_carleman(const Experiment& e, Output& out, int threads, bool forward) {
    const std::string name = forward ? "carleman-forward" : "carleman-backward";
    const std::string stem = forward ? "carleman_forward" : "carleman_backward";
    const ParameterGrid grid = carleman_grid(e);
    const int count = e.config.carleman.instances;

    auto check = [&](const Experiment& ex, std::size_t idx) {
        const System& sys = ex.game().system;
        const ScenarioTree& tree = sys.tree;
        Rng rng(subseed(e, name, idx));
        if (forward) {
            ForwardInstance inst{smooth_profile(ex.geo, rng), smooth_tree_field(ex.geo, tree, tree.depth(), rng),
                                 smooth_tree_field(ex.geo, tree, tree.depth(), rng)};
            return carleman_forward_check(sys, inst, grid, threads);
        }
        return carleman_backward_check(sys, {smooth_tree_field(ex.geo, tree, tree.depth(), rng), {}}, grid, threads);
    };

    const Experiment coarse = carleman_base(e);
    std::vector<CarlemanReport> base, fine;
    for (int i = 0; i < count; ++i) base.push_back(check(coarse, static_cast<std::size_t>(i)));
    if (e.config.carleman.refine) {
        const Experiment r = refined(coarse);
        for (int i = 0; i < count; ++i) fine.push_back(check(r, static_cast<std::size_t>(i)));
    }

    Table first("s,lambda,lhs,rhs,ratio");
    for (const auto& pt : base.front().points) first.row(pt.s, pt.lambda, pt.lhs, pt.rhs, pt.ratio);
    out.csv(stem + ".csv", first);

    Table fam("instance,refinement,lambda,s_emp,c_emp");
    Json inst = Json::array();
    double c_max = 0.0, ratio_lo = INFINITY, ratio_hi = 0.0;
    for (int i = 0; i < count; ++i) {
        const auto& b = base[static_cast<std::size_t>(i)];
        Json ji{{"instance", i}, {"c_emp", finite(b.c_emp)}, {"s_emp", finite(b.s_emp)},
                {"c_emp_per_lambda", finite(b.c_emp_per_lambda)}};
        for (std::size_t l = 0; l < grid.lambda.size(); ++l)
            fam.row(i, 0, grid.lambda[l], b.s_emp[l], b.c_emp_per_lambda[l]);
        c_max = std::max(c_max, b.c_emp);
        if (!fine.empty()) {
            const auto& f = fine[static_cast<std::size_t>(i)];
            for (std::size_t l = 0; l < grid.lambda.size(); ++l)
                fam.row(i, 1, grid.lambda[l], f.s_emp[l], f.c_emp_per_lambda[l]);
            const double ratio = f.c_emp / b.c_emp;
            ji["refined_c_emp"] = finite(f.c_emp);
            ji["refinement_ratio"] = finite(ratio);
            ratio_lo = std::min(ratio_lo, ratio);
            ratio_hi = std::max(ratio_hi, ratio);
        }
        inst.push_back(ji);
    }
    out.csv(stem + "_family.csv", fam);

    Json j = meta(coarse, name);
    j["grid"] = {{"s", finite(grid.s)}, {"lambda", finite(grid.lambda)}, {"span", grid.span}};
    j["instances"] = inst;
    j["c_emp_max"] = finite(c_max);
    bool bounded = std::isfinite(c_max);
    j["bounded"] = bounded;
    if (!fine.empty()) {
        j["refinement"] = {{"ratio_min", finite(ratio_lo)},
                           {"ratio_max", finite(ratio_hi)},
                           {"within_factor_2", ratio_lo >= 0.5 && ratio_hi <= 2.0}};
    }
    out.json(stem + ".json", j);
}

inline void run_identity(const Experiment& e, Output& out, int threads) {
    const IdentityConfig& cfg = e.config.identity;
    const DiscreteOperators& ops = e.game().ops();
    const double sigma = cfg.sigma;
    const auto model = SemimartingaleModel::spatially_constant(
        ops.node_count(), [=](double t, double w) { return std::exp(sigma * w - 0.5 * sigma * sigma * t); },
        [=](double t, double w) { return sigma * std::exp(sigma * w - 0.5 * sigma * sigma * t); });

    struct Case {
        double b;
        IdentityVariant variant;
        bool ablate;
    };
    std::vector<Case> cases;
    for (const auto& v : cfg.variants)
        for (double b : cfg.b)
            for (bool ablate : {false, true})
                if (!ablate || cfg.ablation)
                    cases.push_back({b, v == "bulk" ? IdentityVariant::bulk : IdentityVariant::boundary, ablate});

    std::vector<std::vector<IdentityLevel>> results(cases.size());
    parallel_for(cases.size(), threads, [&](std::size_t i) {
        const Case& c = cases[i];
        results[i] = weighted_identity_residual(ops, model, {c.b, {cfg.s, cfg.lambda}, c.variant, c.ablate},
                                                e.config.horizon, cfg.steps);
    });

    Table t("variant,b,ablated,steps,dt,residual,scale");
    Json runs = Json::array();
    for (std::size_t i = 0; i < cases.size(); ++i) {
        const Case& c = cases[i];
        for (const auto& lv : results[i])
            t.row(to_string(c.variant), c.b, c.ablate ? 1 : 0, lv.steps, lv.dt, lv.residual, lv.scale);
        if (c.ablate) continue;
        Json r{{"variant", to_string(c.variant)},
               {"b", c.b},
               {"order", finite(observed_order(results[i]))},
               {"finest_residual", finite(results[i].back().residual)}};
        if (cfg.ablation) {
            const auto& ab = results[i + 1];
            r["ablated_order"] = finite(observed_order(ab));
            r["ablated_finest_residual"] = finite(ab.back().residual);
            r["ablation_ratio"] = finite(ab.back().residual / results[i].back().residual);
        }
        runs.push_back(r);
    }
    out.csv("identity.csv", t);
    Json j = meta(e, "identity");
    j["process"] = {{"kind", "geometric_brownian"}, {"sigma", sigma}};
    j["weights"] = {{"s", cfg.s}, {"lambda", cfg.lambda}};
    j["ladder"] = cfg.steps;
    j["runs"] = runs;
    out.json("identity.json", j);
}

inline Json interpolation_json(const InterpolationReport& r) {
    return {{"t0_requested", r.t0_requested}, {"t0", r.t0},         {"level", r.level},       {"lhs", finite(r.lhs)},
            {"a", finite(r.a)},               {"b", finite(r.b)},   {"m0", finite(r.m0)},     {"m1", finite(r.m1)},
            {"kappa", finite(r.kappa)},       {"c_fit", finite(r.c_fit)},
            {"kappa_constant", finite(r.kappa_constant)},           {"holds", r.holds}};
}

inline InterpolationReport base_interpolation(const Experiment& e) {
    const GameProblem& p = e.game();
    return interpolation_probe(p, nash_solve(p, e.config.nash), e.config.carleman.cutoff(), e.config.carleman.lambda1);
}

inline void run_interpolate(const Experiment& e, Output& out, int threads) {
    const GameProblem& p = e.game();
    const InterpolationReport base = base_interpolation(e);
    const int n = e.config.carleman.interpolation_members;
    std::vector<InterpolationReport> members(static_cast<std::size_t>(n));
    parallel_for(members.size(), threads, [&](std::size_t i) {
        Rng rng(subseed(e, "interpolate", i));
        Vector y0 = smooth_profile(e.geo, rng);
        y0 /= stacked_norm(e.geo, y0);
        const GameProblem member(p.system, p.objectives, y0);
        members[i] = interpolation_probe(member, nash_solve(member, e.config.nash), e.config.carleman.cutoff(),
                                         e.config.carleman.lambda1);
    });

    Table t("member,lhs,a,b,m0,m1,kappa,c_fit,holds");
    double lo = INFINITY, hi = 0.0;
    bool kappa_ok = base.kappa > 0.0 && base.kappa < 1.0, all_hold = base.holds;
    for (std::size_t i = 0; i < members.size(); ++i) {
        const auto& r = members[i];
        t.row(i, r.lhs, r.a, r.b, r.m0, r.m1, r.kappa, r.c_fit, r.holds ? 1 : 0);
        lo = std::min(lo, r.c_fit);
        hi = std::max(hi, r.c_fit);
        kappa_ok = kappa_ok && r.kappa > 0.0 && r.kappa < 1.0;
        all_hold = all_hold && r.holds;
    }
    out.csv("interpolate_family.csv", t);
    Json j = meta(e, "interpolate");
    j["cutoff"] = {{"t0", e.config.carleman.t0}, {"t1", e.config.carleman.t1}, {"t2", e.config.carleman.t2}};
    j["lambda1"] = e.config.carleman.lambda1;
    j["base"] = interpolation_json(base);
    j["family"] = {{"members", n},
                   {"c_fit_min", finite(lo)},
                   {"c_fit_max", finite(hi)},
                   {"kappa_in_unit_interval", kappa_ok},
                   {"all_hold", all_hold}};
    out.json("interpolate.json", j);
}

inline void run_uniqueness(const Experiment& e, Output& out, int threads) {
    const UniquenessConfig& u = e.config.uniqueness;
    const auto family = random_family(e.geo, u.members, u.radius, subseed(e, "uniqueness", 0));
    const UniquenessReport r =
        backward_uniqueness_probe(e.game(), family, e.config.nash, e.config.carleman.t0, u.floor, threads, u.scale);
    Table t("member,initial_norm,t0_norm,terminal_norm,ratio");
    for (std::size_t i = 0; i < r.members.size(); ++i) {
        const auto& m = r.members[i];
        t.row(i, m.initial_norm, m.t0_norm, m.terminal_norm, m.ratio);
    }
    out.csv("uniqueness_members.csv", t);
    Json j = meta(e, "uniqueness");
    j["zero_branch"] = {{"max_abs", finite(r.zero_branch_max_abs)}, {"exact", r.zero_branch_exact}};
    j["min_terminal_norm"] = finite(r.min_terminal_norm);
    j["min_ratio"] = finite(r.min_ratio);
    j["floor"] = r.floor;
    j["above_floor"] = r.above_floor;
    j["scaling"] = {{"factor", r.scale},
                    {"defect_terminal", finite(r.scaling_defect_terminal)},
                    {"defect_t0", finite(r.scaling_defect_t0)}};
    out.json("uniqueness.json", j);
}

inline Json stability_json(const StabilityReport& r) {
    return {{"radius", r.radius},       {"t0", r.t0},         {"kappa", finite(r.kappa)},
            {"slope", finite(r.slope)}, {"intercept", finite(r.intercept)},
            {"c_emp", finite(r.c_emp)}, {"envelope_holds", r.envelope_holds}};
}

inline void run_stability(const Experiment& e, Output& out, int threads) {
    const StabilityConfig& s = e.config.stability;
    const InterpolationReport interp = base_interpolation(e);
    const double t0 = e.config.carleman.t0;
    const auto random = random_family(e.geo, s.members, s.radius, subseed(e, "stability", 0));
    Rng rng(subseed(e, "stability-scaling", 0));
    Vector profile = smooth_profile(e.geo, rng);
    profile *= s.radius / stacked_norm(e.geo, profile);
    const auto scaled = scaling_family(profile, s.scalings);

    const StabilityReport rr = stability_probe(e.game(), random, s.radius, t0, interp.kappa, e.config.nash, threads);
    const StabilityReport sr = stability_probe(e.game(), scaled, s.radius, t0, interp.kappa, e.config.nash, threads);

    Table t("family,member,initial_norm,lhs,b,bound_ratio");
    for (std::size_t i = 0; i < rr.members.size(); ++i) {
        const auto& m = rr.members[i];
        t.row("random", i, m.initial_norm, m.lhs, m.b, m.bound_ratio);
    }
    for (std::size_t i = 0; i < sr.members.size(); ++i) {
        const auto& m = sr.members[i];
        t.row("scaling", i, m.initial_norm, m.lhs, m.b, m.bound_ratio);
    }
    out.csv("stability_members.csv", t);
    Json j = meta(e, "stability");
    j["kappa_source"] = interpolation_json(interp);
    j["random_family"] = stability_json(rr);
    j["scaling_family"] = stability_json(sr);
    j["scalings"] = finite(s.scalings);
    out.json("stability.json", j);
}

inline void run_sweep(const Experiment& e, Output& out, int threads) {
    const ExperimentConfig& c = e.config;
    auto list = [](const std::vector<double>& v, double base) { return v.empty() ? std::vector<double>{base} : v; };
    const auto a1 = list(c.sweep.alpha1, c.alpha[0]), a2 = list(c.sweep.alpha2, c.alpha[1]);
    const auto b1 = list(c.sweep.beta1, c.beta[0]), b2 = list(c.sweep.beta2, c.beta[1]);
    const auto rho = list(c.sweep.damping, c.nash.damping);

    struct Point {
        double a1 = 0, a2 = 0, b1 = 0, b2 = 0, rho = 0;
        std::string status = "ok";
        std::string message;
        NashReport report;
        std::array<double, 2> cost{0.0, 0.0};
    };
    std::vector<Point> points;
    for (double x1 : a1)
        for (double x2 : a2)
            for (double y1 : b1)
                for (double y2 : b2)
                    for (double r : rho) {
                        Point pt;
                        pt.a1 = x1, pt.a2 = x2, pt.b1 = y1, pt.b2 = y2, pt.rho = r;
                        points.push_back(std::move(pt));
                    }

    const GameProblem& base = e.game();
    parallel_for(points.size(), threads, [&](std::size_t i) {
        Point& pt = points[i];
        ObjectiveSpec spec = base.objectives;
        spec.alpha = {pt.a1, pt.a2};
        spec.beta = {pt.b1, pt.b2};
        const GameProblem p(base.system, spec, base.initial);
        NashSettings settings = c.nash;
        settings.damping = pt.rho;
        try {
            const NashSolution sol = nash_solve(p, settings);
            pt.report = sol.report;
            pt.cost = {evaluate_functional(Player::first, p, sol.controls),
                       evaluate_functional(Player::second, p, sol.controls)};
            if (!sol.report.converged) pt.status = "maxit";
        } catch (const NonContractionError& err) {
            pt.status = "non_contraction";
            pt.message = err.what();
        }
    });

    Table t("index,alpha1,alpha2,beta1,beta2,damping,status,iterations,contraction_factor,J1,J2,residual1,residual2");
    Json rows = Json::array(), failures = Json::array();
    for (std::size_t i = 0; i < points.size(); ++i) {
        const Point& pt = points[i];
        const bool ok = pt.status != "non_contraction";
        t.row(i, pt.a1, pt.a2, pt.b1, pt.b2, pt.rho, pt.status, pt.report.iterations, pt.report.contraction_factor,
              pt.cost[0], pt.cost[1], pt.report.fixed_point_residual[0], pt.report.fixed_point_residual[1]);
        Json r{{"index", i},     {"alpha1", pt.a1}, {"alpha2", pt.a2},    {"beta1", pt.b1},
               {"beta2", pt.b2}, {"damping", pt.rho}, {"status", pt.status}};
        if (ok) {
            r["report"] = nash_report_json(pt.report);
            r["cost"] = finite(pt.cost);
        } else {
            r["message"] = pt.message;
            failures.push_back({{"index", i}, {"message", pt.message}});
        }
        rows.push_back(r);
    }
    out.csv("sweep.csv", t);
    Json j = meta(e, "sweep");
    j["points"] = rows;
    j["non_contraction"] = failures;
    out.json("sweep.json", j);
}

}  // namespace runner_detail

/// Runs one subcommand and returns the names of the files it wrote.
inline std::vector<std::string> run_subcommand(const ExperimentConfig& config, const std::string& name,
                                               const std::filesystem::path& out_dir, int threads = 1) {
    using namespace runner_detail;
    using Fn = std::function<void(const Experiment&, Output&, int)>;
    static const std::map<std::string, Fn> table{
        {"forward", run_forward},
        {"nash", run_nash},
        {"carleman-forward", [](const Experiment& e, Output& o, int t) { run_carleman(e, o, t, true); }},
        {"carleman-backward", [](const Experiment& e, Output& o, int t) { run_carleman(e, o, t, false); }},
        {"identity", run_identity},
        {"interpolate", run_interpolate},
        {"uniqueness", run_uniqueness},
        {"stability", run_stability},
        {"sweep", run_sweep},
    };
    const auto it = table.find(name);
    detail::require(it != table.end(), "unknown subcommand '" + name + "'");
    detail::require(threads >= 1, "threads must be >= 1");
    const Experiment e = build_experiment(config);
    Output out(out_dir);
    it->second(e, out, threads);
    return out.files();
}

}  // namespace wentzell
