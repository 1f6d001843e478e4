#include "wentzell/runner.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

using namespace wentzell;
namespace fs = std::filesystem;

namespace {

const char* const desk_path = WENTZELL_SOURCE_DIR "/configs/desk.toml";

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::path(::testing::TempDir()) / ("wentzell_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream(p, std::ios::binary) << text;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

std::string error_of(const std::string& text, const std::string& base = ".") {
    try {
        parse_config(text, base, "cfg.toml");
    } catch (const InvalidSpecError& e) {
        return e.what();
    }
    return {};
}

/// Writes `time,location,value` rows for every (k, i) with value f(k, i).
template <class F>
std::string table(int levels, int locations, F f, bool skip_last = false) {
    std::string s = "time_index,location_index,value\n";
    for (int k = 0; k < levels; ++k)
        for (int i = 0; i < locations; ++i) {
            if (skip_last && k == levels - 1 && i == locations - 1) continue;
            s += std::to_string(k) + "," + std::to_string(i) + "," + runner_detail::num(f(k, i)) + "\n";
        }
    return s;
}

}  // namespace

TEST(Config, DeskConfigLoadsAndBuilds) {
    const ExperimentConfig c = load_config(desk_path);
    EXPECT_EQ(c.mesh.mode, MeshMode::interval);
    EXPECT_EQ(c.mesh.interior, 17);
    EXPECT_EQ(c.steps, 8);
    const Experiment e = build_experiment(c);
    EXPECT_EQ(e.game().system.interior(), 17);
    for (const auto& t : e.game().objectives.targets) EXPECT_EQ(t.max_abs(), 0.0);
}

TEST(Config, RoundTripReproducesTheObject) {
    const ExperimentConfig c = load_config(desk_path);
    const ExperimentConfig again = parse_config(to_toml(c), c.base_dir, "roundtrip");
    EXPECT_EQ(again, c);
    EXPECT_EQ(to_toml(again), to_toml(c));
}

TEST(Config, RoundTripWithTablesAndLargeSeed) {
    const fs::path dir = scratch("roundtrip");
    write_file(dir / "a1.csv", table(4, 5, [](int k, int i) { return 0.1 * k - 0.01 * i; }));
    write_file(dir / "t1.csv", table(4, 5, [](int k, int i) { return 1.0 / (1 + k + i); }));
    const std::string text = R"(
seed = "18446744073709551615"
[mesh]
mode = "interval"
interior = 5
[time]
steps = 4
horizon = 0.75
[coefficients]
a1 = { csv = "a1.csv" }
b2 = 0.125
[regions.G1]
index = [0, 3]
[regions.G2d]
x = [0.3, 0.9]
[objectives]
target1 = { csv = "t1.csv" }
alpha1 = 0.0
[carleman]
s_grid = [0.1, 0.2, 0.4]
lambda_grid = [0.5, 1.0]
[sweep]
beta1 = [0.25, 0.5]
)";
    const ExperimentConfig c = parse_config(text, dir.string(), "tables.toml");
    EXPECT_EQ(c.seed, 18446744073709551615ull);
    EXPECT_DOUBLE_EQ(c.coefficients[0].at(3, 4), 0.3 - 0.04);
    EXPECT_EQ(parse_config(to_toml(c), dir.string(), "again"), c);

    const Experiment e = build_experiment(c);
    // Targets vanish outside the tracking region even where the table is nonzero.
    const Mask& m = e.game().objectives.masks.tracking[0];
    const TreeField& t = e.game().objectives.targets[0];
    for (int i = 0; i < 5; ++i) EXPECT_EQ(t.level(2)(i, 1), m[static_cast<std::size_t>(i)] ? 1.0 / (3 + i) : 0.0);
    EXPECT_DOUBLE_EQ(e.game().system.coeffs.reaction(4, 3), 0.3 - 0.04);
    EXPECT_DOUBLE_EQ(e.game().system.coeffs.noise(6, 0), 0.125);
}

TEST(Config, UnknownKeysAreRejectedWithLocation) {
    const std::string msg = error_of("seed = 1\n[nash]\ndamping = 0.5\ndampng = 0.4\n");
    EXPECT_NE(msg.find("cfg.toml:4"), std::string::npos) << msg;
    EXPECT_NE(msg.find("nash.dampng"), std::string::npos) << msg;
    EXPECT_NE(error_of("[mesh]\nmode = \"interval\"\n[extra]\nx = 1\n").find("unknown field 'extra'"), std::string::npos);
}

TEST(Config, ParseErrorsCarryTheLine) {
    const std::string msg = error_of("seed = 1\n[time\nsteps = 4\n");
    EXPECT_NE(msg.find("cfg.toml:2"), std::string::npos) << msg;
    EXPECT_NE(msg.find("parse error"), std::string::npos) << msg;
}

TEST(Config, FieldDiagnosticsNameTheField) {
    auto has = [](const std::string& text, const std::string& needle) {
        const std::string msg = error_of(text);
        EXPECT_NE(msg.find(needle), std::string::npos) << "message: " << msg;
    };
    has("[time]\nsteps = 0\n", "field 'time.steps'");
    has("[time]\nsteps = 1.5\n", "expected an integer");
    has("[objectives]\nbeta2 = 0.0\n", "field 'objectives.beta2'");
    has("[objectives]\nalpha1 = -1.0\n", "cfg.toml:2");
    has("[mesh]\nmode = \"sphere\"\n", "field 'mesh.mode'");
    has("[nash]\ndamping = 1.5\n", "damping");
    has("[identity]\nb = [1.0, 0.5]\n", "field 'identity.b'");
    has("[regions.G1]\nindex = [3, 2]\n", "field 'regions.G1.index'");
    has("[regions.G1]\nx = [0.9, 0.1]\n", "lo must not exceed hi");
    has("[carleman]\ns_grid = [1.0, 0.5]\n", "strictly increasing");
    has("seed = -4\n", "seed");
}

TEST(Config, CutoffOrderingViolationNamesTheInvariant) {
    const std::string msg = error_of("[carleman]\nt0 = 0.3\nt1 = 0.4\nt2 = 0.1\n");
    EXPECT_NE(msg.find("ordering 0 < t2 < t1 < t0 <= T"), std::string::npos) << msg;
}

TEST(Config, CsvCoverageAndShapeChecked) {
    const fs::path dir = scratch("csv");
    const std::string head = "[mesh]\ninterior = 3\n[time]\nsteps = 2\n[coefficients]\na1 = { csv = \"a.csv\" }\n";
    auto fails_with = [&](const std::string& csv, const std::string& needle) {
        write_file(dir / "a.csv", csv);
        const std::string msg = error_of(head, dir.string());
        EXPECT_NE(msg.find(needle), std::string::npos) << msg;
    };
    fails_with(table(2, 3, [](int, int) { return 1.0; }, true), "misses (time 1, location 2)");
    fails_with(table(2, 3, [](int, int) { return 1.0; }) + "1,2,0.5\n", "duplicate");
    fails_with(table(2, 3, [](int, int) { return 1.0; }) + "2,0,0.5\n", "outside 2 x 3");
    fails_with("time_index,location_index,value\n0,0\n", "a.csv:2");
    fails_with(table(2, 3, [](int, int) { return 1.0; }) + "0,x,1\n", "expected 'time-index,location-index,value'");
    write_file(dir / "a.csv", table(2, 3, [](int, int) { return 1.0; }));
    EXPECT_NO_THROW(parse_config(head, dir.string(), "ok"));
    EXPECT_THROW(parse_config(head, (dir / "missing").string(), "cfg"), IoError);
}

TEST(Config, LoadingDoesNotModifyInputs) {
    const std::string before = read_file(desk_path);
    (void)load_config(desk_path);
    EXPECT_EQ(read_file(desk_path), before);
}

TEST(Runner, OutputsIdenticalAcrossRerunsAndThreads) {
    ExperimentConfig c = load_config(desk_path);
    c.carleman.instances = 2;
    c.identity.steps = {16, 32};
    c.stability.members = 4;
    c.uniqueness.members = 3;
    for (const std::string& name : subcommands()) {
        const fs::path a = scratch(name + "_a"), b = scratch(name + "_b");
        const auto files = run_subcommand(c, name, a, 1);
        const auto again = run_subcommand(c, name, b, 3);
        ASSERT_EQ(files, again) << name;
        ASSERT_FALSE(files.empty()) << name;
        for (const auto& f : files) EXPECT_EQ(read_file(a / f), read_file(b / f)) << name << "/" << f;
    }
}

TEST(Runner, CsvTablesCarryHeadersAndFullPrecision) {
    ExperimentConfig c = load_config(desk_path);
    c.carleman.instances = 1;
    const fs::path dir = scratch("csvfmt");
    run_subcommand(c, "carleman-forward", dir);
    const std::string csv = read_file(dir / "carleman_forward.csv");
    EXPECT_EQ(csv.rfind("s,lambda,lhs,rhs,ratio\n", 0), 0u);
    EXPECT_EQ(csv.find('\r'), std::string::npos);
    EXPECT_EQ(runner_detail::num(0.1), "0.10000000000000001");
    EXPECT_EQ(std::stod(runner_detail::num(1.0 / 3.0)), 1.0 / 3.0);
}

TEST(Runner, SeedChangesRandomOutputs) {
    ExperimentConfig c = load_config(desk_path);
    c.carleman.instances = 1;
    c.carleman.refine = false;
    const fs::path a = scratch("seed_a"), b = scratch("seed_b");
    run_subcommand(c, "carleman-backward", a);
    c.seed += 1;
    run_subcommand(c, "carleman-backward", b);
    EXPECT_NE(read_file(a / "carleman_backward.csv"), read_file(b / "carleman_backward.csv"));
}

TEST(Runner, SweepRecordsNonContraction) {
    ExperimentConfig c = load_config(desk_path);
    c.sweep = {};
    c.sweep.alpha1 = {50.0};
    c.sweep.beta1 = {1.0, 1e-4};
    c.alpha[1] = 50.0;
    c.beta[1] = 1e-4;
    c.nash.damping = 1.0;
    const fs::path dir = scratch("sweep");
    run_subcommand(c, "sweep", dir);
    const Json j = Json::parse(read_file(dir / "sweep.json"));
    ASSERT_FALSE(j["non_contraction"].empty());
    EXPECT_NE(j["non_contraction"][0]["message"].get<std::string>().find("beta"), std::string::npos);
}

TEST(Runner, UnknownSubcommandRejected) {
    EXPECT_THROW(run_subcommand(load_config(desk_path), "plot", scratch("unknown")), InvalidSpecError);
}
