#pragma once

// Experiment configuration: a TOML file whose keys name the model symbols
// (alpha1, beta2, s_grid, ...). Unknown keys are rejected; every diagnostic
// carries the file, line and dotted field path. Coefficients, targets and
// the initial state may reference CSV files resolved against the config's
// directory.

#include "wentzell/carleman.hpp"
#include "wentzell/mesh.hpp"
#include "wentzell/nash.hpp"

#define TOML_EXCEPTIONS 1
#include <toml.hpp>

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace wentzell {

/// A constant, or a (time-index, location-index, value) CSV table.
struct ScalarField {
    double value = 0.0;
    std::string csv;           ///< path as written in the config
    std::vector<double> data;  ///< time-major: data[k * locations + i]
    int locations = 0;
    int levels = 0;

    bool from_csv() const { return !csv.empty(); }
    double at(int k, int i) const {
        return from_csv() ? data[static_cast<std::size_t>(k) * static_cast<std::size_t>(locations) + static_cast<std::size_t>(i)]
                          : value;
    }
    bool operator==(const ScalarField&) const = default;
};

struct InitialConfig {
    std::string profile = "smooth";  ///< smooth | bump | constant | zero | csv
    double scale = 1.0;
    double norm = 0.0;  ///< > 0 rescales the profile to this stacked L² norm
    double value = 0.0;
    double center_x = 0.5, center_y = 0.0, width = 0.2;
    std::string csv;
    std::vector<double> data;  ///< stacked nodal values

    bool operator==(const InitialConfig&) const = default;
};

struct CarlemanConfig {
    std::vector<double> s_grid;
    std::vector<double> lambda_grid{1.0};
    double span = 10.0;
    int instances = 10;
    bool refine = true;
    int interior = 0;  ///< mesh resolution for the Carleman checks; 0 keeps the experiment's
    int steps = 0;     ///< tree depth for the Carleman checks; 0 keeps the experiment's
    double lambda1 = 1.0;
    double t0 = 0.5, t1 = 0.2, t2 = 0.1;
    int interpolation_members = 10;

    CutoffSchedule cutoff() const { return {t2, t1, t0}; }
    bool operator==(const CarlemanConfig&) const = default;
};

struct IdentityConfig {
    std::vector<double> b{1.0, -1.0};
    std::vector<std::string> variants{"bulk", "boundary"};
    std::vector<int> steps{64, 128, 256, 512};
    double s = 1.0, lambda = 1.0;
    double sigma = 1.0;  ///< volatility of the geometric-Brownian test process
    bool ablation = true;

    bool operator==(const IdentityConfig&) const = default;
};

struct StabilityConfig {
    int members = 20;
    double radius = 1.0;
    std::vector<double> scalings{0.05, 0.1, 0.2, 0.4, 0.8, 1.0};

    bool operator==(const StabilityConfig&) const = default;
};

struct UniquenessConfig {
    int members = 10;
    double radius = 1.0;
    double floor = 1e-3;
    double scale = 2.0;

    bool operator==(const UniquenessConfig&) const = default;
};

/// Lists whose cross product the `sweep` subcommand walks; empty lists keep the base value.
struct SweepConfig {
    std::vector<double> alpha1, alpha2, beta1, beta2, damping;

    bool operator==(const SweepConfig&) const = default;
};

struct OutputConfig {
    std::string dir;
    bool trajectory_csv = false;
    bool tree_csv = false;

    bool operator==(const OutputConfig&) const = default;
};

struct ExperimentConfig {
    std::uint64_t seed = 0;
    MeshSpec mesh{};
    double horizon = 1.0;
    int steps = 8;
    std::array<ScalarField, 4> coefficients{};  ///< a1, a2, b1, b2
    std::array<RegionSpec, 4> regions{};        ///< G1, G2, G1d, G2d
    std::array<double, 2> alpha{1.0, 1.0};
    std::array<double, 2> beta{1.0, 1.0};
    std::array<ScalarField, 2> targets{};
    InitialConfig initial{};
    NashSettings nash{};
    int verify_directions = 20;
    CarlemanConfig carleman{};
    IdentityConfig identity{};
    StabilityConfig stability{};
    UniquenessConfig uniqueness{};
    SweepConfig sweep{};
    OutputConfig output{};
    std::string base_dir = ".";  ///< CSV references resolve against this

    bool operator==(const ExperimentConfig& o) const {
        return seed == o.seed && mesh == o.mesh && horizon == o.horizon && steps == o.steps &&
               coefficients == o.coefficients && regions == o.regions && alpha == o.alpha && beta == o.beta &&
               targets == o.targets && initial == o.initial && nash_equal(nash, o.nash) &&
               verify_directions == o.verify_directions && carleman == o.carleman && identity == o.identity &&
               stability == o.stability && uniqueness == o.uniqueness && sweep == o.sweep && output == o.output &&
               base_dir == o.base_dir;
    }

private:
    static bool nash_equal(const NashSettings& a, const NashSettings& b) {
        return a.damping == b.damping && a.seed == b.seed && a.tol == b.tol && a.maxit == b.maxit &&
               a.gateaux_directions == b.gateaux_directions && a.gateaux_eps == b.gateaux_eps;
    }
};

inline constexpr std::array<const char*, 4> coefficient_names{"a1", "a2", "b1", "b2"};
inline constexpr std::array<const char*, 4> region_names{"G1", "G2", "G1d", "G2d"};

namespace config_detail {

inline std::string where(const std::string& file, const toml::source_region& src) {
    std::string out = file.empty() ? std::string("config") : file;
    if (src.begin.line > 0) out += ":" + std::to_string(src.begin.line);
    return out;
}

/// Reads one table, records which keys were consumed and rejects the rest.
class TableReader {
public:
    TableReader(const toml::table& table, std::string path, const std::string& file)
        : table_(table), path_(std::move(path)), file_(file) {}

    [[noreturn]] void fail(const toml::node* node, const std::string& key, const std::string& msg) const {
        const auto& src = node ? node->source() : table_.source();
        throw InvalidSpecError(where(file_, src) + ": field '" + field(key) + "': " + msg);
    }

    std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    const toml::node* node(const std::string& key) {
        seen_.insert(key);
        return table_.get(key);
    }

    bool has(const std::string& key) const { return table_.contains(key); }

    double number(const std::string& key, double fallback) {
        const toml::node* n = node(key);
        if (!n) return fallback;
        return as_number(n, key);
    }

    double as_number(const toml::node* n, const std::string& key) const {
        if (auto v = n->as_floating_point()) return v->get();
        if (auto v = n->as_integer()) return static_cast<double>(v->get());
        fail(n, key, "expected a number");
    }

    int integer(const std::string& key, int fallback) {
        const toml::node* n = node(key);
        if (!n) return fallback;
        return as_int(n, key);
    }

    int as_int(const toml::node* n, const std::string& key) const {
        auto v = n->as_integer();
        if (!v) fail(n, key, "expected an integer");
        if (v->get() < std::numeric_limits<int>::min() || v->get() > std::numeric_limits<int>::max())
            fail(n, key, "integer out of range");
        return static_cast<int>(v->get());
    }

    std::uint64_t unsigned64(const std::string& key, std::uint64_t fallback) {
        const toml::node* n = node(key);
        if (!n) return fallback;
        if (auto v = n->as_integer()) {
            if (v->get() < 0) fail(n, key, "seed must be >= 0");
            return static_cast<std::uint64_t>(v->get());
        }
        if (auto s = n->as_string()) {  // values above 2^63 - 1 are written as strings
            std::uint64_t out = 0;
            const std::string& str = s->get();
            auto [ptr, ec] = std::from_chars(str.data(), str.data() + str.size(), out);
            if (ec != std::errc{} || ptr != str.data() + str.size()) fail(n, key, "expected an unsigned 64-bit integer");
            return out;
        }
        fail(n, key, "expected an unsigned 64-bit integer");
    }

    bool boolean(const std::string& key, bool fallback) {
        const toml::node* n = node(key);
        if (!n) return fallback;
        auto v = n->as_boolean();
        if (!v) fail(n, key, "expected true or false");
        return v->get();
    }

    std::string string(const std::string& key, const std::string& fallback) {
        const toml::node* n = node(key);
        if (!n) return fallback;
        auto v = n->as_string();
        if (!v) fail(n, key, "expected a string");
        return v->get();
    }

    const toml::array* array(const std::string& key) {
        const toml::node* n = node(key);
        if (!n) return nullptr;
        auto a = n->as_array();
        if (!a) fail(n, key, "expected an array");
        return a;
    }

    std::vector<double> numbers(const std::string& key, std::vector<double> fallback) {
        const toml::array* a = array(key);
        if (!a) return fallback;
        std::vector<double> out;
        for (const auto& e : *a) out.push_back(as_number(&e, key));
        return out;
    }

    std::vector<int> integers(const std::string& key, std::vector<int> fallback) {
        const toml::array* a = array(key);
        if (!a) return fallback;
        std::vector<int> out;
        for (const auto& e : *a) out.push_back(as_int(&e, key));
        return out;
    }

    std::vector<std::string> strings(const std::string& key, std::vector<std::string> fallback) {
        const toml::array* a = array(key);
        if (!a) return fallback;
        std::vector<std::string> out;
        for (const auto& e : *a) {
            auto s = e.as_string();
            if (!s) fail(&e, key, "expected an array of strings");
            out.push_back(s->get());
        }
        return out;
    }

    std::optional<TableReader> table(const std::string& key) {
        const toml::node* n = node(key);
        if (!n) return std::nullopt;
        auto t = n->as_table();
        if (!t) fail(n, key, "expected a table");
        return TableReader(*t, field(key), file_);
    }

    void finish() const {
        for (const auto& [k, v] : table_)
            if (!seen_.count(std::string(k.str())))
                throw InvalidSpecError(where(file_, v.source()) + ": unknown field '" + field(std::string(k.str())) + "'");
    }

    const std::string& file() const { return file_; }

private:
    const toml::table& table_;
    std::string path_;
    const std::string& file_;
    std::set<std::string> seen_;
};

/// Parses `time-index,location-index,value` rows (header optional) and requires full coverage.
inline std::vector<double> read_indexed_csv(const std::filesystem::path& path, int levels, int locations,
                                            const std::string& what) {
    std::ifstream in(path);
    if (!in) throw IoError(what + ": cannot open CSV '" + path.string() + "'");
    std::vector<double> data(static_cast<std::size_t>(levels) * static_cast<std::size_t>(locations), 0.0);
    std::vector<std::uint8_t> seen(data.size(), 0);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
        const std::string loc = path.string() + ":" + std::to_string(lineno);
        auto parse_num = [&](const std::string& s, double& out) {
            std::size_t pos = 0;
            try {
                out = std::stod(s, &pos);
            } catch (...) {
                return false;
            }
            return s.find_first_not_of(" \t", pos) == std::string::npos;
        };
        double k = 0, i = 0, v = 0;
        if (cells.size() != 3 || !parse_num(cells[0], k) || !parse_num(cells[1], i) || !parse_num(cells[2], v)) {
            if (lineno == 1) continue;  // header
            throw InvalidSpecError(what + ": " + loc + ": expected 'time-index,location-index,value'");
        }
        if (k != std::floor(k) || i != std::floor(i) || k < 0 || i < 0 || k >= levels || i >= locations)
            throw InvalidSpecError(what + ": " + loc + ": index (" + cells[0] + ", " + cells[1] + ") outside " +
                                   std::to_string(levels) + " x " + std::to_string(locations));
        if (!std::isfinite(v)) throw InvalidSpecError(what + ": " + loc + ": value must be finite");
        const std::size_t idx = static_cast<std::size_t>(k) * static_cast<std::size_t>(locations) + static_cast<std::size_t>(i);
        if (seen[idx]) throw InvalidSpecError(what + ": " + loc + ": duplicate entry");
        seen[idx] = 1;
        data[idx] = v;
    }
    for (std::size_t idx = 0; idx < seen.size(); ++idx)
        if (!seen[idx])
            throw InvalidSpecError(what + ": CSV '" + path.string() + "' misses (time " +
                                   std::to_string(idx / static_cast<std::size_t>(locations)) + ", location " +
                                   std::to_string(idx % static_cast<std::size_t>(locations)) + ")");
    return data;
}

inline Eigen::Index interior_count(const MeshSpec& m) {
    return m.mode == MeshMode::interval ? m.interior : static_cast<Eigen::Index>(m.interior) * m.angular;
}

inline Eigen::Index boundary_count(const MeshSpec& m) { return m.mode == MeshMode::interval ? 2 : m.angular; }

inline ScalarField read_field(TableReader& r, const std::string& key, double fallback, int levels, int locations,
                              const std::string& base_dir) {
    ScalarField f;
    f.value = fallback;
    const toml::node* n = r.node(key);
    if (!n) return f;
    if (n->is_number()) {
        f.value = r.as_number(n, key);
        if (!std::isfinite(f.value)) r.fail(n, key, "value must be finite");
        return f;
    }
    auto t = n->as_table();
    if (!t) r.fail(n, key, "expected a number or { csv = \"path\" }");
    TableReader sub(*t, r.field(key), r.file());
    f.csv = sub.string("csv", "");
    sub.finish();
    if (f.csv.empty()) r.fail(n, key, "csv path must be non-empty");
    f.levels = levels;
    f.locations = locations;
    f.data = read_indexed_csv(std::filesystem::path(base_dir) / f.csv, levels, locations, r.field(key));
    return f;
}

}  // namespace config_detail

/// Parses a configuration document. `base_dir` anchors relative CSV paths; `source` names the file in diagnostics.
inline ExperimentConfig parse_config(const std::string& text, const std::string& base_dir = ".",
                                     const std::string& source = "config") {
    using config_detail::TableReader;
    toml::table doc;
    try {
        doc = toml::parse(text, source);
    } catch (const toml::parse_error& e) {
        throw InvalidSpecError(config_detail::where(source, e.source()) + ": parse error: " + std::string(e.description()));
    }
    ExperimentConfig c;
    c.base_dir = base_dir;
    TableReader root(doc, "", source);
    c.seed = root.unsigned64("seed", 0);

    if (auto m = root.table("mesh")) {
        const std::string mode = m->string("mode", "interval");
        if (mode == "interval")
            c.mesh.mode = MeshMode::interval;
        else if (mode == "disk")
            c.mesh.mode = MeshMode::disk;
        else
            m->fail(m->node("mode"), "mode", "expected \"interval\" or \"disk\"");
        c.mesh.extent = m->number("extent", 1.0);
        c.mesh.interior = m->integer("interior", c.mesh.interior);
        c.mesh.angular = m->integer("angular", c.mesh.mode == MeshMode::disk ? 16 : 0);
        m->finish();
    }
    try {
        c.mesh.validate();
    } catch (const InvalidSpecError& e) {
        throw InvalidSpecError(source + ": section 'mesh': " + e.what());
    }

    if (auto t = root.table("time")) {
        c.horizon = t->number("horizon", c.horizon);
        c.steps = t->integer("steps", c.steps);
        if (!(c.horizon > 0.0) || !std::isfinite(c.horizon)) t->fail(t->node("horizon"), "horizon", "T must be > 0");
        if (c.steps < 1) t->fail(t->node("steps"), "steps", "K must be >= 1");
        t->finish();
    }

    const int ni = static_cast<int>(config_detail::interior_count(c.mesh));
    const int nb = static_cast<int>(config_detail::boundary_count(c.mesh));
    if (auto t = root.table("coefficients")) {
        for (std::size_t i = 0; i < 4; ++i)
            c.coefficients[i] = config_detail::read_field(*t, coefficient_names[i], 0.0, c.steps, i < 2 ? ni : nb, base_dir);
        t->finish();
    }

    if (auto t = root.table("regions")) {
        for (std::size_t i = 0; i < 4; ++i) {
            auto r = t->table(region_names[i]);
            if (!r) continue;
            RegionSpec& spec = c.regions[i];
            auto pair = [&](const std::string& key, double& lo, double& hi) {
                const toml::node* n = r->node(key);
                if (!n) return;
                auto a = n->as_array();
                if (!a || a->size() != 2) r->fail(n, key, "expected [lo, hi]");
                lo = r->as_number(a->get(0), key);
                hi = r->as_number(a->get(1), key);
                if (!(lo <= hi)) r->fail(n, key, "lo must not exceed hi");
            };
            if (const toml::node* n = r->node("index")) {
                auto a = n->as_array();
                if (!a || a->size() != 2) r->fail(n, "index", "expected [lo, hi)");
                const int lo = r->as_int(a->get(0), "index"), hi = r->as_int(a->get(1), "index");
                if (lo < 0 || hi > ni || lo >= hi) r->fail(n, "index", "range must satisfy 0 <= lo < hi <= " + std::to_string(ni));
                spec.index_range = std::pair{lo, hi};
            }
            pair("x", spec.x_lo, spec.x_hi);
            pair("theta", spec.theta_lo, spec.theta_hi);
            pair("r", spec.r_lo, spec.r_hi);
            r->finish();
        }
        t->finish();
    }

    if (auto t = root.table("objectives")) {
        for (std::size_t i = 0; i < 2; ++i) {
            const std::string idx = std::to_string(i + 1);
            c.alpha[i] = t->number("alpha" + idx, c.alpha[i]);
            c.beta[i] = t->number("beta" + idx, c.beta[i]);
            if (!(c.alpha[i] >= 0.0)) t->fail(t->node("alpha" + idx), "alpha" + idx, "must be >= 0");
            if (!(c.beta[i] > 0.0)) t->fail(t->node("beta" + idx), "beta" + idx, "must be > 0");
            c.targets[i] = config_detail::read_field(*t, "target" + idx, 0.0, c.steps, ni, base_dir);
        }
        t->finish();
    }

    if (auto t = root.table("initial")) {
        InitialConfig& in = c.initial;
        in.profile = t->string("profile", in.profile);
        in.scale = t->number("scale", in.scale);
        in.norm = t->number("norm", in.norm);
        in.value = t->number("value", in.value);
        in.center_x = t->number("center_x", in.center_x);
        in.center_y = t->number("center_y", in.center_y);
        in.width = t->number("width", in.width);
        in.csv = t->string("csv", "");
        static const std::set<std::string> profiles{"smooth", "bump", "constant", "zero", "csv"};
        if (!profiles.count(in.profile))
            t->fail(t->node("profile"), "profile", "expected smooth, bump, constant, zero or csv");
        if (in.profile == "csv") {
            if (in.csv.empty()) t->fail(nullptr, "csv", "profile = \"csv\" needs a csv path");
            in.data = config_detail::read_indexed_csv(std::filesystem::path(base_dir) / in.csv, 1, ni + nb, "initial.csv");
        } else if (!in.csv.empty()) {
            t->fail(t->node("csv"), "csv", "only valid with profile = \"csv\"");
        }
        if (!(in.width > 0.0)) t->fail(t->node("width"), "width", "must be > 0");
        if (!(in.norm >= 0.0)) t->fail(t->node("norm"), "norm", "must be >= 0");
        t->finish();
    }

    if (auto t = root.table("nash")) {
        c.nash.damping = t->number("damping", c.nash.damping);
        c.nash.tol = t->number("tol", c.nash.tol);
        c.nash.maxit = t->integer("maxit", c.nash.maxit);
        c.nash.gateaux_directions = t->integer("gateaux_directions", c.nash.gateaux_directions);
        c.nash.gateaux_eps = t->number("gateaux_eps", c.nash.gateaux_eps);
        c.verify_directions = t->integer("verify_directions", c.verify_directions);
        t->finish();
    }
    try {
        c.nash.validate();
    } catch (const InvalidSpecError& e) {
        throw InvalidSpecError(source + ": section 'nash': " + e.what());
    }
    if (c.verify_directions < 1) throw InvalidSpecError(source + ": field 'nash.verify_directions': must be >= 1");

    if (auto t = root.table("carleman")) {
        CarlemanConfig& k = c.carleman;
        k.s_grid = t->numbers("s_grid", k.s_grid);
        k.lambda_grid = t->numbers("lambda_grid", k.lambda_grid);
        k.span = t->number("span", k.span);
        k.instances = t->integer("instances", k.instances);
        k.refine = t->boolean("refine", k.refine);
        k.interior = t->integer("interior", k.interior);
        k.steps = t->integer("steps", k.steps);
        if (k.interior != 0 && k.interior < 2) t->fail(t->node("interior"), "interior", "must be 0 or >= 2");
        if (k.steps < 0) t->fail(t->node("steps"), "steps", "must be >= 0");
        k.lambda1 = t->number("lambda1", k.lambda1);
        k.t0 = t->number("t0", k.t0);
        k.t1 = t->number("t1", k.t1);
        k.t2 = t->number("t2", k.t2);
        k.interpolation_members = t->integer("interpolation_members", k.interpolation_members);
        if (k.instances < 1) t->fail(t->node("instances"), "instances", "must be >= 1");
        if (k.interpolation_members < 1)
            t->fail(t->node("interpolation_members"), "interpolation_members", "must be >= 1");
        if (!(k.lambda1 > 0.0)) t->fail(t->node("lambda1"), "lambda1", "must be > 0");
        t->finish();
    }
    if (c.carleman.s_grid.empty())
        for (int i = 0; i <= 32; ++i) c.carleman.s_grid.push_back(0.01 * std::pow(10.0, i / 8.0));
    try {
        ParameterGrid{c.carleman.s_grid, c.carleman.lambda_grid, c.carleman.span}.validate();
        c.carleman.cutoff().validate(c.horizon);
    } catch (const InvalidSpecError& e) {
        throw InvalidSpecError(source + ": section 'carleman': " + e.what());
    }

    if (auto t = root.table("identity")) {
        IdentityConfig& d = c.identity;
        d.b = t->numbers("b", d.b);
        d.variants = t->strings("variants", d.variants);
        d.steps = t->integers("steps", d.steps);
        d.s = t->number("s", d.s);
        d.lambda = t->number("lambda", d.lambda);
        d.sigma = t->number("sigma", d.sigma);
        d.ablation = t->boolean("ablation", d.ablation);
        for (double b : d.b)
            if (b != 1.0 && b != -1.0) t->fail(t->node("b"), "b", "entries must be +1 or -1");
        for (const auto& v : d.variants)
            if (v != "bulk" && v != "boundary") t->fail(t->node("variants"), "variants", "entries must be bulk or boundary");
        if (d.steps.size() < 2) t->fail(t->node("steps"), "steps", "refinement ladder needs at least two depths");
        for (int s : d.steps)
            if (s < 1) t->fail(t->node("steps"), "steps", "depths must be >= 1");
        if (!(d.s >= 0.0) || !(d.lambda > 0.0)) t->fail(nullptr, "s", "need s >= 0 and lambda > 0");
        t->finish();
    }

    if (auto t = root.table("stability")) {
        StabilityConfig& s = c.stability;
        s.members = t->integer("members", s.members);
        s.radius = t->number("radius", s.radius);
        s.scalings = t->numbers("scalings", s.scalings);
        if (s.members < 2) t->fail(t->node("members"), "members", "must be >= 2");
        if (!(s.radius > 0.0)) t->fail(t->node("radius"), "radius", "M must be > 0");
        if (s.scalings.size() < 2) t->fail(t->node("scalings"), "scalings", "need at least two scalings");
        for (double v : s.scalings)
            if (!(v > 0.0 && v <= 1.0)) t->fail(t->node("scalings"), "scalings", "scalings must lie in (0, 1]");
        t->finish();
    }

    if (auto t = root.table("uniqueness")) {
        UniquenessConfig& u = c.uniqueness;
        u.members = t->integer("members", u.members);
        u.radius = t->number("radius", u.radius);
        u.floor = t->number("floor", u.floor);
        u.scale = t->number("scale", u.scale);
        if (u.members < 1) t->fail(t->node("members"), "members", "must be >= 1");
        if (!(u.radius > 0.0)) t->fail(t->node("radius"), "radius", "must be > 0");
        if (!(u.floor >= 0.0)) t->fail(t->node("floor"), "floor", "must be >= 0");
        if (!(u.scale > 0.0)) t->fail(t->node("scale"), "scale", "must be > 0");
        t->finish();
    }

    if (auto t = root.table("sweep")) {
        SweepConfig& s = c.sweep;
        s.alpha1 = t->numbers("alpha1", {});
        s.alpha2 = t->numbers("alpha2", {});
        s.beta1 = t->numbers("beta1", {});
        s.beta2 = t->numbers("beta2", {});
        s.damping = t->numbers("damping", {});
        auto check = [&](const char* key, const std::vector<double>& vals, bool strict) {
            for (double v : vals)
                if (strict ? !(v > 0.0) : !(v >= 0.0)) t->fail(t->node(key), key, strict ? "must be > 0" : "must be >= 0");
        };
        check("alpha1", s.alpha1, false);
        check("alpha2", s.alpha2, false);
        check("beta1", s.beta1, true);
        check("beta2", s.beta2, true);
        for (double v : s.damping)
            if (!(v > 0.0 && v <= 1.0)) t->fail(t->node("damping"), "damping", "must lie in (0, 1]");
        t->finish();
    }

    if (auto t = root.table("output")) {
        c.output.dir = t->string("dir", "");
        c.output.trajectory_csv = t->boolean("trajectory_csv", false);
        c.output.tree_csv = t->boolean("tree_csv", false);
        t->finish();
    }
    root.finish();
    return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open config '" + path.string() + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    const std::filesystem::path dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
    return parse_config(buf.str(), dir.string(), path.string());
}

/// Serializes a parsed configuration; parsing the result with the same base directory reproduces it.
inline std::string to_toml(const ExperimentConfig& c) {
    auto darr = [](const std::vector<double>& v) {
        toml::array a;
        for (double x : v) a.push_back(x);
        return a;
    };
    toml::table root;
    if (c.seed > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max()))
        root.insert("seed", std::to_string(c.seed));
    else
        root.insert("seed", static_cast<std::int64_t>(c.seed));
    root.insert("mesh", toml::table{{"mode", c.mesh.mode == MeshMode::interval ? "interval" : "disk"},
                                    {"extent", c.mesh.extent},
                                    {"interior", c.mesh.interior},
                                    {"angular", c.mesh.angular}});
    root.insert("time", toml::table{{"horizon", c.horizon}, {"steps", c.steps}});
    auto put_field = [](toml::table& t, const std::string& key, const ScalarField& f) {
        if (f.from_csv())
            t.insert(key, toml::table{{"csv", f.csv}});
        else
            t.insert(key, f.value);
    };
    toml::table coeffs;
    for (std::size_t i = 0; i < 4; ++i) put_field(coeffs, coefficient_names[i], c.coefficients[i]);
    root.insert("coefficients", std::move(coeffs));
    toml::table regions;
    for (std::size_t i = 0; i < 4; ++i) {
        const RegionSpec& r = c.regions[i];
        toml::table t;
        if (r.index_range) t.insert("index", toml::array{r.index_range->first, r.index_range->second});
        auto pair = [&](const char* key, double lo, double hi, double dlo) {
            if (lo != dlo || hi != INFINITY) t.insert(key, toml::array{lo, hi});
        };
        pair("x", r.x_lo, r.x_hi, -INFINITY);
        pair("theta", r.theta_lo, r.theta_hi, -INFINITY);
        pair("r", r.r_lo, r.r_hi, 0.0);
        regions.insert(region_names[i], std::move(t));
    }
    root.insert("regions", std::move(regions));
    toml::table obj;
    for (std::size_t i = 0; i < 2; ++i) {
        const std::string idx = std::to_string(i + 1);
        obj.insert("alpha" + idx, c.alpha[i]);
        obj.insert("beta" + idx, c.beta[i]);
        put_field(obj, "target" + idx, c.targets[i]);
    }
    root.insert("objectives", std::move(obj));
    toml::table init{{"profile", c.initial.profile}, {"scale", c.initial.scale},     {"norm", c.initial.norm},
                     {"value", c.initial.value},     {"center_x", c.initial.center_x}, {"center_y", c.initial.center_y},
                     {"width", c.initial.width}};
    if (!c.initial.csv.empty()) init.insert("csv", c.initial.csv);
    root.insert("initial", std::move(init));
    root.insert("nash", toml::table{{"damping", c.nash.damping},
                                    {"tol", c.nash.tol},
                                    {"maxit", c.nash.maxit},
                                    {"gateaux_directions", c.nash.gateaux_directions},
                                    {"gateaux_eps", c.nash.gateaux_eps},
                                    {"verify_directions", c.verify_directions}});
    const CarlemanConfig& k = c.carleman;
    root.insert("carleman", toml::table{{"s_grid", darr(k.s_grid)},
                                        {"lambda_grid", darr(k.lambda_grid)},
                                        {"span", k.span},
                                        {"instances", k.instances},
                                        {"refine", k.refine},
                                        {"interior", k.interior},
                                        {"steps", k.steps},
                                        {"lambda1", k.lambda1},
                                        {"t0", k.t0},
                                        {"t1", k.t1},
                                        {"t2", k.t2},
                                        {"interpolation_members", k.interpolation_members}});
    toml::array variants, steps;
    for (const auto& v : c.identity.variants) variants.push_back(v);
    for (int s : c.identity.steps) steps.push_back(s);
    root.insert("identity", toml::table{{"b", darr(c.identity.b)},
                                        {"variants", std::move(variants)},
                                        {"steps", std::move(steps)},
                                        {"s", c.identity.s},
                                        {"lambda", c.identity.lambda},
                                        {"sigma", c.identity.sigma},
                                        {"ablation", c.identity.ablation}});
    root.insert("stability", toml::table{{"members", c.stability.members},
                                         {"radius", c.stability.radius},
                                         {"scalings", darr(c.stability.scalings)}});
    root.insert("uniqueness", toml::table{{"members", c.uniqueness.members},
                                          {"radius", c.uniqueness.radius},
                                          {"floor", c.uniqueness.floor},
                                          {"scale", c.uniqueness.scale}});
    toml::table sweep;
    auto put_list = [&](const char* key, const std::vector<double>& v) {
        if (!v.empty()) sweep.insert(key, darr(v));
    };
    put_list("alpha1", c.sweep.alpha1);
    put_list("alpha2", c.sweep.alpha2);
    put_list("beta1", c.sweep.beta1);
    put_list("beta2", c.sweep.beta2);
    put_list("damping", c.sweep.damping);
    root.insert("sweep", std::move(sweep));
    root.insert("output", toml::table{{"dir", c.output.dir},
                                      {"trajectory_csv", c.output.trajectory_csv},
                                      {"tree_csv", c.output.tree_csv}});
    std::ostringstream out;
    out << root << "\n";
    return out.str();
}

}  // namespace wentzell
