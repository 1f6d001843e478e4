// wentzell_lab <subcommand> --config PATH [--out DIR] [--threads N] [--seed S]
//
// Exit status: 0 success, 2 invalid input, 3 numerical failure, 4 I/O failure.

#include "wentzell/runner.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

namespace {

enum Exit : int { ok = 0, invalid = 2, numerical = 3, io = 4 };

int exit_code(wentzell::ErrorKind kind) {
    switch (kind) {
        case wentzell::ErrorKind::numerical:
        case wentzell::ErrorKind::non_contraction:
            return numerical;
        case wentzell::ErrorKind::io:
            return io;
        default:
            return invalid;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Configuration-driven runner for the stochastic dynamic-boundary game"};
    app.require_subcommand(1, 1);
    std::string config_path, out_dir;
    int threads = 1;
    std::optional<std::uint64_t> seed;
    for (const std::string& name : wentzell::subcommands()) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "experiment configuration (TOML)")->required();
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
        sub->add_option("--seed", seed, "overrides the config seed");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? ok : invalid;
    }
    const std::string name = app.get_subcommands().front()->get_name();

    try {
        wentzell::ExperimentConfig cfg = wentzell::load_config(config_path);
        if (seed) cfg.seed = *seed;
        std::string dir = out_dir;
        if (dir.empty())
            if (const char* env = std::getenv("WENTZELL_OUT_DIR"); env && *env) dir = env;
        if (dir.empty()) dir = cfg.output.dir;
        if (dir.empty()) dir = "out";
        const auto files = wentzell::run_subcommand(cfg, name, dir, threads);
        for (const auto& f : files) std::cout << dir << "/" << f << "\n";
        return ok;
    } catch (const wentzell::Error& e) {
        std::cerr << "wentzell_lab " << name << ": " << e.what() << "\n";
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "wentzell_lab " << name << ": " << e.what() << "\n";
        return numerical;
    }
}
