#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "mvr/harness.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    bool deterministic = false;
    int threads = 1;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "experiment configuration file")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--seed", args.seed, "override the sampling seed");
    cmd->add_option("--out", args.out_dir, "override the output directory");
    cmd->add_flag("--deterministic", args.deterministic,
                  "byte-stable outputs (zeroes wall-clock columns)");
    cmd->add_option("--threads", args.threads, "replication worker threads")
        ->check(CLI::PositiveNumber);
}

mvr::harness::RunOptions to_options(const CommonArgs& args) {
    mvr::harness::RunOptions opts;
    opts.seed = args.seed;
    opts.out_dir = args.out_dir;
    opts.deterministic = args.deterministic;
    opts.threads = args.threads;
    return opts;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"stochastic elliptic PDE sampling harness"};
    app.require_subcommand(1);

    CommonArgs build_args, run_args, select_args, oracle_args;
    std::string method;

    auto* build = app.add_subcommand("build-rb", "offline greedy RB construction");
    add_common(build, build_args);
    auto* run = app.add_subcommand("run", "replicated sampling runs");
    add_common(run, run_args);
    run->add_option("--method", method, "mc-hdg | mc-rb | mvr")->required();
    auto* select = app.add_subcommand("select", "level-count comparison table");
    add_common(select, select_args);
    auto* oracle = app.add_subcommand("oracle", "closed-form benchmark references");
    add_common(oracle, oracle_args);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;  // usage problems are configuration errors
    }

    try {
        if (build->parsed()) {
            mvr::harness::cmd_build_rb(mvr::harness::load_config(build_args.config_path),
                                       to_options(build_args));
        } else if (run->parsed()) {
            mvr::harness::cmd_run(mvr::harness::load_config(run_args.config_path), method,
                                  to_options(run_args));
        } else if (select->parsed()) {
            mvr::harness::cmd_select(mvr::harness::load_config(select_args.config_path),
                                     to_options(select_args));
        } else if (oracle->parsed()) {
            mvr::harness::cmd_oracle(mvr::harness::load_config(oracle_args.config_path),
                                     to_options(oracle_args));
        }
    } catch (const mvr::harness::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
