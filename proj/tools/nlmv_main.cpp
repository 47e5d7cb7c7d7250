#include <cstdint>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "nlmv/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Mean-variance portfolio selection under the nonlinear wealth equation"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<long> paths;
    std::optional<std::string> out_dir;

    const char* tasks[] = {"validate", "feasibility", "riccati",
                           "frontier", "simulate",    "duality-check"};
    for (const char* task : tasks) {
        CLI::App* sub = app.add_subcommand(task);
        sub->add_option("--config", config_path, "Path to the run configuration JSON")
            ->required();
        sub->add_option("--seed", seed, "Override the RNG seed");
        sub->add_option("--paths", paths, "Override the Monte Carlo path count");
        sub->add_option("--out", out_dir, "Output directory for reports and CSVs");
    }

    CLI11_PARSE(app, argc, argv);
    const std::string task = app.get_subcommands().front()->get_name();
    return nlmv::run_cli(task, config_path, seed, paths, out_dir);
}
