#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "kerrcat/experiment.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Kerr resonator cat-state simulator"};
    app.require_subcommand(1);

    std::string config_path;
    kerrcat::RunOptions options;
    uint64_t seed_override = 0;
    int cutoff_override = 0;

    CLI::App* run = app.add_subcommand("run", "run an experiment config");
    run->add_option("config", config_path, "path to the JSON config")->required();
    run->add_option("--output-dir", options.output_dir, "directory for CSV/JSON artifacts");
    run->add_option("--workers", options.workers,
                    "worker thread count (default: config, then $KERRCAT_WORKERS, then 1)");
    CLI::Option* seed_opt =
        run->add_option("--seed-override", seed_override, "replace the config seed");
    CLI::Option* cutoff_opt = run->add_option("--cutoff-override", cutoff_override,
                                              "replace the config Fock cutoff");

    CLI::App* validate = app.add_subcommand("validate", "check a config without running it");
    validate->add_option("config", config_path, "path to the JSON config")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kerrcat::kExitConfig;
    }

    if (app.got_subcommand(validate))
        return kerrcat::validate_config_file(config_path, std::cout, std::cerr);

    if (seed_opt->count() > 0) options.seed_override = seed_override;
    if (cutoff_opt->count() > 0) {
        if (cutoff_override < 2) {
            std::cerr << "config error: --cutoff-override must be >= 2\n";
            return kerrcat::kExitConfig;
        }
        options.cutoff_override = cutoff_override;
    }
    return kerrcat::run_experiment_file(config_path, options, std::cout, std::cerr);
}
