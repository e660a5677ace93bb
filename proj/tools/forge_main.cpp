#include "forge/experiment.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <iostream>
#include <spdlog/spdlog.h>

int main(int argc, char **argv) {
    CLI::App app{"forge: engineered dissipation spectra and bound audits"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    unsigned workers = 0;
    std::string out_dir;

    auto *run = app.add_subcommand("run", "run an experiment config");
    run->add_option("config", config_path, "YAML experiment config")->required();
    run->add_option("--seed", seed, "override the master seed");
    run->add_option("--workers", workers, "worker threads (default: all cores)");
    run->add_option("--out", out_dir, "output directory (default: config 'output')");

    std::string validate_path;
    auto *validate = app.add_subcommand("validate", "check a config and print the effective settings");
    validate->add_option("config", validate_path, "YAML experiment config")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    spdlog::set_pattern("[%l] %v");
    try {
        if (*validate) {
            const auto cfg = forge::validate_config(validate_path);
            std::cout << forge::config_to_yaml(cfg);
            return 0;
        }
        const auto cfg = forge::validate_config(config_path);
        forge::RunOptions opts;
        opts.seed = seed;
        opts.workers = workers;
        if (!out_dir.empty())
            opts.out_dir = out_dir;
        const auto res = forge::run_experiment(cfg, opts);
        std::cout << fmt::format("wrote {} ({} rows, {} failed)\n", res.csv.string(), res.rows, res.failed_rows);
        std::cout << fmt::format("wrote {}\n", res.sidecar.string());
        if (res.exit_code == 2)
            std::cerr << "every realization failed\n";
        return res.exit_code;
    } catch (const forge::ConfigError &e) {
        std::cerr << e.what();
        if (std::string_view(e.what()).back() != '\n')
            std::cerr << '\n';
        return 1;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
