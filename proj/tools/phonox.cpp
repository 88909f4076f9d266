// Command-line front end: run a scenario file or check its resonance
// conditions.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "phonox/scenario.hpp"

namespace {

std::optional<double> rtol_from_env()
{
    const char* v = std::getenv("PHONOX_RTOL");
    if (!v || !*v) {
        return std::nullopt;
    }
    char* end = nullptr;
    const double x = std::strtod(v, &end);
    if (end == v || *end != '\0') {
        throw phonox::cli::ConfigError(std::string("PHONOX_RTOL: not a number: ") + v);
    }
    return x;
}

int run(const std::string& path, const std::optional<std::string>& prefix, const std::optional<std::uint64_t>& seed)
{
    using namespace phonox::cli;
    auto cfg = load_config(path);
    if (prefix) cfg.output_prefix = *prefix;
    if (seed) {
        cfg.seed = *seed;
        cfg = parse_config(config_json(cfg)); // re-sample with the new seed
    }
    RunOptions opts;
    opts.rtol = rtol_from_env();
    const auto summary = run_scenario(cfg, opts);
    for (const auto& w : summary.warnings) {
        std::cerr << "warning: " << w << "\n";
    }
    if (summary.exit_code != exit_code::ok) {
        std::cerr << "error: " << summary.message << "\n";
        return summary.exit_code;
    }
    for (const auto& h : summary.headline) {
        std::cout << h.name << " = " << phonox::io::format_double(h.value) << " " << h.unit << "\n";
    }
    std::cout << "wrote " << csv_path(cfg.output_prefix).string() << " and "
              << summary_path(cfg.output_prefix).string() << "\n";
    return 0;
}

int validate(const std::string& path)
{
    using namespace phonox::cli;
    const auto cfg = load_config(path);
    auto report = to_json(check_conditions(cfg));
    json out;
    out["scenario"] = to_string(cfg.scenario);
    for (auto& [k, v] : report.items()) out[k] = v;
    std::cout << out.dump(2) << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"phonox: cavity-mediated laser cooling and staged heat-exchanger simulations"};
    app.set_version_flag("--version", std::string("phonox ") + PHONOX_VERSION);
    app.require_subcommand(1);

    std::string run_config;
    std::optional<std::string> prefix;
    std::optional<std::uint64_t> seed;
    auto* run_cmd = app.add_subcommand("run", "Run a scenario and write <prefix>.timeseries.csv and <prefix>.summary.json");
    run_cmd->add_option("--config", run_config, "Scenario JSON file")->required();
    run_cmd->add_option("--output-prefix", prefix, "Override output_prefix from the config");
    run_cmd->add_option("--seed", seed, "Override the seed used for sampled ensembles");

    std::string validate_config;
    auto* validate_cmd = app.add_subcommand("validate", "Check resonance conditions and bubble safety without integrating");
    validate_cmd->add_option("--config", validate_config, "Scenario JSON file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : phonox::cli::exit_code::invalid;
    }

    try {
        if (*run_cmd) return run(run_config, prefix, seed);
        return validate(validate_config);
    } catch (const phonox::InvalidArgument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return phonox::cli::exit_code::invalid;
    } catch (const phonox::NumericalError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return phonox::cli::exit_code::numerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
