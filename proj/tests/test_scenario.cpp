#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <sys/wait.h>

#include "phonox/scenario.hpp"

using namespace phonox;
using namespace phonox::cli;
namespace fs = std::filesystem;

namespace {

const fs::path source_dir = PHONOX_SOURCE_DIR;
const fs::path configs = source_dir / "configs";
const fs::path golden = source_dir / "tests" / "golden";

std::string slurp(const fs::path& p)
{
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name)
{
    const fs::path dir = fs::current_path() / "scenario_out" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

fs::path write_file(const fs::path& p, const std::string& text)
{
    std::ofstream(p, std::ios::binary) << text;
    return p;
}

ScenarioConfig shipped(const std::string& name, const fs::path& out_dir)
{
    auto cfg = load_config(configs / (name + ".json"));
    cfg.output_prefix = (out_dir / name).string();
    return cfg;
}

std::string message_of(const std::function<void()>& f)
{
    try {
        f();
    } catch (const std::exception& e) {
        return e.what();
    }
    return "";
}

int run_cli(const std::string& args, const fs::path& out = {})
{
    std::string cmd = std::string(PHONOX_CLI_PATH) + " " + args;
    if (!out.empty()) cmd += " > " + out.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string first_line(const std::string& s) { return s.substr(0, s.find('\n') + 1); }

} // namespace

TEST(LoadConfig, MinimalExchangerFillsDefaults)
{
    const auto cfg = parse_config(json::parse(R"({
        "scenario": "exchanger",
        "parameters": {"initial_temperature": 293.15, "n_atoms": 1e8, "emission_rate": 1e6,
                       "nu_max": 1e8, "cooling_rate": 1e9, "duration": 1e-3}
    })"));
    const auto& p = cfg.parameters;
    EXPECT_EQ(p["liquid_mass"], 1e-15);
    EXPECT_EQ(p["heat_capacity"], 4.18);
    EXPECT_EQ(p["stage_period"], 25e-6);
    EXPECT_EQ(p["cooling_fraction"], 0.02);
    EXPECT_EQ(p["thermal_coupling_time"], 1e-6);
    EXPECT_EQ(p["floor_temperature"], 1e-3);
    EXPECT_EQ(p["record_stride"], 1);
    EXPECT_EQ(p["delta_T"], 1.0);
    EXPECT_EQ(cfg.output_prefix, "exchanger");
    EXPECT_FALSE(cfg.seed.has_value());
}

TEST(LoadConfig, ConstraintErrorsNameTheKey)
{
    auto cavity = [](const std::string& extra) {
        return json::parse(R"({"scenario": "cavity-single", "parameters": {"g_eff": 0.1, "nu": 10,
            "t_final": 10, "dt_observe": 1, )" + extra + "}}");
    };
    const auto msg = message_of([&] { parse_config(cavity(R"("kappa": -1)")); });
    EXPECT_NE(msg.find("kappa"), std::string::npos) << msg;
    EXPECT_NE(msg.find(">= 0"), std::string::npos) << msg;

    const auto missing = message_of([&] { parse_config(cavity(R"("m0": 1)")); });
    EXPECT_NE(missing.find("parameters.kappa: is required"), std::string::npos) << missing;

    const auto unknown = message_of([&] { parse_config(cavity(R"("kappa": 1, "kapa": 2)")); });
    EXPECT_NE(unknown.find("parameters.kapa: unknown key"), std::string::npos) << unknown;

    const auto top = message_of([&] { parse_config(json::parse(R"({"scenario": "thermal", "extra": 1})")); });
    EXPECT_NE(top.find("extra: unknown key"), std::string::npos) << top;

    const auto oracle = message_of([&] { parse_config(cavity(R"("kappa": 1, "m0": 1.5)")); });
    EXPECT_NE(oracle.find("m0"), std::string::npos) << oracle;
    EXPECT_NO_THROW(parse_config(cavity(R"("kappa": 1, "m0": 1.5, "oracle": false)")));

    EXPECT_THROW(parse_config(json::parse(R"({"scenario": "thermal", "seed": -3,
        "parameters": {"temperature": 1, "nu": 1e8}})")), ConfigError);
    EXPECT_THROW(parse_config(json::parse(R"({"scenario": "nope"})")), ConfigError);
    EXPECT_THROW(parse_config(json::parse(R"([1, 2])")), ConfigError);
}

TEST(LoadConfig, ParseErrorReportsLineAndColumn)
{
    const auto dir = scratch("parse_error");
    const auto path = write_file(dir / "bad.json", "{\n  \"scenario\": \"thermal\",\n  oops\n}\n");
    const auto msg = message_of([&] { load_config(path); });
    EXPECT_NE(msg.find("bad.json:3:"), std::string::npos) << msg;

    const auto missing = message_of([&] { load_config(dir / "absent.json"); });
    EXPECT_NE(missing.find("cannot open"), std::string::npos) << missing;
}

TEST(LoadConfig, HeadlineExampleResolvesToItsInputs)
{
    const auto cfg = load_config(configs / "exchanger_headline.json");
    EXPECT_EQ(cfg.scenario, Scenario::Exchanger);
    const auto& p = cfg.parameters;
    EXPECT_EQ(p["liquid_mass"], 1e-15);
    EXPECT_EQ(p["heat_capacity"], 4.18);
    EXPECT_EQ(p["initial_temperature"], 293.15);
    EXPECT_EQ(p["n_atoms"], 1e8);
    EXPECT_EQ(p["emission_rate"], 1e6);
    EXPECT_EQ(p["nu_max"], 1e8);
    EXPECT_EQ(p["reference_gamma_cool"], 3.81e-3);
}

TEST(LoadConfig, EveryShippedConfigLoads)
{
    int n = 0;
    for (const auto& e : fs::directory_iterator(configs)) {
        if (e.path().extension() != ".json") continue;
        EXPECT_NO_THROW(load_config(e.path())) << e.path();
        ++n;
    }
    EXPECT_GE(n, 8);
}

TEST(RunScenario, CavitySingleCoolsToZero)
{
    const auto dir = scratch("cavity_single");
    const auto s = run_scenario(shipped("cavity_single", dir));
    ASSERT_EQ(s.exit_code, 0) << s.message;
    ASSERT_NE(s.find("final_m"), nullptr);
    EXPECT_LT(s.find("final_m")->value, 1e-6);
    EXPECT_EQ(s.find("final_m")->unit, "phonons");
    EXPECT_LT(s.find("oracle_max_abs_dev")->value, 1e-6);
    EXPECT_TRUE(fs::exists(dir / "cavity_single.timeseries.csv"));
    EXPECT_TRUE(fs::exists(dir / "cavity_single.summary.json"));
}

TEST(RunScenario, BubbleSpectrumCsvIsColumnwiseBubbleOptics)
{
    const auto dir = scratch("bubble");
    const auto cfg = shipped("bubble_spectrum", dir);
    ASSERT_EQ(run_scenario(cfg).exit_code, 0);
    std::istringstream csv(slurp(dir / "bubble_spectrum.timeseries.csv"));
    std::string line;
    std::getline(csv, line);
    EXPECT_EQ(line, "d_min,j,omega_cav,lambda_cav,delta_cav,label");
    const auto& p = cfg.parameters;
    int rows = 0;
    while (std::getline(csv, line)) {
        std::istringstream ls(line);
        std::string f[6];
        for (auto& x : f) std::getline(ls, x, ',');
        const BubbleSpec b{std::stod(f[0]), p["kappa"].get<double>(), p["nu_max"].get<double>()};
        EXPECT_EQ(std::stod(f[0]), p["diameters"][rows].get<double>());
        EXPECT_EQ(f[1], "1");
        EXPECT_EQ(std::stod(f[2]), cavity_frequency(b, 1));
        EXPECT_EQ(std::stod(f[3]), cavity_wavelength(b, 1));
        EXPECT_EQ(std::stod(f[4]), cavity_frequency(b, 1) - p["laser_frequency"].get<double>());
        ++rows;
    }
    EXPECT_EQ(rows, 3);
}

TEST(RunScenario, DeterministicAcrossRuns)
{
    for (const std::string name : {"exchanger_headline", "bubble_sampled", "single_ion", "sweep"}) {
        const auto a = scratch(name + "_a"), b = scratch(name + "_b");
        auto ca = shipped(name, a), cb = shipped(name, b);
        cb.output_prefix = (a / name).string(); // same prefix text in both summaries
        ASSERT_EQ(run_scenario(ca).exit_code, 0);
        const auto csv1 = slurp(a / (name + ".timeseries.csv"));
        const auto sum1 = slurp(a / (name + ".summary.json"));
        ASSERT_EQ(run_scenario(cb).exit_code, 0);
        EXPECT_EQ(csv1, slurp(a / (name + ".timeseries.csv"))) << name;
        EXPECT_EQ(sum1, slurp(a / (name + ".summary.json"))) << name;
    }
}

TEST(RunScenario, SummaryReproducesTheRun)
{
    for (const std::string name : {"exchanger_headline", "bubble_sampled", "cavity_collective", "thermal", "validate"}) {
        const auto dir = scratch("roundtrip_" + name);
        ASSERT_EQ(run_scenario(shipped(name, dir)).exit_code, 0);
        const auto summary = json::parse(slurp(dir / (name + ".summary.json")));
        json again;
        for (const char* k : {"scenario", "parameters", "output_prefix", "seed"}) {
            if (!summary[k].is_null()) again[k] = summary[k];
        }
        const auto cfg = parse_config(again);
        EXPECT_EQ(cfg.parameters, summary["parameters"]) << name;
        const auto csv1 = slurp(dir / (name + ".timeseries.csv"));
        ASSERT_EQ(run_scenario(cfg).exit_code, 0);
        EXPECT_EQ(csv1, slurp(dir / (name + ".timeseries.csv"))) << name;
    }
}

TEST(RunScenario, SummaryShape)
{
    const auto dir = scratch("shape");
    ASSERT_EQ(run_scenario(shipped("exchanger_headline", dir)).exit_code, 0);
    const auto j = json::parse(slurp(dir / "exchanger_headline.summary.json"));
    for (const char* k : {"phonox_version", "scenario", "output_prefix", "seed", "parameters", "headline", "warnings", "status"}) {
        EXPECT_TRUE(j.contains(k)) << k;
    }
    EXPECT_TRUE(j["warnings"].is_array());
    for (auto& [name, h] : j["headline"].items()) {
        EXPECT_TRUE(h["unit"].is_string()) << name;
        EXPECT_TRUE(h["value"].is_number()) << name;
    }
    const double g = j["headline"]["gamma_cool"]["value"];
    EXPECT_NEAR(g, 3.9637e-3, 1e-7);
    EXPECT_NEAR(j["headline"]["gamma_cool_relative_deviation"]["value"].get<double>(), g / 3.81e-3 - 1, 1e-15);
    EXPECT_EQ(j["status"]["exit_code"], 0);
}

TEST(RunScenario, NumericalFailureStillWritesSummary)
{
    const auto dir = scratch("overflow");
    auto cfg = parse_config(json::parse(R"({"scenario": "cavity-single", "parameters": {"g_eff": 0.1, "kappa": 1,
        "nu": 10, "m0": 4, "phonon_cutoff": 4, "photon_cutoff": 4, "t_final": 10, "dt_observe": 1}})"));
    cfg.output_prefix = (dir / "overflow").string();
    const auto s = run_scenario(cfg);
    EXPECT_EQ(s.exit_code, exit_code::numerical);
    EXPECT_NE(s.message.find("truncation"), std::string::npos);
    EXPECT_FALSE(fs::exists(dir / "overflow.timeseries.csv"));
    const auto j = json::parse(slurp(dir / "overflow.summary.json"));
    EXPECT_EQ(j["status"]["exit_code"], 3);
    EXPECT_FALSE(j["warnings"].empty());
}

TEST(RunScenario, SweepKeepsFailedRows)
{
    const auto dir = scratch("sweep_errors");
    auto cfg = parse_config(json::parse(R"({"scenario": "sweep", "parameters": {"initial_temperature": 293.15,
        "n_atoms": 1e8, "emission_rate": 1e6, "nu_max": 1e8,
        "grid": {"liquid_mass": [1e-15, -1e-15], "heat_capacity": [4.18, 0]}}})"));
    cfg.output_prefix = (dir / "sweep").string();
    const auto s = run_scenario(cfg);
    ASSERT_EQ(s.exit_code, 0) << s.message;
    EXPECT_EQ(s.find("rows")->value, 4);
    EXPECT_EQ(s.find("failed_rows")->value, 3);
    const auto csv = slurp(dir / "sweep.timeseries.csv");
    EXPECT_NE(csv.find("liquid_mass: must be positive"), std::string::npos);
    EXPECT_NE(csv.find("heat_capacity: must be positive"), std::string::npos);
}

TEST(RunScenario, RtolOverrideIsReported)
{
    const auto dir = scratch("rtol");
    auto cfg = shipped("single_ion", dir);
    RunOptions opts;
    opts.rtol = 1e-6;
    const auto s = run_scenario(cfg, opts);
    ASSERT_EQ(s.exit_code, 0);
    EXPECT_EQ(s.rtol, 1e-6);
    opts.rtol = 2.0;
    EXPECT_EQ(run_scenario(cfg, opts).exit_code, exit_code::invalid);
}

TEST(RunScenario, SeedControlsSampling)
{
    const auto dir = scratch("seed");
    auto cfg = shipped("bubble_sampled", dir);
    ASSERT_EQ(run_scenario(cfg).exit_code, 0);
    const auto a = slurp(dir / "bubble_sampled.timeseries.csv");
    cfg.seed = 7;
    cfg = parse_config(config_json(cfg));
    ASSERT_EQ(run_scenario(cfg).exit_code, 0);
    EXPECT_NE(a, slurp(dir / "bubble_sampled.timeseries.csv"));
}

TEST(Conditions, ReportForEachScenarioKind)
{
    const auto v = check_conditions(load_config(configs / "validate.json"));
    EXPECT_TRUE(v.applicable);
    EXPECT_TRUE(v.all_passed());
    EXPECT_EQ(v.rows.size(), 3u + 3u + 3u);
    EXPECT_FALSE(check_conditions(load_config(configs / "thermal.json")).applicable);
    const auto b = check_conditions(load_config(configs / "bubble_sampled.json"));
    EXPECT_FALSE(b.all_passed());
}

// Column order is part of the output contract.
TEST(GoldenCsv, HeadersPerScenario)
{
    for (const std::string name : {"single_ion", "cavity_single", "cavity_collective", "thermal", "bubble_spectrum",
                                   "exchanger_headline", "sweep", "validate"}) {
        const auto dir = scratch("golden_" + name);
        ASSERT_EQ(run_scenario(shipped(name, dir)).exit_code, 0) << name;
        const auto header = first_line(slurp(dir / (name + ".timeseries.csv")));
        EXPECT_EQ(header, slurp(golden / (name + ".header.csv"))) << name;
    }
}

TEST(GoldenCsv, ClosedFormScenariosMatchByteForByte)
{
    for (const std::string name : {"bubble_spectrum", "thermal", "sweep", "validate"}) {
        const auto dir = scratch("golden_full_" + name);
        ASSERT_EQ(run_scenario(shipped(name, dir)).exit_code, 0) << name;
        EXPECT_EQ(slurp(dir / (name + ".timeseries.csv")), slurp(golden / (name + ".timeseries.csv"))) << name;
    }
}

TEST(Cli, ExitCodesAndFiles)
{
    const auto dir = scratch("cli");
    const auto bad = write_file(dir / "bad.json", R"({"scenario": "warp-drive", "output_prefix": ")" +
                                                      (dir / "bad").string() + R"("})");
    EXPECT_EQ(run_cli("run --config " + bad.string(), dir / "bad.log"), 2);
    EXPECT_FALSE(fs::exists(dir / "bad.timeseries.csv"));
    EXPECT_FALSE(fs::exists(dir / "bad.summary.json"));
    EXPECT_NE(slurp(dir / "bad.log").find("warp-drive"), std::string::npos);

    const auto prefix = (dir / "thermal").string();
    EXPECT_EQ(run_cli("run --config " + (configs / "thermal.json").string() + " --output-prefix " + prefix,
                      dir / "ok.log"), 0);
    EXPECT_TRUE(fs::exists(prefix + ".timeseries.csv"));
    EXPECT_TRUE(fs::exists(prefix + ".summary.json"));

    EXPECT_EQ(run_cli("validate --config " + (configs / "validate.json").string(), dir / "validate.log"), 0);
    const auto report = json::parse(slurp(dir / "validate.log"));
    EXPECT_EQ(report["all_passed"], true);

    EXPECT_EQ(run_cli("--version", dir / "version.log"), 0);
    EXPECT_NE(slurp(dir / "version.log").find(PHONOX_VERSION), std::string::npos);
    EXPECT_EQ(run_cli("--help", dir / "help.log"), 0);
    EXPECT_EQ(run_cli("run", dir / "noconfig.log"), 2);
    EXPECT_EQ(run_cli("run --config " + (dir / "missing.json").string(), dir / "missing.log"), 2);
}

TEST(Cli, EnvironmentToleranceAndSeed)
{
    const auto dir = scratch("cli_env");
    const auto prefix = (dir / "ion").string();
    EXPECT_EQ(run_cli("run --config " + (configs / "single_ion.json").string() + " --output-prefix " + prefix, {}), 0);
    const std::string cmd = "PHONOX_RTOL=1e-7 " + std::string(PHONOX_CLI_PATH) + " run --config " +
                            (configs / "single_ion.json").string() + " --output-prefix " + prefix + " > /dev/null";
    ASSERT_EQ(std::system(cmd.c_str()), 0);
    EXPECT_EQ(json::parse(slurp(prefix + ".summary.json"))["solver"]["rtol"], 1e-7);

    const auto sampled = (dir / "bubbles").string();
    EXPECT_EQ(run_cli("run --config " + (configs / "bubble_sampled.json").string() + " --seed 5 --output-prefix " +
                      sampled, dir / "seed.log"), 0);
    EXPECT_EQ(json::parse(slurp(sampled + ".summary.json"))["seed"], 5);
}
