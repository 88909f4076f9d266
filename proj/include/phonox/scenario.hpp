#pragma once

// Scenario files and batch runs. A scenario file is a single JSON object
// {"scenario", "parameters", "output_prefix", "seed"}; parameters are
// checked strictly (unknown keys are errors) and echoed back with every
// default filled in. A run writes <prefix>.timeseries.csv and
// <prefix>.summary.json.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

#include "phonox/bubble.hpp"
#include "phonox/error.hpp"
#include "phonox/exchanger.hpp"
#include "phonox/fock.hpp"
#include "phonox/io.hpp"
#include "phonox/ode.hpp"
#include "phonox/rate.hpp"
#include "phonox/thermo.hpp"

#ifndef PHONOX_VERSION
#define PHONOX_VERSION "0.0.0"
#endif

namespace phonox::cli {

using json = nlohmann::ordered_json;

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int invalid = 2;
inline constexpr int numerical = 3;
} // namespace exit_code

enum class Scenario { SingleIon, CavitySingle, CavityCollective, Thermal, BubbleSpectrum, Exchanger, Sweep, Validate };

inline constexpr std::array<std::pair<Scenario, std::string_view>, 8> scenario_names{{
    {Scenario::SingleIon, "single-ion"},
    {Scenario::CavitySingle, "cavity-single"},
    {Scenario::CavityCollective, "cavity-collective"},
    {Scenario::Thermal, "thermal"},
    {Scenario::BubbleSpectrum, "bubble-spectrum"},
    {Scenario::Exchanger, "exchanger"},
    {Scenario::Sweep, "sweep"},
    {Scenario::Validate, "validate"},
}};

inline std::string to_string(Scenario s)
{
    for (const auto& [k, name] : scenario_names) {
        if (k == s) return std::string(name);
    }
    return "?";
}

inline std::optional<Scenario> parse_scenario(std::string_view name)
{
    for (const auto& [k, n] : scenario_names) {
        if (n == name) return k;
    }
    return std::nullopt;
}

/// Bad configuration file: unreadable, malformed JSON, or a parameter
/// outside its documented range.
class ConfigError : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

struct ScenarioConfig {
    Scenario scenario = Scenario::Thermal;
    json parameters = json::object(); // resolved, defaults included
    std::string output_prefix;
    std::optional<std::uint64_t> seed;
};

struct Headline {
    std::string name;
    double value;
    std::string unit;
};

struct RunSummary {
    Scenario scenario = Scenario::Thermal;
    json parameters = json::object();
    std::string output_prefix;
    std::optional<std::uint64_t> seed;
    std::optional<double> rtol; // integrator tolerance when one was used
    std::vector<Headline> headline;
    std::vector<std::string> warnings;
    int exit_code = exit_code::ok;
    std::string message = "ok";

    const Headline* find(std::string_view name) const
    {
        auto it = std::find_if(headline.begin(), headline.end(), [&](const Headline& h) { return h.name == name; });
        return it == headline.end() ? nullptr : &*it;
    }

    json to_json() const
    {
        json j;
        j["phonox_version"] = PHONOX_VERSION;
        j["scenario"] = to_string(scenario);
        j["output_prefix"] = output_prefix;
        j["seed"] = seed ? json(*seed) : json(nullptr);
        j["parameters"] = parameters;
        if (rtol) {
            j["solver"] = {{"rtol", *rtol}};
        }
        json h = json::object();
        for (const auto& x : headline) {
            h[x.name] = {{"value", x.value}, {"unit", x.unit}};
        }
        j["headline"] = std::move(h);
        j["warnings"] = warnings;
        j["status"] = {{"exit_code", exit_code}, {"message", message}};
        return j;
    }
};

struct RunOptions {
    std::optional<double> rtol; // overrides the integrator relative tolerance
    bool write_files = true;
};

/// What a run produced before it is written out.
struct RunResult {
    RunSummary summary;
    std::optional<io::CsvTable> table;
};

namespace detail {

enum class Bound { Any, Positive, NonNegative, OpenUnit };

/// Reads typed values out of one JSON object, records every value it hands
/// out (defaults included) and rejects keys nobody asked for.
class ParamReader {
public:
    ParamReader(const json& obj, std::string context)
        : obj_(obj), ctx_(std::move(context))
    {
        if (!obj_.is_object()) {
            throw ConfigError(ctx_ + ": must be a JSON object");
        }
    }

    [[noreturn]] void fail(const std::string& key, const std::string& what) const
    {
        throw ConfigError(ctx_ + "." + key + ": " + what);
    }

    bool has(const std::string& key) const { return obj_.contains(key); }

    double number(const std::string& key, std::optional<double> fallback, Bound b = Bound::Any)
    {
        const json* v = take(key);
        double x = 0.0;
        if (!v) {
            if (!fallback) fail(key, "is required");
            x = *fallback;
        } else {
            x = as_number(key, *v);
        }
        check(key, x, b);
        out_[key] = x;
        return x;
    }

    std::optional<double> optional_number(const std::string& key, Bound b = Bound::Any)
    {
        if (!has(key)) {
            return std::nullopt;
        }
        return number(key, std::nullopt, b);
    }

    /// A positive time that may also be the string "inf".
    double time_or_infinity(const std::string& key, double fallback)
    {
        const json* v = take(key);
        if (v && v->is_string()) {
            const auto s = v->get<std::string>();
            if (s != "inf" && s != "infinity") fail(key, "must be a positive number or \"inf\"");
            out_[key] = "inf";
            return std::numeric_limits<double>::infinity();
        }
        const double x = v ? as_number(key, *v) : fallback;
        check(key, x, Bound::Positive);
        out_[key] = x;
        return x;
    }

    long long integer(const std::string& key, std::optional<long long> fallback, long long min,
                      long long max = std::numeric_limits<int>::max())
    {
        const json* v = take(key);
        long long x = 0;
        if (!v) {
            if (!fallback) fail(key, "is required");
            x = *fallback;
        } else {
            const double d = as_number(key, *v);
            if (d != std::floor(d) || std::abs(d) > 9e15) fail(key, "must be an integer");
            x = static_cast<long long>(d);
        }
        if (x < min) fail(key, "must be >= " + std::to_string(min));
        if (x > max) fail(key, "must be <= " + std::to_string(max));
        out_[key] = x;
        return x;
    }

    bool boolean(const std::string& key, bool fallback)
    {
        const json* v = take(key);
        bool x = fallback;
        if (v) {
            if (!v->is_boolean()) fail(key, "must be true or false");
            x = v->get<bool>();
        }
        out_[key] = x;
        return x;
    }

    std::optional<std::vector<double>> number_list(const std::string& key, Bound b = Bound::Any)
    {
        const json* v = take(key);
        if (!v) return std::nullopt;
        if (!v->is_array() || v->empty()) fail(key, "must be a non-empty array of numbers");
        std::vector<double> xs;
        for (const auto& e : *v) {
            xs.push_back(as_number(key, e));
            check(key, xs.back(), b);
        }
        out_[key] = xs;
        return xs;
    }

    /// [[x, y], ...] pairs.
    std::optional<std::vector<std::pair<double, double>>> pair_list(const std::string& key)
    {
        const json* v = take(key);
        if (!v) return std::nullopt;
        if (!v->is_array() || v->empty()) fail(key, "must be a non-empty array of [x, y] pairs");
        std::vector<std::pair<double, double>> xs;
        json echo = json::array();
        for (const auto& e : *v) {
            if (!e.is_array() || e.size() != 2) fail(key, "entries must be [x, y] pairs");
            xs.emplace_back(as_number(key, e[0]), as_number(key, e[1]));
            echo.push_back({xs.back().first, xs.back().second});
        }
        out_[key] = std::move(echo);
        return xs;
    }

    /// Nested object, handed back unparsed; the caller reads it with its
    /// own reader and stores the resolved form with `put`.
    const json* object(const std::string& key)
    {
        const json* v = take(key);
        if (v && !v->is_object()) fail(key, "must be a JSON object");
        return v;
    }

    void put(const std::string& key, json value) { out_[key] = std::move(value); }

    std::string child_context(const std::string& key) const { return ctx_ + "." + key; }

    /// Rejects keys that were never read; returns the resolved object.
    json finish()
    {
        for (auto it = obj_.begin(); it != obj_.end(); ++it) {
            if (!seen_.count(it.key())) {
                fail(it.key(), "unknown key");
            }
        }
        return out_;
    }

private:
    const json* take(const std::string& key)
    {
        seen_.insert(key);
        auto it = obj_.find(key);
        return it == obj_.end() ? nullptr : &*it;
    }

    double as_number(const std::string& key, const json& v) const
    {
        if (!v.is_number()) fail(key, "must be a number");
        const double x = v.get<double>();
        if (!std::isfinite(x)) fail(key, "must be finite");
        return x;
    }

    void check(const std::string& key, double x, Bound b) const
    {
        auto got = [&] { return " (got " + io::format_double(x) + ")"; };
        switch (b) {
        case Bound::Any: break;
        case Bound::Positive:
            if (!(x > 0.0)) fail(key, "must be > 0" + got());
            break;
        case Bound::NonNegative:
            if (!(x >= 0.0)) fail(key, "must be >= 0" + got());
            break;
        case Bound::OpenUnit:
            if (!(x > 0.0 && x < 1.0)) fail(key, "must lie strictly between 0 and 1" + got());
            break;
        }
    }

    const json& obj_;
    std::string ctx_;
    std::set<std::string> seen_;
    json out_ = json::object();
};

/// Re-throws an InvalidArgument from a module as a ConfigError scoped to
/// the parameters object.
template <class F>
auto scoped(const std::string& ctx, F f)
{
    try {
        return f();
    } catch (const ConfigError&) {
        throw;
    } catch (const InvalidArgument& e) {
        throw ConfigError(ctx + "." + e.what());
    }
}

inline void check_observations(ParamReader& r, double t_final, double dt)
{
    if (dt > t_final) r.fail("dt_observe", "must not exceed t_final");
    if (t_final / dt > 1e6) r.fail("dt_observe", "gives more than 1e6 observation times");
}

// Integer Fock label, or nullopt.
inline std::optional<int> fock_label(double x)
{
    if (x >= 0.0 && x == std::floor(x) && x < 1e6) return static_cast<int>(x);
    return std::nullopt;
}

// ---- single-ion -----------------------------------------------------------

struct SingleIonSetup {
    SingleIonParams params;
    RateStateAtom initial;
    double t_final;
    double dt_observe;
    double fit_start;
    int phonon_cutoff;
    bool oracle;
    double band_tolerance;
};

inline SingleIonParams read_single_ion_params(ParamReader& r)
{
    SingleIonParams p;
    p.g = r.number("g", std::nullopt, Bound::NonNegative);
    p.gamma = r.number("gamma", std::nullopt, Bound::Positive);
    p.nu = r.number("nu", std::nullopt, Bound::Positive);
    p.omegaL = r.number("omega_laser", 0.0);
    p.omega0 = r.number("omega0", p.omegaL + p.nu);
    return p;
}

inline SingleIonSetup resolve_single_ion(ParamReader& r)
{
    SingleIonSetup s{};
    s.params = read_single_ion_params(r);
    s.initial.m = r.number("m0", 1.0, Bound::NonNegative);
    s.initial.s = r.number("s0", 0.0, Bound::NonNegative);
    if (s.initial.s > 1.0) r.fail("s0", "must be <= 1");
    s.initial.k1 = r.number("k0", 0.0);
    s.t_final = r.number("t_final", std::nullopt, Bound::Positive);
    s.dt_observe = r.number("dt_observe", std::nullopt, Bound::Positive);
    check_observations(r, s.t_final, s.dt_observe);
    s.fit_start = r.number("fit_start", 0.25 * s.t_final, Bound::NonNegative);
    s.phonon_cutoff = static_cast<int>(r.integer("phonon_cutoff", 20, 1, 200));
    s.oracle = r.boolean("oracle", true);
    s.band_tolerance = r.number("band_tolerance", 0.5, Bound::Positive);
    if (s.oracle) {
        const auto m = fock_label(s.initial.m);
        if (!m) r.fail("m0", "the Lindblad cross-check needs an integer phonon number (or oracle = false)");
        if (s.initial.s != 0.0 && s.initial.s != 1.0) r.fail("s0", "the Lindblad cross-check needs s0 = 0 or 1");
        if (s.initial.k1 != 0.0) r.fail("k0", "the Lindblad cross-check needs k0 = 0");
        if (*m > s.phonon_cutoff) r.fail("m0", "exceeds phonon_cutoff");
    }
    return s;
}

// ---- cavity ---------------------------------------------------------------

struct CavitySetup {
    CavityParams params;
    RateStateCavity initial;
    double t_final;
    double dt_observe;
    double fit_start;
    int phonon_cutoff;
    int photon_cutoff;
    bool oracle;
    double band_tolerance;
};

inline CavityParams read_cavity_params(ParamReader& r, bool collective)
{
    CavityParams p;
    if (collective) {
        p.per_atom_couplings = r.number_list("per_atom_couplings");
        if (p.per_atom_couplings) {
            if (r.has("g_eff")) r.fail("g_eff", "give either g_eff or per_atom_couplings, not both");
            p.n_atoms = static_cast<int>(p.per_atom_couplings->size());
            r.put("n_atoms", p.n_atoms);
            if (r.has("n_atoms")) {
                const auto n = r.integer("n_atoms", std::nullopt, 1, 10'000'000);
                if (n != p.n_atoms) r.fail("n_atoms", "must equal the length of per_atom_couplings");
            }
        } else {
            p.g_eff = r.number("g_eff", std::nullopt, Bound::NonNegative);
            p.n_atoms = static_cast<int>(r.integer("n_atoms", std::nullopt, 1, 10'000'000));
        }
    } else {
        p.g_eff = r.number("g_eff", std::nullopt, Bound::NonNegative);
    }
    p.kappa = r.number("kappa", std::nullopt, Bound::NonNegative);
    p.nu = r.number("nu", std::nullopt, Bound::Positive);
    p.omega_cav = r.number("omega_cav", 0.0);
    p.delta_cav = r.number("delta_cav", p.nu);
    return p;
}

inline CavitySetup resolve_cavity(ParamReader& r, bool collective)
{
    CavitySetup s{};
    s.params = read_cavity_params(r, collective);
    s.initial.m = r.number("m0", 1.0, Bound::NonNegative);
    s.initial.n = r.number("n0", 0.0, Bound::NonNegative);
    s.initial.k1 = r.number("k0", 0.0);
    s.t_final = r.number("t_final", std::nullopt, Bound::Positive);
    s.dt_observe = r.number("dt_observe", std::nullopt, Bound::Positive);
    check_observations(r, s.t_final, s.dt_observe);
    s.fit_start = r.number("fit_start", 0.25 * s.t_final, Bound::NonNegative);
    s.phonon_cutoff = static_cast<int>(r.integer("phonon_cutoff", 20, 1, 200));
    s.photon_cutoff = static_cast<int>(r.integer("photon_cutoff", 10, 1, 200));
    s.oracle = r.boolean("oracle", true);
    s.band_tolerance = r.number("band_tolerance", 0.5, Bound::Positive);
    if (s.oracle) {
        const auto m = fock_label(s.initial.m);
        const auto n = fock_label(s.initial.n);
        if (!m) r.fail("m0", "the Lindblad cross-check needs an integer phonon number (or oracle = false)");
        if (!n) r.fail("n0", "the Lindblad cross-check needs an integer photon number (or oracle = false)");
        if (s.initial.k1 != 0.0) r.fail("k0", "the Lindblad cross-check needs k0 = 0");
        if (*m > s.phonon_cutoff) r.fail("m0", "exceeds phonon_cutoff");
        if (*n > s.photon_cutoff) r.fail("n0", "exceeds photon_cutoff");
    }
    return s;
}

// ---- thermal --------------------------------------------------------------

struct ThermalSetup {
    double temperature;
    double nu;
    double nu_eff;
    long long n_atoms;
    double temperature_min;
    double temperature_max;
    int points;
};

inline ThermalSetup resolve_thermal(ParamReader& r)
{
    ThermalSetup s{};
    s.temperature = r.number("temperature", std::nullopt, Bound::Positive);
    s.nu = r.number("nu", std::nullopt, Bound::Positive);
    s.nu_eff = r.number("nu_eff", s.nu, Bound::Positive);
    s.n_atoms = r.integer("n_atoms", 1, 1, 1'000'000'000);
    s.temperature_min = r.number("temperature_min", s.temperature / 100.0, Bound::Positive);
    s.temperature_max = r.number("temperature_max", s.temperature, Bound::Positive);
    if (s.temperature_max < s.temperature_min) r.fail("temperature_max", "must be >= temperature_min");
    s.points = static_cast<int>(r.integer("points", 50, 2, 100'000));
    const double lowest = constants::hbar * std::min(s.nu, s.nu_eff) / (constants::boltzmann * std::max(s.temperature, s.temperature_max));
    if (lowest < thermo_limits::min_lambda) {
        r.fail("temperature", "hbar nu / k_B T falls below 1e-12, outside the validated range");
    }
    return s;
}

// ---- bubble-spectrum ------------------------------------------------------

struct BubbleSetup {
    BubbleEnsemble ensemble;
    double band_tolerance;
    bool sampled;
};

inline BubbleSetup resolve_bubbles(ParamReader& r, std::optional<std::uint64_t> seed)
{
    BubbleSetup s{};
    std::vector<double> d;
    const bool listed = r.has("diameters");
    const bool sampled = r.has("diameter_mean");
    if (listed == sampled) r.fail("diameters", "give either diameters or diameter_mean/diameter_spread/count");
    if (listed) {
        d = *r.number_list("diameters", Bound::Positive);
    } else {
        const double mean = r.number("diameter_mean", std::nullopt, Bound::Positive);
        const double spread = r.number("diameter_spread", 0.0, Bound::NonNegative);
        const auto count = r.integer("count", std::nullopt, 1, 1'000'000);
        d = scoped(std::string("parameters"), [&] {
            return sample_diameters(mean, spread, static_cast<int>(count), seed.value_or(0));
        });
    }
    s.sampled = sampled;
    const double kappa = r.number("kappa", std::nullopt, Bound::NonNegative);
    const double nu_max = r.number("nu_max", std::nullopt, Bound::Positive);
    s.ensemble.laser_frequency = r.number("laser_frequency", std::nullopt, Bound::NonNegative);
    s.ensemble.mode_index = static_cast<int>(r.integer("mode_index", 1, 1, 1'000'000));
    s.ensemble.refractive_index = r.number("refractive_index", 1.0, Bound::Positive);
    s.band_tolerance = r.number("band_tolerance", 0.5, Bound::Positive);
    for (double x : d) {
        s.ensemble.bubbles.push_back({x, kappa, nu_max});
    }
    return s;
}

// ---- exchanger / sweep ----------------------------------------------------

struct ExchangerSetup {
    ExchangerConfig config;
    double duration;
    double delta_T;
    std::optional<double> reference_gamma_cool;
};

inline void read_exchanger_core(ParamReader& r, ExchangerConfig& c, bool allow_table)
{
    c.liquid_mass = r.number("liquid_mass", 1e-15, Bound::Positive);
    if (allow_table && r.has("heat_capacity_table")) {
        if (r.has("heat_capacity")) r.fail("heat_capacity", "give either heat_capacity or heat_capacity_table");
        auto table = *r.pair_list("heat_capacity_table");
        c.heat_capacity = scoped(std::string("parameters"), [&] { return HeatCapacity(std::move(table)); });
    } else {
        c.heat_capacity = HeatCapacity(r.number("heat_capacity", 4.18, Bound::Positive));
    }
    c.initial_temperature = r.number("initial_temperature", std::nullopt, Bound::Positive);
    c.n_atoms = r.number("n_atoms", std::nullopt, Bound::Positive);
    if (c.n_atoms != std::floor(c.n_atoms)) r.fail("n_atoms", "must be an integer count");
    c.emission_rate = r.number("emission_rate", std::nullopt, Bound::Positive);
    c.nu_max = r.number("nu_max", std::nullopt, Bound::Positive);
}

inline ExchangerSetup resolve_exchanger(ParamReader& r)
{
    ExchangerSetup s{};
    auto& c = s.config;
    read_exchanger_core(r, c, true);
    c.initial_gas_temperature = r.optional_number("initial_gas_temperature", Bound::Positive);
    c.cooling_rate = r.number("cooling_rate", std::nullopt, Bound::NonNegative);
    c.stage_period = r.number("stage_period", 25e-6, Bound::Positive);
    c.cooling_fraction = r.number("cooling_fraction", 0.02, Bound::OpenUnit);
    c.thermal_coupling_time = r.time_or_infinity("thermal_coupling_time", 1e-6);
    c.floor_temperature = r.number("floor_temperature", 1e-3, Bound::Positive);
    c.record_stride = static_cast<std::uint64_t>(r.integer("record_stride", 1, 1, std::numeric_limits<int>::max()));
    s.duration = r.number("duration", std::nullopt, Bound::Positive);
    if (s.duration < c.stage_period) r.fail("duration", "must be at least one stage_period");
    if (s.duration / c.stage_period > 1e8) r.fail("duration", "more than 1e8 stage periods");
    if (s.duration / c.stage_period / double(c.record_stride) > 2e6) {
        r.fail("record_stride", "too small: the trace would exceed 2e6 periods on record");
    }
    s.delta_T = r.number("delta_T", 1.0, Bound::NonNegative);
    s.reference_gamma_cool = r.optional_number("reference_gamma_cool", Bound::Positive);
    scoped(std::string("parameters"), [&] { c.validate(); return 0; });
    return s;
}

inline constexpr std::array<std::string_view, 6> sweep_keys{"liquid_mass", "heat_capacity", "initial_temperature",
                                                            "n_atoms", "emission_rate", "nu_max"};

struct SweepSetup {
    ExchangerConfig base;
    std::vector<std::pair<std::string, std::vector<double>>> axes;
    double delta_T;
};

inline SweepSetup resolve_sweep(ParamReader& r)
{
    SweepSetup s{};
    read_exchanger_core(r, s.base, false);
    s.delta_T = r.number("delta_T", 1.0, Bound::NonNegative);
    const json* grid = r.object("grid");
    if (!grid || grid->empty()) r.fail("grid", "is required: an object mapping parameter names to value lists");
    ParamReader g(*grid, r.child_context("grid"));
    double total = 1.0;
    for (auto key : sweep_keys) {
        if (auto v = g.number_list(std::string(key))) {
            s.axes.emplace_back(std::string(key), *v);
            total *= double(v->size());
        }
    }
    r.put("grid", g.finish());
    if (total > 1e5) r.fail("grid", "more than 1e5 combinations");
    return s;
}

inline ExchangerConfig with_value(ExchangerConfig c, std::string_view key, double v)
{
    if (key == "liquid_mass") c.liquid_mass = v;
    else if (key == "initial_temperature") c.initial_temperature = v;
    else if (key == "n_atoms") c.n_atoms = v;
    else if (key == "emission_rate") c.emission_rate = v;
    else if (key == "nu_max") c.nu_max = v;
    return c;
}

// ---- validate -------------------------------------------------------------

struct ValidateSetup {
    std::optional<SingleIonParams> single_ion;
    std::optional<CavityParams> cavity;
    std::optional<BubbleSetup> bubbles;
    double band_tolerance;
};

inline ValidateSetup resolve_validate(ParamReader& r, std::optional<std::uint64_t> seed)
{
    ValidateSetup s{};
    s.band_tolerance = r.number("band_tolerance", 0.5, Bound::Positive);
    if (const json* v = r.object("single_ion")) {
        ParamReader sub(*v, r.child_context("single_ion"));
        s.single_ion = read_single_ion_params(sub);
        r.put("single_ion", sub.finish());
    }
    if (const json* v = r.object("cavity")) {
        ParamReader sub(*v, r.child_context("cavity"));
        s.cavity = read_cavity_params(sub, false);
        r.put("cavity", sub.finish());
    }
    if (const json* v = r.object("bubbles")) {
        ParamReader sub(*v, r.child_context("bubbles"));
        s.bubbles = resolve_bubbles(sub, seed);
        r.put("bubbles", sub.finish());
    }
    if (!s.single_ion && !s.cavity && !s.bubbles) {
        r.fail("single_ion", "at least one of single_ion, cavity, bubbles is required");
    }
    return s;
}

// Resolves parameters for `scenario`, throwing ConfigError on any problem.
// The callback receives the typed setup; the resolved JSON is returned.
template <class F>
json resolve(Scenario scenario, const json& params, std::optional<std::uint64_t> seed, F&& use)
{
    ParamReader r(params, "parameters");
    switch (scenario) {
    case Scenario::SingleIon: use(resolve_single_ion(r)); break;
    case Scenario::CavitySingle: use(resolve_cavity(r, false)); break;
    case Scenario::CavityCollective: use(resolve_cavity(r, true)); break;
    case Scenario::Thermal: use(resolve_thermal(r)); break;
    case Scenario::BubbleSpectrum: use(resolve_bubbles(r, seed)); break;
    case Scenario::Exchanger: use(resolve_exchanger(r)); break;
    case Scenario::Sweep: use(resolve_sweep(r)); break;
    case Scenario::Validate: use(resolve_validate(r, seed)); break;
    }
    return r.finish();
}

inline std::pair<int, int> line_column(std::string_view text, std::size_t byte)
{
    int line = 1, col = 1;
    for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

} // namespace detail

/// Builds a validated config from an already parsed JSON document.
inline ScenarioConfig parse_config(const json& doc)
{
    if (!doc.is_object()) {
        throw ConfigError("config: top level must be a JSON object");
    }
    static const std::set<std::string> top{"scenario", "parameters", "output_prefix", "seed"};
    for (auto it = doc.begin(); it != doc.end(); ++it) {
        if (!top.count(it.key())) {
            throw ConfigError(it.key() + ": unknown key");
        }
    }
    if (!doc.contains("scenario") || !doc["scenario"].is_string()) {
        throw ConfigError("scenario: is required and must be a string");
    }
    ScenarioConfig cfg;
    const auto name = doc["scenario"].get<std::string>();
    const auto sc = parse_scenario(name);
    if (!sc) {
        std::string known;
        for (const auto& [k, n] : scenario_names) {
            known += (known.empty() ? "" : ", ") + std::string(n);
        }
        throw ConfigError("scenario: unknown scenario \"" + name + "\" (expected one of " + known + ")");
    }
    cfg.scenario = *sc;
    if (doc.contains("seed") && !doc["seed"].is_null()) {
        const auto& s = doc["seed"];
        if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<std::int64_t>() >= 0)) {
            throw ConfigError("seed: must be a non-negative integer");
        }
        cfg.seed = s.get<std::uint64_t>();
    }
    if (doc.contains("output_prefix")) {
        if (!doc["output_prefix"].is_string() || doc["output_prefix"].get<std::string>().empty()) {
            throw ConfigError("output_prefix: must be a non-empty string");
        }
        cfg.output_prefix = doc["output_prefix"].get<std::string>();
    } else {
        cfg.output_prefix = name;
    }
    const json params = doc.contains("parameters") ? doc["parameters"] : json::object();
    cfg.parameters = detail::resolve(cfg.scenario, params, cfg.seed, [](auto&&) {});
    return cfg;
}

/// Reads and validates a scenario file.
inline ScenarioConfig load_config(const std::filesystem::path& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw ConfigError(path.string() + ": cannot open file");
    }
    const std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        const auto [line, col] = detail::line_column(text, e.byte > 0 ? e.byte - 1 : 0);
        std::string msg = e.what();
        if (auto p = msg.find("parse error"); p != std::string::npos) msg = msg.substr(p);
        throw ConfigError(path.string() + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " + msg);
    }
    return parse_config(doc);
}

/// Config file contents that reproduce a run: the summary's echo of scenario,
/// resolved parameters, output prefix and seed.
inline json config_json(const ScenarioConfig& cfg)
{
    json j;
    j["scenario"] = to_string(cfg.scenario);
    j["parameters"] = cfg.parameters;
    j["output_prefix"] = cfg.output_prefix;
    if (cfg.seed) j["seed"] = *cfg.seed;
    return j;
}

/// One row of a resonance / safety report.
struct ConditionRow {
    std::string subject;
    std::string check;
    double value;
    double reference;
    bool passed;
    std::string detail;
};

struct ConditionReport {
    std::vector<ConditionRow> rows;
    bool applicable = true; // false for scenarios with no conditions to check

    bool all_passed() const
    {
        return std::all_of(rows.begin(), rows.end(), [](const ConditionRow& r) { return r.passed; });
    }
};

namespace detail {

inline void add_diagnostic(ConditionReport& out, const std::string& subject, const CoolingDiagnostic& d)
{
    for (const auto& c : d.checks) {
        out.rows.push_back({subject, c.name, c.value, c.reference, c.passed, to_string(d.side)});
    }
    out.rows.push_back({subject, "red side", d.heating_side ? -1.0 : 1.0, 0.0, !d.heating_side, to_string(d.side)});
}

inline void add_bubbles(ConditionReport& out, const BubbleSetup& b)
{
    const auto cls = classify_bubbles(b.ensemble, b.band_tolerance);
    for (std::size_t i = 0; i < cls.bubbles.size(); ++i) {
        const auto& r = cls.bubbles[i];
        out.rows.push_back({"bubble[" + std::to_string(i) + "]", "Delta_cav >= 0", r.delta_cav, 0.0,
                            r.label != BubbleLabel::HeatingRisk, to_string(r.label)});
    }
}

} // namespace detail

/// Resonance conditions and bubble classification for a config, without
/// integrating anything.
inline ConditionReport check_conditions(const ScenarioConfig& cfg)
{
    ConditionReport out;
    detail::resolve(cfg.scenario, cfg.parameters, cfg.seed, [&](auto&& setup) {
        using T = std::decay_t<decltype(setup)>;
        if constexpr (std::is_same_v<T, detail::SingleIonSetup>) {
            detail::add_diagnostic(out, "single_ion", validate_cooling_conditions(setup.params, setup.band_tolerance));
        } else if constexpr (std::is_same_v<T, detail::CavitySetup>) {
            detail::add_diagnostic(out, "cavity", validate_cooling_conditions(setup.params, setup.band_tolerance));
        } else if constexpr (std::is_same_v<T, detail::BubbleSetup>) {
            detail::add_bubbles(out, setup);
        } else if constexpr (std::is_same_v<T, detail::ValidateSetup>) {
            if (setup.single_ion) {
                detail::add_diagnostic(out, "single_ion", validate_cooling_conditions(*setup.single_ion, setup.band_tolerance));
            }
            if (setup.cavity) {
                detail::add_diagnostic(out, "cavity", validate_cooling_conditions(*setup.cavity, setup.band_tolerance));
            }
            if (setup.bubbles) {
                detail::add_bubbles(out, *setup.bubbles);
            }
        } else {
            out.applicable = false;
        }
    });
    return out;
}

inline json to_json(const ConditionReport& r)
{
    json rows = json::array();
    for (const auto& x : r.rows) {
        rows.push_back({{"subject", x.subject}, {"check", x.check}, {"value", x.value}, {"reference", x.reference},
                        {"passed", x.passed}, {"detail", x.detail}});
    }
    return {{"applicable", r.applicable}, {"all_passed", r.all_passed()}, {"checks", rows}};
}

namespace detail {

inline std::string percent(double x)
{
    std::ostringstream os;
    os.precision(3);
    os << 100.0 * x << "%";
    return os.str();
}

inline void diagnostic_warnings(RunSummary& s, const CoolingDiagnostic& d)
{
    for (const auto& c : d.checks) {
        if (!c.passed) s.warnings.push_back("cooling condition not met: " + c.name);
    }
    if (d.heating_side) s.warnings.push_back("laser is blue of resonance: heating side");
}

class Runner {
public:
    Runner(RunSummary& s, std::optional<io::CsvTable>& table, ode::Tolerances tol)
        : s_(s), table_(table), tol_(tol) {}

    void head(std::string name, double v, std::string unit)
    {
        if (std::isfinite(v)) s_.headline.push_back({std::move(name), v, std::move(unit)});
    }

    void rate_note(double ratio, const char* formula)
    {
        if (ratio < 0.8 || ratio > 1.25) {
            s_.warnings.push_back("fitted phonon decay rate is " + io::format_double(ratio) + " times " + formula +
                                  "; for weak coupling the moment equations relax at 4 g^2/Gamma (4 g^2/kappa)");
        }
    }

    void operator()(const SingleIonSetup& x)
    {
        s_.rtol = tol_.rtol;
        diagnostic_warnings(s_, validate_cooling_conditions(x.params, x.band_tolerance));
        const auto traj = trajectory_single_ion(x.initial, x.params, x.t_final, x.dt_observe, tol_);

        std::vector<Snapshot> snaps;
        if (x.oracle) {
            const auto space = FockSpace::atom_phonon(x.phonon_cutoff);
            const auto model = build_atom_phonon_model(x.params.g, x.params.gamma, space);
            const auto rho0 = DensityMatrix::basis(space, x.initial.s == 1.0 ? 1 : 0, static_cast<int>(x.initial.m));
            snaps = evolve(model, rho0, x.t_final, x.dt_observe, EvolveOptions{tol_, 1e-6, {}});
        }

        table_.emplace(std::vector<std::string>{"time", "m", "s", "k1", "m_oracle", "s_oracle", "k1_oracle",
                                                "truncation_tail"});
        std::vector<double> t, m;
        double max_dev = 0.0, max_tail = 0.0;
        for (std::size_t i = 0; i < traj.size(); ++i) {
            const auto& [ti, st] = traj[i];
            t.push_back(ti);
            m.push_back(st.m);
            auto& row = table_->row().add(ti).add(st.m).add(st.s).add(st.k1);
            if (x.oracle) {
                const auto o = atom_phonon_moments(snaps[i].rho);
                const double tail = snaps[i].rho.truncation_tail();
                row.add(o.m).add(o.s).add(o.k1).add(tail);
                max_tail = std::max(max_tail, tail);
                if (o.s < 0.1 && o.m > 1e-6 * std::max(x.initial.m, 1.0)) {
                    max_dev = std::max(max_dev, std::abs(st.m - o.m) / o.m);
                }
            } else {
                row.add(std::optional<double>{}).add(std::optional<double>{}).add(std::optional<double>{})
                    .add(std::optional<double>{});
            }
        }
        const double rate = cooling_rate_single(x.params);
        head("cooling_rate", rate, "rad/s");
        if (auto fit = fit_decay_rate(t, m, x.fit_start, 1e-12 * std::max(x.initial.m, 1.0))) {
            head("fitted_decay_rate", *fit, "rad/s");
            head("fitted_over_cooling_rate", *fit / rate, "1");
            rate_note(*fit / rate, "g^2/Gamma");
        }
        head("final_m", traj.back().state.m, "phonons");
        head("final_s", traj.back().state.s, "1");
        if (x.oracle) {
            head("oracle_final_m", atom_phonon_moments(snaps.back().rho).m, "phonons");
            head("mean_field_max_rel_dev_m", max_dev, "1");
            head("max_truncation_tail", max_tail, "1");
        }
    }

    void operator()(const CavitySetup& x)
    {
        s_.rtol = tol_.rtol;
        const auto& p = x.params;
        diagnostic_warnings(s_, validate_cooling_conditions(p, x.band_tolerance));
        const auto traj = trajectory_cavity(x.initial, p, x.t_final, x.dt_observe, tol_);
        const double g = effective_coupling(p);

        std::vector<Snapshot> snaps;
        if (x.oracle) {
            const auto space = FockSpace::phonon_photon(x.phonon_cutoff, x.photon_cutoff);
            const auto model = build_phonon_photon_model(g, p.kappa, space);
            const auto rho0 = DensityMatrix::basis(space, 0, static_cast<int>(x.initial.m), static_cast<int>(x.initial.n));
            snaps = evolve(model, rho0, x.t_final, x.dt_observe, EvolveOptions{tol_, 1e-6, {}});
        }

        table_.emplace(std::vector<std::string>{"time", "m", "n", "k1", "m_oracle", "n_oracle", "k1_oracle",
                                                "truncation_tail"});
        std::vector<double> t, m;
        double max_dev = 0.0, max_tail = 0.0;
        const double scale = std::max({x.initial.m, x.initial.n, 1.0});
        for (std::size_t i = 0; i < traj.size(); ++i) {
            const auto& [ti, st] = traj[i];
            t.push_back(ti);
            m.push_back(st.m);
            auto& row = table_->row().add(ti).add(st.m).add(st.n).add(st.k1);
            if (x.oracle) {
                const auto o = phonon_photon_moments(snaps[i].rho);
                const double tail = snaps[i].rho.truncation_tail();
                row.add(o.m).add(o.n).add(o.k1).add(tail);
                max_tail = std::max(max_tail, tail);
                max_dev = std::max({max_dev, std::abs(st.m - o.m), std::abs(st.n - o.n), std::abs(st.k1 - o.k1)});
            } else {
                row.add(std::optional<double>{}).add(std::optional<double>{}).add(std::optional<double>{})
                    .add(std::optional<double>{});
            }
        }
        if (p.kappa > 0.0) {
            const bool collective = s_.scenario == Scenario::CavityCollective;
            const double rate = collective ? cooling_rate_collective(p) : cooling_rate_cavity(p);
            head("cooling_rate", rate, "rad/s");
            if (collective) {
                head("g_tilde", g, "rad/s");
                CavityParams one = p;
                one.n_atoms = 1;
                one.per_atom_couplings.reset();
                if (!p.per_atom_couplings) head("enhancement", rate / cooling_rate_collective(one), "1");
            }
            if (auto fit = fit_decay_rate(t, m, x.fit_start, 1e-12 * scale)) {
                head("fitted_decay_rate", *fit, "rad/s");
                head("fitted_over_cooling_rate", *fit / rate, "1");
                rate_note(*fit / rate, collective ? "N g_eff^2/kappa" : "g_eff^2/kappa");
            }
        } else {
            s_.warnings.push_back("kappa = 0: no cavity loss, phonons and photons exchange without cooling");
        }
        head("final_m", traj.back().state.m, "phonons");
        head("final_n", traj.back().state.n, "photons");
        if (x.oracle) {
            head("oracle_final_m", phonon_photon_moments(snaps.back().rho).m, "phonons");
            head("oracle_max_abs_dev", max_dev / scale, "1");
            head("max_truncation_tail", max_tail, "1");
        }
    }

    void operator()(const ThermalSetup& x)
    {
        table_.emplace(std::vector<std::string>{"temperature", "lambda", "partition_function", "mean_phonons",
                                                "mean_energy", "lambda_eff", "mean_phonons_eff"});
        const double ratio = x.temperature_max / x.temperature_min;
        for (int i = 0; i < x.points; ++i) {
            const double temp = i == x.points - 1 ? x.temperature_max
                                                  : x.temperature_min * std::pow(ratio, double(i) / (x.points - 1));
            const ThermalParams tp(temp, x.nu, x.nu_eff);
            const auto st = thermal_state(tp);
            table_->row().add(temp).add(tp.lambda()).add(st.partition_function).add(st.mean_phonons)
                .add(st.mean_energy).add(tp.lambda_eff()).add(bose_occupation(tp.lambda_eff()));
        }
        const ThermalParams tp(x.temperature, x.nu, x.nu_eff);
        const auto st = thermal_state(tp);
        head("lambda", tp.lambda(), "1");
        head("partition_function", st.partition_function, "1");
        head("mean_phonons", st.mean_phonons, "phonons");
        head("mean_energy", st.mean_energy, "J");
        head("phonons_per_atom_after_thermalisation", thermalise_gas(1, tp).front(), "phonons");
        head("gas_energy", gas_energy(double(x.n_atoms), x.nu, x.temperature), "J");
    }

    void operator()(const BubbleSetup& x)
    {
        const auto cls = classify_bubbles(x.ensemble, x.band_tolerance);
        const auto band = frequency_band(x.ensemble);
        table_.emplace(std::vector<std::string>{"d_min", "j", "omega_cav", "lambda_cav", "delta_cav", "label"});
        int counts[3] = {0, 0, 0};
        for (const auto& b : cls.bubbles) {
            table_->row().add(b.d_min).add(x.ensemble.mode_index).add(b.omega_cav).add(b.lambda_cav)
                .add(b.delta_cav).add(to_string(b.label));
            ++counts[static_cast<int>(b.label)];
        }
        head("band_min", band.min, "rad/s");
        head("band_max", band.max, "rad/s");
        head("band_width", band.width(), "rad/s");
        head("gap_above", band.gap_above, "rad/s");
        if (band.gap_below) head("gap_below", *band.gap_below, "rad/s");
        head("resonant_cooling", counts[0], "bubbles");
        head("off_resonant_cooling", counts[1], "bubbles");
        head("heating_risk", counts[2], "bubbles");
        head("safe", cls.safe ? 1.0 : 0.0, "bool");
        if (!cls.safe) {
            s_.warnings.push_back(std::to_string(counts[2]) + " bubble(s) have the laser above the cavity frequency (heating side)");
        }
        if (!band.isolated()) {
            s_.warnings.push_back("the band overlaps a neighbouring mode index");
        }
        if (x.sampled && !s_.seed) {
            s_.seed = 0;
            s_.warnings.push_back("no seed given; sampled with seed 0");
        }
    }

    void operator()(const ExchangerSetup& x)
    {
        const auto& c = x.config;
        const auto est = estimate_cooling(c, x.delta_T);
        const auto trace = run_exchanger(c, x.duration);

        table_.emplace(std::vector<std::string>{"time", "stage", "gas_temperature", "reservoir_temperature",
                                                "b_mode_occupation", "cumulative_photons", "cumulative_heat_removed"});
        std::optional<double> reached;
        for (const auto& r : trace.records) {
            table_->row().add(r.time).add(to_string(r.stage)).add(r.gas_temperature).add(r.reservoir_temperature)
                .add(r.b_mode_occupation).add(r.cumulative_photons).add(r.cumulative_heat_removed);
            if (!reached && x.delta_T > 0.0 && c.initial_temperature - r.reservoir_temperature >= x.delta_T) {
                reached = r.time;
            }
        }
        head("photons_needed", est.photons_needed, "photons");
        head("cooling_time", est.cooling_time, "s");
        head("gamma_cool", est.rate, "s/K");
        head("heat_removed", est.heat_removed, "J");
        if (x.reference_gamma_cool) {
            const double dev = est.rate / *x.reference_gamma_cool - 1.0;
            head("reference_gamma_cool", *x.reference_gamma_cool, "s/K");
            head("gamma_cool_relative_deviation", dev, "1");
            if (dev != 0.0) {
                s_.warnings.push_back("gamma_cool recomputed from the inputs is " + io::format_double(est.rate) +
                                      " s/K, " + percent(dev) + " from reference_gamma_cool = " +
                                      io::format_double(*x.reference_gamma_cool) + " s/K");
            }
        }
        const auto& last = trace.records.back();
        const double elapsed = last.time;
        head("elapsed", elapsed, "s");
        head("periods", double(trace.periods), "periods");
        head("final_reservoir_temperature", last.reservoir_temperature, "K");
        head("final_gas_temperature", last.gas_temperature, "K");
        head("reservoir_temperature_drop", c.initial_temperature - last.reservoir_temperature, "K");
        head("total_photons", last.cumulative_photons, "photons");
        head("total_heat_removed", last.cumulative_heat_removed, "J");
        const double duty = last.cumulative_photons / (c.n_atoms * c.emission_rate * elapsed);
        head("emission_duty", duty, "1");
        if (trace.floor_reached_at) head("floor_reached_at", *trace.floor_reached_at, "s");
        if (reached) {
            head("time_to_delta_T", *reached, "s");
            if (est.cooling_time > 0.0) head("time_to_delta_T_over_cooling_time", *reached / est.cooling_time, "1");
        } else if (x.delta_T > 0.0) {
            s_.warnings.push_back("reservoir did not drop by delta_T within the simulated duration");
        }
        if (duty < 0.5) {
            s_.warnings.push_back("emission runs at " + percent(duty) +
                                  " of the N_atoms * emission_rate ceiling: cooling is limited by the B-mode "
                                  "drain, so the photon-budget time is a lower bound");
        }
    }

    void operator()(const SweepSetup& x)
    {
        std::vector<ExchangerConfig> grid{x.base};
        for (const auto& [key, values] : x.axes) {
            std::vector<ExchangerConfig> next;
            for (const auto& c : grid) {
                for (double v : values) next.push_back(with_value(c, key, v));
            }
            grid = std::move(next);
        }
        // heat_capacity goes through the HeatCapacity constructor, which can
        // reject a value; such rows become error rows like any other.
        std::vector<std::optional<std::string>> pre_error(grid.size());
        std::vector<double> capacity(grid.size(), x.base.heat_capacity.at(0.0));
        if (auto it = std::find_if(x.axes.begin(), x.axes.end(), [](const auto& a) { return a.first == "heat_capacity"; });
            it != x.axes.end()) {
            std::size_t stride = 1;
            for (auto jt = it + 1; jt != x.axes.end(); ++jt) stride *= jt->second.size();
            for (std::size_t i = 0; i < grid.size(); ++i) {
                capacity[i] = it->second[(i / stride) % it->second.size()];
                try {
                    grid[i].heat_capacity = HeatCapacity(capacity[i]);
                } catch (const InvalidArgument& e) {
                    pre_error[i] = e.what();
                }
            }
        }
        auto rows = sweep(grid, x.delta_T);
        for (auto& r : rows) {
            if (pre_error[r.index]) {
                r.estimate.reset();
                r.error = *pre_error[r.index];
            }
        }
        std::stable_sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
            if (a.estimate && b.estimate) return a.estimate->rate < b.estimate->rate;
            if (a.estimate.has_value() != b.estimate.has_value()) return a.estimate.has_value();
            return a.index < b.index;
        });

        table_.emplace(std::vector<std::string>{"rank", "index", "liquid_mass", "heat_capacity", "initial_temperature",
                                                "n_atoms", "emission_rate", "nu_max", "photons_needed", "cooling_time",
                                                "gamma_cool", "heat_removed", "error"});
        std::size_t failed = 0;
        for (std::size_t k = 0; k < rows.size(); ++k) {
            const auto& r = rows[k];
            const auto& c = r.config;
            auto& row = table_->row().add(k + 1).add(r.index).add(c.liquid_mass).add(capacity[r.index])
                            .add(c.initial_temperature).add(c.n_atoms).add(c.emission_rate).add(c.nu_max);
            if (r.estimate) {
                row.add(r.estimate->photons_needed).add(r.estimate->cooling_time).add(r.estimate->rate)
                    .add(r.estimate->heat_removed).add("");
            } else {
                ++failed;
                row.add(std::optional<double>{}).add(std::optional<double>{}).add(std::optional<double>{})
                    .add(std::optional<double>{}).add(r.error);
            }
        }
        head("rows", double(rows.size()), "configs");
        head("failed_rows", double(failed), "configs");
        if (rows.front().estimate) {
            head("best_gamma_cool", rows.front().estimate->rate, "s/K");
            head("worst_gamma_cool", rows[rows.size() - failed - 1].estimate->rate, "s/K");
        }
        if (failed) s_.warnings.push_back(std::to_string(failed) + " configuration(s) failed validation");
    }

    void operator()(const ValidateSetup&)
    {
        ScenarioConfig cfg{s_.scenario, s_.parameters, s_.output_prefix, s_.seed};
        const auto report = check_conditions(cfg);
        table_.emplace(std::vector<std::string>{"subject", "check", "value", "reference", "passed", "detail"});
        std::size_t failed = 0;
        for (const auto& r : report.rows) {
            table_->row().add(r.subject).add(r.check).add(r.value).add(r.reference).add(r.passed ? 1 : 0).add(r.detail);
            if (!r.passed) {
                ++failed;
                s_.warnings.push_back(r.subject + ": " + r.check + " failed (" + r.detail + ")");
            }
        }
        head("checks", double(report.rows.size()), "checks");
        head("failed_checks", double(failed), "checks");
        head("all_passed", report.all_passed() ? 1.0 : 0.0, "bool");
    }

private:
    RunSummary& s_;
    std::optional<io::CsvTable>& table_;
    ode::Tolerances tol_;
};

} // namespace detail

/// Runs a scenario without touching the filesystem. Failures are reported
/// through the summary's exit code and message.
inline RunResult execute(const ScenarioConfig& cfg, const RunOptions& opts = {})
{
    RunResult out;
    auto& s = out.summary;
    s.scenario = cfg.scenario;
    s.parameters = cfg.parameters;
    s.output_prefix = cfg.output_prefix;
    s.seed = cfg.seed;
    ode::Tolerances tol;
    if (opts.rtol) {
        if (!(*opts.rtol > 0.0 && *opts.rtol < 1.0)) {
            s.exit_code = exit_code::invalid;
            s.message = "rtol: must lie strictly between 0 and 1";
            return out;
        }
        tol.rtol = *opts.rtol;
    }
    try {
        detail::resolve(cfg.scenario, cfg.parameters, cfg.seed, detail::Runner(s, out.table, tol));
    } catch (const NumericalError& e) {
        out.table.reset();
        s.headline.clear();
        s.exit_code = exit_code::numerical;
        s.message = e.what();
        if (const auto* t = dynamic_cast<const TruncationOverflow*>(&e)) {
            s.warnings.push_back("truncation tail " + io::format_double(t->tail()) + " at t = " +
                                 io::format_double(t->time()) + "; raise the cutoffs");
        }
    } catch (const InvalidArgument& e) {
        out.table.reset();
        s.headline.clear();
        s.exit_code = exit_code::invalid;
        s.message = e.what();
    }
    return out;
}

inline std::filesystem::path csv_path(const std::string& prefix) { return prefix + ".timeseries.csv"; }
inline std::filesystem::path summary_path(const std::string& prefix) { return prefix + ".summary.json"; }

/// Runs a scenario and writes <prefix>.timeseries.csv and
/// <prefix>.summary.json. Validation failures write nothing; numerical
/// failures write the summary only.
inline RunSummary run_scenario(const ScenarioConfig& cfg, const RunOptions& opts = {})
{
    auto result = execute(cfg, opts);
    if (!opts.write_files || result.summary.exit_code == exit_code::invalid) {
        return result.summary;
    }
    if (result.table) {
        io::write_atomic(csv_path(cfg.output_prefix), result.table->str());
    }
    io::write_atomic(summary_path(cfg.output_prefix), result.summary.to_json().dump(2) + "\n");
    return result.summary;
}

} // namespace phonox::cli
