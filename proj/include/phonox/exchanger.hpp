#pragma once

// Staged heat exchanger: a liquid reservoir, a gas of N trapped oscillators
// and its collective B mode. Cooling stages drain the B mode into photons;
// thermalisation stages exchange heat between gas and reservoir and refill
// the B mode. Also the closed-form photon-budget estimate of the cooling time.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "phonox/constants.hpp"
#include "phonox/error.hpp"
#include "phonox/thermo.hpp"

namespace phonox {

/// Piecewise-linear specific heat c(T) in J/(g K), clamped outside the table.
class HeatCapacity {
public:
    explicit HeatCapacity(double constant = 4.18)
        : points_{{0.0, constant}}
    {
        if (!(constant > 0.0) || !std::isfinite(constant)) {
            detail::invalid("heat_capacity", "must be positive and finite");
        }
    }

    /// (temperature K, c J/(g K)) pairs with strictly increasing temperatures.
    explicit HeatCapacity(std::vector<std::pair<double, double>> table)
        : points_(std::move(table))
    {
        if (points_.empty()) {
            detail::invalid("heat_capacity_table", "must be non-empty");
        }
        for (std::size_t i = 0; i < points_.size(); ++i) {
            if (!(points_[i].second > 0.0) || !std::isfinite(points_[i].second) || !(points_[i].first >= 0.0)) {
                detail::invalid("heat_capacity_table", "entries must have T >= 0 and c > 0");
            }
            if (i > 0 && !(points_[i].first > points_[i - 1].first)) {
                detail::invalid("heat_capacity_table", "temperatures must be strictly increasing");
            }
        }
    }

    bool is_constant() const noexcept { return points_.size() == 1; }
    const std::vector<std::pair<double, double>>& table() const noexcept { return points_; }

    double at(double t) const
    {
        if (t <= points_.front().first) return points_.front().second;
        if (t >= points_.back().first) return points_.back().second;
        auto it = std::upper_bound(points_.begin(), points_.end(), t,
                                   [](double x, const auto& p) { return x < p.first; });
        const auto& [t1, c1] = *it;
        const auto& [t0, c0] = *(it - 1);
        return c0 + (c1 - c0) * (t - t0) / (t1 - t0);
    }

    /// Integral of c from 0 to t, in J/g.
    double integral(double t) const
    {
        if (is_constant()) {
            return points_.front().second * t;
        }
        double acc = 0.0;
        double prev_t = 0.0;
        double prev_c = at(0.0);
        auto add = [&](double t1) {
            const double c1 = at(t1);
            acc += 0.5 * (prev_c + c1) * (t1 - prev_t);
            prev_t = t1;
            prev_c = c1;
        };
        for (const auto& [tp, cp] : points_) {
            if (tp <= prev_t) continue;
            if (tp >= t) break;
            add(tp);
        }
        add(t);
        return acc;
    }

private:
    std::vector<std::pair<double, double>> points_;
};

struct ExchangerConfig {
    double liquid_mass = 1e-15;            // g
    HeatCapacity heat_capacity{4.18};      // J/(g K)
    double initial_temperature = 293.15;   // K, reservoir
    std::optional<double> initial_gas_temperature; // K, defaults to the reservoir
    double n_atoms = 1e8;
    double emission_rate = 1e6;            // photons / s per atom
    double nu_max = 1e8;                   // defines the energy quantum hbar * nu_max
    double cooling_rate = 0.0;             // rad/s, B-mode drain rate
    double stage_period = 25e-6;           // s
    double cooling_fraction = 0.02;
    double thermal_coupling_time = 1e-6;   // s, may be +inf (isolated reservoir)
    double floor_temperature = 1e-3;       // K
    std::uint64_t record_stride = 1;       // periods between trace records

    double quantum() const noexcept { return constants::hbar * nu_max; }
    double gas_start_temperature() const noexcept { return initial_gas_temperature.value_or(initial_temperature); }

    void validate() const
    {
        auto positive = [](double v, const char* k) {
            if (!(v > 0.0) || !std::isfinite(v)) detail::invalid(k, "must be positive and finite");
        };
        positive(liquid_mass, "liquid_mass");
        positive(initial_temperature, "initial_temperature");
        if (initial_gas_temperature) positive(*initial_gas_temperature, "initial_gas_temperature");
        positive(n_atoms, "n_atoms");
        if (n_atoms != std::floor(n_atoms)) detail::invalid("n_atoms", "must be an integer count");
        positive(emission_rate, "emission_rate");
        positive(nu_max, "nu_max");
        if (!(cooling_rate >= 0.0) || !std::isfinite(cooling_rate)) {
            detail::invalid("cooling_rate", "must be finite and >= 0");
        }
        positive(stage_period, "stage_period");
        if (!(cooling_fraction > 0.0 && cooling_fraction < 1.0)) {
            detail::invalid("cooling_fraction", "must lie strictly between 0 and 1");
        }
        if (!(thermal_coupling_time > 0.0)) detail::invalid("thermal_coupling_time", "must be > 0");
        positive(floor_temperature, "floor_temperature");
        if (record_stride < 1) detail::invalid("record_stride", "must be >= 1");
    }
};

struct CoolingEstimate {
    double photons_needed; // count
    double cooling_time;   // s
    double rate;           // s / K
    double heat_removed;   // J
};

/// Photon budget for lowering the reservoir by delta_T when every photon
/// carries away hbar nu_max and the atoms emit at their full rate.
inline CoolingEstimate estimate_cooling(const ExchangerConfig& cfg, double delta_T)
{
    cfg.validate();
    if (!(delta_T >= 0.0) || !std::isfinite(delta_T)) {
        detail::invalid("delta_T", "must be finite and >= 0");
    }
    const double c = cfg.heat_capacity.at(cfg.initial_temperature);
    const double heat = c * cfg.liquid_mass * delta_T;
    const double photons = heat / cfg.quantum();
    const double time = photons / (cfg.n_atoms * cfg.emission_rate);
    const double rate = delta_T > 0.0 ? time / delta_T
                                      : c * cfg.liquid_mass / (cfg.n_atoms * cfg.emission_rate * cfg.quantum());
    return {photons, time, rate, heat};
}

enum class Stage { Cooling, Thermalisation };

inline const char* to_string(Stage s)
{
    return s == Stage::Cooling ? "COOLING" : "THERMALISATION";
}

struct StageRecord {
    double time;
    Stage stage;
    double gas_temperature;
    double reservoir_temperature;
    double b_mode_occupation;
    double cumulative_photons;
    double cumulative_heat_removed;
};

struct StageTrace {
    std::vector<StageRecord> records;
    /// First time the reservoir reached floor_temperature, if it did.
    std::optional<double> floor_reached_at;
    std::uint64_t periods = 0;
};

namespace detail {

/// Thermal bookkeeping for the gas (N oscillators at nu_max) and the reservoir.
class ExchangerThermal {
public:
    explicit ExchangerThermal(const ExchangerConfig& cfg)
        : cfg_(cfg) {}

    double gas_energy(double t) const { return phonox::gas_energy(cfg_.n_atoms, cfg_.nu_max, t); }

    double gas_temperature(double energy) const
    {
        const double m = energy / (cfg_.n_atoms * cfg_.quantum()) - 0.5;
        return temperature_from_mean_phonons(m, cfg_.nu_max);
    }

    double reservoir_energy(double t) const { return cfg_.liquid_mass * cfg_.heat_capacity.integral(t); }

    double reservoir_temperature(double energy) const
    {
        if (cfg_.heat_capacity.is_constant()) {
            return energy / (cfg_.liquid_mass * cfg_.heat_capacity.at(0.0));
        }
        return solve_increasing([&](double t) { return reservoir_energy(t); }, energy,
                                [&](double t) { return cfg_.liquid_mass * cfg_.heat_capacity.at(t); });
    }

    /// Common temperature at which gas plus reservoir hold `total` energy.
    double mixing_temperature(double total) const
    {
        return solve_increasing([&](double t) { return gas_energy(t) + reservoir_energy(t); }, total, [&](double t) {
            return cfg_.n_atoms * oscillator_heat_capacity(cfg_.nu_max, t) +
                   cfg_.liquid_mass * cfg_.heat_capacity.at(t);
        });
    }

private:
    // Safeguarded Newton on a strictly increasing function.
    template <class F, class DF>
    static double solve_increasing(F f, double target, DF df)
    {
        double lo = 0.0, hi = 1.0;
        while (f(hi) < target) {
            lo = hi;
            hi *= 2.0;
            if (hi > 1e12) {
                throw NumericalError("exchanger: temperature solve diverged");
            }
        }
        double t = 0.5 * (lo + hi);
        for (int it = 0; it < 200; ++it) {
            const double r = f(t) - target;
            if (r == 0.0) return t;
            (r > 0.0 ? hi : lo) = t;
            const double d = df(t);
            double next = d > 0.0 ? t - r / d : 0.5 * (lo + hi);
            if (!(next > lo && next < hi)) {
                next = 0.5 * (lo + hi);
            }
            if (std::abs(next - t) <= 1e-15 * t) {
                return next;
            }
            t = next;
        }
        return t;
    }

    const ExchangerConfig& cfg_;
};

/// Photons emitted while the B mode drains at rate gamma under the ceiling
/// dn/dt >= -ceiling, over a stage of length `duration`.
inline double drained_phonons(double n, double gamma, double ceiling, double duration)
{
    if (gamma == 0.0 || n <= 0.0) {
        return 0.0;
    }
    const double n_switch = ceiling / gamma;
    double lost = 0.0;
    double remaining_time = duration;
    if (n > n_switch) {
        const double t_linear = (n - n_switch) / ceiling;
        if (t_linear >= duration) {
            return ceiling * duration;
        }
        lost = n - n_switch;
        n = n_switch;
        remaining_time -= t_linear;
    }
    lost += -n * std::expm1(-gamma * remaining_time);
    return std::min(lost, ceiling * duration);
}

} // namespace detail

/// Alternating cooling and thermalisation stages over `duration` seconds.
/// Two records per recorded period (end of cooling, end of thermalisation),
/// preceded by the initial thermalised state at t = 0.
inline StageTrace run_exchanger(const ExchangerConfig& cfg, double duration)
{
    cfg.validate();
    if (!(duration >= cfg.stage_period) || !std::isfinite(duration)) {
        detail::invalid("duration", "must be finite and at least one stage_period");
    }
    const detail::ExchangerThermal thermal(cfg);
    const double quantum = cfg.quantum();
    const double ceiling = cfg.n_atoms * cfg.emission_rate;
    const double t_cool = cfg.cooling_fraction * cfg.stage_period;
    const double t_therm = cfg.stage_period - t_cool;
    const double relax = std::isinf(cfg.thermal_coupling_time) ? 1.0 : std::exp(-t_therm / cfg.thermal_coupling_time);

    double gas_e = thermal.gas_energy(cfg.gas_start_temperature());
    double res_t = cfg.initial_temperature;
    double gas_t = cfg.gas_start_temperature();
    auto b_mode = [&](double t) { return thermalise_gas(1, ThermalParams(t, cfg.nu_max)).front(); };
    double n_b = b_mode(gas_t);
    double photons = 0.0;

    StageTrace trace;
    auto record = [&](double t, Stage s) {
        trace.records.push_back({t, s, gas_t, res_t, n_b, photons, photons * quantum});
    };
    record(0.0, Stage::Thermalisation);

    const auto periods = static_cast<std::uint64_t>(std::floor(duration / cfg.stage_period * (1.0 + 1e-12)));
    for (std::uint64_t k = 0; k < periods; ++k) {
        const double t0 = double(k) * cfg.stage_period;
        const bool keep = (k + 1) % cfg.record_stride == 0 || k + 1 == periods;

        const double lost = std::min(n_b, detail::drained_phonons(n_b, cfg.cooling_rate, ceiling, t_cool));
        n_b -= lost;
        photons += lost;
        gas_e -= lost * quantum;
        gas_t = thermal.gas_temperature(gas_e);
        if (keep) record(t0 + t_cool, Stage::Cooling);

        const double res_e = thermal.reservoir_energy(res_t);
        const double t_mix = thermal.mixing_temperature(gas_e + res_e);
        res_t = t_mix + (res_t - t_mix) * relax;
        const double res_e_new = thermal.reservoir_energy(res_t);
        gas_e = gas_e + (res_e - res_e_new);
        gas_t = thermal.gas_temperature(gas_e);
        n_b = b_mode(gas_t);
        trace.periods = k + 1;

        const bool at_floor = res_t <= cfg.floor_temperature;
        if (keep || at_floor) record(t0 + cfg.stage_period, Stage::Thermalisation);
        if (at_floor) {
            trace.floor_reached_at = t0 + cfg.stage_period;
            break;
        }
    }
    return trace;
}

/// Total thermal energy of gas plus reservoir at the given temperatures.
inline double exchanger_thermal_energy(const ExchangerConfig& cfg, double gas_temperature, double reservoir_temperature)
{
    const detail::ExchangerThermal thermal(cfg);
    return thermal.gas_energy(gas_temperature) + thermal.reservoir_energy(reservoir_temperature);
}

struct SweepRow {
    std::size_t index; // position in the input grid
    ExchangerConfig config;
    std::optional<CoolingEstimate> estimate;
    std::string error;
};

/// One estimate per configuration, sorted by rate (ascending); rows whose
/// configuration fails validation carry the message and sort last.
inline std::vector<SweepRow> sweep(const std::vector<ExchangerConfig>& grid, double delta_T)
{
    if (grid.empty()) {
        detail::invalid("cfg_grid", "must be non-empty");
    }
    std::vector<SweepRow> rows;
    rows.reserve(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        SweepRow row{i, grid[i], std::nullopt, {}};
        try {
            row.estimate = estimate_cooling(grid[i], delta_T);
        } catch (const InvalidArgument& e) {
            row.error = e.what();
        }
        rows.push_back(std::move(row));
    }
    std::stable_sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
        if (a.estimate && b.estimate) return a.estimate->rate < b.estimate->rate;
        return a.estimate.has_value() && !b.estimate.has_value();
    });
    return rows;
}

} // namespace phonox
