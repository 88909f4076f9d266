#pragma once

// Thermal state of a harmonic phonon mode and of a gas of identical,
// independent oscillators (the state a thermalisation stage leaves behind).

#include <cmath>
#include <limits>
#include <vector>

#include "phonox/constants.hpp"
#include "phonox/error.hpp"

namespace phonox {

/// Temperature and phonon frequencies. The dimensionless ratios are always
/// recomputed from the stored fields.
struct ThermalParams {
    double temperature; // K
    double nu;          // rad/s
    double nu_eff;      // rad/s, collision-enhanced frequency

    ThermalParams(double temperature_, double nu_, double nu_eff_)
        : temperature(temperature_), nu(nu_), nu_eff(nu_eff_) {}
    ThermalParams(double temperature_, double nu_)
        : ThermalParams(temperature_, nu_, nu_) {}

    static constexpr double k_B = constants::boltzmann;

    double beta() const noexcept { return 1.0 / (k_B * temperature); }
    double lambda() const noexcept { return constants::hbar * nu / (k_B * temperature); }
    double lambda_eff() const noexcept { return constants::hbar * nu_eff / (k_B * temperature); }

    void validate() const
    {
        if (!(temperature > 0.0) || !std::isfinite(temperature)) {
            detail::invalid("temperature", "must be positive and finite");
        }
        if (!(nu > 0.0) || !std::isfinite(nu)) {
            detail::invalid("nu", "must be positive and finite");
        }
        if (!(nu_eff > 0.0) || !std::isfinite(nu_eff)) {
            detail::invalid("nu_eff", "must be positive and finite");
        }
    }
};

struct ThermalState {
    double partition_function; // Z
    double mean_energy;        // J
    double mean_phonons;       // m
};

namespace thermo_limits {
/// Below this lambda the occupation formulas are outside their validated range.
inline constexpr double min_lambda = 1e-12;
/// Above this lambda exp(lambda) would overflow; occupations are 0 to double precision.
inline constexpr double underflow_lambda = 700.0;
} // namespace thermo_limits

namespace detail {

inline void require_lambda(double lambda, const char* key)
{
    if (!std::isfinite(lambda) || !(lambda > 0.0)) {
        invalid(key, "must be positive and finite (zero or negative temperature/frequency)");
    }
    if (lambda < thermo_limits::min_lambda) {
        invalid(key, "below the validated range (1e-12)");
    }
}

} // namespace detail

/// Bose-Einstein occupation 1 / (e^lambda - 1).
inline double bose_occupation(double lambda)
{
    detail::require_lambda(lambda, "lambda");
    if (lambda > thermo_limits::underflow_lambda) {
        return 0.0;
    }
    return 1.0 / std::expm1(lambda);
}

/// Z = e^{-lambda/2} / (1 - e^{-lambda}).
inline double partition_function(double lambda)
{
    detail::require_lambda(lambda, "lambda");
    return std::exp(-0.5 * lambda) / -std::expm1(-lambda);
}

/// Thermal state of a single phonon mode with H = hbar nu (b^dagger b + 1/2).
inline ThermalState thermal_state(const ThermalParams& p)
{
    p.validate();
    const double lambda = p.lambda();
    const double m = bose_occupation(lambda);
    return {partition_function(lambda), constants::hbar * p.nu * (m + 0.5), m};
}

/// Per-atom mean phonon number after a thermalisation stage: every atom holds
/// 1 / (e^{lambda_eff} - 1), independent of any earlier depletion. With uniform
/// couplings the collective mode inherits the same occupation.
inline std::vector<double> thermalise_gas(int n_atoms, const ThermalParams& p)
{
    if (n_atoms < 1) {
        detail::invalid("n_atoms", "must be >= 1");
    }
    p.validate();
    return std::vector<double>(static_cast<std::size_t>(n_atoms), bose_occupation(p.lambda_eff()));
}

/// Inverse of the Bose-Einstein occupation: T = hbar nu / (k_B ln(1 + 1/m)).
inline double temperature_from_mean_phonons(double m, double nu)
{
    if (!(m > 0.0) || !std::isfinite(m)) {
        detail::invalid("m", "must be positive and finite for a finite positive temperature");
    }
    if (!(nu > 0.0) || !std::isfinite(nu)) {
        detail::invalid("nu", "must be positive and finite");
    }
    return constants::hbar * nu / (constants::boltzmann * std::log1p(1.0 / m));
}

/// Total vibrational energy of N identical oscillators at frequency nu and temperature T.
inline double gas_energy(double n_atoms, double nu, double temperature)
{
    const double m = bose_occupation(constants::hbar * nu / (constants::boltzmann * temperature));
    return n_atoms * constants::hbar * nu * (m + 0.5);
}

/// d<H>/dT for one oscillator: k_B lambda^2 e^lambda / (e^lambda - 1)^2.
inline double oscillator_heat_capacity(double nu, double temperature)
{
    const double lambda = constants::hbar * nu / (constants::boltzmann * temperature);
    detail::require_lambda(lambda, "lambda");
    if (lambda > thermo_limits::underflow_lambda) {
        return 0.0;
    }
    const double em1 = std::expm1(lambda);
    return constants::boltzmann * lambda * lambda * (em1 + 1.0) / (em1 * em1);
}

} // namespace phonox
