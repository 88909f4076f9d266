#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "phonox/thermo.hpp"

using namespace phonox;

TEST(Thermo, OccupationAtLnTwoIsOne)
{
    EXPECT_NEAR(bose_occupation(std::log(2.0)), 1.0, 1e-12);
}

TEST(Thermo, MeanEnergyIsMinusDerivativeOfLogZ)
{
    // <H>/hbar nu = -d ln Z / d lambda on a 50-point grid, central differences.
    for (int i = 0; i < 50; ++i) {
        const double lambda = 0.01 * std::pow(1000.0, i / 49.0);
        const double h = 1e-5 * lambda;
        const double d = (std::log(partition_function(lambda + h)) - std::log(partition_function(lambda - h))) / (2 * h);
        const double mean = bose_occupation(lambda) + 0.5;
        EXPECT_NEAR(-d / mean, 1.0, 1e-6) << "lambda=" << lambda;
    }
}

TEST(Thermo, ThermalStateConsistency)
{
    const ThermalParams p(300.0, 2e13);
    const auto st = thermal_state(p);
    const double lambda = p.lambda();
    EXPECT_NEAR(st.mean_phonons, 1.0 / (std::exp(lambda) - 1.0), 1e-12 * st.mean_phonons);
    EXPECT_NEAR(st.partition_function, 1.0 / (2.0 * std::sinh(lambda / 2.0)), 1e-12 * st.partition_function);
    EXPECT_NEAR(st.mean_energy, constants::hbar * p.nu * (st.mean_phonons + 0.5), 0.0);
    EXPECT_DOUBLE_EQ(p.beta(), 1.0 / (constants::boltzmann * 300.0));
}

TEST(Thermo, LowTemperatureLimitsAreExact)
{
    EXPECT_EQ(bose_occupation(701.0), 0.0);
    EXPECT_EQ(bose_occupation(1e6), 0.0);
    const double tiny = bose_occupation(699.0);
    EXPECT_GT(tiny, 0.0);
    EXPECT_NEAR(tiny / std::exp(-699.0), 1.0, 1e-12);
    const auto st = thermal_state(ThermalParams(1e-6, 1e8));
    EXPECT_EQ(st.mean_phonons, 0.0);
    EXPECT_EQ(st.mean_energy, 0.5 * constants::hbar * 1e8);
    EXPECT_EQ(oscillator_heat_capacity(1e8, 1e-6), 0.0);
}

TEST(Thermo, HighTemperatureLimit)
{
    const double lambda = 1e-6;
    EXPECT_NEAR(bose_occupation(lambda) * lambda, 1.0, 1e-6);
    EXPECT_NEAR(partition_function(lambda) * lambda, 1.0, 1e-6);
}

TEST(Thermo, RejectsDegenerateInputs)
{
    EXPECT_THROW(bose_occupation(0.0), InvalidArgument);
    EXPECT_THROW(bose_occupation(-1.0), InvalidArgument);
    EXPECT_THROW(bose_occupation(1e-13), InvalidArgument);
    EXPECT_THROW(bose_occupation(std::numeric_limits<double>::infinity()), InvalidArgument);
    EXPECT_THROW(thermal_state(ThermalParams(0.0, 1e8)), InvalidArgument);
    EXPECT_THROW(thermal_state(ThermalParams(300.0, -1.0)), InvalidArgument);
    EXPECT_THROW(temperature_from_mean_phonons(0.0, 1e8), InvalidArgument);
    EXPECT_THROW(temperature_from_mean_phonons(1.0, 0.0), InvalidArgument);
}

TEST(Thermo, TemperatureRoundTrip)
{
    for (double t : {1e-3, 0.1, 4.2, 77.0, 293.15, 1e4}) {
        const double nu = 1e8;
        const double m = thermal_state(ThermalParams(t, nu)).mean_phonons;
        if (m == 0.0) continue;
        EXPECT_NEAR(temperature_from_mean_phonons(m, nu) / t, 1.0, 1e-12) << t;
    }
}

TEST(Thermo, ThermalisationIgnoresHistory)
{
    const ThermalParams p(300.0, 1e8, 3e8);
    const auto a = thermalise_gas(5, p);
    ASSERT_EQ(a.size(), 5u);
    for (double m : a) EXPECT_DOUBLE_EQ(m, bose_occupation(p.lambda_eff()));
    EXPECT_EQ(thermalise_gas(5, p), a);
    EXPECT_THROW(thermalise_gas(0, p), InvalidArgument);
}

TEST(Thermo, HeatCapacityIsEnergyDerivative)
{
    // Differentiate the thermal part only; at low T it sits far below the zero-point energy.
    const double nu = 1e11;
    auto thermal = [&](double t) {
        return constants::hbar * nu * bose_occupation(constants::hbar * nu / (constants::boltzmann * t));
    };
    for (double t : {0.01, 1.0, 300.0}) {
        const double h = 1e-6 * t;
        const double d = (thermal(t + h) - thermal(t - h)) / (2 * h);
        EXPECT_NEAR(oscillator_heat_capacity(nu, t) / d, 1.0, 1e-6) << t;
    }
    const double d300 = (gas_energy(1.0, nu, 300.0 + 1e-3) - gas_energy(1.0, nu, 300.0 - 1e-3)) / 2e-3;
    EXPECT_NEAR(oscillator_heat_capacity(nu, 300.0) / d300, 1.0, 1e-6);
    EXPECT_NEAR(oscillator_heat_capacity(1e8, 300.0) / constants::boltzmann, 1.0, 1e-9);
}
