#include <cmath>
#include <complex>

#include <gtest/gtest.h>

#include <Eigen/Core>

#include "phonox/ode.hpp"

using namespace phonox;

TEST(Ode, ExponentialDecayMatchesClosedForm)
{
    auto rhs = [](double, const Eigen::VectorXd& y, Eigen::VectorXd& dy) { dy = -2.0 * y; };
    Eigen::VectorXd y0(1);
    y0 << 3.0;
    const auto y = ode::integrate<Eigen::VectorXd>(rhs, y0, 0.0, 5.0);
    EXPECT_NEAR(y[0] / (3.0 * std::exp(-10.0)), 1.0, 1e-7);
}

TEST(Ode, HarmonicOscillatorConservesPhase)
{
    auto rhs = [](double, const Eigen::Vector2d& y, Eigen::Vector2d& dy) {
        dy[0] = y[1];
        dy[1] = -y[0];
    };
    const double t = 20.0 * M_PI + 0.3;
    const auto y = ode::integrate<Eigen::Vector2d>(rhs, Eigen::Vector2d(1.0, 0.0), 0.0, t);
    EXPECT_NEAR(y[0], std::cos(t), 1e-7);
    EXPECT_NEAR(y[1], -std::sin(t), 1e-7);
}

TEST(Ode, ComplexStateRotates)
{
    using V = Eigen::VectorXcd;
    const std::complex<double> i(0.0, 1.0);
    auto rhs = [&](double, const V& y, V& dy) { dy = -i * 3.0 * y; };
    V y0(2);
    y0 << 1.0, i;
    const auto y = ode::integrate<V>(rhs, y0, 0.0, 2.0);
    EXPECT_NEAR(std::abs(y[0] - std::exp(-6.0 * i)), 0.0, 1e-7);
    EXPECT_NEAR(std::abs(y[1] - i * std::exp(-6.0 * i)), 0.0, 1e-7);
}

TEST(Ode, TimeDependentRhs)
{
    auto rhs = [](double t, const Eigen::VectorXd&, Eigen::VectorXd& dy) { dy.setConstant(std::cos(t)); };
    const auto y = ode::integrate<Eigen::VectorXd>(rhs, Eigen::VectorXd::Zero(1), 0.0, 4.0);
    EXPECT_NEAR(y[0], std::sin(4.0), 1e-9);
}

TEST(Ode, SegmentedAdvanceAgreesWithSingleRun)
{
    auto rhs = [](double, const Eigen::Vector2d& y, Eigen::Vector2d& dy) {
        dy[0] = -0.5 * y[0] + y[1];
        dy[1] = -y[0] - 0.1 * y[1];
    };
    const Eigen::Vector2d y0(1.0, -0.5);
    const auto once = ode::integrate<Eigen::Vector2d>(rhs, y0, 0.0, 7.0);
    auto integ = ode::make_integrator<Eigen::Vector2d>(rhs);
    Eigen::Vector2d y = y0;
    double t = 0.0;
    for (int k = 1; k <= 70; ++k) integ.advance(y, t, 0.1 * k);
    EXPECT_DOUBLE_EQ(t, 7.0);
    EXPECT_NEAR((y - once).norm(), 0.0, 1e-8);
    EXPECT_GT(integ.accepted_steps(), 0u);
    EXPECT_GT(integ.rhs_evaluations(), integ.accepted_steps());
}

TEST(Ode, TighterToleranceIsMoreAccurate)
{
    auto rhs = [](double, const Eigen::VectorXd& y, Eigen::VectorXd& dy) { dy = -y.array().square(); };
    Eigen::VectorXd y0(1);
    y0 << 1.0;
    const double exact = 1.0 / 11.0;
    const double loose = std::abs(ode::integrate<Eigen::VectorXd>(rhs, y0, 0.0, 10.0, {1e-4, 1e-8})[0] - exact);
    const double tight = std::abs(ode::integrate<Eigen::VectorXd>(rhs, y0, 0.0, 10.0, {1e-11, 1e-14})[0] - exact);
    EXPECT_LT(tight, loose);
    EXPECT_LT(tight, 1e-10);
}

TEST(Ode, BlowUpRaisesStepFailure)
{
    auto rhs = [](double, const Eigen::VectorXd& y, Eigen::VectorXd& dy) { dy = y.array().square(); };
    Eigen::VectorXd y0(1);
    y0 << 1.0;
    EXPECT_THROW(ode::integrate<Eigen::VectorXd>(rhs, y0, 0.0, 2.0), StepFailure);
}

TEST(Ode, StepBudgetExhaustionRaisesStepFailure)
{
    auto rhs = [](double, const Eigen::VectorXd& y, Eigen::VectorXd& dy) { dy = -y; };
    Eigen::VectorXd y0(1);
    y0 << 1.0;
    ode::Tolerances tol;
    tol.max_steps = 3;
    EXPECT_THROW(ode::integrate<Eigen::VectorXd>(rhs, y0, 0.0, 100.0, tol), StepFailure);
}

TEST(Ode, ZeroLengthIntervalIsIdentity)
{
    auto rhs = [](double, const Eigen::VectorXd& y, Eigen::VectorXd& dy) { dy = -y; };
    Eigen::VectorXd y0(1);
    y0 << 2.5;
    EXPECT_EQ(ode::integrate<Eigen::VectorXd>(rhs, y0, 1.0, 1.0)[0], 2.5);
}
