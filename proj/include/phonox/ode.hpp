#pragma once

// Embedded Runge-Kutta 5(4) integrator (Dormand-Prince coefficients, FSAL,
// local extrapolation). Works on any Eigen dense vector or matrix type; the
// whole object is treated as one flat state for the error norm.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>
#include <utility>

#include <Eigen/Core>

#include "phonox/error.hpp"

namespace phonox::ode {

struct Tolerances {
    double rtol = 1e-9;
    double atol = 1e-12;
    std::size_t max_steps = 50'000'000;
};

namespace detail {

template <class State>
double weighted_rms(const State& err, const State& y0, const State& y1, const Tolerances& tol)
{
    auto scale = tol.atol + tol.rtol * y0.array().abs().max(y1.array().abs());
    const double n = static_cast<double>(err.size());
    if (n == 0) {
        return 0.0;
    }
    return std::sqrt((err.array().abs() / scale).square().sum() / n);
}

template <class State>
double weighted_rms(const State& v, const State& y, const Tolerances& tol)
{
    return weighted_rms(v, y, y, tol);
}

// Butcher tableau.
inline constexpr double c2 = 1.0 / 5.0, c3 = 3.0 / 10.0, c4 = 4.0 / 5.0, c5 = 8.0 / 9.0;
inline constexpr double a21 = 1.0 / 5.0;
inline constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
inline constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
inline constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0,
                        a54 = -212.0 / 729.0;
inline constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                        a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
inline constexpr double a71 = 35.0 / 384.0, a73 = 500.0 / 1113.0, a74 = 125.0 / 192.0,
                        a75 = -2187.0 / 6784.0, a76 = 11.0 / 84.0;
// Difference between the 5th- and 4th-order weights.
inline constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                        e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;

} // namespace detail

/// Adaptive integrator that keeps its step size and FSAL stage between calls,
/// so a trajectory can be sampled at observation times without restarting.
///
/// `Rhs` is callable as `rhs(double t, const State& y, State& dydt)`.
template <class State, class Rhs>
class AdaptiveIntegrator {
public:
    AdaptiveIntegrator(Rhs rhs, Tolerances tol = {})
        : rhs_(std::move(rhs)), tol_(tol) {}

    /// Advances `y` from `t` to exactly `t_end`. Throws StepFailure when the
    /// step size collapses, the step budget runs out or the state goes non-finite.
    void advance(State& y, double& t, double t_end)
    {
        using namespace detail;
        if (!(t_end >= t)) {
            throw InvalidArgument("t_end: must not precede the current time");
        }
        if (t_end == t) {
            return;
        }
        ensure_storage(y);
        if (!fsal_valid_) {
            rhs_(t, y, k1_);
            ++rhs_evals_;
            fsal_valid_ = true;
        }
        if (h_ <= 0.0) {
            h_ = initial_step(y, t, t_end);
        }

        bool last_rejected = false;
        while (t < t_end) {
            if (accepted_ + rejected_ >= tol_.max_steps) {
                fail("step budget exhausted", t);
            }
            const double remaining = t_end - t;
            const bool final_step = h_ >= remaining * (1.0 - 1e-12);
            const double h = final_step ? remaining : h_;
            const double h_min = 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t));
            if (h < h_min) {
                fail("step size underflow", t);
            }

            tmp_ = y + h * (a21 * k1_);
            rhs_(t + c2 * h, tmp_, k2_);
            tmp_ = y + h * (a31 * k1_ + a32 * k2_);
            rhs_(t + c3 * h, tmp_, k3_);
            tmp_ = y + h * (a41 * k1_ + a42 * k2_ + a43 * k3_);
            rhs_(t + c4 * h, tmp_, k4_);
            tmp_ = y + h * (a51 * k1_ + a52 * k2_ + a53 * k3_ + a54 * k4_);
            rhs_(t + c5 * h, tmp_, k5_);
            tmp_ = y + h * (a61 * k1_ + a62 * k2_ + a63 * k3_ + a64 * k4_ + a65 * k5_);
            rhs_(t + h, tmp_, k6_);
            ynew_ = y + h * (a71 * k1_ + a73 * k3_ + a74 * k4_ + a75 * k5_ + a76 * k6_);
            rhs_(t + h, ynew_, k7_);
            rhs_evals_ += 6;

            err_ = h * (e1 * k1_ + e3 * k3_ + e4 * k4_ + e5 * k5_ + e6 * k6_ + e7 * k7_);
            const double err = weighted_rms(err_, y, ynew_, tol_);

            if (!std::isfinite(err)) {
                ++rejected_;
                h_ = 0.1 * h;
                last_rejected = true;
                continue;
            }
            if (err <= 1.0) {
                ++accepted_;
                t = final_step ? t_end : t + h;
                y.swap(ynew_);
                k1_.swap(k7_);
                double fac = err == 0.0 ? 5.0 : 0.9 * std::pow(err, -0.2);
                fac = std::clamp(fac, 0.2, last_rejected ? 1.0 : 5.0);
                // A truncated final step says nothing about the natural step size.
                if (!final_step || h == h_) {
                    h_ = h * fac;
                }
                last_rejected = false;
            } else {
                ++rejected_;
                h_ = h * std::max(0.2, 0.9 * std::pow(err, -0.2));
                last_rejected = true;
            }
        }
    }

    /// Drops the cached derivative; call after modifying the state externally.
    void reset() noexcept
    {
        fsal_valid_ = false;
    }

    std::size_t accepted_steps() const noexcept { return accepted_; }
    std::size_t rejected_steps() const noexcept { return rejected_; }
    std::size_t rhs_evaluations() const noexcept { return rhs_evals_; }
    double step_size() const noexcept { return h_; }

private:
    [[noreturn]] void fail(const char* why, double t) const
    {
        std::ostringstream os;
        os << "adaptive integrator: " << why << " at t=" << t;
        throw StepFailure(os.str(), t);
    }

    void ensure_storage(const State& y)
    {
        if (k1_.size() == y.size() && k1_.rows() == y.rows()) {
            return;
        }
        for (State* s : {&k1_, &k2_, &k3_, &k4_, &k5_, &k6_, &k7_, &tmp_, &ynew_, &err_}) {
            s->resize(y.rows(), y.cols());
        }
        fsal_valid_ = false;
    }

    // Starting step from the usual two-evaluation estimate of the local scale.
    double initial_step(const State& y, double t, double t_end)
    {
        using detail::weighted_rms;
        const double span = t_end - t;
        const double d0 = weighted_rms(y, y, tol_);
        const double d1 = weighted_rms(k1_, y, tol_);
        double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 * span : 0.01 * d0 / d1;
        h0 = std::min(h0, span);
        tmp_ = y + h0 * k1_;
        rhs_(t + h0, tmp_, k2_);
        ++rhs_evals_;
        k3_ = k2_ - k1_;
        const double d2 = weighted_rms(k3_, y, tol_) / h0;
        const double dmax = std::max(d1, d2);
        const double h1 = dmax <= 1e-15 ? std::max(1e-6 * span, h0 * 1e-3)
                                        : std::pow(0.01 / dmax, 0.2);
        return std::min({100.0 * h0, h1, span});
    }

    Rhs rhs_;
    Tolerances tol_;
    double h_ = 0.0;
    bool fsal_valid_ = false;
    std::size_t accepted_ = 0;
    std::size_t rejected_ = 0;
    std::size_t rhs_evals_ = 0;
    State k1_, k2_, k3_, k4_, k5_, k6_, k7_, tmp_, ynew_, err_;
};

template <class State, class Rhs>
AdaptiveIntegrator<State, Rhs> make_integrator(Rhs rhs, Tolerances tol = {})
{
    return AdaptiveIntegrator<State, Rhs>(std::move(rhs), tol);
}

/// One-shot convenience: integrates `y0` from `t0` to `t1`.
template <class State, class Rhs>
State integrate(Rhs rhs, State y0, double t0, double t1, Tolerances tol = {})
{
    auto integrator = make_integrator<State>(std::move(rhs), tol);
    integrator.advance(y0, t0, t1);
    return y0;
}

} // namespace phonox::ode
