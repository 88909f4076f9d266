#pragma once

// Closed moment equations for sideband cooling of a single ion and for
// cavity-mediated cooling (single atom or the collective B mode), with the
// associated cooling-rate formulas and resonance-condition diagnostics.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "phonox/error.hpp"
#include "phonox/fock.hpp"
#include "phonox/ode.hpp"

namespace phonox {

namespace detail {
using Named = std::initializer_list<std::pair<double, const char*>>;
} // namespace detail

struct SingleIonParams {
    double g = 0.0;      // atom-phonon coupling
    double gamma = 0.0;  // spontaneous decay
    double nu = 1.0;     // phonon frequency
    double omega0 = 0.0; // atomic transition
    double omegaL = 0.0; // laser

    /// Laser detuning omega0 - omegaL, always derived from the two frequencies.
    double delta() const noexcept { return omega0 - omegaL; }

    void validate() const
    {
        for (auto [v, k] : detail::Named{{g, "g"}, {gamma, "gamma"}, {nu, "nu"}, {omega0, "omega0"}, {omegaL, "omegaL"}}) {
            detail::require_finite(v, k);
        }
        if (g < 0.0) detail::invalid("g", "must be >= 0");
        if (gamma < 0.0) detail::invalid("gamma", "must be >= 0");
        if (!(nu > 0.0)) detail::invalid("nu", "must be > 0");
    }
};

struct CavityParams {
    double g_eff = 0.0;     // per-atom effective atom-cavity coupling
    double kappa = 0.0;     // cavity decay
    double nu = 1.0;        // phonon frequency
    double delta_cav = 0.0; // omega_cav - omega_L
    double omega_cav = 0.0;
    int n_atoms = 1;
    std::optional<std::vector<double>> per_atom_couplings;

    void validate() const
    {
        for (auto [v, k] : detail::Named{{g_eff, "g_eff"}, {kappa, "kappa"}, {nu, "nu"}, {delta_cav, "delta_cav"},
                                          {omega_cav, "omega_cav"}}) {
            detail::require_finite(v, k);
        }
        if (kappa < 0.0) detail::invalid("kappa", "must be >= 0");
        if (!(nu > 0.0)) detail::invalid("nu", "must be > 0");
        if (n_atoms < 1) detail::invalid("n_atoms", "must be >= 1");
        if (per_atom_couplings) {
            if (per_atom_couplings->size() != static_cast<std::size_t>(n_atoms)) {
                detail::invalid("per_atom_couplings", "length must equal n_atoms");
            }
            for (double c : *per_atom_couplings) {
                detail::require_finite(c, "per_atom_couplings");
            }
        }
    }
};

/// (m, s, k1) with k1 = i<sigma^- b^dagger - sigma^+ b>.
struct RateStateAtom {
    double m = 0.0;
    double s = 0.0;
    double k1 = 0.0;

    bool physical(double slack = 1e-9) const noexcept
    {
        return m >= -slack && s >= -slack && s <= 1.0 + slack;
    }
};

/// (m, n, k1) with k1 = i<b c^dagger - b^dagger c>.
struct RateStateCavity {
    double m = 0.0;
    double n = 0.0;
    double k1 = 0.0;

    bool physical(double slack = 1e-9) const noexcept { return m >= -slack && n >= -slack; }
};

namespace detail {

inline void require_finite_state(std::initializer_list<double> xs)
{
    for (double x : xs) {
        if (!std::isfinite(x)) {
            invalid("state", "must be finite");
        }
    }
}

inline void require_positive_dt(double dt)
{
    if (!(dt > 0.0) || !std::isfinite(dt)) {
        invalid("dt", "must be positive and finite");
    }
}

struct SingleIonRhs {
    double g, gamma;
    void operator()(double, const Eigen::Vector3d& y, Eigen::Vector3d& dy) const
    {
        const double m = y[0], s = y[1], k1 = y[2];
        dy[0] = -g * k1;
        dy[1] = g * k1 - gamma * s;
        dy[2] = 2.0 * g * (m - s) - 4.0 * g * m * s - 0.5 * gamma * k1;
    }
};

struct CavityRhs {
    double g, kappa;
    void operator()(double, const Eigen::Vector3d& y, Eigen::Vector3d& dy) const
    {
        const double m = y[0], n = y[1], k1 = y[2];
        dy[0] = g * k1;
        dy[1] = -g * k1 - kappa * n;
        dy[2] = 2.0 * g * (n - m) - 0.5 * kappa * k1;
    }
};

} // namespace detail

/// Root-sum-square of per-atom couplings, i.e. the coupling of the collective mode.
inline double collective_coupling(std::span<const double> per_atom)
{
    if (per_atom.empty()) {
        detail::invalid("per_atom", "must be non-empty");
    }
    double sum = 0.0;
    for (double g : per_atom) {
        detail::require_finite(g, "per_atom");
        sum += g * g;
    }
    return std::sqrt(sum);
}

/// Coupling that drives the phonon-photon dynamics: g_eff for one atom,
/// sqrt(N) g_eff for N uniform atoms, or the root-sum-square of the list.
inline double effective_coupling(const CavityParams& p)
{
    if (p.per_atom_couplings) {
        return collective_coupling(*p.per_atom_couplings);
    }
    return p.n_atoms == 1 ? p.g_eff : std::sqrt(double(p.n_atoms)) * std::abs(p.g_eff);
}

inline RateStateAtom step_single_ion(const RateStateAtom& state, const SingleIonParams& p, double dt,
                                     const ode::Tolerances& tol = {})
{
    p.validate();
    detail::require_positive_dt(dt);
    detail::require_finite_state({state.m, state.s, state.k1});
    Eigen::Vector3d y(state.m, state.s, state.k1);
    y = ode::integrate<Eigen::Vector3d>(detail::SingleIonRhs{p.g, p.gamma}, y, 0.0, dt, tol);
    if (!y.allFinite()) {
        throw StepFailure("single-ion moments diverged", dt);
    }
    return {y[0], y[1], y[2]};
}

inline RateStateCavity step_cavity(const RateStateCavity& state, const CavityParams& p, double dt,
                                   const ode::Tolerances& tol = {})
{
    p.validate();
    detail::require_positive_dt(dt);
    detail::require_finite_state({state.m, state.n, state.k1});
    Eigen::Vector3d y(state.m, state.n, state.k1);
    y = ode::integrate<Eigen::Vector3d>(detail::CavityRhs{effective_coupling(p), p.kappa}, y, 0.0, dt, tol);
    if (!y.allFinite()) {
        throw StepFailure("cavity moments diverged", dt);
    }
    return {y[0], y[1], y[2]};
}

template <class State>
struct TimedState {
    double time;
    State state;
};

namespace detail {

inline std::vector<double> observation_times(double t_final, double dt_observe)
{
    if (!(t_final > 0.0) || !std::isfinite(t_final)) {
        invalid("t_final", "must be positive and finite");
    }
    if (!(dt_observe > 0.0) || dt_observe > t_final) {
        invalid("dt_observe", "must be in (0, t_final]");
    }
    std::vector<double> times{0.0};
    const auto n = static_cast<long long>(std::floor(t_final / dt_observe * (1.0 + 1e-12)));
    for (long long k = 1; k <= n; ++k) {
        times.push_back(std::min(double(k) * dt_observe, t_final));
    }
    if (times.back() < t_final * (1.0 - 1e-12)) {
        times.push_back(t_final);
    }
    return times;
}

template <class State, class Rhs>
std::vector<TimedState<State>> sample(Rhs rhs, const State& s0, double t_final, double dt_observe,
                                      const ode::Tolerances& tol, auto pack, auto unpack)
{
    auto integrator = ode::make_integrator<Eigen::Vector3d>(rhs, tol);
    Eigen::Vector3d y = pack(s0);
    double t = 0.0;
    std::vector<TimedState<State>> out;
    for (double target : observation_times(t_final, dt_observe)) {
        integrator.advance(y, t, target);
        out.push_back({t, unpack(y)});
    }
    return out;
}

} // namespace detail

/// Same dynamics as step_single_ion, sampled at t = 0, dt, 2dt, ... in one integrator run.
inline std::vector<TimedState<RateStateAtom>> trajectory_single_ion(const RateStateAtom& s0, const SingleIonParams& p,
                                                                    double t_final, double dt_observe,
                                                                    const ode::Tolerances& tol = {})
{
    p.validate();
    detail::require_finite_state({s0.m, s0.s, s0.k1});
    return detail::sample<RateStateAtom>(
        detail::SingleIonRhs{p.g, p.gamma}, s0, t_final, dt_observe, tol,
        [](const RateStateAtom& s) { return Eigen::Vector3d(s.m, s.s, s.k1); },
        [](const Eigen::Vector3d& y) { return RateStateAtom{y[0], y[1], y[2]}; });
}

inline std::vector<TimedState<RateStateCavity>> trajectory_cavity(const RateStateCavity& s0, const CavityParams& p,
                                                                  double t_final, double dt_observe,
                                                                  const ode::Tolerances& tol = {})
{
    p.validate();
    detail::require_finite_state({s0.m, s0.n, s0.k1});
    return detail::sample<RateStateCavity>(
        detail::CavityRhs{effective_coupling(p), p.kappa}, s0, t_final, dt_observe, tol,
        [](const RateStateCavity& s) { return Eigen::Vector3d(s.m, s.n, s.k1); },
        [](const Eigen::Vector3d& y) { return RateStateCavity{y[0], y[1], y[2]}; });
}

/// Coefficient matrix A of d(m, n, k1)/dt = A (m, n, k1) for the cavity model.
inline Eigen::Matrix3d cavity_system_matrix(const CavityParams& p)
{
    const double g = effective_coupling(p);
    const double k = p.kappa;
    Eigen::Matrix3d a;
    a << 0.0, 0.0, g,
         0.0, -k, -g,
         -2.0 * g, 2.0 * g, -0.5 * k;
    return a;
}

/// g^2 / Gamma.
inline double cooling_rate_single(const SingleIonParams& p)
{
    p.validate();
    if (p.gamma == 0.0) {
        detail::invalid("gamma", "cooling rate undefined for gamma = 0");
    }
    return p.g * p.g / p.gamma;
}

/// g_eff^2 / kappa for a single atom in the cavity.
inline double cooling_rate_cavity(const CavityParams& p)
{
    p.validate();
    if (p.kappa == 0.0) {
        detail::invalid("kappa", "cooling rate undefined for kappa = 0");
    }
    return p.g_eff * p.g_eff / p.kappa;
}

/// N g_eff^2 / kappa for uniform couplings, g~_eff^2 / kappa otherwise.
inline double cooling_rate_collective(const CavityParams& p)
{
    p.validate();
    if (p.kappa == 0.0) {
        detail::invalid("kappa", "cooling rate undefined for kappa = 0");
    }
    if (p.per_atom_couplings) {
        const auto& c = *p.per_atom_couplings;
        const bool uniform = std::all_of(c.begin(), c.end(), [&](double x) { return std::abs(x) == std::abs(c.front()); });
        if (uniform) {
            return double(p.n_atoms) * (c.front() * c.front() / p.kappa);
        }
        const double gt = collective_coupling(c);
        return gt * gt / p.kappa;
    }
    return double(p.n_atoms) * (p.g_eff * p.g_eff / p.kappa);
}

namespace detail {

// Tr(A rho) for an operator with at most one entry per column: A|i> = w(i) |target(i)>.
template <class Map>
complex ladder_trace(const DensityMatrix& rho, Map map)
{
    const auto& r = rho.entries();
    complex acc = 0.0;
    for (Eigen::Index i = 0; i < r.rows(); ++i) {
        if (const auto t = map(i)) {
            acc += t->second * r(i, t->first);
        }
    }
    return acc;
}

using LadderTarget = std::optional<std::pair<Eigen::Index, double>>;

} // namespace detail

/// Moments (m, s, k1) of an atom-phonon state.
inline RateStateAtom atom_phonon_moments(const DensityMatrix& rho)
{
    const auto& sp = rho.space();
    if (!sp.has_atom()) {
        detail::invalid("space", "has no atom subsystem");
    }
    const auto& r = rho.entries();
    RateStateAtom out;
    for (Eigen::Index i = 0; i < r.rows(); ++i) {
        out.m += sp.phonon_of(i) * r(i, i).real();
        if (sp.atom_of(i) == 1) out.s += r(i, i).real();
    }
    // sigma^- b^dagger |e, p> = sqrt(p + 1) |g, p + 1>; k1 = -2 Im Tr(sigma^- b^dagger rho).
    const complex x = detail::ladder_trace(rho, [&](Eigen::Index i) -> detail::LadderTarget {
        const int p = sp.phonon_of(i);
        if (sp.atom_of(i) != 1 || p == sp.phonon_cutoff()) return std::nullopt;
        return std::pair{sp.index(0, p + 1, sp.photon_of(i)), std::sqrt(double(p + 1))};
    });
    out.k1 = -2.0 * x.imag();
    return out;
}

/// Moments (m, n, k1) of a phonon-photon state.
inline RateStateCavity phonon_photon_moments(const DensityMatrix& rho)
{
    const auto& sp = rho.space();
    if (!sp.has_photon()) {
        detail::invalid("space", "has no photon subsystem");
    }
    const auto& r = rho.entries();
    RateStateCavity out;
    for (Eigen::Index i = 0; i < r.rows(); ++i) {
        out.m += sp.phonon_of(i) * r(i, i).real();
        out.n += sp.photon_of(i) * r(i, i).real();
    }
    // b c^dagger |p, q> = sqrt(p (q + 1)) |p - 1, q + 1>; k1 = -2 Im Tr(b c^dagger rho).
    const complex x = detail::ladder_trace(rho, [&](Eigen::Index i) -> detail::LadderTarget {
        const int p = sp.phonon_of(i), q = sp.photon_of(i);
        if (p == 0 || q == *sp.photon_cutoff()) return std::nullopt;
        return std::pair{sp.index(sp.atom_of(i), p - 1, q + 1), std::sqrt(double(p) * double(q + 1))};
    });
    out.k1 = -2.0 * x.imag();
    return out;
}

/// Least-squares slope of -ln|y| against t over the samples with t >= t_from
/// and |y| > floor. Returns nullopt with fewer than three usable samples.
inline std::optional<double> fit_decay_rate(std::span<const double> t, std::span<const double> y, double t_from,
                                            double floor = 1e-300)
{
    double st = 0, sl = 0, stt = 0, stl = 0;
    int n = 0;
    for (std::size_t i = 0; i < std::min(t.size(), y.size()); ++i) {
        if (t[i] < t_from || !(std::abs(y[i]) > floor)) {
            continue;
        }
        const double l = std::log(std::abs(y[i]));
        st += t[i];
        sl += l;
        stt += t[i] * t[i];
        stl += t[i] * l;
        ++n;
    }
    if (n < 3) {
        return std::nullopt;
    }
    const double denom = n * stt - st * st;
    if (denom == 0.0) {
        return std::nullopt;
    }
    return -(n * stl - st * sl) / denom;
}

enum class DetuningSide { Red, Resonant, Blue };

inline const char* to_string(DetuningSide s)
{
    switch (s) {
    case DetuningSide::Red: return "red";
    case DetuningSide::Resonant: return "resonant";
    case DetuningSide::Blue: return "blue";
    }
    return "?";
}

struct ConditionCheck {
    std::string name;
    double value;
    double reference;
    bool passed;
};

struct CoolingDiagnostic {
    std::vector<ConditionCheck> checks;
    DetuningSide side = DetuningSide::Resonant;
    bool heating_side = false;

    bool all_passed() const
    {
        return !heating_side &&
               std::all_of(checks.begin(), checks.end(), [](const ConditionCheck& c) { return c.passed; });
    }
};

namespace detail {

inline CoolingDiagnostic resonance_report(const char* detuning_name, double detuning, const char* rate_name,
                                          double rate, double nu, double band)
{
    if (!(band > 0.0)) {
        invalid("tolerance_band", "must be > 0");
    }
    CoolingDiagnostic r;
    const double ratio = detuning / nu;
    r.checks.push_back({std::string(detuning_name) + " ~ nu", ratio, band, std::abs(ratio - 1.0) <= band});
    r.checks.push_back({std::string("nu >= ") + rate_name, rate, nu, nu >= rate});
    r.side = detuning > 0.0 ? DetuningSide::Red : (detuning < 0.0 ? DetuningSide::Blue : DetuningSide::Resonant);
    r.heating_side = detuning < 0.0;
    return r;
}

} // namespace detail

/// Checks Delta ~ nu (within a relative band) and nu >= Gamma, and whether
/// the laser sits below resonance (red side, Delta > 0) as cooling requires.
inline CoolingDiagnostic validate_cooling_conditions(const SingleIonParams& p, double tolerance_band = 0.5)
{
    return detail::resonance_report("Delta", p.delta(), "Gamma", p.gamma, p.nu, tolerance_band);
}

/// Checks Delta_cav ~ nu and nu >= kappa; Delta_cav < 0 is the heating side.
inline CoolingDiagnostic validate_cooling_conditions(const CavityParams& p, double tolerance_band = 0.5)
{
    return detail::resonance_report("Delta_cav", p.delta_cav, "kappa", p.kappa, p.nu, tolerance_band);
}

} // namespace phonox
