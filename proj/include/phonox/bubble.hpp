#pragma once

// A collapsed bubble as an optical resonator: the frequency ladder of its
// cavity modes, the frequency band spanned by an ensemble of bubbles, and a
// per-bubble cooling/heating classification for a given laser frequency.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "phonox/constants.hpp"
#include "phonox/error.hpp"

namespace phonox {

struct BubbleSpec {
    double d_min;  // m
    double kappa;  // rad/s
    double nu_max; // rad/s

    void validate() const
    {
        if (!(d_min > 0.0) || !std::isfinite(d_min)) detail::invalid("d_min", "must be positive and finite");
        if (!(kappa >= 0.0) || !std::isfinite(kappa)) detail::invalid("kappa", "must be finite and >= 0");
        if (!(nu_max > 0.0) || !std::isfinite(nu_max)) detail::invalid("nu_max", "must be positive and finite");
    }
};

struct BubbleEnsemble {
    std::vector<BubbleSpec> bubbles;
    double laser_frequency = 0.0; // rad/s
    int mode_index = 1;
    double speed_of_light = constants::speed_of_light;
    double refractive_index = 1.0;

    /// Light speed inside the bubble.
    double medium_light_speed() const noexcept { return speed_of_light / refractive_index; }

    void validate() const
    {
        if (bubbles.empty()) detail::invalid("bubbles", "must be non-empty");
        if (mode_index < 1) detail::invalid("mode_index", "must be >= 1");
        if (!(speed_of_light > 0.0)) detail::invalid("speed_of_light", "must be > 0");
        if (!(refractive_index > 0.0) || !std::isfinite(refractive_index)) {
            detail::invalid("refractive_index", "must be positive and finite");
        }
        if (!std::isfinite(laser_frequency)) detail::invalid("laser_frequency", "must be finite");
        for (const auto& b : bubbles) {
            b.validate();
        }
    }
};

/// omega_cav = j pi c / d_min.
inline double cavity_frequency(const BubbleSpec& b, int j, double light_speed = constants::speed_of_light)
{
    if (j < 1) {
        detail::invalid("j", "must be >= 1");
    }
    b.validate();
    return j * constants::pi * light_speed / b.d_min;
}

/// lambda_cav = 2 d_min / j.
inline double cavity_wavelength(const BubbleSpec& b, int j)
{
    if (j < 1) {
        detail::invalid("j", "must be >= 1");
    }
    b.validate();
    return 2.0 * b.d_min / j;
}

struct FrequencyBand {
    double min;
    double max;
    /// Distance to the top of the j-1 band; absent for j = 1.
    std::optional<double> gap_below;
    /// Distance to the bottom of the j+1 band (negative when the bands overlap).
    double gap_above;

    double width() const noexcept { return max - min; }
    bool isolated() const noexcept { return gap_above > 0.0 && (!gap_below || *gap_below > 0.0); }
};

namespace detail {

inline std::pair<double, double> diameter_range(const BubbleEnsemble& e)
{
    auto [lo, hi] = std::minmax_element(e.bubbles.begin(), e.bubbles.end(),
                                        [](const BubbleSpec& a, const BubbleSpec& b) { return a.d_min < b.d_min; });
    return {lo->d_min, hi->d_min};
}

} // namespace detail

/// Extremes of omega_cav over the ensemble at its mode index, plus the
/// separation from the neighbouring j-1 and j+1 bands.
inline FrequencyBand frequency_band(const BubbleEnsemble& e)
{
    e.validate();
    const auto [d_lo, d_hi] = detail::diameter_range(e);
    const double c = e.medium_light_speed();
    const int j = e.mode_index;
    auto omega = [&](int jj, double d) { return cavity_frequency(BubbleSpec{d, 0.0, 1.0}, jj, c); };

    FrequencyBand band{omega(j, d_hi), omega(j, d_lo), std::nullopt, 0.0};
    band.gap_above = omega(j + 1, d_hi) - band.max;
    if (j > 1) {
        band.gap_below = band.min - omega(j - 1, d_lo);
    }
    return band;
}

enum class BubbleLabel { ResonantCooling, OffResonantCooling, HeatingRisk };

inline const char* to_string(BubbleLabel l)
{
    switch (l) {
    case BubbleLabel::ResonantCooling: return "RESONANT_COOLING";
    case BubbleLabel::OffResonantCooling: return "OFF_RESONANT_COOLING";
    case BubbleLabel::HeatingRisk: return "HEATING_RISK";
    }
    return "?";
}

struct BubbleReport {
    double d_min;
    double omega_cav;
    double lambda_cav;
    double delta_cav; // omega_cav - omega_L
    BubbleLabel label;
};

struct EnsembleClassification {
    std::vector<BubbleReport> bubbles;
    bool safe; // no bubble has the laser above its cavity frequency
};

/// Labels each bubble by Delta_cav = omega_cav - omega_L:
/// HEATING_RISK when Delta_cav < 0; RESONANT_COOLING when
/// |Delta_cav / nu_max - 1| <= band_tolerance and nu_max >= kappa;
/// OFF_RESONANT_COOLING otherwise.
inline EnsembleClassification classify_bubbles(const BubbleEnsemble& e, double band_tolerance = 0.5)
{
    if (!(band_tolerance > 0.0)) {
        detail::invalid("band_tolerance", "must be > 0");
    }
    e.validate();
    EnsembleClassification out{{}, true};
    out.bubbles.reserve(e.bubbles.size());
    for (const auto& b : e.bubbles) {
        const double w = cavity_frequency(b, e.mode_index, e.medium_light_speed());
        const double delta = w - e.laser_frequency;
        BubbleLabel label = BubbleLabel::OffResonantCooling;
        if (delta < 0.0) {
            label = BubbleLabel::HeatingRisk;
            out.safe = false;
        } else if (std::abs(delta / b.nu_max - 1.0) <= band_tolerance && b.nu_max >= b.kappa) {
            label = BubbleLabel::ResonantCooling;
        }
        out.bubbles.push_back({b.d_min, w, cavity_wavelength(b, e.mode_index), delta, label});
    }
    return out;
}

/// `count` diameters drawn uniformly from [mean - spread/2, mean + spread/2].
/// Uses a fixed 64-bit Mersenne Twister and an explicit 53-bit mapping so the
/// same seed gives the same diameters on every platform.
inline std::vector<double> sample_diameters(double mean, double spread, int count, std::uint64_t seed)
{
    if (!(mean > 0.0) || !std::isfinite(mean)) detail::invalid("diameter_mean", "must be positive and finite");
    if (!(spread >= 0.0) || spread >= 2.0 * mean) detail::invalid("diameter_spread", "must be in [0, 2 mean)");
    if (count < 1) detail::invalid("count", "must be >= 1");
    std::mt19937_64 rng(seed);
    std::vector<double> d;
    d.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        d.push_back(mean + spread * (u - 0.5));
    }
    return d;
}

} // namespace phonox
