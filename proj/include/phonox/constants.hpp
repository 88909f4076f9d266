#pragma once

namespace phonox::constants {

inline constexpr double hbar = 1.054571817e-34;       // J s
inline constexpr double boltzmann = 1.380649e-23;     // J / K
inline constexpr double speed_of_light = 2.99792458e8; // m / s
inline constexpr double pi = 3.14159265358979323846;

} // namespace phonox::constants
