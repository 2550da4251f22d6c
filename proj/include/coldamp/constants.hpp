#pragma once

#include <numbers>

namespace coldamp {

// CODATA 2018 exact / recommended values.
namespace constants {
inline constexpr double hbar = 1.054571817e-34;        // J s
inline constexpr double k_boltzmann = 1.380649e-23;    // J/K
inline constexpr double speed_of_light = 299792458.0;  // m/s
inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;
}  // namespace constants

/// Ordinary frequency (Hz) to angular frequency (rad/s).
constexpr double hz_to_rad(double f_hz) { return constants::two_pi * f_hz; }
constexpr double rad_to_hz(double omega) { return omega / constants::two_pi; }

/// One-sided densities are stored per Hz. A density per unit angular
/// frequency integrates against dOmega; the per-Hz value integrates against df.
constexpr double psd_per_rad_to_per_hz(double s_per_rad) { return constants::two_pi * s_per_rad; }
constexpr double psd_per_hz_to_per_rad(double s_per_hz) { return s_per_hz / constants::two_pi; }

}  // namespace coldamp
