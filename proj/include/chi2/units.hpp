#pragma once

#include <numbers>

// Internal convention: every frequency and rate is angular (rad/s). Ordinary
// frequencies (Hz) are converted only at the configuration boundary.
namespace chi2::units {

inline constexpr double two_pi = 2.0 * std::numbers::pi;
inline constexpr double hbar = 1.054571817e-34;        // J s
inline constexpr double speed_of_light = 299792458.0;  // m/s

constexpr double hz_to_rad(double hz) noexcept { return two_pi * hz; }
constexpr double rad_to_hz(double rad_per_s) noexcept { return rad_per_s / two_pi; }

// Angular frequency of light with vacuum wavelength `lambda` (m).
constexpr double omega_from_wavelength(double lambda) noexcept {
  return two_pi * speed_of_light / lambda;
}

// Energy decay rate of a resonance with loaded/partial quality factor q.
constexpr double rate_from_q(double omega, double q) noexcept { return omega / q; }

}  // namespace chi2::units
