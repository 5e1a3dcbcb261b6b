#pragma once

#include <chi2/core_model.hpp>
#include <chi2/units.hpp>

namespace chi2::testing {

// Device values used across tests: 1539.914 nm pump, Q_ai = Q_ae = 2.5e5,
// Q_bi = 5.1e4, Q_be = 2e6, g/2pi = 6.5 MHz.
struct DeviceNumbers {
  double omega_a = units::omega_from_wavelength(1539.914e-9);
  double omega_b = 2.0 * omega_a;
  double kappa_ai = units::rate_from_q(omega_a, 2.5e5);
  double kappa_ae = units::rate_from_q(omega_a, 2.5e5);
  double kappa_bi = units::rate_from_q(omega_b, 5.1e4);
  double kappa_be = units::rate_from_q(omega_b, 2.0e6);
  double g = units::hz_to_rad(6.5e6);
};

inline NonlinearCavity device_cavity() {
  const DeviceNumbers d;
  return {ModeParams(d.omega_a, d.kappa_ai, d.kappa_ae), ModeParams(d.omega_b, d.kappa_bi, d.kappa_be),
          d.g};
}

// The same device written in a frame rotating at omega_a (mode b at 2 omega_a
// maps to zero as well).
inline NonlinearCavity device_cavity_rotating() {
  const DeviceNumbers d;
  return {ModeParams(0.0, d.kappa_ai, d.kappa_ae), ModeParams(0.0, d.kappa_bi, d.kappa_be), d.g};
}

}  // namespace chi2::testing
