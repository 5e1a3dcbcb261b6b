#pragma once

#include <chi2/core_model.hpp>
#include <chi2/scattering.hpp>

#include <span>
#include <vector>

namespace chi2 {

/// CW pump of on-chip power P (W) at omega_p, with detunings
/// delta_a = omega_a - omega_p and delta_b = omega_b - 2 omega_p (rad/s).
struct DriveSpec {
  double power_in = 0.0;
  double omega_p = 0.0;
  double delta_a = 0.0;
  double delta_b = 0.0;

  void validate() const;
};

/// Pump exactly on the fundamental; delta_b follows from omega_b - 2 omega_a.
DriveSpec resonant_drive(const NonlinearCavity& cavity, double power_in);

/// Normalized SHG efficiency P_SHG / P_in^2 (1/W):
///   g^2 (kappa_be/2)/(delta_b^2 + kappa_b^2/4) * (kappa_ae/(delta_a^2 + kappa_a^2/4))^2 * hbar w_b / (hbar w_a)^2
/// with w_b = 2 omega_p. The fundamental is a split standing-wave resonance;
/// only one propagation direction of the SH output is counted.
double shg_efficiency(const NonlinearCavity& cavity, const DriveSpec& drive);

struct PhotonNumbers {
  double n_c;     // fundamental cavity photons
  double n_c_sh;  // second-harmonic cavity photons
  double n_out;   // transmitted photons per fundamental cavity lifetime at |t|^2
};

/// n_c = (kappa_ae/2) P / (hbar omega_p (delta_a^2 + kappa_a^2/4)),
/// n_c_sh = g^2 n_c^2 / (delta_b^2 + kappa_b^2/4),
/// n_out = t2 * 2 P / (hbar omega_p) / kappa_a.
PhotonNumbers photon_numbers(const NonlinearCavity& cavity, const DriveSpec& drive, double t2 = 0.0);

struct WeakDriveBound {
  double n_c_max;  // kappa_b / (2 g); +inf when g = 0
  bool bounded;    // false when g = 0
};

WeakDriveBound weak_drive_bound(const NonlinearCavity& cavity);

// True when n_c does not exceed the bound.
bool weak_drive_satisfied(const NonlinearCavity& cavity, double n_c);

struct BlockadePoint {
  double g;             // rad/s
  double g_normalized;  // g / sqrt(kappa_a kappa_b)
  double t2;            // |t(omega_min)|^2 at the null
  double delta_cavity;  // Delta = omega_a - omega_min at the null (rad/s)
  double kappa_ae;      // rad/s
  double g2_zero;       // re-evaluated g2(0)
};

/// For each g, the transmission |t|^2 at which g2(0) = 0 on the fit-model
/// manifold (r = 1, delta = 0, kappa_a and kappa_b fixed, omega_b = 2 omega_a,
/// under-coupled branch). Delta is first chosen on a 200-step scan of
/// [0, 3 kappa_a] to maximize the null depth, then (Delta, kappa_ae) are
/// refined by Newton on t^2 + T(omega_min, 0) = 0. Throws
/// NumericalError(NoRoot) when no t^2 in [1e-12, 1] closes the null.
std::vector<BlockadePoint> blockade_transmission_curve(double kappa_a, double kappa_b,
                                                       std::span<const double> g_values,
                                                       KernelOrder order = KernelOrder::exact,
                                                       unsigned threads = 1);

/// Optimal-squeezing floor g2(0) = 4 |alpha_out|^2.
double gaussian_boundary(double alpha_out);

/// Output amplitude up to which g2(0) = 0 stays reachable, sqrt(2 g / kappa_a).
double max_output_amplitude(const NonlinearCavity& cavity);

}  // namespace chi2
