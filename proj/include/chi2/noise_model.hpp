#pragma once

#include <chi2/units.hpp>

#include <complex>
#include <functional>
#include <vector>

namespace chi2 {

/// Single mechanical mode beating with the transmitted light: relative noise
/// field amplitude u (same normalization as t), frequency omega_m and energy
/// damping gamma_m (both rad/s).
struct NoiseMixParams {
  double u = 0.0;
  double omega_m = units::hz_to_rad(250e6);
  double gamma_m = units::hz_to_rad(2e6);

  void validate() const;
};

/// Mixture of the transmitted signal (weight |t|^2) and thermomechanical
/// noise (weight u^2), with g1_m = e^{-gamma|tau|/2}, g2_m = 1 + e^{-gamma|tau|}:
///   (g_s - 1) w_s^2 + (g2_m - 1) w_m^2 + 2 w_s w_m g1_m cos(omega_m tau) + 1.
double g2_mixed(double signal_g2, double t_mag2, const NoiseMixParams& noise, double tau);

double g2_mixed(const std::function<double(double)>& signal_g2, double t_mag2, const NoiseMixParams& noise,
                double tau);

/// Sampled g2 on a strictly increasing delay grid (s), optional per-point sigma.
struct CorrelationCurve {
  std::vector<double> tau;
  std::vector<double> g2;
  std::vector<double> sigma;  // empty or same length as tau

  bool has_sigma() const noexcept { return !sigma.empty(); }
  std::size_t size() const noexcept { return tau.size(); }
  void validate() const;
};

struct InterpolatedPoint {
  double g2;
  double sigma;  // NaN when the curve carries no sigma
};

/// Linear interpolation; throws NumericalError(ReferenceOutsideGrid) outside the grid.
InterpolatedPoint interpolate(const CorrelationCurve& curve, double tau);

inline constexpr double default_reference_delay = 12.5e-9;

/// Divides g2 (and sigma) by the interpolated value at tau_ref.
CorrelationCurve normalize_curve(const CorrelationCurve& curve, double tau_ref = default_reference_delay);

struct Witness {
  bool found = false;
  double tau = 0.0;          // smallest |tau| showing the violation (positive delay preferred on ties)
  double violation = 0.0;    // size of the violation at tau
  double margin = 0.0;       // violation / sqrt(sigma_0^2 + sigma_tau^2); NaN without sigma
  double best_tau = 0.0;     // delay of the largest margin (or violation without sigma)
  double best_margin = 0.0;
};

struct NonclassicalReport {
  double g2_zero;
  Witness antibunching;     // g2(0) < g2(tau)
  Witness rice_carmichael;  // |g2(0) - 1| < |g2(tau) - 1|
};

/// Checks both classical inequalities against every grid delay tau != 0.
/// g2(0) is taken from the grid (or its linear interpolant); the grid must
/// contain tau = 0 within its range.
NonclassicalReport classify_nonclassical(const CorrelationCurve& curve);

enum class BoundFractionDefinition { sum_of_magnitudes, total_amplitude };

/// |T0| / (|t^2| + |T0|) by default; |T0| / |t^2 + T0| with total_amplitude.
double bound_state_fraction(std::complex<double> t2, std::complex<double> T0,
                            BoundFractionDefinition def = BoundFractionDefinition::sum_of_magnitudes);

}  // namespace chi2
