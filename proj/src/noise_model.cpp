#include <chi2/errors.hpp>
#include <chi2/noise_model.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace chi2 {

void NoiseMixParams::validate() const {
  if (!std::isfinite(u) || !std::isfinite(omega_m) || !std::isfinite(gamma_m)) {
    throw std::invalid_argument("NoiseMixParams: non-finite parameter");
  }
  if (u < 0 || omega_m < 0 || !(gamma_m > 0)) {
    throw std::invalid_argument("NoiseMixParams: need u >= 0, omega_m >= 0, gamma_m > 0");
  }
}

double g2_mixed(double signal_g2, double t_mag2, const NoiseMixParams& noise, double tau) {
  noise.validate();
  const double u2 = noise.u * noise.u;
  if (!(t_mag2 >= 0) || !(t_mag2 + u2 > 0)) {
    throw std::invalid_argument("g2_mixed: need |t|^2 >= 0 and |t|^2 + u^2 > 0");
  }
  const double ws = t_mag2 / (t_mag2 + u2);
  const double wm = u2 / (t_mag2 + u2);
  const double at = std::abs(tau);
  const double g1m = std::exp(-0.5 * noise.gamma_m * at);
  const double g2m = 1.0 + std::exp(-noise.gamma_m * at);
  return (signal_g2 - 1.0) * ws * ws + (g2m - 1.0) * wm * wm + 2.0 * ws * wm * g1m * std::cos(noise.omega_m * tau) +
         1.0;
}

double g2_mixed(const std::function<double(double)>& signal_g2, double t_mag2, const NoiseMixParams& noise,
                double tau) {
  // Pure noise never consults the signal (it may be undefined at |t| = 0).
  if (t_mag2 == 0) return g2_mixed(1.0, t_mag2, noise, tau);
  return g2_mixed(signal_g2(tau), t_mag2, noise, tau);
}

void CorrelationCurve::validate() const {
  if (tau.size() != g2.size()) throw std::invalid_argument("CorrelationCurve: tau and g2 sizes differ");
  if (!sigma.empty() && sigma.size() != tau.size()) {
    throw std::invalid_argument("CorrelationCurve: sigma size differs from tau");
  }
  if (tau.size() < 2) throw std::invalid_argument("CorrelationCurve: need at least two points");
  for (std::size_t i = 0; i < tau.size(); ++i) {
    if (!std::isfinite(tau[i]) || !std::isfinite(g2[i])) throw std::invalid_argument("CorrelationCurve: non-finite value");
    if (g2[i] < 0) throw std::invalid_argument("CorrelationCurve: negative g2");
    if (i > 0 && !(tau[i] > tau[i - 1])) throw std::invalid_argument("CorrelationCurve: tau not strictly increasing");
    if (!sigma.empty() && !(sigma[i] >= 0)) throw std::invalid_argument("CorrelationCurve: sigma must be >= 0");
  }
}

InterpolatedPoint interpolate(const CorrelationCurve& curve, double tau) {
  curve.validate();
  const auto& t = curve.tau;
  if (tau < t.front() || tau > t.back()) {
    throw NumericalError(ErrorKind::ReferenceOutsideGrid, "delay outside the curve's grid");
  }
  const auto it = std::lower_bound(t.begin(), t.end(), tau);
  const std::size_t hi = static_cast<std::size_t>(it - t.begin());
  const double nan = std::numeric_limits<double>::quiet_NaN();
  if (t[hi] == tau) return {curve.g2[hi], curve.has_sigma() ? curve.sigma[hi] : nan};
  const std::size_t lo = hi - 1;
  const double w = (tau - t[lo]) / (t[hi] - t[lo]);
  const double g = (1 - w) * curve.g2[lo] + w * curve.g2[hi];
  if (!curve.has_sigma()) return {g, nan};
  // Independent errors at the two bracketing points.
  const double s = std::hypot((1 - w) * curve.sigma[lo], w * curve.sigma[hi]);
  return {g, s};
}

CorrelationCurve normalize_curve(const CorrelationCurve& curve, double tau_ref) {
  const double ref = interpolate(curve, tau_ref).g2;
  if (!(ref > 0)) throw std::invalid_argument("normalize_curve: reference value must be positive");
  CorrelationCurve out = curve;
  for (double& g : out.g2) g /= ref;
  for (double& s : out.sigma) s /= ref;
  return out;
}

namespace {

// Scans grid points in order of increasing |tau| (positive first on ties).
template <typename Violation>
Witness scan(const CorrelationCurve& c, const InterpolatedPoint& zero, Violation violation) {
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (c.tau[i] != 0.0) order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double ta = std::abs(c.tau[a]), tb = std::abs(c.tau[b]);
    if (ta != tb) return ta < tb;
    return c.tau[a] > c.tau[b];
  });
  Witness w;
  w.margin = std::numeric_limits<double>::quiet_NaN();
  w.best_margin = -std::numeric_limits<double>::infinity();
  for (std::size_t i : order) {
    const double v = violation(c.g2[i]);
    double m = std::numeric_limits<double>::quiet_NaN();
    if (c.has_sigma()) {
      const double s = std::hypot(zero.sigma, c.sigma[i]);
      m = s > 0 ? v / s : (v > 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity());
    }
    const double score = c.has_sigma() ? m : v;
    if (score > w.best_margin) {
      w.best_margin = score;
      w.best_tau = c.tau[i];
    }
    if (!w.found && v > 0) {
      w.found = true;
      w.tau = c.tau[i];
      w.violation = v;
      w.margin = m;
    }
  }
  return w;
}

}  // namespace

NonclassicalReport classify_nonclassical(const CorrelationCurve& curve) {
  const InterpolatedPoint zero = interpolate(curve, 0.0);
  const double g0 = zero.g2;
  NonclassicalReport r;
  r.g2_zero = g0;
  r.antibunching = scan(curve, zero, [&](double g) { return g - g0; });
  r.rice_carmichael = scan(curve, zero, [&](double g) { return std::abs(g - 1.0) - std::abs(g0 - 1.0); });
  return r;
}

double bound_state_fraction(std::complex<double> t2, std::complex<double> T0, BoundFractionDefinition def) {
  const double b = std::abs(T0);
  if (def == BoundFractionDefinition::total_amplitude) {
    const double total = std::abs(t2 + T0);
    if (!(total > 0)) throw std::invalid_argument("bound_state_fraction: t^2 + T0 vanishes");
    return b / total;
  }
  const double denom = std::abs(t2) + b;
  if (!(denom > 0)) throw std::invalid_argument("bound_state_fraction: t^2 and T0 both vanish");
  return b / denom;
}

}  // namespace chi2
