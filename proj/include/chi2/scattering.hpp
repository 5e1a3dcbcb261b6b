#pragma once

#include <chi2/core_model.hpp>
#include <chi2/errors.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace chi2 {

enum class KernelOrder { leading, exact };

// Below this |t|^2 the analytic g2 is reported as +inf (see g2_analytic).
inline constexpr double zero_transmission_threshold = 1e-18;

// Relative distance (in units of the mode linewidth) below which an evaluation
// point is treated as sitting on a pole.
inline constexpr double pole_tolerance = 1e-12;

/// t = 1 - i kappa_e / (omega - alpha)
template <typename Real>
std::complex<Real> single_photon_transmission(const BasicModeParams<Real>& mode, Real omega) {
  using C = std::complex<Real>;
  const C alpha = complex_pole(mode).value;
  return C(1) - C(0, mode.kappa_e()) / (C(omega) - alpha);
}

enum class CouplingBranch { under, over };

/// Split-resonance transmission model around a local minimum:
///   t(omega) = r - i kappa_ae / (omega - omega_min + i kappa_a / 2).
/// The cavity resonance itself sits at omega_a = omega_min + delta_cavity; it
/// only enters the two-photon part (see fit_model_cavity).
template <typename Real>
class BasicLocalMinimumModel {
 public:
  using Scalar = Real;

  BasicLocalMinimumModel(std::complex<Real> r_bg, Real kappa_ae, Real kappa_a, Real omega_min,
                         Real delta_cavity)
      : r_bg_(r_bg), kappa_ae_(kappa_ae), kappa_a_(kappa_a), omega_min_(omega_min),
        delta_cavity_(delta_cavity) {
    using std::isfinite;
    if (!isfinite(r_bg.real()) || !isfinite(r_bg.imag()) || !isfinite(kappa_ae) ||
        !isfinite(kappa_a) || !isfinite(omega_min) || !isfinite(delta_cavity)) {
      throw std::invalid_argument("LocalMinimumModel: non-finite parameter");
    }
    if (!(kappa_a > Real(0)) || kappa_ae < Real(0) || kappa_ae > kappa_a) {
      throw std::invalid_argument("LocalMinimumModel: need 0 <= kappa_ae <= kappa_a, kappa_a > 0");
    }
    if (!has_local_minimum()) {
      throw std::invalid_argument(
          "LocalMinimumModel: |t|^2 has no local minimum within kappa_a of omega_min");
    }
  }

  std::complex<Real> r_bg() const noexcept { return r_bg_; }
  Real kappa_ae() const noexcept { return kappa_ae_; }
  Real kappa_a() const noexcept { return kappa_a_; }
  Real kappa_ai() const noexcept { return kappa_a_ - kappa_ae_; }
  Real omega_min() const noexcept { return omega_min_; }
  Real delta_cavity() const noexcept { return delta_cavity_; }
  Real omega_a() const noexcept { return omega_min_ + delta_cavity_; }

  std::complex<Real> transmission(Real omega) const {
    using C = std::complex<Real>;
    return r_bg_ - C(0, kappa_ae_) / C(omega - omega_min_, kappa_a_ / Real(2));
  }

 private:
  // Sample |t|^2 on [-kappa_a, kappa_a] around omega_min and require the
  // smallest sample to be interior (or the curve to be flat).
  bool has_local_minimum() const {
    constexpr int n = 400;
    Real best = std::numeric_limits<Real>::infinity();
    Real worst = -best;
    int best_i = 0;
    for (int i = 0; i <= n; ++i) {
      const Real d = kappa_a_ * (Real(2 * i) / Real(n) - Real(1));
      const Real v = std::norm(transmission(omega_min_ + d));
      if (v < best) {
        best = v;
        best_i = i;
      }
      worst = std::max(worst, v);
    }
    if (worst - best <= Real(1e-14) * std::max(worst, Real(1))) return true;
    return best_i > 0 && best_i < n;
  }

  std::complex<Real> r_bg_;
  Real kappa_ae_;
  Real kappa_a_;
  Real omega_min_;
  Real delta_cavity_;
};

template <typename Real>
std::complex<Real> local_minimum_transmission(const BasicLocalMinimumModel<Real>& model,
                                              Real omega) {
  return model.transmission(omega);
}

namespace detail {
// Solves |r - x|^2 = t2_min for x = 2 kappa_ae / kappa_a; the under-coupled
// branch is the smaller root.
template <typename Real>
Real coupling_ratio_for_minimum(std::complex<Real> r_bg, Real t2_min, CouplingBranch branch) {
  if (!(t2_min >= Real(0))) throw std::invalid_argument("t2_min must be >= 0");
  const Real disc = t2_min - r_bg.imag() * r_bg.imag();
  if (disc < Real(0)) {
    throw NumericalError(ErrorKind::NoSolution, "t2_min below the reachable floor (Im r)^2");
  }
  const Real root = std::sqrt(disc);
  return branch == CouplingBranch::under ? r_bg.real() - root : r_bg.real() + root;
}
}  // namespace detail

/// kappa_ae giving |t(omega_min)|^2 = t2_min when the total rate kappa_a is held fixed.
template <typename Real>
Real external_rate_for_minimum(std::complex<Real> r_bg, Real kappa_a, Real t2_min,
                               CouplingBranch branch) {
  const Real x = detail::coupling_ratio_for_minimum(r_bg, t2_min, branch);
  if (x < Real(0) || x > Real(2)) {
    throw NumericalError(ErrorKind::NoSolution, "requested t2_min needs kappa_ae outside [0, kappa_a]");
  }
  return x * kappa_a / Real(2);
}

/// Same, but with the intrinsic rate kappa_ai held fixed (kappa_a = kappa_ai + kappa_ae).
template <typename Real>
Real external_rate_for_minimum_fixed_intrinsic(std::complex<Real> r_bg, Real kappa_ai, Real t2_min,
                                               CouplingBranch branch) {
  const Real x = detail::coupling_ratio_for_minimum(r_bg, t2_min, branch);
  if (x < Real(0) || x >= Real(2)) {
    throw NumericalError(ErrorKind::NoSolution, "requested t2_min is not reachable at this kappa_ai");
  }
  return x * kappa_ai / (Real(2) - x);
}

/// Nonlinear cavity implied by a fit model: mode a at omega_min + Delta with the
/// model's rates, mode b at exactly 2 omega_a.
template <typename Real>
BasicNonlinearCavity<Real> fit_model_cavity(const BasicLocalMinimumModel<Real>& model,
                                            Real kappa_bi, Real kappa_be, Real g) {
  const BasicModeParams<Real> a(model.omega_a(), model.kappa_ai(), model.kappa_ae());
  const BasicModeParams<Real> b(Real(2) * model.omega_a(), kappa_bi, kappa_be);
  return {a, b, g};
}

namespace detail {
template <typename Real>
void guard_pole(std::complex<Real> distance, Real width, const char* what) {
  if (std::abs(distance) < Real(pole_tolerance) * width) {
    throw NumericalError(ErrorKind::PoleProximity, what);
  }
}
}  // namespace detail

/// Bound-state part T(omega, tau) of the transmitted two-photon wavefunction.
///   exact:   -2 g^2 kappa_ae^2 e^{-i|tau|(alpha_a - omega)} / [(2w-l1)(2w-l2)(w-alpha_a)^2]
///   leading: -g^2 kappa_ae^2 e^{-i|tau|(alpha_a - omega)} / [(2w-alpha_b)(w-alpha_a)^3]
template <typename Real>
std::complex<Real> bound_state_amplitude(const BasicNonlinearCavity<Real>& cavity, Real omega,
                                         Real tau, KernelOrder order) {
  using C = std::complex<Real>;
  const Real g = cavity.g();
  if (g == Real(0)) return C(0);
  const C alpha_a = cavity.alpha_a();
  const Real ka = cavity.mode_a().kappa();
  const Real kb = cavity.mode_b().kappa();
  const Real width = std::max(ka, kb);
  const Real kae = cavity.mode_a().kappa_e();
  const C da = C(omega) - alpha_a;
  detail::guard_pole(da, ka, "omega on the mode-a pole");
  using std::abs;
  const C phase = std::exp(C(0, -abs(tau)) * (alpha_a - C(omega)));
  const C num = C(-g * g * kae * kae) * phase;
  if (order == KernelOrder::leading) {
    const C db = C(Real(2) * omega) - cavity.alpha_b();
    detail::guard_pole(db, kb, "2 omega on the mode-b pole");
    return num / (db * da * da * da);
  }
  const auto lambdas = dressed_eigenfrequencies(cavity);
  const C d1 = C(Real(2) * omega) - lambdas.lambda1;
  const C d2 = C(Real(2) * omega) - lambdas.lambda2;
  detail::guard_pole(d1, width, "2 omega on a dressed pole");
  detail::guard_pole(d2, width, "2 omega on a dressed pole");
  return Real(2) * num / (d1 * d2 * da * da);
}

/// Smooth prefactor of delta(nu1 + nu2 - omega1 - omega2) in the two-photon
/// S-matrix, with nu2 = omega1 + omega2 - nu1.
///   exact:   -(2i g^2 kappa_ae^2/pi) (E - 2 alpha_a) / [prod (x - alpha_a)] / [(E-l1)(E-l2)]
///   leading: -(2i g^2 kappa_ae^2/pi) / [prod (x - alpha_a)] / (E - alpha_b)
/// where E = omega1 + omega2 and the product runs over omega1, omega2, nu1, nu2.
template <typename Real>
std::complex<Real> correlated_kernel(const BasicNonlinearCavity<Real>& cavity, Real omega1,
                                     Real omega2, Real nu1, KernelOrder order) {
  using C = std::complex<Real>;
  const Real g = cavity.g();
  if (g == Real(0)) return C(0);
  const C alpha_a = cavity.alpha_a();
  const Real kae = cavity.mode_a().kappa_e();
  const Real energy = omega1 + omega2;
  const Real nu2 = energy - nu1;
  const C props = (C(omega1) - alpha_a) * (C(omega2) - alpha_a) * (C(nu1) - alpha_a) *
                  (C(nu2) - alpha_a);
  const C pref = C(0, -Real(2) * g * g * kae * kae / std::numbers::pi_v<Real>);
  if (order == KernelOrder::leading) {
    return pref / (props * (C(energy) - cavity.alpha_b()));
  }
  const auto lambdas = dressed_eigenfrequencies(cavity);
  return pref * (C(energy) - Real(2) * alpha_a) /
         (props * (C(energy) - lambdas.lambda1) * (C(energy) - lambdas.lambda2));
}

/// Two-photon amplitude at equal input frequencies: t^2 plus the bound state.
template <typename Real>
struct BasicTwoPhotonAmplitude {
  std::complex<Real> uncorrelated;
  std::complex<Real> bound;

  std::complex<Real> total() const { return uncorrelated + bound; }
};

template <typename Real>
BasicTwoPhotonAmplitude<Real> two_photon_amplitude(std::complex<Real> transmission,
                                                   const BasicNonlinearCavity<Real>& cavity,
                                                   Real omega, Real tau, KernelOrder order) {
  return {transmission * transmission, bound_state_amplitude(cavity, omega, tau, order)};
}

template <typename Real>
bool is_zero_transmission(std::complex<Real> transmission) {
  return std::norm(transmission) < Real(zero_transmission_threshold);
}

/// g2(tau) = |t^2 + T|^2 / |t^2|^2. Returns +inf when |t|^2 is below
/// zero_transmission_threshold; use is_zero_transmission to tell that case apart.
template <typename Real>
Real g2_analytic(std::complex<Real> transmission, std::complex<Real> bound) {
  if (is_zero_transmission(transmission)) return std::numeric_limits<Real>::infinity();
  const std::complex<Real> t2 = transmission * transmission;
  return std::norm(t2 + bound) / std::norm(t2);
}

/// Throwing variant for callers that cannot carry an infinite value.
template <typename Real>
Real g2_analytic_checked(std::complex<Real> transmission, std::complex<Real> bound) {
  if (is_zero_transmission(transmission)) {
    throw NumericalError(ErrorKind::ZeroTransmission, "|t|^2 below threshold, g2 diverges");
  }
  return g2_analytic(transmission, bound);
}

/// Analytic g2 of the split-resonance fit model at detuning delta = omega - omega_min.
template <typename Real>
Real fit_model_g2(const BasicLocalMinimumModel<Real>& model, Real kappa_bi, Real kappa_be, Real g,
                  Real delta, Real tau, KernelOrder order = KernelOrder::leading) {
  const Real omega = model.omega_min() + delta;
  const auto cavity = fit_model_cavity(model, kappa_bi, kappa_be, g);
  return g2_analytic(model.transmission(omega), bound_state_amplitude(cavity, omega, tau, order));
}

using LocalMinimumModel = BasicLocalMinimumModel<double>;
using TwoPhotonAmplitude = BasicTwoPhotonAmplitude<double>;

}  // namespace chi2
