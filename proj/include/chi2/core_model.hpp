#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <utility>

namespace chi2 {

/// A single optical resonance: (angular) frequency plus intrinsic and external
/// energy decay rates, all in rad/s. `omega` may be an offset in a rotating
/// frame, so only finiteness is required of it; the total loss must be positive.
template <typename Real>
class BasicModeParams {
 public:
  using Scalar = Real;

  BasicModeParams(Real omega, Real kappa_i, Real kappa_e)
      : omega_(omega), kappa_i_(kappa_i), kappa_e_(kappa_e) {
    using std::isfinite;
    if (!isfinite(omega) || !isfinite(kappa_i) || !isfinite(kappa_e)) {
      throw std::invalid_argument("ModeParams: non-finite parameter");
    }
    if (kappa_i < Real(0) || kappa_e < Real(0)) {
      throw std::invalid_argument("ModeParams: decay rates must be non-negative");
    }
    if (!(kappa_i + kappa_e > Real(0))) {
      throw std::invalid_argument("ModeParams: total decay rate must be positive");
    }
  }

  Real omega() const noexcept { return omega_; }
  Real kappa_i() const noexcept { return kappa_i_; }
  Real kappa_e() const noexcept { return kappa_e_; }
  Real kappa() const noexcept { return kappa_i_ + kappa_e_; }

  BasicModeParams with_omega(Real omega) const { return {omega, kappa_i_, kappa_e_}; }

  friend bool operator==(const BasicModeParams&, const BasicModeParams&) = default;

 private:
  Real omega_;
  Real kappa_i_;
  Real kappa_e_;
};

/// alpha = omega - i kappa / 2. The imaginary part is never positive.
template <typename Real>
struct BasicComplexPole {
  std::complex<Real> value;
};

template <typename Real>
BasicComplexPole<Real> complex_pole(const BasicModeParams<Real>& mode) {
  return {std::complex<Real>(mode.omega(), -mode.kappa() / Real(2))};
}

/// Fundamental mode a, second-harmonic mode b and the chi(2) coupling g of
/// H_int = g (a†² b + a² b†).
template <typename Real>
class BasicNonlinearCavity {
 public:
  using Scalar = Real;

  BasicNonlinearCavity(BasicModeParams<Real> mode_a, BasicModeParams<Real> mode_b, Real g)
      : mode_a_(mode_a), mode_b_(mode_b), g_(g) {
    using std::isfinite;
    if (!isfinite(g) || g < Real(0)) {
      throw std::invalid_argument("NonlinearCavity: coupling g must be finite and >= 0");
    }
  }

  const BasicModeParams<Real>& mode_a() const noexcept { return mode_a_; }
  const BasicModeParams<Real>& mode_b() const noexcept { return mode_b_; }
  Real g() const noexcept { return g_; }

  std::complex<Real> alpha_a() const { return complex_pole(mode_a_).value; }
  std::complex<Real> alpha_b() const { return complex_pole(mode_b_).value; }

  // Regime in which the diagrammatic expansion and the blockade analysis apply.
  bool weak_coupling() const noexcept {
    return g_ < std::min(mode_a_.kappa(), mode_b_.kappa());
  }

  BasicNonlinearCavity with_g(Real g) const { return {mode_a_, mode_b_, g}; }

 private:
  BasicModeParams<Real> mode_a_;
  BasicModeParams<Real> mode_b_;
  Real g_;
};

/// Eigenfrequencies of the closed {|2_a 0_b>, |0_a 1_b>} subspace.
template <typename Real>
struct BasicDressedPair {
  std::complex<Real> lambda1;
  std::complex<Real> lambda2;
};

/// lambda_{1,2} = (2 alpha_a + alpha_b)/2 ± sqrt((2 alpha_a - alpha_b)^2 + 8 g^2)/2.
///
/// The principal square root is used (non-negative real part). lambda1 is the
/// root with the larger real part; exact ties go to the larger imaginary part.
template <typename Real>
BasicDressedPair<Real> dressed_eigenfrequencies(const BasicNonlinearCavity<Real>& cavity) {
  using C = std::complex<Real>;
  const C two_alpha_a = Real(2) * cavity.alpha_a();
  const C alpha_b = cavity.alpha_b();
  const C mean = (two_alpha_a + alpha_b) / Real(2);
  const C diff = two_alpha_a - alpha_b;
  const Real g = cavity.g();
  const C root = std::sqrt(diff * diff + C(Real(8) * g * g)) / Real(2);
  C l1 = mean + root;
  C l2 = mean - root;
  if (l2.real() > l1.real() || (l2.real() == l1.real() && l2.imag() > l1.imag())) {
    std::swap(l1, l2);
  }
  return {l1, l2};
}

using ModeParams = BasicModeParams<double>;
using ComplexPole = BasicComplexPole<double>;
using NonlinearCavity = BasicNonlinearCavity<double>;
using DressedPair = BasicDressedPair<double>;

}  // namespace chi2
