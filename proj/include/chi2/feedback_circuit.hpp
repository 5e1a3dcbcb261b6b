#pragma once

#include <chi2/core_model.hpp>

#include <complex>
#include <span>
#include <vector>

namespace chi2 {

// Fiber coupler between the lab fiber and the bus waveguide: direct
// reflection amplitude q, one-way amplitude efficiency eta and phase beta.
struct FiberCoupler {
  double q = 0.0;
  double eta = 1.0;
  double beta = 0.0;
};

/// Ring with backscatter-coupled CW/CCW modes (equal per-direction rates in
/// `ring`), terminated through a waveguide of phase phi by a partial mirror of
/// amplitude reflection r and transmission t.
class FeedbackCircuit {
 public:
  FeedbackCircuit(ModeParams ring, double V, double r, double t, double phi, FiberCoupler coupler = {});

  const ModeParams& ring() const noexcept { return ring_; }
  double V() const noexcept { return V_; }
  double r() const noexcept { return r_; }
  double t() const noexcept { return t_; }
  double phi() const noexcept { return phi_; }
  const FiberCoupler& coupler() const noexcept { return coupler_; }

  FeedbackCircuit with_phi(double phi) const { return {ring_, V_, r_, t_, phi, coupler_}; }
  FeedbackCircuit with_V(double V) const { return {ring_, V, r_, t_, phi_, coupler_}; }
  FeedbackCircuit with_coupler(FiberCoupler c) const { return {ring_, V_, r_, t_, phi_, c}; }

  // Regime where the hybridized single-mode description is meant to hold.
  bool large_splitting() const noexcept { return V_ >= 10.0 * ring_.kappa(); }

 private:
  ModeParams ring_;
  double V_;
  double r_;
  double t_;
  double phi_;
  FiberCoupler coupler_;
};

/// Device reflection a_out,2 / a_in,1 of the full two-mode model, noise input
/// dropped:  i [ r E - kappa_e (1, i r E) M^{-1} (i r E, 1)^T ],  E = e^{2 i phi},
/// M = [[x, -V - kappa_e r E], [-V, x]],  x = omega - omega_0 + i kappa / 2.
std::complex<double> reflection_two_mode(const FeedbackCircuit& circuit, double omega);

struct ZeroReflection {
  double phi;    // in [0, pi)
  double omega;  // rad/s
};

/// All (phi, omega) with vanishing two-mode reflection, from the closed-form
/// conditions and polished by damped Newton on the exact reflection. Throws
/// NumericalError(NoSolution) when kappa_i > (1 + 1/r) kappa_e or r = 0 or V = 0.
std::vector<ZeroReflection> zero_reflection_solutions(const FeedbackCircuit& circuit);

struct HybridizedModes {
  ModeParams even;
  ModeParams odd;
  bool large_splitting;  // false when V < 10 kappa: the description is outside its regime
};

HybridizedModes hybridized_modes(const FeedbackCircuit& circuit);

enum class ModeChoice { even, odd };

/// Single-mode prediction of reflection_two_mode around one hybridized
/// resonance, in the original (unrotated) frame:
///   odd:  i r E + i c_o^2 / (omega - omega_o + i kappa_o / 2),  c_o = sqrt(kappa_e)(1 - i r E)/sqrt(2)
///   even: i r E - i c_e^2 / (omega - omega_e + i kappa_e / 2),  c_e = sqrt(kappa_e)(1 + i r E)/sqrt(2)
std::complex<double> hybridized_reflection(const FeedbackCircuit& circuit, double omega, ModeChoice mode);

/// Phase absorbed into the mode and output redefinition, with
/// sqrt(kappa_e)(1 -+ i r E)/sqrt(2) = sqrt(kappa_{m,e}) e^{i(theta + pi/4)}.
double coupler_phase_theta(const FeedbackCircuit& circuit, ModeChoice mode);

/// Background R of the rotated single-mode model: -r e^{i(2phi - 2theta)} for
/// the odd mode, +r e^{i(2phi - 2theta)} for the even mode.
std::complex<double> background_amplitude(const FeedbackCircuit& circuit, ModeChoice mode);

struct CircuitTransmission {
  std::complex<double> t_tilde;    // device only, rotated frame
  std::complex<double> t_dressed;  // eta^2 e^{2 i beta} t_tilde + i q
  std::complex<double> t_bar;      // t_dressed normalized to the off-resonance background
};

CircuitTransmission circuit_transmission(const FeedbackCircuit& circuit, double omega, ModeChoice mode);

/// max over grid points within 5 kappa of the chosen hybridized resonance of
/// |reflection_two_mode - hybridized_reflection| / |hybridized_reflection|.
double large_splitting_consistency(const FeedbackCircuit& circuit, std::span<const double> omega_grid,
                                   ModeChoice mode = ModeChoice::odd);

struct SmallCouplerReport {
  double ratio;            // q / (|R| eta^2)
  double g2_scale_error;   // | |R / (R + i q eta^-2 e^{-2 i beta})|^4 - 1 |
};

/// How far dropping the direct coupler reflection moves g2: in the
/// correlation-dominated limit g2 scales by |R / (R + i q')|^4.
SmallCouplerReport small_coupler_reflection_error(const FeedbackCircuit& circuit, ModeChoice mode);

}  // namespace chi2
