#pragma once

#include <chi2/core_model.hpp>
#include <chi2/noise_model.hpp>

#include <Eigen/Dense>

#include <complex>
#include <span>

namespace chi2 {

/// Where the coherent part of mode a lives. In the displaced frame the
/// classical linear response alpha is removed analytically and only the
/// fluctuations are stored in the Fock basis, which keeps the interference
/// null well conditioned. The lab frame stores everything in the basis.
enum class OracleFrame { displaced, lab };

/// Truncated-Fock master equation for the driven cavity in the frame rotating
/// at omega (mode a) and 2 omega (mode b):
///   H = delta_a a'a + delta_b b'b + g (a'a' b + b' a a) + sqrt(kappa_ae) (eps a' + eps* a)
/// with collapse operators sqrt(kappa_a) a and sqrt(kappa_b) b.
struct FockConfig {
  int n_a_max = 6;
  int n_b_max = 3;
  std::complex<double> drive_eps = 0.0;  // input amplitude, sqrt(photons/s)
  double delta_a = 0.0;                  // omega_a - omega
  double delta_b = 0.0;                  // omega_b - 2 omega
  OracleFrame frame = OracleFrame::displaced;
  bool auto_tighten = true;  // grow the truncation until the top levels are empty

  void validate() const;
};

/// Detunings from the cavity's own frequencies for a drive at omega.
FockConfig fock_config_for(const NonlinearCavity& cavity, double omega, std::complex<double> eps);

inline constexpr double top_population_limit = 1e-8;
inline constexpr int max_n_a = 16;
inline constexpr int max_n_b = 8;

struct SteadyState {
  FockConfig config;                 // truncation actually used
  std::complex<double> displacement; // alpha; zero in the lab frame
  Eigen::MatrixXcd rho;              // density operator in the chosen frame
  double residual;                   // ||L rho||_2 / ||L||_1
  double hermiticity_error;          // max |rho - rho'|
  double min_eigenvalue;
  double top_population;
  std::complex<double> mean_a;       // lab-frame <a>
  double n_a;                        // lab-frame <a'a>
  double n_b;
  bool weak_drive_valid;             // n_a <= 0.01 n_a_max
};

class FockOracle {
 public:
  /// Solves the steady state. Throws NumericalError(TruncationInsufficient)
  /// when the top levels stay above top_population_limit up to the largest
  /// allowed truncation, NumericalError(NonConvergence) when the linear solve fails.
  FockOracle(const NonlinearCavity& cavity, const FockConfig& config);

  const SteadyState& steady_state() const noexcept { return state_; }
  const NonlinearCavity& cavity() const noexcept { return cavity_; }

  /// <O'O> with O = eps - i sqrt(kappa_ae) a, the transmitted field.
  double output_flux() const;

  struct G2Result {
    CorrelationCurve curve;
    double imag_residue;  // max |Im G2| / |Re G2|
    double trace_error;   // max |tr sigma(t) / tr sigma(0) - 1| along the propagation
  };

  /// g2(tau) of the transmitted field by the quantum regression theorem,
  /// with g2(-tau) = g2(tau). The grid must be strictly increasing.
  G2Result g2_output(std::span<const double> tau_grid) const;

 private:
  NonlinearCavity cavity_;
  SteadyState state_;

  struct Model;
  void solve(const FockConfig& config);
};

/// Convenience: steady state only.
SteadyState steady_state(const NonlinearCavity& cavity, const FockConfig& config);

}  // namespace chi2
