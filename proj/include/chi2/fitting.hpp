#pragma once

#include <chi2/least_squares.hpp>
#include <chi2/noise_model.hpp>
#include <chi2/scattering.hpp>

#include <complex>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace chi2 {

// ---- noise tail -----------------------------------------------------------

struct NoiseTailFit {
  double u_over_t = 0.0;
  double omega_m = 0.0;        // rad/s; 0 when no oscillation is resolved
  double gamma_m = 0.0;        // rad/s
  double residual_rms = 0.0;
  double noise_floor = 0.0;    // smallest u/t whose oscillation would stand 3 sigma above the residual
  bool degenerate = false;     // no oscillation resolved: omega_m and gamma_m are meaningless
  std::size_t points = 0;

  NoiseMixParams noise(double t_magnitude) const { return {u_over_t * t_magnitude, omega_m, gamma_m}; }
};

inline constexpr double tail_start_lifetimes = 20.0;

/// Fits 1 + w_m^2 e^{-gamma|tau|} + 2 w_s w_m e^{-gamma|tau|/2} cos(omega_m tau)
/// (w_s = 1/(1+rho^2), w_m = rho^2/(1+rho^2), rho = u/|t|) to the points with
/// |tau| >= 20/kappa_a. Throws NumericalError(InsufficientTail) when fewer than
/// 16 points qualify.
NoiseTailFit fit_noise_tail(const CorrelationCurve& curve, double kappa_a_estimate);

// ---- global g2 fit -------------------------------------------------------

enum class FitCoordinates { log_rates, linear };

struct FitDataset {
  CorrelationCurve curve;
  std::optional<double> t2_level;  // measured |t_omega|^2, fitted as one extra observation
  double t2_sigma = 0.0;           // its 1 sigma; required > 0 when t2_level is set
  NoiseTailFit noise;              // from the tail stage

  // Starting values; omitted ones are drawn from the priors.
  std::optional<double> delta_guess;
  std::optional<double> delta_cavity_guess;
  std::optional<double> kappa_ae_guess;
};

struct PriorRange {
  double lo, hi;
};

struct FitProblem {
  std::vector<FitDataset> datasets;

  // Fixed device parameters (rad/s); omega_b = 2 omega_a always.
  double g = 0.0;
  double kappa_bi = 0.0;
  double kappa_be = 0.0;
  std::complex<double> r_bg = 1.0;
  bool fit_r = false;  // float a shared real background amplitude
  KernelOrder order = KernelOrder::leading;

  // Priors for multi-start sampling: log-uniform for rates, uniform for delta.
  PriorRange kappa_ai_prior{units::hz_to_rad(0.3e9), units::hz_to_rad(3e9)};
  PriorRange delta_cavity_prior{units::hz_to_rad(0.5e9), units::hz_to_rad(4e9)};
  PriorRange delta_prior{units::hz_to_rad(-3e6), units::hz_to_rad(3e6)};
  std::optional<double> kappa_ai_guess;

  void validate() const;
};

struct FitOptions {
  std::uint64_t seed = 1;
  int starts = 8;
  unsigned threads = 1;
  FitCoordinates coordinates = FitCoordinates::log_rates;
  std::optional<double> fixed_kappa_ai;  // profile mode: kappa_ai held, per-dataset parameters free
  bool require_curvature = false;        // throw DegenerateCurvature instead of reporting NaN sigmas
  LmOptions lm{};
};

struct DatasetFit {
  double delta, delta_cavity, kappa_ae;
  double sigma_delta, sigma_delta_cavity, sigma_kappa_ae;
  double t2_model;  // |t(delta)|^2 at the optimum
  double chi2;
};

struct FitResult {
  double kappa_ai = 0.0;
  double sigma_kappa_ai = 0.0;
  double r_bg = 1.0;
  double sigma_r_bg = 0.0;
  std::vector<DatasetFit> datasets;

  double chi2 = 0.0;
  int dof = 0;
  double chi2_per_dof = 0.0;
  double residual_norm = 0.0;
  bool curvature_positive = false;
  bool weighted = false;  // inverse-variance weights (else sigmas are scaled by chi2/dof)

  int best_start = -1;
  int starts_converged = 0;
  int iterations = 0;
  int evaluations = 0;
  LmStop stop = LmStop::max_iterations;
};

/// Model g2 for one dataset at physical parameters (the signal from the fit
/// model, mixed with the dataset's noise tail).
double fit_model_curve_point(const FitProblem& problem, const FitDataset& data, double kappa_ai, double r_bg,
                             double delta, double delta_cavity, double kappa_ae, double tau);

/// Joint weighted least squares over all datasets; kappa_ai (and r when
/// floated) shared, (delta, Delta, kappa_ae) per dataset. Multi-start with
/// a seeded generator; the best chi2 wins, ties to the lower start index.
/// Throws NumericalError(NonConvergence) when no start converges.
FitResult fit_g2_global(const FitProblem& problem, const FitOptions& options = {});

// ---- t2_min versus heater voltage -----------------------------------------

struct VoltagePoint {
  double voltage;
  double t2_min;
};

struct TminVoltageFit {
  double lambda_coef;  // 1/V^4
  double v0;           // V, >= 0
  double residual_norm;

  double predict(double v) const {
    const double d = v * v - v0 * v0;
    return lambda_coef * d * d;
  }
};

/// Least squares for t2_min = lambda (V^2 - V0^2)^2. Throws
/// NumericalError(DegenerateData) for fewer than 3 points or a single voltage.
TminVoltageFit fit_tmin_voltage(std::span<const VoltagePoint> points);

}  // namespace chi2
