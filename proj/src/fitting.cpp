#include <chi2/errors.hpp>
#include <chi2/fitting.hpp>
#include <chi2/parallel.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

namespace chi2 {

namespace {

constexpr double nan_v = std::numeric_limits<double>::quiet_NaN();

// Uniform in [0, 1) from the top 53 bits; identical on every standard library.
double unit_draw(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double log_uniform(std::mt19937_64& rng, PriorRange p) {
  return std::exp(std::log(p.lo) + unit_draw(rng) * (std::log(p.hi) - std::log(p.lo)));
}

double uniform(std::mt19937_64& rng, PriorRange p) { return p.lo + unit_draw(rng) * (p.hi - p.lo); }

// Smaller root y of 2y/(1+y)^2 = c (0 < c <= 1/2).
double mixing_ratio_from_amplitude(double c) {
  if (!(c > 0)) return 0.0;
  c = std::min(c, 0.5);
  return ((1 - c) - std::sqrt(std::max(0.0, 1 - 2 * c))) / c;
}

struct TailPoint {
  double at;  // |tau|
  double tau;
  double y;   // g2 - 1
  double w;   // 1/sigma or 1
};

// Weighted linear least squares y ~ sum_k c_k f_k; returns the residual sum of squares.
template <int K>
double linear_fit(const std::vector<TailPoint>& pts, const std::function<void(const TailPoint&, double*)>& basis,
                  double* coef) {
  Eigen::Matrix<double, K, K> A = Eigen::Matrix<double, K, K>::Zero();
  Eigen::Matrix<double, K, 1> b = Eigen::Matrix<double, K, 1>::Zero();
  double yy = 0;
  double f[K];
  for (const auto& p : pts) {
    basis(p, f);
    for (int i = 0; i < K; ++i) {
      b(i) += p.w * p.w * f[i] * p.y;
      for (int j = 0; j < K; ++j) A(i, j) += p.w * p.w * f[i] * f[j];
    }
    yy += p.w * p.w * p.y * p.y;
  }
  const Eigen::Matrix<double, K, 1> c = A.ldlt().solve(b);
  for (int i = 0; i < K; ++i) coef[i] = c.allFinite() ? c(i) : 0.0;
  if (!c.allFinite()) return yy;
  return std::max(0.0, yy - c.dot(b));
}

double tail_model(double rho, double omega_m, double gamma_m, double tau) {
  const double y = rho * rho;
  const double ws = 1 / (1 + y), wm = y / (1 + y);
  const double at = std::abs(tau);
  return wm * wm * std::exp(-gamma_m * at) + 2 * ws * wm * std::exp(-0.5 * gamma_m * at) * std::cos(omega_m * tau);
}

}  // namespace

NoiseTailFit fit_noise_tail(const CorrelationCurve& curve, double kappa_a_estimate) {
  curve.validate();
  if (!(kappa_a_estimate > 0) || !std::isfinite(kappa_a_estimate)) {
    throw std::invalid_argument("fit_noise_tail: kappa_a_estimate must be positive");
  }
  const double start = tail_start_lifetimes / kappa_a_estimate;
  std::vector<TailPoint> pts;
  for (std::size_t i = 0; i < curve.size(); ++i) {
    const double at = std::abs(curve.tau[i]);
    if (at < start) continue;
    double w = 1.0;
    if (curve.has_sigma()) {
      if (!(curve.sigma[i] > 0)) throw std::invalid_argument("fit_noise_tail: sigma must be positive in the tail");
      w = 1 / curve.sigma[i];
    }
    pts.push_back({at, curve.tau[i], curve.g2[i] - 1.0, w});
  }
  if (pts.size() < 16) {
    throw NumericalError(ErrorKind::InsufficientTail, "need at least 16 points with |tau| >= 20/kappa_a, have " +
                                                          std::to_string(pts.size()));
  }
  const std::size_t n = pts.size();
  double lo = std::numeric_limits<double>::infinity(), hi = 0;
  std::vector<double> ats;
  for (const auto& p : pts) {
    lo = std::min(lo, p.at);
    hi = std::max(hi, p.at);
    ats.push_back(p.at);
  }
  std::sort(ats.begin(), ats.end());
  ats.erase(std::unique(ats.begin(), ats.end()), ats.end());
  std::vector<double> gaps;
  for (std::size_t i = 1; i < ats.size(); ++i) gaps.push_back(ats[i] - ats[i - 1]);
  const double span = hi - lo;
  if (gaps.empty() || !(span > 0)) throw NumericalError(ErrorKind::InsufficientTail, "tail spans a single delay");
  std::nth_element(gaps.begin(), gaps.begin() + gaps.size() / 2, gaps.end());
  const double dt = gaps[gaps.size() / 2];

  // Periodogram: y ~ c cos(omega tau) + d, omega up to the grid's Nyquist rate.
  const double d_omega = std::numbers::pi / (4 * span);
  const double omega_max = std::numbers::pi / dt;
  const int n_freq = std::max(1, static_cast<int>(omega_max / d_omega));
  double best_rss = std::numeric_limits<double>::infinity(), best_omega = 0;
  for (int k = 1; k <= n_freq; ++k) {
    const double om = k * d_omega;
    double coef[2];
    const double rss = linear_fit<2>(pts, [&](const TailPoint& p, double* f) {
      f[0] = std::cos(om * p.tau);
      f[1] = 1.0;
    }, coef);
    if (rss < best_rss) {
      best_rss = rss;
      best_omega = om;
    }
  }

  // Envelope: scan gamma with the linear amplitudes of both tail terms.
  double best_gamma = 0, best_c = 0;
  best_rss = std::numeric_limits<double>::infinity();
  for (int k = 0; k <= 120; ++k) {
    const double gm = k == 0 ? 0.0 : 1e-3 / span * std::pow(10.0, 5.0 * (k - 1) / 119.0);
    double coef[2];
    const double rss = linear_fit<2>(pts, [&](const TailPoint& p, double* f) {
      f[0] = std::exp(-0.5 * gm * p.at) * std::cos(best_omega * p.tau);
      f[1] = std::exp(-gm * p.at);
    }, coef);
    if (rss < best_rss) {
      best_rss = rss;
      best_gamma = gm;
      best_c = coef[0];
    }
  }

  NoiseTailFit out;
  out.points = n;
  double wsum = 0;
  for (const auto& p : pts) wsum += p.w * p.w;
  const double c_floor_sigma = std::sqrt(best_rss / std::max<double>(1, n - 2) * 2 / wsum) *
                               (std::sqrt(2 * std::log(static_cast<double>(n_freq))) + 3);

  // Nonlinear refinement on (log rho, omega/omega0, log gamma).
  const double om0 = best_omega;
  const double gm0 = best_gamma > 0 ? best_gamma : 1 / span;
  const ResidualFunction f = [&](const Eigen::VectorXd& z) {
    const double rho = std::exp(z(0)), om = z(1) * om0, gm = std::exp(z(2)) * gm0;
    Eigen::VectorXd r(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) r(i) = pts[i].w * (tail_model(rho, om, gm, pts[i].tau) - pts[i].y);
    return r;
  };
  LmResult best;
  best.cost = std::numeric_limits<double>::infinity();
  const double y0 = mixing_ratio_from_amplitude(best_c);
  if (y0 > 0) {
    for (double y : {y0, 1 / y0}) {
      Eigen::VectorXd z(3);
      z << 0.5 * std::log(y), 1.0, std::log(best_gamma > 0 ? best_gamma / gm0 : 1.0);
      LmResult r = levenberg_marquardt(f, z);
      if (r.cost < best.cost) best = std::move(r);
    }
  }

  const double rss_zero = [&] {
    double s = 0;
    for (const auto& p : pts) s += p.w * p.w * p.y * p.y;
    return s;
  }();
  const double rss = std::isfinite(best.cost) ? best.cost : rss_zero;
  out.residual_rms = std::sqrt(rss / wsum);
  out.noise_floor = std::sqrt(mixing_ratio_from_amplitude(c_floor_sigma));

  double rho = 0;
  if (std::isfinite(best.cost)) rho = std::exp(best.x(0));
  const double y = rho * rho;
  const double c_fit = 2 * y / ((1 + y) * (1 + y));
  if (!std::isfinite(best.cost) || !(c_fit > c_floor_sigma) || !(best.cost < rss_zero)) {
    out.degenerate = true;
    out.u_over_t = 0.0;
    out.omega_m = 0.0;
    out.gamma_m = NoiseMixParams{}.gamma_m;
    out.residual_rms = std::sqrt(rss_zero / wsum);
    return out;
  }
  out.u_over_t = rho;
  out.omega_m = std::abs(best.x(1) * om0);
  out.gamma_m = std::exp(best.x(2)) * gm0;
  return out;
}

// ---- global fit ------------------------------------------------------------

void FitProblem::validate() const {
  if (datasets.empty()) throw std::invalid_argument("FitProblem: no datasets");
  if (!(g >= 0) || !(kappa_bi >= 0) || !(kappa_be >= 0) || !(kappa_bi + kappa_be > 0)) {
    throw std::invalid_argument("FitProblem: need g >= 0 and a positive kappa_b");
  }
  auto check_prior = [](PriorRange p, bool positive, const char* name) {
    if (!std::isfinite(p.lo) || !std::isfinite(p.hi) || !(p.hi > p.lo) || (positive && !(p.lo > 0))) {
      throw std::invalid_argument(std::string("FitProblem: bad prior range for ") + name);
    }
  };
  check_prior(kappa_ai_prior, true, "kappa_ai");
  check_prior(delta_cavity_prior, true, "Delta");
  check_prior(delta_prior, false, "delta");
  for (const auto& d : datasets) {
    d.curve.validate();
    if (d.t2_level && (!(*d.t2_level >= 0) || !(d.t2_sigma > 0))) {
      throw std::invalid_argument("FitProblem: t2_level needs a value >= 0 and t2_sigma > 0");
    }
    if (d.curve.has_sigma()) {
      for (double s : d.curve.sigma) {
        if (!(s > 0)) throw std::invalid_argument("FitProblem: curve sigma must be positive for weighting");
      }
    }
  }
}

double fit_model_curve_point(const FitProblem& problem, const FitDataset& data, double kappa_ai, double r_bg,
                             double delta, double delta_cavity, double kappa_ae, double tau) {
  const LocalMinimumModel m(r_bg, kappa_ae, kappa_ai + kappa_ae, 0.0, delta_cavity);
  const double gs = fit_model_g2(m, problem.kappa_bi, problem.kappa_be, problem.g, delta, tau, problem.order);
  if (!(data.noise.u_over_t > 0)) return gs;
  const NoiseMixParams noise{data.noise.u_over_t, data.noise.omega_m, data.noise.gamma_m};
  return g2_mixed(gs, 1.0, noise, tau);
}

namespace {

struct Layout {
  bool shared_kappa;  // kappa_ai is a free parameter
  bool fit_r;
  std::size_t datasets;
  FitCoordinates coords;
  double kappa_scale, cavity_scale, delta_scale;

  Eigen::Index offset() const { return (shared_kappa ? 1 : 0) + (fit_r ? 1 : 0); }
  Eigen::Index size() const { return offset() + 3 * static_cast<Eigen::Index>(datasets); }

  double rate_from(double z, double scale) const {
    return coords == FitCoordinates::log_rates ? scale * std::exp(z) : scale * z;
  }
  double rate_to(double p, double scale) const {
    return coords == FitCoordinates::log_rates ? std::log(p / scale) : p / scale;
  }
  // d(physical)/d(internal)
  double rate_jac(double p, double scale) const { return coords == FitCoordinates::log_rates ? p : scale; }
};

struct Physical {
  double kappa_ai, r;
  std::vector<double> delta, cavity, kappa_ae;
};

Physical to_physical(const Layout& L, const Eigen::VectorXd& z, double fixed_kappa, double fixed_r) {
  Physical p;
  Eigen::Index k = 0;
  p.kappa_ai = L.shared_kappa ? L.rate_from(z(k++), L.kappa_scale) : fixed_kappa;
  p.r = L.fit_r ? z(k++) : fixed_r;
  for (std::size_t i = 0; i < L.datasets; ++i) {
    p.delta.push_back(z(k++) * L.delta_scale);
    p.cavity.push_back(L.rate_from(z(k++), L.cavity_scale));
    p.kappa_ae.push_back(L.rate_from(z(k++), L.kappa_scale));
  }
  return p;
}

Eigen::VectorXd to_internal(const Layout& L, const Physical& p) {
  Eigen::VectorXd z(L.size());
  Eigen::Index k = 0;
  if (L.shared_kappa) z(k++) = L.rate_to(p.kappa_ai, L.kappa_scale);
  if (L.fit_r) z(k++) = p.r;
  for (std::size_t i = 0; i < L.datasets; ++i) {
    z(k++) = p.delta[i] / L.delta_scale;
    z(k++) = L.rate_to(p.cavity[i], L.cavity_scale);
    z(k++) = L.rate_to(p.kappa_ae[i], L.kappa_scale);
  }
  return z;
}

}  // namespace

FitResult fit_g2_global(const FitProblem& problem, const FitOptions& options) {
  problem.validate();
  if (options.starts < 1) throw std::invalid_argument("fit_g2_global: need at least one start");
  if (problem.fit_r && problem.r_bg.imag() != 0) {
    throw std::invalid_argument("fit_g2_global: a floated background must start real");
  }
  if (options.fixed_kappa_ai && !(*options.fixed_kappa_ai > 0)) {
    throw std::invalid_argument("fit_g2_global: fixed kappa_ai must be positive");
  }

  const std::size_t nd = problem.datasets.size();
  Layout L{!options.fixed_kappa_ai.has_value(), problem.fit_r, nd, options.coordinates,
           std::sqrt(problem.kappa_ai_prior.lo * problem.kappa_ai_prior.hi),
           std::sqrt(problem.delta_cavity_prior.lo * problem.delta_cavity_prior.hi),
           std::max(std::abs(problem.delta_prior.lo), std::abs(problem.delta_prior.hi))};
  const double fixed_kappa = options.fixed_kappa_ai.value_or(0.0);
  const double fixed_r = problem.r_bg.real();

  bool weighted = true;
  Eigen::Index n_obs = 0;
  for (const auto& d : problem.datasets) {
    weighted = weighted && d.curve.has_sigma();
    n_obs += static_cast<Eigen::Index>(d.curve.size()) + (d.t2_level ? 1 : 0);
  }

  const ResidualFunction f = [&](const Eigen::VectorXd& z) {
    const Physical p = to_physical(L, z, fixed_kappa, fixed_r);
    Eigen::VectorXd r(n_obs);
    Eigen::Index k = 0;
    for (std::size_t i = 0; i < nd; ++i) {
      const FitDataset& d = problem.datasets[i];
      const std::complex<double> rbg = problem.fit_r ? std::complex<double>(p.r) : problem.r_bg;
      const LocalMinimumModel m(rbg, p.kappa_ae[i], p.kappa_ai + p.kappa_ae[i], 0.0, p.cavity[i]);
      const auto cav = fit_model_cavity(m, problem.kappa_bi, problem.kappa_be, problem.g);
      const std::complex<double> t = m.transmission(p.delta[i]);
      const NoiseMixParams noise{d.noise.u_over_t, d.noise.omega_m, d.noise.gamma_m};
      for (std::size_t j = 0; j < d.curve.size(); ++j) {
        const double tau = d.curve.tau[j];
        const double gs = g2_analytic(t, bound_state_amplitude(cav, p.delta[i], tau, problem.order));
        // Without noise the mixture is the signal and the tail may be unset.
        const double model = noise.u > 0 ? g2_mixed(gs, 1.0, noise, tau) : gs;
        const double w = d.curve.has_sigma() ? 1 / d.curve.sigma[j] : 1.0;
        r(k++) = w * (model - d.curve.g2[j]);
      }
      if (d.t2_level) r(k++) = (std::norm(t) - *d.t2_level) / d.t2_sigma;
    }
    return r;
  };

  // Starting points are drawn serially so they do not depend on the thread count.
  std::mt19937_64 rng(options.seed);
  std::vector<Eigen::VectorXd> starts;
  for (int s = 0; s < options.starts; ++s) {
    Physical p;
    const double drawn_kappa = log_uniform(rng, problem.kappa_ai_prior);
    p.kappa_ai = options.fixed_kappa_ai ? fixed_kappa
                 : (s == 0 && problem.kappa_ai_guess) ? *problem.kappa_ai_guess
                                                      : drawn_kappa;
    p.r = fixed_r;
    for (const auto& d : problem.datasets) {
      const double dc = log_uniform(rng, problem.delta_cavity_prior);
      const double dl = uniform(rng, problem.delta_prior);
      const double ratio = 0.5 + 0.5 * unit_draw(rng);
      const bool guess = s == 0;
      p.cavity.push_back(guess && d.delta_cavity_guess ? *d.delta_cavity_guess : dc);
      p.delta.push_back(guess && d.delta_guess ? *d.delta_guess : dl);
      double kae = ratio * p.kappa_ai;
      if (guess && d.kappa_ae_guess) {
        kae = *d.kappa_ae_guess;
      } else if (d.t2_level) {
        try {
          kae = external_rate_for_minimum_fixed_intrinsic(problem.r_bg, p.kappa_ai, *d.t2_level,
                                                          CouplingBranch::under);
        } catch (const NumericalError&) {
        }
        if (!(kae > 0)) kae = ratio * p.kappa_ai;
      }
      p.kappa_ae.push_back(kae);
    }
    starts.push_back(to_internal(L, p));
  }

  const auto runs = parallel_map<LmResult>(starts.size(), options.threads,
                                           [&](std::size_t s) { return levenberg_marquardt(f, starts[s], options.lm); });

  FitResult out;
  out.weighted = weighted;
  int best = -1;
  for (std::size_t s = 0; s < runs.size(); ++s) {
    if (!runs[s].converged()) continue;
    ++out.starts_converged;
    if (best < 0 || runs[s].cost < runs[static_cast<std::size_t>(best)].cost) best = static_cast<int>(s);
  }
  if (best < 0) {
    throw NumericalError(ErrorKind::NonConvergence,
                         "no start converged out of " + std::to_string(options.starts));
  }
  const LmResult& r = runs[static_cast<std::size_t>(best)];
  out.best_start = best;
  out.iterations = r.iterations;
  out.evaluations = 0;
  for (const auto& run : runs) out.evaluations += run.evaluations;
  out.stop = r.stop;
  out.chi2 = r.cost;
  out.residual_norm = std::sqrt(r.cost);
  out.dof = static_cast<int>(n_obs - L.size());
  out.chi2_per_dof = out.dof > 0 ? out.chi2 / out.dof : nan_v;

  const Physical p = to_physical(L, r.x, fixed_kappa, fixed_r);
  const Curvature cv = curvature(r.jacobian);
  out.curvature_positive = cv.positive_definite;
  if (!cv.positive_definite && options.require_curvature) {
    throw NumericalError(ErrorKind::DegenerateCurvature, "J'J is not positive definite at the optimum");
  }
  const double scale = weighted ? 1.0 : (out.dof > 0 ? out.chi2 / out.dof : nan_v);
  auto sigma = [&](Eigen::Index k) { return std::sqrt(cv.covariance(k, k) * scale); };

  Eigen::Index k = 0;
  out.kappa_ai = p.kappa_ai;
  out.sigma_kappa_ai = L.shared_kappa ? L.rate_jac(p.kappa_ai, L.kappa_scale) * sigma(k++) : 0.0;
  out.r_bg = p.r;
  out.sigma_r_bg = L.fit_r ? sigma(k++) : 0.0;
  Eigen::Index row = 0;
  for (std::size_t i = 0; i < nd; ++i) {
    DatasetFit d;
    d.delta = p.delta[i];
    d.delta_cavity = p.cavity[i];
    d.kappa_ae = p.kappa_ae[i];
    d.sigma_delta = L.delta_scale * sigma(k++);
    d.sigma_delta_cavity = L.rate_jac(d.delta_cavity, L.cavity_scale) * sigma(k++);
    d.sigma_kappa_ae = L.rate_jac(d.kappa_ae, L.kappa_scale) * sigma(k++);
    const LocalMinimumModel m(problem.fit_r ? std::complex<double>(p.r) : problem.r_bg, d.kappa_ae,
                              p.kappa_ai + d.kappa_ae, 0.0, d.delta_cavity);
    d.t2_model = std::norm(m.transmission(d.delta));
    const Eigen::Index rows =
        static_cast<Eigen::Index>(problem.datasets[i].curve.size()) + (problem.datasets[i].t2_level ? 1 : 0);
    d.chi2 = r.residual.segment(row, rows).squaredNorm();
    row += rows;
    out.datasets.push_back(d);
  }
  return out;
}

// ---- t2_min versus voltage ---------------------------------------------------

TminVoltageFit fit_tmin_voltage(std::span<const VoltagePoint> points) {
  if (points.size() < 3) throw NumericalError(ErrorKind::DegenerateData, "need at least 3 (V, t2_min) points");
  double vmin = std::numeric_limits<double>::infinity(), vmax = -vmin;
  for (const auto& p : points) {
    if (!std::isfinite(p.voltage) || !std::isfinite(p.t2_min) || p.t2_min < 0) {
      throw std::invalid_argument("fit_tmin_voltage: need finite V and t2_min >= 0");
    }
    vmin = std::min(vmin, p.voltage * p.voltage);
    vmax = std::max(vmax, p.voltage * p.voltage);
  }
  if (!(vmax - vmin > 1e-12 * std::max(vmax, 1e-300))) {
    throw NumericalError(ErrorKind::DegenerateData, "all voltages give the same V^2");
  }

  // For fixed s = V0^2 the best lambda is linear; scan s, then polish both.
  auto best_lambda = [&](double s) {
    double num = 0, den = 0;
    for (const auto& p : points) {
      const double q = (p.voltage * p.voltage - s) * (p.voltage * p.voltage - s);
      num += q * p.t2_min;
      den += q * q;
    }
    return den > 0 ? num / den : 0.0;
  };
  auto rss = [&](double s, double lam) {
    double acc = 0;
    for (const auto& p : points) {
      const double d = p.voltage * p.voltage - s;
      acc += (lam * d * d - p.t2_min) * (lam * d * d - p.t2_min);
    }
    return acc;
  };
  double s_best = vmin, r_best = std::numeric_limits<double>::infinity();
  std::vector<double> candidates;
  for (int i = 0; i <= 400; ++i) candidates.push_back(1.5 * vmax * i / 400.0);
  for (const auto& p : points) candidates.push_back(p.voltage * p.voltage);
  for (double s : candidates) {
    const double v = rss(s, best_lambda(s));
    if (v < r_best) {
      r_best = v;
      s_best = s;
    }
  }
  const double lam0 = best_lambda(s_best);
  if (!(lam0 > 0)) throw NumericalError(ErrorKind::DegenerateData, "t2_min data carry no curvature in V^2");

  const double tscale = std::max_element(points.begin(), points.end(), [](const auto& a, const auto& b) {
                          return a.t2_min < b.t2_min;
                        })->t2_min;
  const double norm = tscale > 0 ? 1 / tscale : 1.0;
  const ResidualFunction f = [&](const Eigen::VectorXd& z) {
    const double lam = lam0 * std::exp(z(0));
    const double v0 = z(1);
    Eigen::VectorXd r(static_cast<Eigen::Index>(points.size()));
    for (std::size_t i = 0; i < points.size(); ++i) {
      const double d = points[i].voltage * points[i].voltage - v0 * v0;
      r(static_cast<Eigen::Index>(i)) = norm * (lam * d * d - points[i].t2_min);
    }
    return r;
  };
  Eigen::VectorXd z(2);
  z << 0.0, std::sqrt(s_best);
  LmOptions opt;
  opt.abs_tol = 1e-14;
  const LmResult r = levenberg_marquardt(f, z, opt);
  if (!r.converged()) throw NumericalError(ErrorKind::NonConvergence, "t2_min(V) fit did not converge");
  return {lam0 * std::exp(r.x(0)), std::abs(r.x(1)), std::sqrt(r.cost) / norm};
}

}  // namespace chi2
