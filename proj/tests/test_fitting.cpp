#include <doctest.h>

#include <chi2/errors.hpp>
#include <chi2/fitting.hpp>
#include <chi2/least_squares.hpp>
#include <chi2/units.hpp>

#include "support/synthetic.hpp"

#include <cmath>
#include <random>

using namespace chi2;
using chi2::testing::SyntheticTruth;

TEST_CASE("LM solves a small nonlinear problem") {
  // Exponential decay through exact points.
  const ResidualFunction f = [](const Eigen::VectorXd& x) {
    Eigen::VectorXd r(12);
    for (int i = 0; i < 12; ++i) {
      const double t = 0.25 * i;
      r(i) = x(0) * std::exp(-x(1) * t) - 3.0 * std::exp(-0.7 * t);
    }
    return r;
  };
  Eigen::VectorXd x0(2);
  x0 << 1.0, 2.0;
  const auto r = levenberg_marquardt(f, x0);
  CHECK(r.converged());
  CHECK(r.x(0) == doctest::Approx(3.0).scale(0).epsilon(1e-9));
  CHECK(r.x(1) == doctest::Approx(0.7).scale(0).epsilon(1e-9));
  CHECK(std::sqrt(r.cost) < 1e-10);

  // Rosenbrock in residual form.
  const ResidualFunction rb = [](const Eigen::VectorXd& x) {
    Eigen::VectorXd r(2);
    r << 10 * (x(1) - x(0) * x(0)), 1 - x(0);
    return r;
  };
  Eigen::VectorXd y0(2);
  y0 << -1.2, 1.0;
  const auto q = levenberg_marquardt(rb, y0);
  CHECK(q.converged());
  CHECK(q.x(0) == doctest::Approx(1.0).scale(0).epsilon(1e-8));
  CHECK(q.x(1) == doctest::Approx(1.0).scale(0).epsilon(1e-8));
}

TEST_CASE("LM rejects infeasible steps and reports an infeasible start") {
  const ResidualFunction f = [](const Eigen::VectorXd& x) {
    if (x(0) <= 0) throw std::invalid_argument("negative");
    Eigen::VectorXd r(2);
    r << std::log(x(0)) - std::log(1e-3), 0.0;
    return r;
  };
  Eigen::VectorXd x0(1);
  x0 << 5.0;
  const auto r = levenberg_marquardt(f, x0);
  CHECK(r.converged());
  CHECK(r.x(0) == doctest::Approx(1e-3).scale(0).epsilon(1e-6));
  x0 << -1.0;
  CHECK(levenberg_marquardt(f, x0).stop == LmStop::infeasible_start);
}

TEST_CASE("curvature flags singular normal equations") {
  Eigen::MatrixXd J(3, 2);
  J << 1, 2, 2, 4, 3, 6;
  CHECK_FALSE(curvature(J).positive_definite);
  CHECK(std::isnan(curvature(J).covariance(0, 0)));
  J << 1, 0, 0, 2, 0, 0;
  const auto c = curvature(J);
  CHECK(c.positive_definite);
  CHECK(c.covariance(0, 0) == doctest::Approx(1.0).scale(0));
  CHECK(c.covariance(1, 1) == doctest::Approx(0.25).scale(0));
}

TEST_CASE("noise tail recovery") {
  const double ka = units::hz_to_rad(2e9);
  const double wm = units::hz_to_rad(250e6), gm = units::hz_to_rad(2e6);
  std::mt19937_64 rng(7);
  std::normal_distribution<double> gauss(0.0, 1.0);
  CorrelationCurve c;
  for (int i = -2000; i <= 2000; ++i) {
    const double tau = i * 50e-12;
    c.tau.push_back(tau);
    const double clean = g2_mixed(1.0, 1.0, NoiseMixParams{0.5, wm, gm}, tau);
    c.g2.push_back(clean * (1 + 0.01 * gauss(rng)));
    c.sigma.push_back(0.01 * clean);
  }
  const auto fit = fit_noise_tail(c, ka);
  CHECK_FALSE(fit.degenerate);
  CHECK(fit.u_over_t == doctest::Approx(0.5).scale(0).epsilon(0.05));
  CHECK(fit.omega_m == doctest::Approx(wm).scale(0).epsilon(0.05));
  CHECK(fit.gamma_m == doctest::Approx(gm).scale(0).epsilon(0.05));
  CHECK(fit.residual_rms < 0.02);

  // Pure signal tail: only noise on 1.
  for (auto& g : c.g2) g = 1 + 0.01 * gauss(rng);
  const auto none = fit_noise_tail(c, ka);
  CHECK(none.u_over_t <= none.noise_floor);
  CHECK(none.noise_floor < 0.2);

  for (auto& g : c.g2) g = 1.0;
  c.sigma.clear();
  const auto flat = fit_noise_tail(c, ka);
  CHECK(flat.u_over_t == 0.0);
  CHECK(flat.degenerate);

  CorrelationCurve short_tail;
  for (int i = 0; i < 40; ++i) {
    short_tail.tau.push_back(i * 10e-12);
    short_tail.g2.push_back(1.0);
  }
  try {
    fit_noise_tail(short_tail, ka);
    FAIL("expected InsufficientTail");
  } catch (const NumericalError& e) {
    CHECK(e.kind() == ErrorKind::InsufficientTail);
  }
}

TEST_CASE("t2_min versus voltage") {
  std::vector<VoltagePoint> pts;
  for (double v : {0.30, 0.38, 0.44, 0.46, 0.47, 0.48, 0.52, 0.6}) {
    const double d = v * v - 0.47 * 0.47;
    pts.push_back({v, 1e-6 * d * d});
  }
  const auto fit = fit_tmin_voltage(pts);
  CHECK(fit.lambda_coef == doctest::Approx(1e-6).scale(0).epsilon(1e-8));
  CHECK(fit.v0 == doctest::Approx(0.47).scale(0).epsilon(1e-8));
  CHECK(fit.predict(0.47) == doctest::Approx(0.0));
  CHECK(fit.predict(fit.v0) == 0.0);

  // Order-one lambda: a 1 mV step from V0 moves t2_min by about 1e-6.
  const TminVoltageFit quoted{1.0, 0.47, 0.0};
  const double step = quoted.predict(0.471);
  CHECK(step > 3e-7);
  CHECK(step < 3e-6);

  const std::vector<VoltagePoint> same{{0.5, 1e-3}, {0.5, 2e-3}, {0.5, 3e-3}};
  CHECK_THROWS_AS(fit_tmin_voltage(same), NumericalError);
  const std::vector<VoltagePoint> two{{0.4, 1e-3}, {0.5, 2e-3}};
  CHECK_THROWS_AS(fit_tmin_voltage(two), NumericalError);
}

TEST_CASE("global fit: zero-noise recovery and determinism") {
  const SyntheticTruth truth = chi2::testing::device_truth();
  const FitProblem problem = chi2::testing::synthetic_problem(truth, 0.0, 11);
  FitOptions opt;
  opt.seed = 3;
  const auto r = fit_g2_global(problem, opt);
  CHECK(r.residual_norm < 1e-10);
  CHECK(r.kappa_ai == doctest::Approx(truth.kappa_ai).scale(0).epsilon(1e-6));
  for (std::size_t i = 0; i < truth.delta.size(); ++i) {
    CHECK(r.datasets[i].delta == doctest::Approx(truth.delta[i]).scale(0).epsilon(1e-5));
    CHECK(r.datasets[i].delta_cavity == doctest::Approx(truth.delta_cavity).scale(0).epsilon(1e-6));
    CHECK(r.datasets[i].t2_model == doctest::Approx(truth.t2[i]).scale(0).epsilon(1e-5));
  }

  opt.threads = 3;
  const auto again = fit_g2_global(problem, opt);
  CHECK(again.kappa_ai == r.kappa_ai);
  CHECK(again.chi2 == r.chi2);
  CHECK(again.best_start == r.best_start);
  for (std::size_t i = 0; i < r.datasets.size(); ++i) CHECK(again.datasets[i].delta == r.datasets[i].delta);
}

TEST_CASE("global fit: noisy recovery, coordinates and profile") {
  const SyntheticTruth truth = chi2::testing::device_truth();
  const FitProblem problem = chi2::testing::synthetic_problem(truth, 0.03, 5);
  FitOptions opt;
  opt.seed = 9;
  opt.threads = 2;
  const auto r = fit_g2_global(problem, opt);
  CHECK(r.weighted);
  CHECK(r.curvature_positive);
  CHECK(r.kappa_ai == doctest::Approx(truth.kappa_ai).scale(0).epsilon(0.05));
  for (std::size_t i = 0; i < truth.delta.size(); ++i) {
    CHECK(r.datasets[i].delta == doctest::Approx(truth.delta[i]).scale(0).epsilon(0.10));
    CHECK(std::isfinite(r.datasets[i].sigma_delta));
  }
  // Quoted uncertainty bands of the four measured curves (MHz).
  const double band[] = {0.26, 0.29, 0.28, 0.33};
  for (std::size_t i = 0; i < truth.delta.size(); ++i) {
    CHECK(std::abs(r.datasets[i].delta - truth.delta[i]) <= units::hz_to_rad(band[i] * 1e6));
  }
  CHECK(r.chi2_per_dof == doctest::Approx(1.0).scale(0).epsilon(0.2));
  CHECK(std::isfinite(r.sigma_kappa_ai));

  FitOptions lin = opt;
  lin.coordinates = FitCoordinates::linear;
  const auto rl = fit_g2_global(problem, lin);
  CHECK(rl.kappa_ai == doctest::Approx(r.kappa_ai).scale(0).epsilon(1e-6));
  for (std::size_t i = 0; i < truth.delta.size(); ++i) {
    CHECK(rl.datasets[i].delta == doctest::Approx(r.datasets[i].delta).scale(0).epsilon(1e-6));
    CHECK(rl.datasets[i].delta_cavity == doctest::Approx(r.datasets[i].delta_cavity).scale(0).epsilon(1e-6));
    CHECK(rl.datasets[i].kappa_ae == doctest::Approx(r.datasets[i].kappa_ae).scale(0).epsilon(1e-6));
  }

  FitOptions prof = opt;
  prof.fixed_kappa_ai = 1.2 * r.kappa_ai;
  const auto rp = fit_g2_global(problem, prof);
  CHECK(rp.chi2 > r.chi2);
  CHECK(rp.kappa_ai == *prof.fixed_kappa_ai);
}

TEST_CASE("global fit input validation") {
  FitProblem p;
  CHECK_THROWS_AS(fit_g2_global(p), std::invalid_argument);
  const SyntheticTruth truth = chi2::testing::device_truth();
  p = chi2::testing::synthetic_problem(truth, 0.0, 1);
  p.datasets[0].t2_sigma = 0.0;
  CHECK_THROWS_AS(fit_g2_global(p), std::invalid_argument);
  p = chi2::testing::synthetic_problem(truth, 0.0, 1);
  FitOptions o;
  o.starts = 0;
  CHECK_THROWS_AS(fit_g2_global(p, o), std::invalid_argument);
}
