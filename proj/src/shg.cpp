#include <chi2/errors.hpp>
#include <chi2/parallel.hpp>
#include <chi2/shg.hpp>
#include <chi2/units.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>

namespace chi2 {

using cplx = std::complex<double>;

void DriveSpec::validate() const {
  if (!std::isfinite(power_in) || power_in < 0) throw std::invalid_argument("DriveSpec: power_in must be >= 0");
  if (!std::isfinite(omega_p) || omega_p <= 0) throw std::invalid_argument("DriveSpec: omega_p must be > 0");
  if (!std::isfinite(delta_a) || !std::isfinite(delta_b)) throw std::invalid_argument("DriveSpec: non-finite detuning");
}

DriveSpec resonant_drive(const NonlinearCavity& cavity, double power_in) {
  const double wa = cavity.mode_a().omega();
  return {power_in, wa, 0.0, cavity.mode_b().omega() - 2 * wa};
}

namespace {

double lorentz_denominator(double delta, double kappa) { return delta * delta + 0.25 * kappa * kappa; }

}  // namespace

double shg_efficiency(const NonlinearCavity& cavity, const DriveSpec& drive) {
  drive.validate();
  const ModeParams& a = cavity.mode_a();
  const ModeParams& b = cavity.mode_b();
  const double g = cavity.g();
  const double sh = 0.5 * b.kappa_e() / lorentz_denominator(drive.delta_b, b.kappa());
  const double fund = a.kappa_e() / lorentz_denominator(drive.delta_a, a.kappa());
  const double hw_a = units::hbar * drive.omega_p;
  const double hw_b = units::hbar * 2 * drive.omega_p;
  return g * g * sh * fund * fund * hw_b / (hw_a * hw_a);
}

PhotonNumbers photon_numbers(const NonlinearCavity& cavity, const DriveSpec& drive, double t2) {
  drive.validate();
  if (!(t2 >= 0)) throw std::invalid_argument("photon_numbers: t2 must be >= 0");
  const ModeParams& a = cavity.mode_a();
  const ModeParams& b = cavity.mode_b();
  const double g = cavity.g();
  const double flux = drive.power_in / (units::hbar * drive.omega_p);
  const double n_c = 0.5 * a.kappa_e() * flux / lorentz_denominator(drive.delta_a, a.kappa());
  const double n_sh = g * g * n_c * n_c / lorentz_denominator(drive.delta_b, b.kappa());
  const double n_out = t2 * 2 * flux / a.kappa();
  return {n_c, n_sh, n_out};
}

WeakDriveBound weak_drive_bound(const NonlinearCavity& cavity) {
  if (cavity.g() == 0) return {std::numeric_limits<double>::infinity(), false};
  return {cavity.mode_b().kappa() / (2 * cavity.g()), true};
}

bool weak_drive_satisfied(const NonlinearCavity& cavity, double n_c) {
  return n_c <= weak_drive_bound(cavity).n_c_max;
}

namespace {

// Everything below works in units of kappa_a; T(omega, 0) and t are
// dimensionless so the null condition is scale free.
struct NullProblem {
  double kb;  // kappa_b / kappa_a
  double g;   // g / kappa_a
  KernelOrder order;

  // Fit model with r = 1 evaluated at omega_min = 0: t = 1 - x and a cavity
  // with omega_a = Delta, omega_b = 2 Delta. x = 2 kappa_ae / kappa_a.
  NonlinearCavity cavity(double delta_cavity, double x) const {
    return {ModeParams(delta_cavity, 1.0 - 0.5 * x, 0.5 * x), ModeParams(2 * delta_cavity, kb, 0.0), g};
  }

  cplx residual(double delta_cavity, double x) const {
    const double t = 1.0 - x;
    return t * t + bound_state_amplitude(cavity(delta_cavity, x), 0.0, 0.0, order);
  }

  double g2(double delta_cavity, double x) const {
    return g2_analytic(cplx(1.0 - x), bound_state_amplitude(cavity(delta_cavity, x), 0.0, 0.0, order));
  }

  // Deepest null over the under-coupled branch x in (0, 1) at fixed Delta,
  // by golden section in u = log(1 - x) (the transmission amplitude).
  std::pair<double, double> best_x(double delta_cavity) const {
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double lo = std::log(1e-7), hi = 0.0;
    auto f = [&](double u) { return g2(delta_cavity, 1.0 - std::exp(u)); };
    double a = hi - phi * (hi - lo), b = lo + phi * (hi - lo);
    double fa = f(a), fb = f(b);
    for (int i = 0; i < 120; ++i) {
      if (fa < fb) {
        hi = b;
        b = a;
        fb = fa;
        a = hi - phi * (hi - lo);
        fa = f(a);
      } else {
        lo = a;
        a = b;
        fa = fb;
        b = lo + phi * (hi - lo);
        fb = f(b);
      }
    }
    const double u = 0.5 * (lo + hi);
    return {1.0 - std::exp(u), f(u)};
  }
};

BlockadePoint solve_null(double kappa_a, double kappa_b, double g, KernelOrder order) {
  if (!(g > 0)) throw NumericalError(ErrorKind::NoRoot, "blockade null needs g > 0");
  const NullProblem p{kappa_b / kappa_a, g / kappa_a, order};
  double best_d = 0.0, best_x = 0.5, best_g2 = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= 200; ++i) {
    const double d = 3.0 * i / 200.0;
    const auto [x, v] = p.best_x(d);
    if (v < best_g2) {
      best_g2 = v;
      best_d = d;
      best_x = x;
    }
  }
  // Newton in (Delta, log(1 - x)) on (Re, Im) of the residual, scaled by t^2.
  double d = best_d;
  double u = std::log(1.0 - best_x);
  auto scaled = [&](double dd, double uu) {
    const double x = 1.0 - std::exp(uu);
    const cplx res = p.residual(dd, x) / std::exp(2 * uu);
    return Eigen::Vector2d(res.real(), res.imag());
  };
  Eigen::Vector2d f = scaled(d, u);
  for (int it = 0; it < 50 && f.norm() > 1e-13; ++it) {
    const double h = 1e-7;
    Eigen::Matrix2d J;
    J.col(0) = (scaled(d + h, u) - scaled(d - h, u)) / (2 * h);
    J.col(1) = (scaled(d, u + h) - scaled(d, u - h)) / (2 * h);
    const Eigen::Vector2d step = J.fullPivLu().solve(-f);
    if (!step.allFinite()) break;
    double damp = 1.0;
    bool moved = false;
    for (int k = 0; k < 40; ++k) {
      const double dn = d + damp * step(0);
      const double un = std::min(u + damp * step(1), -1e-12);
      const Eigen::Vector2d fn = scaled(dn, un);
      if (fn.norm() < f.norm()) {
        d = dn;
        u = un;
        f = fn;
        moved = true;
        break;
      }
      damp *= 0.5;
    }
    if (!moved) break;
  }
  const double x = 1.0 - std::exp(u);
  const double t2 = std::exp(2 * u);
  const double g2 = p.g2(d, x);
  if (!(t2 >= 1e-12 && t2 <= 1.0) || !(g2 < 1e-8)) {
    throw NumericalError(ErrorKind::NoRoot, "no transmission in [1e-12, 1] nulls g2(0)");
  }
  return {g, g / std::sqrt(kappa_a * kappa_b), t2, d * kappa_a, 0.5 * x * kappa_a, g2};
}

}  // namespace

std::vector<BlockadePoint> blockade_transmission_curve(double kappa_a, double kappa_b,
                                                       std::span<const double> g_values, KernelOrder order,
                                                       unsigned threads) {
  if (!(kappa_a > 0) || !(kappa_b > 0)) throw std::invalid_argument("blockade curve needs positive rates");
  return parallel_map<BlockadePoint>(g_values.size(), threads, [&](std::size_t i) {
    return solve_null(kappa_a, kappa_b, g_values[i], order);
  });
}

double gaussian_boundary(double alpha_out) { return 4.0 * alpha_out * alpha_out; }

double max_output_amplitude(const NonlinearCavity& cavity) {
  return std::sqrt(2.0 * cavity.g() / cavity.mode_a().kappa());
}

}  // namespace chi2
