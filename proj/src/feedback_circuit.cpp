#include <chi2/errors.hpp>
#include <chi2/feedback_circuit.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace chi2 {

using cplx = std::complex<double>;
constexpr double pi = std::numbers::pi;

FeedbackCircuit::FeedbackCircuit(ModeParams ring, double V, double r, double t, double phi,
                                 FiberCoupler coupler)
    : ring_(ring), V_(V), r_(r), t_(t), phi_(phi), coupler_(coupler) {
  if (!std::isfinite(V) || !std::isfinite(r) || !std::isfinite(t) || !std::isfinite(phi) ||
      !std::isfinite(coupler.q) || !std::isfinite(coupler.eta) || !std::isfinite(coupler.beta)) {
    throw std::invalid_argument("FeedbackCircuit: non-finite parameter");
  }
  if (V < 0) throw std::invalid_argument("FeedbackCircuit: V must be >= 0");
  if (r < 0 || r > 1 || t < 0 || t > 1 || r * r + t * t > 1 + 1e-12) {
    throw std::invalid_argument("FeedbackCircuit: need 0 <= r, t <= 1 and r^2 + t^2 <= 1");
  }
  if (coupler.q < 0 || coupler.q > 1 || coupler.eta < 0 || coupler.eta > 1) {
    throw std::invalid_argument("FeedbackCircuit: need 0 <= q, eta <= 1");
  }
}

namespace {

cplx mirror_phase(double phi) { return std::polar(1.0, 2.0 * phi); }

cplx reflection_at(const FeedbackCircuit& c, double phi, double omega) {
  const ModeParams& m = c.ring();
  const double ke = m.kappa_e();
  const cplx rE = c.r() * mirror_phase(phi);
  const cplx x(omega - m.omega(), m.kappa() / 2);
  Eigen::Matrix2cd M;
  M << x, -c.V() - ke * rE, -c.V(), x;
  const cplx det = M.determinant();
  const double scale = std::pow(std::abs(x) + c.V() + ke, 2);
  if (std::abs(det) < 1e-30 * scale) {
    throw NumericalError(ErrorKind::SingularResponse, "two-mode response matrix is singular");
  }
  const Eigen::Vector2cd left(1.0, cplx(0, 1) * rE);
  const Eigen::Vector2cd right(cplx(0, 1) * rE, 1.0);
  const cplx inner = left.transpose() * M.inverse() * right;
  return cplx(0, 1) * (rE - ke * inner);
}

double wrap_phi(double phi) {
  double p = std::fmod(phi, pi);
  if (p < 0) p += pi;
  if (p >= pi) p -= pi;
  return p;
}

// Damped Newton on (Re R, Im R) = 0 over (phi, omega). The closed form is
// already a root, so this mostly guards against roundoff in it.
ZeroReflection polish(const FeedbackCircuit& c, ZeroReflection z) {
  const double kappa = c.ring().kappa();
  auto resid = [&](double phi, double omega) {
    const cplx R = reflection_at(c, phi, omega);
    return Eigen::Vector2d(R.real(), R.imag());
  };
  Eigen::Vector2d f = resid(z.phi, z.omega);
  for (int it = 0; it < 20 && f.norm() > 1e-15; ++it) {
    const double hp = 1e-7;
    const double hw = 1e-7 * kappa;
    Eigen::Matrix2d J;
    J.col(0) = (resid(z.phi + hp, z.omega) - resid(z.phi - hp, z.omega)) / (2 * hp);
    J.col(1) = (resid(z.phi, z.omega + hw) - resid(z.phi, z.omega - hw)) / (2 * hw);
    const Eigen::Vector2d step = J.fullPivLu().solve(-f);
    if (!step.allFinite()) break;
    double damp = 1.0;
    bool improved = false;
    for (int k = 0; k < 30; ++k) {
      const double p = z.phi + damp * step(0);
      const double w = z.omega + damp * step(1);
      const Eigen::Vector2d g = resid(p, w);
      if (g.norm() < f.norm()) {
        z = {p, w};
        f = g;
        improved = true;
        break;
      }
      damp *= 0.5;
    }
    if (!improved) break;
  }
  z.phi = wrap_phi(z.phi);
  return z;
}

}  // namespace

cplx reflection_two_mode(const FeedbackCircuit& circuit, double omega) {
  return reflection_at(circuit, circuit.phi(), omega);
}

// With y = omega - omega_0 and dk = kappa_i - kappa_e, R = 0 reduces to
//   r E [(y + i dk/2)^2 - V^2] = kappa_e V,
// whose real/imaginary parts give
//   cos2phi = -r dk^2 / (2 V kappa_e) +- sqrt(1 - r^2 dk^2 / kappa_e^2),
//   y^2 = V^2 + dk^2/4 + kappa_e V cos2phi / r,   sin2phi = -y dk r / (kappa_e V).
std::vector<ZeroReflection> zero_reflection_solutions(const FeedbackCircuit& circuit) {
  const ModeParams& m = circuit.ring();
  const double ke = m.kappa_e();
  const double dk = m.kappa_i() - ke;
  const double r = circuit.r();
  const double V = circuit.V();
  if (r <= 0 || V <= 0 || ke <= 0) {
    throw NumericalError(ErrorKind::NoSolution, "zero reflection needs r > 0, V > 0 and kappa_e > 0");
  }
  const double disc = 1.0 - r * r * dk * dk / (ke * ke);
  if (disc < 0) {
    throw NumericalError(ErrorKind::NoSolution, "kappa_i exceeds (1 + 1/r) kappa_e");
  }
  std::vector<ZeroReflection> out;
  const double base = -r * dk * dk / (2 * V * ke);
  for (double sc : {1.0, -1.0}) {
    const double c = base + sc * std::sqrt(disc);
    if (std::abs(c) > 1.0 + 1e-14) continue;
    const double y2 = V * V + dk * dk / 4 + ke * V * c / r;
    if (y2 < 0) continue;
    for (double sy : {1.0, -1.0}) {
      const double y = sy * std::sqrt(y2);
      const double s = -y * dk * r / (ke * V);
      const double phi = wrap_phi(0.5 * std::atan2(s, std::clamp(c, -1.0, 1.0)));
      ZeroReflection z = polish(circuit, {phi, m.omega() + y});
      const bool duplicate = std::any_of(out.begin(), out.end(), [&](const ZeroReflection& o) {
        return std::abs(o.phi - z.phi) < 1e-12 && std::abs(o.omega - z.omega) < 1e-12 * m.kappa();
      });
      if (!duplicate) out.push_back(z);
      if (y2 == 0) break;
    }
    if (disc == 0) break;
  }
  if (out.empty()) throw NumericalError(ErrorKind::NoSolution, "no admissible zero-reflection root");
  std::sort(out.begin(), out.end(), [](const ZeroReflection& a, const ZeroReflection& b) {
    return a.phi != b.phi ? a.phi < b.phi : a.omega < b.omega;
  });
  return out;
}

HybridizedModes hybridized_modes(const FeedbackCircuit& circuit) {
  const ModeParams& m = circuit.ring();
  const double ke = m.kappa_e();
  const double r = circuit.r();
  const double t = circuit.t();
  const double s2 = std::sin(2 * circuit.phi());
  const double c2 = std::cos(2 * circuit.phi());
  const double shift = circuit.V() + 0.5 * r * ke * c2;
  const double ki = m.kappa_i() + 0.5 * t * t * ke;
  const double sym = 0.5 * (1 + r * r);
  // Clamp roundoff: at r = 1, sin2phi = 1 the even rate is exactly zero.
  const double kee = std::max(0.0, ke * (sym - r * s2));
  const double koe = std::max(0.0, ke * (sym + r * s2));
  return {ModeParams(m.omega() + shift, ki, kee), ModeParams(m.omega() - shift, ki, koe),
          circuit.large_splitting()};
}

namespace {

const ModeParams& pick(const HybridizedModes& h, ModeChoice mode) {
  return mode == ModeChoice::even ? h.even : h.odd;
}

cplx input_coefficient(const FeedbackCircuit& c, ModeChoice mode) {
  const cplx irE = cplx(0, c.r()) * mirror_phase(c.phi());
  const double sign = mode == ModeChoice::odd ? -1.0 : 1.0;
  return std::sqrt(c.ring().kappa_e()) * (1.0 + sign * irE) / std::sqrt(2.0);
}

}  // namespace

cplx hybridized_reflection(const FeedbackCircuit& circuit, double omega, ModeChoice mode) {
  const ModeParams m = pick(hybridized_modes(circuit), mode);
  const cplx irE = cplx(0, circuit.r()) * mirror_phase(circuit.phi());
  const cplx c = input_coefficient(circuit, mode);
  const cplx lor = cplx(0, 1) * c * c / cplx(omega - m.omega(), m.kappa() / 2);
  return mode == ModeChoice::odd ? irE + lor : irE - lor;
}

double coupler_phase_theta(const FeedbackCircuit& circuit, ModeChoice mode) {
  return std::arg(input_coefficient(circuit, mode)) - pi / 4;
}

cplx background_amplitude(const FeedbackCircuit& circuit, ModeChoice mode) {
  const double theta = coupler_phase_theta(circuit, mode);
  const cplx R = circuit.r() * std::polar(1.0, 2 * circuit.phi() - 2 * theta);
  return mode == ModeChoice::odd ? -R : R;
}

CircuitTransmission circuit_transmission(const FeedbackCircuit& circuit, double omega, ModeChoice mode) {
  const ModeParams m = pick(hybridized_modes(circuit), mode);
  const cplx R = background_amplitude(circuit, mode);
  const cplx lor = cplx(0, m.kappa_e()) / cplx(omega - m.omega(), m.kappa() / 2);
  const cplx t_tilde = R - lor;
  const FiberCoupler& k = circuit.coupler();
  const cplx dress = k.eta * k.eta * std::polar(1.0, 2 * k.beta);
  const cplx t_dressed = dress * t_tilde + cplx(0, k.q);
  const cplx background = R + cplx(0, k.q) / dress;
  return {t_tilde, t_dressed, 1.0 - lor / background};
}

double large_splitting_consistency(const FeedbackCircuit& circuit, std::span<const double> omega_grid,
                                   ModeChoice mode) {
  const ModeParams m = pick(hybridized_modes(circuit), mode);
  const double half = 5.0 * circuit.ring().kappa();
  double worst = 0.0;
  for (double w : omega_grid) {
    if (std::abs(w - m.omega()) > half) continue;
    const cplx exact = reflection_two_mode(circuit, w);
    const cplx approx = hybridized_reflection(circuit, w, mode);
    worst = std::max(worst, std::abs(exact - approx) / std::abs(approx));
  }
  return worst;
}

SmallCouplerReport small_coupler_reflection_error(const FeedbackCircuit& circuit, ModeChoice mode) {
  const cplx R = background_amplitude(circuit, mode);
  const FiberCoupler& k = circuit.coupler();
  const double eta2 = k.eta * k.eta;
  const cplx q_eff = cplx(0, k.q) / (eta2 * std::polar(1.0, 2 * k.beta));
  const double ratio = k.q / (std::abs(R) * eta2);
  const double scale = std::pow(std::abs(R / (R + q_eff)), 4);
  return {ratio, std::abs(scale - 1.0)};
}

}  // namespace chi2
