#include <chi2/errors.hpp>
#include <chi2/fock_oracle.hpp>

#include <Eigen/Eigenvalues>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace chi2 {

using cplx = std::complex<double>;
using SpMat = Eigen::SparseMatrix<cplx>;
using Vec = Eigen::VectorXcd;

void FockConfig::validate() const {
  if (n_a_max < 2 || n_b_max < 1) throw std::invalid_argument("FockConfig: need n_a_max >= 2 and n_b_max >= 1");
  if (n_a_max > max_n_a || n_b_max > max_n_b) throw std::invalid_argument("FockConfig: truncation above the supported maximum");
  if (!std::isfinite(drive_eps.real()) || !std::isfinite(drive_eps.imag()) || !std::isfinite(delta_a) ||
      !std::isfinite(delta_b)) {
    throw std::invalid_argument("FockConfig: non-finite parameter");
  }
}

FockConfig fock_config_for(const NonlinearCavity& cavity, double omega, cplx eps) {
  FockConfig c;
  c.drive_eps = eps;
  c.delta_a = cavity.mode_a().omega() - omega;
  c.delta_b = cavity.mode_b().omega() - 2 * omega;
  return c;
}

// Operators and generator on the truncated product space, basis index
// n_a (n_b_max + 1) + n_b, density operators vectorized column-major.
struct FockOracle::Model {
  int na, nb, dim;
  SpMat a, b, id;
  SpMat liouvillian;
  cplx alpha;
  cplx out_const;   // c-number part of O
  cplx out_coeff;   // coefficient of the fluctuation operator in O

  Model(const NonlinearCavity& cavity, const FockConfig& cfg)
      : na(cfg.n_a_max + 1), nb(cfg.n_b_max + 1), dim(na * nb) {
    a = ladder(true);
    b = ladder(false);
    id.resize(dim, dim);
    id.setIdentity();

    const double ka = cavity.mode_a().kappa();
    const double kae = cavity.mode_a().kappa_e();
    const double kb = cavity.mode_b().kappa();
    const double g = cavity.g();
    const cplx drive = std::sqrt(kae) * cfg.drive_eps;
    const cplx i(0, 1);

    // Linear steady amplitude; H below is written for a = alpha + a_fluct.
    alpha = cfg.frame == OracleFrame::displaced ? -drive / cplx(cfg.delta_a, -0.5 * ka) : cplx(0);
    const SpMat ad = SpMat(a.adjoint());
    const SpMat bd = SpMat(b.adjoint());
    const SpMat A = SpMat(a + alpha * id);
    const SpMat Ad = SpMat(A.adjoint());
    SpMat h = SpMat(cfg.delta_a * (ad * a)) + SpMat(cfg.delta_b * (bd * b));
    h += SpMat(g * (Ad * Ad * b)) + SpMat(g * (bd * A * A));
    if (cfg.frame == OracleFrame::lab) h += SpMat(drive * ad) + SpMat(std::conj(drive) * a);

    std::vector<Eigen::Triplet<cplx>> trip;
    add_kron(trip, SpMat(-i * h), id);
    add_kron(trip, id, SpMat(i * h));
    add_dissipator(trip, a, ka);
    add_dissipator(trip, b, kb);
    const long n = static_cast<long>(dim) * dim;
    liouvillian.resize(n, n);
    liouvillian.setFromTriplets(trip.begin(), trip.end());

    out_coeff = -i * std::sqrt(kae);
    out_const = cfg.drive_eps + out_coeff * alpha;
  }

  int index(int ia, int ib) const { return ia * nb + ib; }

  SpMat ladder(bool mode_a) const {
    std::vector<Eigen::Triplet<cplx>> t;
    for (int ia = 0; ia < na; ++ia) {
      for (int ib = 0; ib < nb; ++ib) {
        if (mode_a && ia + 1 < na) t.emplace_back(index(ia, ib), index(ia + 1, ib), std::sqrt(double(ia + 1)));
        if (!mode_a && ib + 1 < nb) t.emplace_back(index(ia, ib), index(ia, ib + 1), std::sqrt(double(ib + 1)));
      }
    }
    SpMat m(dim, dim);
    m.setFromTriplets(t.begin(), t.end());
    return m;
  }

  // vec(L rho R) = (R^T kron L) vec(rho)
  void add_kron(std::vector<Eigen::Triplet<cplx>>& trip, const SpMat& left, const SpMat& right) const {
    for (int rk = 0; rk < right.outerSize(); ++rk) {
      for (SpMat::InnerIterator r(right, rk); r; ++r) {
        for (int lk = 0; lk < left.outerSize(); ++lk) {
          for (SpMat::InnerIterator l(left, lk); l; ++l) {
            // right(r.row, r.col) contributes to row (r.col, l.row), column (r.row, l.col)
            trip.emplace_back(static_cast<int>(r.col() * dim + l.row()), static_cast<int>(r.row() * dim + l.col()),
                              r.value() * l.value());
          }
        }
      }
    }
  }

  void add_dissipator(std::vector<Eigen::Triplet<cplx>>& trip, const SpMat& c, double rate) const {
    if (rate == 0) return;
    const SpMat cd = SpMat(c.adjoint());
    const SpMat n = SpMat(cd * c);
    add_kron(trip, SpMat(rate * c), cd);
    add_kron(trip, SpMat(-0.5 * rate * n), id);
    add_kron(trip, id, SpMat(-0.5 * rate * n));
  }

  Eigen::MatrixXcd unvec(const Vec& v) const { return Eigen::Map<const Eigen::MatrixXcd>(v.data(), dim, dim); }
  Vec vec(const Eigen::MatrixXcd& m) const { return Eigen::Map<const Vec>(m.data(), m.size()); }

  Eigen::MatrixXcd output_operator() const {
    return out_const * Eigen::MatrixXcd::Identity(dim, dim) + out_coeff * Eigen::MatrixXcd(a);
  }
};

namespace {

double sparse_one_norm(const SpMat& m) {
  double best = 0;
  for (int k = 0; k < m.outerSize(); ++k) {
    double s = 0;
    for (SpMat::InnerIterator it(m, k); it; ++it) s += std::abs(it.value());
    best = std::max(best, s);
  }
  return best;
}

}  // namespace

FockOracle::FockOracle(const NonlinearCavity& cavity, const FockConfig& config) : cavity_(cavity) {
  config.validate();
  FockConfig cfg = config;
  for (;;) {
    solve(cfg);
    if (state_.top_population <= top_population_limit) break;
    if (!cfg.auto_tighten || (cfg.n_a_max >= max_n_a && cfg.n_b_max >= max_n_b)) {
      throw NumericalError(ErrorKind::TruncationInsufficient,
                           "top Fock levels hold " + std::to_string(state_.top_population) + " at n_a_max = " +
                               std::to_string(cfg.n_a_max) + ", n_b_max = " + std::to_string(cfg.n_b_max));
    }
    cfg.n_a_max = std::min(cfg.n_a_max + 2, max_n_a);
    cfg.n_b_max = std::min(cfg.n_b_max + 1, max_n_b);
  }
}

void FockOracle::solve(const FockConfig& cfg) {
  const Model m(cavity_, cfg);
  const long n = m.liouvillian.rows();

  // Trace condition replaces the first row (the generator's rows are dependent).
  SpMat sys = m.liouvillian;
  sys.prune([](long row, long, const cplx&) { return row != 0; });
  {
    std::vector<Eigen::Triplet<cplx>> trip;
    trip.reserve(sys.nonZeros() + m.dim);
    for (int k = 0; k < sys.outerSize(); ++k) {
      for (SpMat::InnerIterator it(sys, k); it; ++it) trip.emplace_back(it.row(), it.col(), it.value());
    }
    for (int i = 0; i < m.dim; ++i) trip.emplace_back(0, i * m.dim + i, 1.0);
    sys.setFromTriplets(trip.begin(), trip.end());
  }
  sys.makeCompressed();
  Eigen::SparseLU<SpMat> lu;
  lu.compute(sys);
  if (lu.info() != Eigen::Success) throw NumericalError(ErrorKind::NonConvergence, "steady-state factorization failed");
  Vec rhs = Vec::Zero(n);
  rhs(0) = 1.0;
  Vec x = lu.solve(rhs);
  if (lu.info() != Eigen::Success || !x.allFinite()) {
    throw NumericalError(ErrorKind::NonConvergence, "steady-state solve failed");
  }

  Eigen::MatrixXcd rho = m.unvec(x);
  state_.hermiticity_error = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
  rho = 0.5 * (rho + rho.adjoint());
  rho /= rho.trace();

  const double lnorm = sparse_one_norm(m.liouvillian);
  state_.residual = (m.liouvillian * m.vec(rho)).norm() / lnorm;
  if (!(state_.residual <= 1e-10)) {
    throw NumericalError(ErrorKind::NonConvergence, "steady-state residual " + std::to_string(state_.residual));
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(rho, Eigen::EigenvaluesOnly);
  state_.min_eigenvalue = es.eigenvalues().minCoeff();

  double top = 0;
  for (int ia = 0; ia < m.na; ++ia) {
    for (int ib = 0; ib < m.nb; ++ib) {
      if (ia == m.na - 1 || ib == m.nb - 1) top += std::max(0.0, rho(m.index(ia, ib), m.index(ia, ib)).real());
    }
  }
  state_.top_population = top;

  const Eigen::MatrixXcd a = Eigen::MatrixXcd(m.a);
  const Eigen::MatrixXcd b = Eigen::MatrixXcd(m.b);
  const cplx fluct = (a * rho).trace();
  state_.mean_a = m.alpha + fluct;
  state_.n_a = ((a.adjoint() * a * rho).trace() + 2.0 * std::real(std::conj(m.alpha) * fluct)).real() + std::norm(m.alpha);
  state_.n_b = (b.adjoint() * b * rho).trace().real();
  state_.config = cfg;
  state_.displacement = m.alpha;
  state_.rho = std::move(rho);
  state_.weak_drive_valid = state_.n_a <= 0.01 * cfg.n_a_max;
}

double FockOracle::output_flux() const {
  const Model m(cavity_, state_.config);
  const Eigen::MatrixXcd o = m.output_operator();
  return (o.adjoint() * o * state_.rho).trace().real();
}

FockOracle::G2Result FockOracle::g2_output(std::span<const double> tau_grid) const {
  for (std::size_t i = 0; i < tau_grid.size(); ++i) {
    if (!std::isfinite(tau_grid[i]) || (i > 0 && !(tau_grid[i] > tau_grid[i - 1]))) {
      throw std::invalid_argument("g2_output: tau grid must be finite and strictly increasing");
    }
  }
  const Model m(cavity_, state_.config);
  const Eigen::MatrixXcd o = m.output_operator();
  const Eigen::MatrixXcd n_out = o.adjoint() * o;
  const double flux = (n_out * state_.rho).trace().real();
  if (!(flux > 0)) throw NumericalError(ErrorKind::ZeroTransmission, "no transmitted flux, g2 undefined");

  // sigma(0) = O rho O'; G2(tau) = tr[O'O sigma(tau)].
  Vec sigma = m.vec(o * state_.rho * o.adjoint());
  const double tr0 = m.unvec(sigma).trace().real();

  std::vector<std::size_t> order(tau_grid.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return std::abs(tau_grid[x]) < std::abs(tau_grid[y]); });

  const double h_max = 0.1 / sparse_one_norm(m.liouvillian);
  const SpMat& L = m.liouvillian;
  auto rk4 = [&](Vec& v, double h) {
    const Vec k1 = L * v;
    const Vec k2 = L * (v + 0.5 * h * k1);
    const Vec k3 = L * (v + 0.5 * h * k2);
    const Vec k4 = L * (v + h * k3);
    v += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  };

  G2Result r;
  r.curve.tau.assign(tau_grid.begin(), tau_grid.end());
  r.curve.g2.assign(tau_grid.size(), 0.0);
  r.imag_residue = 0;
  r.trace_error = 0;
  double t = 0;
  for (std::size_t idx : order) {
    const double target = std::abs(tau_grid[idx]);
    const double span = target - t;
    if (span > 0) {
      const int steps = static_cast<int>(std::ceil(span / h_max));
      const double h = span / steps;
      for (int s = 0; s < steps; ++s) rk4(sigma, h);
      t = target;
    }
    const Eigen::MatrixXcd sm = m.unvec(sigma);
    r.trace_error = std::max(r.trace_error, std::abs(sm.trace().real() / tr0 - 1.0));
    const cplx g2 = (n_out * sm).trace();
    r.imag_residue = std::max(r.imag_residue, std::abs(g2.imag()) / std::max(std::abs(g2.real()), 1e-300));
    r.curve.g2[idx] = g2.real() / (flux * flux);
  }
  return r;
}

SteadyState steady_state(const NonlinearCavity& cavity, const FockConfig& config) {
  return FockOracle(cavity, config).steady_state();
}

}  // namespace chi2
