#include <chi2/errors.hpp>
#include <chi2/least_squares.hpp>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

namespace chi2 {

namespace {

std::optional<Eigen::VectorXd> try_eval(const ResidualFunction& f, const Eigen::VectorXd& x) {
  try {
    Eigen::VectorXd r = f(x);
    if (!r.allFinite()) return std::nullopt;
    return r;
  } catch (const std::invalid_argument&) {
    return std::nullopt;
  } catch (const NumericalError&) {
    return std::nullopt;
  }
}

}  // namespace

Eigen::MatrixXd numerical_jacobian(const ResidualFunction& f, const Eigen::VectorXd& x, const Eigen::VectorXd& r0,
                                   bool central, int* evaluations) {
  const double eps = std::numeric_limits<double>::epsilon();
  const double base = central ? std::cbrt(eps) : std::sqrt(eps);
  Eigen::MatrixXd J(r0.size(), x.size());
  Eigen::VectorXd xp = x;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double h0 = base * std::max(std::abs(x(j)), 1.0);
    // Make the step exactly representable so x + h - x == h.
    volatile double tmp = x(j) + h0;
    const double h = tmp - x(j);
    xp(j) = x(j) + h;
    auto fp = try_eval(f, xp);
    if (evaluations) ++*evaluations;
    std::optional<Eigen::VectorXd> fm;
    if (central) {
      xp(j) = x(j) - h;
      fm = try_eval(f, xp);
      if (evaluations) ++*evaluations;
    }
    if (fp && fm) {
      J.col(j) = (*fp - *fm) / (2 * h);
    } else if (fp) {
      J.col(j) = (*fp - r0) / h;
    } else if (fm) {
      J.col(j) = (r0 - *fm) / h;
    } else {
      throw NumericalError(ErrorKind::NonConvergence, "Jacobian: model infeasible on both sides of a parameter");
    }
    xp(j) = x(j);
  }
  return J;
}

LmResult levenberg_marquardt(const ResidualFunction& f, Eigen::VectorXd x0, const LmOptions& opt) {
  LmResult res;
  res.x = std::move(x0);
  auto r0 = try_eval(f, res.x);
  res.evaluations = 1;
  if (!r0) {
    res.stop = LmStop::infeasible_start;
    res.cost = std::numeric_limits<double>::infinity();
    return res;
  }
  res.residual = std::move(*r0);
  res.cost = res.residual.squaredNorm();
  if (std::sqrt(res.cost) <= opt.abs_tol) {
    res.jacobian = numerical_jacobian(f, res.x, res.residual, opt.central_differences, &res.evaluations);
    res.stop = LmStop::residual;
    return res;
  }
  res.jacobian = numerical_jacobian(f, res.x, res.residual, opt.central_differences, &res.evaluations);

  const Eigen::Index n = res.x.size();
  Eigen::MatrixXd A = res.jacobian.transpose() * res.jacobian;
  Eigen::VectorXd g = res.jacobian.transpose() * res.residual;
  double mu = opt.initial_damping * std::max(A.diagonal().maxCoeff(), 1e-300);
  double nu = 2;

  while (res.iterations < opt.max_iterations) {
    ++res.iterations;
    Eigen::VectorXd d = A.diagonal();
    const double dmax = std::max(d.maxCoeff(), 1e-300);
    for (Eigen::Index i = 0; i < n; ++i) d(i) = std::max(d(i), 1e-12 * dmax);
    Eigen::MatrixXd M = A;
    M.diagonal() += mu * d;
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(M);
    const Eigen::VectorXd h = ldlt.solve(-g);
    if (ldlt.info() != Eigen::Success || !h.allFinite()) {
      mu *= nu;
      nu *= 2;
      if (mu > 1e16 * dmax) {
        res.stop = LmStop::damping;
        return res;
      }
      continue;
    }
    // A tiny step only ends the run once it no longer buys a large cost drop
    // (exact data keep converging quadratically below the step tolerance).
    const bool small_step = h.norm() <= opt.rel_tol * (res.x.norm() + opt.rel_tol);
    const Eigen::VectorXd x_new = res.x + h;
    auto r_new = try_eval(f, x_new);
    ++res.evaluations;
    const double predicted = -(2 * h.dot(g) + h.dot(A * h));
    const double cost_new = r_new ? r_new->squaredNorm() : std::numeric_limits<double>::infinity();
    const double rho = predicted > 0 ? (res.cost - cost_new) / predicted : -1.0;
    if (r_new && rho > 0) {
      const double drop = res.cost - cost_new;
      res.x = x_new;
      res.residual = std::move(*r_new);
      res.cost = cost_new;
      res.jacobian = numerical_jacobian(f, res.x, res.residual, opt.central_differences, &res.evaluations);
      A = res.jacobian.transpose() * res.jacobian;
      g = res.jacobian.transpose() * res.residual;
      if (std::sqrt(res.cost) <= opt.abs_tol) {
        res.stop = LmStop::residual;
        return res;
      }
      if (small_step && drop <= 0.5 * (res.cost + drop)) {
        res.stop = LmStop::step;
        return res;
      }
      if (drop <= opt.rel_tol * res.cost && rho > 0.25) {
        res.stop = LmStop::cost;
        return res;
      }
      const double t = 2 * rho - 1;
      mu *= std::max(1.0 / 3.0, 1 - t * t * t);
      nu = 2;
    } else {
      if (small_step) {
        res.stop = LmStop::step;
        return res;
      }
      mu *= nu;
      nu *= 2;
      if (mu > 1e16 * dmax) {
        res.stop = LmStop::damping;
        return res;
      }
    }
  }
  res.stop = LmStop::max_iterations;
  return res;
}

Curvature curvature(const Eigen::MatrixXd& jacobian) {
  const Eigen::MatrixXd A = jacobian.transpose() * jacobian;
  const Eigen::Index n = A.rows();
  Curvature c;
  c.covariance = Eigen::MatrixXd::Constant(n, n, std::numeric_limits<double>::quiet_NaN());
  if (n == 0 || !A.allFinite()) return c;
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
  const double lmax = es.eigenvalues().maxCoeff();
  const double lmin = es.eigenvalues().minCoeff();
  if (!(lmax > 0) || !(lmin > 1e-14 * lmax)) return c;
  c.positive_definite = true;
  c.covariance = es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
  return c;
}

}  // namespace chi2
