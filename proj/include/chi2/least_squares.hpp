#pragma once

#include <Eigen/Dense>

#include <functional>
#include <string>

namespace chi2 {

/// r(x); the length of r must not depend on x. Throwing std::invalid_argument
/// or NumericalError marks x as infeasible (the step is rejected).
using ResidualFunction = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

struct LmOptions {
  double abs_tol = 1e-10;  // on ||r||
  double rel_tol = 1e-8;   // on the step and on the relative cost change
  int max_iterations = 400;
  double initial_damping = 1e-3;  // relative to max diag(J'J)
  bool central_differences = true;
};

enum class LmStop { residual, step, cost, max_iterations, damping, infeasible_start };

constexpr const char* to_string(LmStop s) noexcept {
  switch (s) {
    case LmStop::residual: return "residual";
    case LmStop::step: return "step";
    case LmStop::cost: return "cost";
    case LmStop::max_iterations: return "max_iterations";
    case LmStop::damping: return "damping";
    case LmStop::infeasible_start: return "infeasible_start";
  }
  return "unknown";
}

struct LmResult {
  Eigen::VectorXd x;
  Eigen::VectorXd residual;
  Eigen::MatrixXd jacobian;  // at x
  double cost = 0.0;         // ||r||^2
  int iterations = 0;
  int evaluations = 0;
  LmStop stop = LmStop::max_iterations;

  bool converged() const noexcept {
    return stop == LmStop::residual || stop == LmStop::step || stop == LmStop::cost;
  }
};

/// Finite-difference Jacobian with steps scaled to |x_j| (at least 1).
Eigen::MatrixXd numerical_jacobian(const ResidualFunction& f, const Eigen::VectorXd& x, const Eigen::VectorXd& r0,
                                   bool central, int* evaluations = nullptr);

/// Damped Gauss-Newton with Marquardt diagonal scaling and gain-ratio damping updates.
LmResult levenberg_marquardt(const ResidualFunction& f, Eigen::VectorXd x0, const LmOptions& options = {});

struct Curvature {
  Eigen::MatrixXd covariance;  // (J'J)^{-1}; NaN when not positive definite
  bool positive_definite = false;
};

Curvature curvature(const Eigen::MatrixXd& jacobian);

}  // namespace chi2
