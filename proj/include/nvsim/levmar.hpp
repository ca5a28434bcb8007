#pragma once

#include <functional>

#include <Eigen/Dense>

namespace nvsim {

/// Residual/Jacobian callback: fills r (m) and J (m x n) at parameter vector p.
using LevMarModel =
    std::function<void(const Eigen::VectorXd& p, Eigen::VectorXd& r, Eigen::MatrixXd& J)>;

struct LevMarOptions {
  int max_iterations = 500;
  double step_tol = 1e-10;     // converged when relative step falls below this
  double lambda_init = 1e-3;
  double lambda_up = 10.0;
  double lambda_down = 0.25;
};

struct LevMarOutcome {
  Eigen::VectorXd params;
  Eigen::MatrixXd covariance;  // sigma^2 (J'J)^-1 at the solution
  double residual_norm = 0.0;  // sqrt(sum r^2)
  bool converged = false;
  int iterations = 0;
};

/// Damped least squares with Marquardt scaling (lambda * diag(J'J)).
LevMarOutcome levmar_fit(const LevMarModel& model, const Eigen::VectorXd& p0,
                         const LevMarOptions& opts = {});

}  // namespace nvsim
