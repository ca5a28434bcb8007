#include "nvsim/levmar.hpp"

#include <cmath>
#include <limits>

namespace nvsim {

LevMarOutcome levmar_fit(const LevMarModel& model, const Eigen::VectorXd& p0,
                         const LevMarOptions& opts) {
  const int n = static_cast<int>(p0.size());
  Eigen::VectorXd p = p0;
  Eigen::VectorXd r;
  Eigen::MatrixXd J;
  model(p, r, J);
  double cost = r.squaredNorm();
  double lambda = opts.lambda_init;

  LevMarOutcome out;
  out.converged = false;

  int iter = 0;
  for (; iter < opts.max_iterations; ++iter) {
    const Eigen::MatrixXd JtJ = J.transpose() * J;
    const Eigen::VectorXd g = J.transpose() * r;

    bool stepped = false;
    for (int attempt = 0; attempt < 32; ++attempt) {
      Eigen::MatrixXd A = JtJ;
      for (int i = 0; i < n; ++i) {
        const double d = JtJ(i, i);
        A(i, i) += lambda * (d > 0 ? d : 1.0);
      }
      const Eigen::VectorXd step = A.ldlt().solve(-g);
      if (!step.allFinite()) {
        lambda *= opts.lambda_up;
        continue;
      }
      const Eigen::VectorXd p_try = p + step;
      Eigen::VectorXd r_try;
      Eigen::MatrixXd J_try;
      model(p_try, r_try, J_try);
      const double cost_try = r_try.squaredNorm();
      if (std::isfinite(cost_try) && cost_try <= cost) {
        // relative step size, guarded for parameters near zero
        double rel = 0.0;
        for (int i = 0; i < n; ++i)
          rel = std::max(rel, std::abs(step[i]) / (std::abs(p[i]) + 1e-30));
        p = p_try;
        r = std::move(r_try);
        J = std::move(J_try);
        cost = cost_try;
        lambda = std::max(lambda * opts.lambda_down, 1e-14);
        stepped = true;
        if (rel < opts.step_tol) {
          out.converged = true;
        }
        break;
      }
      lambda *= opts.lambda_up;
    }
    if (out.converged) {
      ++iter;
      break;
    }
    if (!stepped) {
      // no downhill step found at any damping: treat as converged-in-place
      out.converged = true;
      ++iter;
      break;
    }
  }

  out.params = p;
  out.residual_norm = std::sqrt(cost);
  out.iterations = iter;

  const int m = static_cast<int>(r.size());
  const double dof = std::max(1, m - n);
  const double sigma2 = cost / dof;
  Eigen::MatrixXd JtJ = J.transpose() * J;
  // guard singular information matrices (degenerate fits)
  Eigen::FullPivLU<Eigen::MatrixXd> lu(JtJ);
  if (lu.isInvertible()) {
    out.covariance = sigma2 * lu.inverse();
  } else {
    out.covariance = Eigen::MatrixXd::Constant(n, n, std::numeric_limits<double>::quiet_NaN());
  }
  return out;
}

}  // namespace nvsim
