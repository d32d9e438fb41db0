#include "camab/lasso.h"

#include <cmath>

#include "camab/errors.h"

namespace camab {

double SoftThreshold(double x, double threshold) {
  if (x > threshold) return x - threshold;
  if (x < -threshold) return x + threshold;
  return 0.0;
}

namespace {

void Validate(const LassoProblem& p) {
  if (p.design.rows() != p.targets.size()) {
    throw ContractError("LASSO design has " + std::to_string(p.design.rows()) +
                        " rows but " + std::to_string(p.targets.size()) +
                        " targets");
  }
  if (p.design.rows() == 0) throw ContractError("LASSO problem has no rows");
  if (!(p.lambda >= 0.0) || !std::isfinite(p.lambda)) {
    throw ContractError("LASSO lambda must be finite and non-negative");
  }
  if (!p.design.allFinite() || !p.targets.allFinite()) {
    throw ContractError("LASSO inputs must be finite");
  }
}

struct Centered {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  Eigen::RowVectorXd x_mean;
  double y_mean = 0.0;
};

Centered Center(const LassoProblem& p) {
  Centered c;
  if (p.fit_intercept) {
    c.x_mean = p.design.colwise().mean();
    c.y_mean = p.targets.mean();
    c.x = p.design.rowwise() - c.x_mean;
    c.y = p.targets.array() - c.y_mean;
  } else {
    c.x_mean = Eigen::RowVectorXd::Zero(p.design.cols());
    c.x = p.design;
    c.y = p.targets;
  }
  return c;
}

}  // namespace

double LassoLambdaMax(const LassoProblem& problem) {
  Validate(problem);
  const Centered c = Center(problem);
  const double n = static_cast<double>(c.x.rows());
  if (c.x.cols() == 0) return 0.0;
  return (c.x.transpose() * c.y).cwiseAbs().maxCoeff() / n;
}

LassoFit LassoCoordinateDescent(const LassoProblem& problem, double tol,
                                size_t max_iters) {
  Validate(problem);
  const Centered c = Center(problem);
  const Eigen::Index p = c.x.cols();
  const double n = static_cast<double>(c.x.rows());

  const Eigen::VectorXd scale = c.x.colwise().squaredNorm().transpose() / n;
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd residual = c.y;

  LassoFit fit;
  for (size_t sweep = 0; sweep < max_iters; ++sweep) {
    double max_change = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      if (scale(j) <= 0.0) continue;  // constant column stays at zero
      const double rho = c.x.col(j).dot(residual) / n + scale(j) * beta(j);
      const double updated = SoftThreshold(rho, problem.lambda) / scale(j);
      const double delta = updated - beta(j);
      if (delta != 0.0) {
        residual.noalias() -= delta * c.x.col(j);
        beta(j) = updated;
        max_change = std::max(max_change, std::abs(delta));
      }
    }
    fit.iterations = sweep + 1;
    if (max_change < tol) {
      fit.converged = true;
      break;
    }
  }
  fit.coefficients = beta;
  fit.intercept = problem.fit_intercept ? c.y_mean - c.x_mean.dot(beta) : 0.0;
  return fit;
}

}  // namespace camab
