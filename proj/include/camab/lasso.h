#pragma once

#include <Eigen/Dense>
#include <cstddef>

namespace camab {

// minimize (1/2n) ||y - b0 - X beta||^2 + lambda ||beta||_1
// The intercept b0 is unpenalized and only fitted when fit_intercept is set.
struct LassoProblem {
  Eigen::MatrixXd design;   // n_samples x n_features
  Eigen::VectorXd targets;  // n_samples
  double lambda = 0.0;
  bool fit_intercept = true;
};

struct LassoFit {
  double intercept = 0.0;
  Eigen::VectorXd coefficients;
  bool converged = false;
  size_t iterations = 0;  // full coordinate sweeps
};

double SoftThreshold(double x, double threshold);

// Smallest lambda for which the all-zero solution is optimal:
// max_j |<x_j, y - mean(y)>| / n (centered x_j when an intercept is fitted).
double LassoLambdaMax(const LassoProblem& problem);

// Cyclic coordinate descent with soft-thresholding. Stops once the largest
// coefficient change in a sweep is below `tol` or after `max_iters` sweeps.
// Throws ContractError on mismatched dimensions, negative lambda, or
// non-finite data.
LassoFit LassoCoordinateDescent(const LassoProblem& problem, double tol = 1e-8,
                                size_t max_iters = 10000);

}  // namespace camab
