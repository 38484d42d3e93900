#pragma once

#include <Eigen/Dense>
#include <functional>

namespace drest {

// Smooth objective for minimize_linear_inequality. `metric` returns a
// symmetric positive (semi)definite scaling matrix at x; when empty the
// Euclidean metric is used.
struct SmoothObjective {
  std::function<double(const Eigen::VectorXd&)> value;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> gradient;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> metric;
};

struct ConstrainedOptions {
  int max_iterations = 10000;
  double tolerance = 1e-10;
};

struct ConstrainedResult {
  Eigen::VectorXd x;
  double value = 0;
  int iterations = 0;
  bool converged = false;
};

// Gradient projection (Rosen) for   min f(x)  s.t.  A x >= lower,
// starting from a feasible x0. Each iteration projects the metric-scaled
// gradient onto the null space of the working set of active constraints,
// releases constraints whose multipliers are negative, and backtracks
// (Armijo) along a step capped at the first blocking constraint.
ConstrainedResult minimize_linear_inequality(const SmoothObjective& objective, const Eigen::MatrixXd& a,
                                             const Eigen::VectorXd& lower, Eigen::VectorXd x0,
                                             const ConstrainedOptions& options = {});

}  // namespace drest
