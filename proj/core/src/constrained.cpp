#include "drest/constrained.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "drest/errors.hpp"

namespace drest {

namespace {

constexpr double kArmijo = 1e-4;
constexpr int kMaxHalvings = 60;

// Cholesky factor L of the metric (M = L L'), with a small ridge so that a
// semidefinite metric still yields a usable change of variables.
Eigen::MatrixXd metric_factor(const SmoothObjective& objective, const Eigen::VectorXd& x) {
  const Eigen::Index p = x.size();
  if (!objective.metric) return Eigen::MatrixXd::Identity(p, p);
  Eigen::MatrixXd m = objective.metric(x);
  const double ridge = 1e-12 * std::max(m.diagonal().cwiseAbs().maxCoeff(), 1e-300);
  m.diagonal().array() += ridge;
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success || !m.allFinite()) return Eigen::MatrixXd::Identity(p, p);
  return llt.matrixL();
}

}  // namespace

ConstrainedResult minimize_linear_inequality(const SmoothObjective& objective, const Eigen::MatrixXd& a,
                                             const Eigen::VectorXd& lower, Eigen::VectorXd x0,
                                             const ConstrainedOptions& options) {
  const Eigen::Index m = a.rows();
  const Eigen::Index p = a.cols();
  if (lower.size() != m || x0.size() != p) {
    throw InvalidArgument("minimize_linear_inequality: dimension mismatch");
  }
  for (Eigen::Index i = 0; i < m; ++i) {
    if (a.row(i).dot(x0) < lower[i]) throw Infeasible("minimize_linear_inequality: start point infeasible");
  }

  ConstrainedResult out;
  Eigen::VectorXd x = std::move(x0);
  double f = objective.value(x);
  std::vector<bool> released(static_cast<std::size_t>(m), false);

  for (int it = 0; it < options.max_iterations; ++it) {
    out.iterations = it + 1;
    const Eigen::VectorXd g = objective.gradient(x);
    const Eigen::MatrixXd l = metric_factor(objective, x);

    // Work in y = L' x: gradient L^{-1} g, constraint rows a_i L^{-T}.
    const Eigen::VectorXd gy = l.triangularView<Eigen::Lower>().solve(g);
    const Eigen::MatrixXd ay =
        l.triangularView<Eigen::Lower>().solve(a.transpose()).transpose();  // m x p
    const Eigen::VectorXd slack = a * x - lower;

    std::vector<Eigen::Index> working;
    for (Eigen::Index i = 0; i < m; ++i) {
      const double tol = 1e-10 * (1.0 + std::abs(lower[i]));
      if (slack[i] <= tol && !released[static_cast<std::size_t>(i)]) working.push_back(i);
    }

    Eigen::VectorXd dy;
    bool kkt = false;
    for (;;) {
      if (working.empty()) {
        dy = -gy;
      } else {
        Eigen::MatrixXd n(static_cast<Eigen::Index>(working.size()), p);
        for (std::size_t r = 0; r < working.size(); ++r) {
          n.row(static_cast<Eigen::Index>(r)) = ay.row(working[r]);
        }
        // gy ~ N' lambda in least squares; the remainder is the projected gradient.
        Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(n.transpose());
        const Eigen::VectorXd lambda = cod.solve(gy);
        dy = -(gy - n.transpose() * lambda);
        if (dy.norm() <= options.tolerance) {
          Eigen::Index worst = -1;
          double most_negative = -options.tolerance;
          for (Eigen::Index r = 0; r < lambda.size(); ++r) {
            if (lambda[r] < most_negative) most_negative = lambda[r], worst = r;
          }
          if (worst < 0) {
            kkt = true;
            break;
          }
          released[static_cast<std::size_t>(working[static_cast<std::size_t>(worst)])] = true;
          working.erase(working.begin() + worst);
          continue;
        }
      }
      if (working.empty() && dy.norm() <= options.tolerance) kkt = true;
      break;
    }
    if (kkt) {
      out.converged = true;
      break;
    }

    // Longest feasible step along dx = L^{-T} dy.
    const Eigen::VectorXd dx = l.transpose().triangularView<Eigen::Upper>().solve(dy);
    const Eigen::VectorXd rate = a * dx;
    // Working constraints stay active along dx up to rounding.
    std::vector<bool> active(static_cast<std::size_t>(m), false);
    for (Eigen::Index i : working) active[static_cast<std::size_t>(i)] = true;
    double t_max = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < m; ++i) {
      if (rate[i] < 0 && !active[static_cast<std::size_t>(i)]) t_max = std::min(t_max, std::max(slack[i], 0.0) / -rate[i]);
    }

    const double slope = gy.dot(dy);  // < 0
    double step = std::min(1.0, t_max);
    bool accepted = false;
    Eigen::VectorXd trial;
    double f_trial = f;
    for (int h = 0; h < kMaxHalvings && step > 0; ++h, step *= 0.5) {
      trial = x + step * dx;
      f_trial = objective.value(trial);
      if (std::isfinite(f_trial) && f_trial <= f + kArmijo * step * slope) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      // No decrease representable in floating point: stationary to working precision.
      out.converged = std::abs(slope) <= 1e-14 * (1.0 + std::abs(f)) || dy.norm() <= std::sqrt(options.tolerance);
      break;
    }

    x = std::move(trial);
    const bool hit_boundary = step == t_max;
    f = f_trial;
    if (hit_boundary) std::fill(released.begin(), released.end(), false);
    else if (std::abs(step * slope) <= 1e-16 * (1.0 + std::abs(f))) {
      out.converged = true;
      break;
    }
  }

  out.x = std::move(x);
  out.value = f;
  return out;
}

}  // namespace drest
