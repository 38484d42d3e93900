#include "drest/linmod.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "drest/constrained.hpp"
#include "drest/errors.hpp"

namespace drest {

namespace {

constexpr double kRankThreshold = 1e-10;

// log(1 + exp(u)) without overflow.
double log1pexp(double u) noexcept {
  return u > 0 ? u + std::log1p(std::exp(-u)) : std::log1p(std::exp(u));
}

void require_binary(const Eigen::VectorXd& t, const char* who) {
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    if (t[i] != 0.0 && t[i] != 1.0) {
      throw InvalidArgument(std::string(who) + ": response indicator must be 0 or 1 (row " +
                            std::to_string(i) + ")");
    }
  }
}

double logit_deviance(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                      const Eigen::VectorXd& beta) {
  const Eigen::VectorXd eta = x * beta;
  double dev = 0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    if (w[i] > 0) dev -= 2.0 * w[i] * (y[i] * eta[i] - log1pexp(eta[i]));
  }
  return dev;
}

double max_weighted_abs_eta(const Eigen::MatrixXd& x, const Eigen::VectorXd& w, const Eigen::VectorXd& beta) {
  const Eigen::VectorXd eta = x * beta;
  double m = 0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    if (w[i] > 0) m = std::max(m, std::abs(eta[i]));
  }
  return m;
}

IrlsResult irls_logit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                      const IrlsOptions& options) {
  const Eigen::Index n = x.rows();
  IrlsResult out;
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(x.cols());
  double dev = logit_deviance(x, y, w, beta);

  auto separated = [&](const Eigen::VectorXd& b) {
    return max_weighted_abs_eta(x, w, b) > options.separation_eta;
  };

  for (int it = 0; it <= options.max_iterations; ++it) {
    out.iterations = it;
    out.score_residual = score_residual(x, y, w, Link::logit, beta);
    if (out.score_residual <= options.score_tolerance) {
      out.converged = true;
      break;
    }
    if (it == options.max_iterations) break;

    const Eigen::VectorXd eta = x * beta;
    Eigen::VectorXd working_w(n);
    Eigen::VectorXd working_y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double p = expit(eta[i]);
      const double v = p * (1.0 - p);
      working_w[i] = w[i] > 0 ? w[i] * v : 0.0;
      working_y[i] = v > 0 ? eta[i] + (y[i] - p) / v : eta[i];
    }

    Eigen::VectorXd next;
    try {
      next = weighted_least_squares(x, working_y, working_w);
    } catch (const SingularDesign&) {
      if (separated(beta)) {
        throw NonConvergence("irls_fit: fitted probabilities numerically 0 or 1 (separation)");
      }
      throw;
    }

    double next_dev = logit_deviance(x, y, w, next);
    for (int halvings = 0; halvings < 30 && !(next_dev <= dev + 1e-12 * std::abs(dev)); ++halvings) {
      next = 0.5 * (beta + next);
      next_dev = logit_deviance(x, y, w, next);
    }

    const double step = (next - beta).cwiseAbs().maxCoeff();
    beta = std::move(next);
    dev = next_dev;
    if (step <= options.step_tolerance) {
      out.iterations = it + 1;
      out.score_residual = score_residual(x, y, w, Link::logit, beta);
      out.converged = true;
      break;
    }
  }

  // Large |eta| alone is not separation: at a finite MLE the deviance rises
  // along the ray through beta, under separation it keeps falling.
  if (separated(beta) && !(out.converged && logit_deviance(x, y, w, 2.0 * beta) > dev)) {
    throw NonConvergence("irls_fit: fitted probabilities numerically 0 or 1 (separation)");
  }
  if (!out.converged) {
    throw NonConvergence("irls_fit: no convergence in " + std::to_string(options.max_iterations) +
                         " iterations");
  }
  out.coef = std::move(beta);
  return out;
}

OutcomeFit fit_outcome(OutcomeKind kind, const Eigen::MatrixXd& design, const Eigen::VectorXd& t,
                       const Eigen::VectorXd& y, const Eigen::VectorXd& unit_weights, Link link) {
  require_binary(t, "outcome fit");
  const Eigen::Index n = design.rows();
  if (t.size() != n || y.size() != n || unit_weights.size() != n) {
    throw InvalidArgument("outcome fit: dimension mismatch");
  }

  std::vector<Eigen::Index> rows;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (t[i] == 1.0) rows.push_back(i);
  }
  const auto r = static_cast<Eigen::Index>(rows.size());
  if (r < design.cols()) {
    throw SingularDesign("outcome fit: " + std::to_string(r) + " respondents for " +
                         std::to_string(design.cols()) + " columns");
  }

  Eigen::MatrixXd xr(r, design.cols());
  Eigen::VectorXd yr(r);
  Eigen::VectorXd wr(r);
  for (Eigen::Index k = 0; k < r; ++k) {
    xr.row(k) = design.row(rows[k]);
    yr[k] = y[rows[k]];
    wr[k] = unit_weights[rows[k]];
    if (!std::isfinite(yr[k])) {
      throw InvalidArgument("outcome fit: missing or non-finite outcome for respondent row " +
                            std::to_string(rows[k]));
    }
  }

  const IrlsResult res = irls_fit(xr, yr, wr, link);
  OutcomeFit fit;
  fit.kind = kind;
  fit.beta = res.coef;
  fit.link = link;
  fit.m_hat = inverse_link(link, design * res.coef);
  fit.converged = res.converged;
  fit.iterations = res.iterations;
  fit.score_residual = res.score_residual;
  return fit;
}

void require_positive_on(const Eigen::VectorXd& pi_hat, const Eigen::VectorXd& t, bool respondents_only,
                         const char* who) {
  for (Eigen::Index i = 0; i < pi_hat.size(); ++i) {
    if (respondents_only && t[i] != 1.0) continue;
    if (!(pi_hat[i] > 0) || !std::isfinite(pi_hat[i])) {
      throw InvalidWeight(std::string(who) + ": nonpositive or non-finite propensity at row " +
                          std::to_string(i));
    }
  }
}

Eigen::MatrixXd append_column(const Eigen::MatrixXd& design, const Eigen::VectorXd& column) {
  Eigen::MatrixXd out(design.rows(), design.cols() + 1);
  out.leftCols(design.cols()) = design;
  out.col(design.cols()) = column;
  return out;
}

PropensityFit finish_propensity(PropensityKind kind, Eigen::VectorXd alpha, Eigen::VectorXd lp,
                                Eigen::VectorXd pi_hat, const Eigen::VectorXd& t, int iterations) {
  PropensityFit fit;
  fit.kind = kind;
  fit.alpha = std::move(alpha);
  fit.linear_predictor = std::move(lp);
  fit.pi_hat = std::move(pi_hat);
  fit.diagnostics = weight_diagnostics(fit.pi_hat, t);
  fit.converged = true;
  fit.iterations = iterations;
  return fit;
}

}  // namespace

std::string_view to_string(Link link) noexcept {
  return link == Link::identity ? "identity" : "logit";
}

std::string_view to_string(PropensityKind kind) noexcept {
  switch (kind) {
    case PropensityKind::logistic_mle: return "LOGISTIC_MLE";
    case PropensityKind::inv_linear_ml: return "INV_LINEAR_ML";
    case PropensityKind::inv_linear_moment: return "INV_LINEAR_MOMENT";
    case PropensityKind::inv_linear_unconstrained: return "INV_LINEAR_UNCONSTRAINED";
    case PropensityKind::logistic_extended: return "LOGISTIC_EXTENDED";
  }
  return "?";
}

std::string_view to_string(OutcomeKind kind) noexcept {
  switch (kind) {
    case OutcomeKind::reg: return "REG";
    case OutcomeKind::wls: return "WLS";
    case OutcomeKind::ext_reg: return "EXT_REG";
    case OutcomeKind::dr_ipw_nr: return "DR_IPW_NR";
  }
  return "?";
}

double expit(double u) noexcept {
  if (u >= 0) return 1.0 / (1.0 + std::exp(-u));
  const double e = std::exp(u);
  return e / (1.0 + e);
}

double inverse_link(Link link, double eta) noexcept {
  return link == Link::identity ? eta : expit(eta);
}

Eigen::VectorXd inverse_link(Link link, const Eigen::VectorXd& eta) {
  if (link == Link::identity) return eta;
  return eta.unaryExpr([](double u) { return expit(u); });
}

double score_residual(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                      const Eigen::VectorXd& weights, Link link, const Eigen::VectorXd& coef) {
  const Eigen::VectorXd eta = design * coef;
  double y_scale = 1.0;
  for (Eigen::Index i = 0; i < response.size(); ++i) {
    if (weights[i] > 0) y_scale = std::max(y_scale, std::abs(response[i]));
  }
  double worst = 0;
  for (Eigen::Index k = 0; k < design.cols(); ++k) {
    double num = 0;
    double den = 0;
    for (Eigen::Index i = 0; i < design.rows(); ++i) {
      if (!(weights[i] > 0)) continue;
      const double wx = weights[i] * design(i, k);
      num += wx * (response[i] - inverse_link(link, eta[i]));
      den += std::abs(wx);
    }
    if (den > 0) worst = std::max(worst, std::abs(num) / (den * y_scale));
  }
  return worst;
}

Eigen::VectorXd weighted_least_squares(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                                       const Eigen::VectorXd& weights) {
  const Eigen::Index n = design.rows();
  const Eigen::Index k = design.cols();
  if (response.size() != n || weights.size() != n) {
    throw InvalidArgument("weighted_least_squares: dimension mismatch");
  }

  Eigen::Index m = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!std::isfinite(weights[i]) || weights[i] < 0) {
      throw InvalidWeight("weighted_least_squares: negative or non-finite weight at row " +
                          std::to_string(i));
    }
    m += weights[i] > 0;
  }
  if (m < k) {
    throw SingularDesign("weighted_least_squares: " + std::to_string(m) + " weighted rows for " +
                         std::to_string(k) + " columns");
  }

  Eigen::MatrixXd a(m, k);
  Eigen::VectorXd b(m);
  for (Eigen::Index i = 0, r = 0; i < n; ++i) {
    if (weights[i] == 0) continue;
    const double s = std::sqrt(weights[i]);
    a.row(r) = s * design.row(i);
    b[r] = s * response[i];
    if (!std::isfinite(b[r])) throw InvalidArgument("weighted_least_squares: non-finite response");
    ++r;
  }

  Eigen::VectorXd scale = a.colwise().norm().transpose();
  for (Eigen::Index j = 0; j < k; ++j) {
    if (!(scale[j] > 0) || !std::isfinite(scale[j])) {
      throw SingularDesign("weighted_least_squares: zero or non-finite column " + std::to_string(j));
    }
    a.col(j) /= scale[j];
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  qr.setThreshold(kRankThreshold);
  if (qr.rank() < k) {
    throw SingularDesign("weighted_least_squares: design has numerical rank " + std::to_string(qr.rank()) +
                         " < " + std::to_string(k));
  }
  Eigen::VectorXd z = qr.solve(b);
  const Eigen::VectorXd residual = b - a * z;
  z += qr.solve(residual);
  return z.cwiseQuotient(scale);
}

IrlsResult irls_fit(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                    const Eigen::VectorXd& weights, Link link, const IrlsOptions& options) {
  if (response.size() != design.rows() || weights.size() != design.rows()) {
    throw InvalidArgument("irls_fit: dimension mismatch");
  }
  if (link == Link::logit) return irls_logit(design, response, weights, options);

  IrlsResult out;
  out.coef = weighted_least_squares(design, response, weights);
  out.converged = true;
  out.iterations = 1;
  out.score_residual = score_residual(design, response, weights, link, out.coef);
  return out;
}

WeightDiagnostics weight_diagnostics(const Eigen::VectorXd& pi_hat, const Eigen::VectorXd& t) {
  WeightDiagnostics d;
  const Eigen::Index n = pi_hat.size();
  if (n == 0) return d;
  d.min_pi = pi_hat.minCoeff();
  double mean = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double inv = 1.0 / pi_hat[i];
    mean += inv;
    if (t[i] == 1.0) {
      d.max_inv_pi_respondents = std::max(d.max_inv_pi_respondents, inv);
    } else {
      d.max_inv_pi_nonrespondents = std::max(d.max_inv_pi_nonrespondents, inv);
    }
  }
  mean /= static_cast<double>(n);
  if (n > 1) {
    double ss = 0;
    for (Eigen::Index i = 0; i < n; ++i) ss += std::pow(1.0 / pi_hat[i] - mean, 2);
    d.var_inv_pi = ss / static_cast<double>(n - 1);
  }
  return d;
}

PropensityFit fit_logistic_propensity(const Eigen::MatrixXd& design, const Eigen::VectorXd& t) {
  require_binary(t, "fit_logistic_propensity");
  const IrlsResult res = irls_fit(design, t, Eigen::VectorXd::Ones(design.rows()), Link::logit);
  Eigen::VectorXd lp = design * res.coef;
  Eigen::VectorXd pi = inverse_link(Link::logit, lp);
  return finish_propensity(PropensityKind::logistic_mle, res.coef, std::move(lp), std::move(pi), t,
                           res.iterations);
}

PropensityFit fit_inverse_linear(const Eigen::MatrixXd& design, const Eigen::VectorXd& t,
                                 InverseLinearMethod method, const InverseLinearOptions& options) {
  require_binary(t, "fit_inverse_linear");
  const Eigen::Index n = design.rows();
  const Eigen::Index k = design.cols();
  if (t.size() != n || n == 0) throw InvalidArgument("fit_inverse_linear: dimension mismatch");
  const double inv_n = 1.0 / static_cast<double>(n);

  // Moment system P_n[T x x'] a = P_n[x].
  const Eigen::MatrixXd gram = design.transpose() * t.asDiagonal() * design * inv_n;
  const Eigen::VectorXd xbar = design.colwise().sum().transpose() * inv_n;

  if (method == InverseLinearMethod::unconstrained_moment) {
    Eigen::VectorXd alpha = weighted_least_squares(gram, xbar, Eigen::VectorXd::Ones(k));
    Eigen::VectorXd u = design * alpha;
    Eigen::VectorXd pi = u.cwiseInverse();
    return finish_propensity(PropensityKind::inv_linear_unconstrained, std::move(alpha), std::move(u),
                             std::move(pi), t, 1);
  }

  const double floor = method == InverseLinearMethod::likelihood ? 1.0 + options.delta : options.delta;
  const Eigen::VectorXd lower = Eigen::VectorXd::Constant(n, floor);

  // Feasible start: scale a strictly positive column (the intercept) so that
  // every a' x_i sits one unit above the floor.
  Eigen::VectorXd start = Eigen::VectorXd::Zero(k);
  bool found = false;
  for (Eigen::Index j = 0; j < k && !found; ++j) {
    const double lo = design.col(j).minCoeff();
    if (lo > 0) {
      start[j] = (floor + 1.0) / lo;
      found = true;
    }
  }
  if (!found) {
    throw Infeasible("fit_inverse_linear: no strictly positive column to build a feasible start");
  }

  SmoothObjective objective;
  if (method == InverseLinearMethod::likelihood) {
    // Negative mean log-likelihood with pi = 1/u: P_n[log u - (1 - T) log(u - 1)].
    objective.value = [&](const Eigen::VectorXd& a) {
      const Eigen::VectorXd u = design * a;
      double f = 0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (!(u[i] > 1.0)) return std::numeric_limits<double>::infinity();
        f += std::log(u[i]) - (1.0 - t[i]) * std::log(u[i] - 1.0);
      }
      return f * inv_n;
    };
    objective.gradient = [&](const Eigen::VectorXd& a) {
      const Eigen::VectorXd u = design * a;
      Eigen::VectorXd coef(n);
      for (Eigen::Index i = 0; i < n; ++i) coef[i] = 1.0 / u[i] - (1.0 - t[i]) / (u[i] - 1.0);
      return Eigen::VectorXd(design.transpose() * coef * inv_n);
    };
    // Expected information P_n[x x' / (u^2 (u - 1))].
    objective.metric = [&](const Eigen::VectorXd& a) {
      const Eigen::VectorXd u = design * a;
      Eigen::VectorXd w(n);
      for (Eigen::Index i = 0; i < n; ++i) w[i] = 1.0 / (u[i] * u[i] * (u[i] - 1.0));
      return Eigen::MatrixXd(design.transpose() * w.asDiagonal() * design * inv_n);
    };
  } else {
    objective.value = [&](const Eigen::VectorXd& a) { return (gram * a - xbar).squaredNorm(); };
    objective.gradient = [&](const Eigen::VectorXd& a) {
      return Eigen::VectorXd(2.0 * gram.transpose() * (gram * a - xbar));
    };
    objective.metric = [&](const Eigen::VectorXd&) {
      return Eigen::MatrixXd(2.0 * gram.transpose() * gram);
    };
  }

  // For the moment objective with a nonsingular gram, solve in y = R S^{-1} a
  // where gram S = Q R and S scales the columns: the objective becomes
  // |y - Q' xbar|^2 and the Hessian is never formed.
  Eigen::MatrixXd coords = Eigen::MatrixXd::Identity(k, k);
  Eigen::VectorXd target;
  if (method == InverseLinearMethod::moment) {
    Eigen::VectorXd scale(k);
    for (Eigen::Index j = 0; j < k; ++j) {
      const double rms = std::sqrt(design.col(j).squaredNorm() * inv_n);
      scale[j] = rms > 0 ? 1.0 / rms : 1.0;
    }
    const Eigen::MatrixXd scaled = gram * scale.asDiagonal();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(scaled);
    const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
    const double rmax = r.diagonal().cwiseAbs().maxCoeff();
    if (r.diagonal().cwiseAbs().minCoeff() > kRankThreshold * rmax) {
      coords = scale.asDiagonal() *
               Eigen::MatrixXd(r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(k, k)));
      target = qr.householderQ().transpose() * xbar;
      objective.value = [&](const Eigen::VectorXd& y) { return (y - target).squaredNorm(); };
      objective.gradient = [&](const Eigen::VectorXd& y) { return Eigen::VectorXd(2.0 * (y - target)); };
      objective.metric = nullptr;
      start = r * scale.cwiseInverse().asDiagonal() * start;
    }
  }

  ConstrainedOptions copts;
  copts.max_iterations = options.max_iterations;
  copts.tolerance = options.tolerance;
  const ConstrainedResult res = minimize_linear_inequality(objective, design * coords, lower, start, copts);
  if (!res.converged) {
    throw NonConvergence("fit_inverse_linear: projected gradient did not converge in " +
                         std::to_string(options.max_iterations) + " iterations");
  }

  const Eigen::VectorXd alpha = coords * res.x;
  Eigen::VectorXd u = design * alpha;
  Eigen::VectorXd pi = u.cwiseInverse();
  const auto kind = method == InverseLinearMethod::likelihood ? PropensityKind::inv_linear_ml
                                                               : PropensityKind::inv_linear_moment;
  return finish_propensity(kind, alpha, std::move(u), std::move(pi), t, res.iterations);
}

OutcomeFit fit_outcome_reg(const AnalysisView& view, Link link) {
  return fit_outcome(OutcomeKind::reg, view.design_m, view.t, view.y_observed,
                     Eigen::VectorXd::Ones(view.t.size()), link);
}

OutcomeFit fit_outcome_wls(const AnalysisView& view, const Eigen::VectorXd& pi_hat, Link link) {
  require_positive_on(pi_hat, view.t, true, "fit_outcome_wls");
  Eigen::VectorXd w = Eigen::VectorXd::Zero(pi_hat.size());
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (view.t[i] == 1.0) w[i] = 1.0 / pi_hat[i];
  }
  return fit_outcome(OutcomeKind::wls, view.design_m, view.t, view.y_observed, w, link);
}

OutcomeFit fit_outcome_ext_reg(const AnalysisView& view, const Eigen::VectorXd& pi_hat, Link link) {
  require_positive_on(pi_hat, view.t, false, "fit_outcome_ext_reg");
  const Eigen::MatrixXd design = append_column(view.design_m, pi_hat.cwiseInverse());
  return fit_outcome(OutcomeKind::ext_reg, design, view.t, view.y_observed,
                     Eigen::VectorXd::Ones(view.t.size()), link);
}

OutcomeFit fit_outcome_ipw_nr(const AnalysisView& view, const Eigen::VectorXd& pi_hat, Link link) {
  require_positive_on(pi_hat, view.t, false, "fit_outcome_ipw_nr");
  for (Eigen::Index i = 0; i < pi_hat.size(); ++i) {
    if (!(pi_hat[i] < 1.0)) {
      throw InvalidWeight("fit_outcome_ipw_nr: propensity not below 1 at row " + std::to_string(i));
    }
  }
  const Eigen::MatrixXd design = append_column(view.design_m, pi_hat);
  Eigen::VectorXd w = Eigen::VectorXd::Zero(pi_hat.size());
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (view.t[i] == 1.0) w[i] = 1.0 / pi_hat[i];
  }
  return fit_outcome(OutcomeKind::dr_ipw_nr, design, view.t, view.y_observed, w, link);
}

double extended_propensity_equation(const PropensityFit& base, const Eigen::VectorXd& h,
                                    const Eigen::VectorXd& m_reg, double mu_ols, const Eigen::VectorXd& t,
                                    double phi) {
  const Eigen::Index n = t.size();
  double g = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double c = m_reg[i] - mu_ols;
    if (c == 0) continue;
    // T / expit(u) - 1 = T (1 + exp(-u)) - 1
    const double u = base.linear_predictor[i] + phi * h[i];
    const double inv_w = t[i] == 1.0 ? std::exp(-u) : -1.0;
    g += inv_w * c;
  }
  return g / static_cast<double>(n);
}

PropensityFit fit_extended_propensity(const PropensityFit& base, const Eigen::VectorXd& h_in,
                                      const OutcomeFit& m_reg, double mu_ols, const Eigen::VectorXd& t,
                                      const RootOptions& options) {
  if (base.kind != PropensityKind::logistic_mle || !base.converged) {
    throw InvalidArgument("fit_extended_propensity: base must be a converged logistic MLE fit");
  }
  const Eigen::Index n = t.size();
  if (base.linear_predictor.size() != n || m_reg.m_hat.size() != n) {
    throw InvalidArgument("fit_extended_propensity: dimension mismatch");
  }
  const Eigen::VectorXd h =
      h_in.size() == 0 ? Eigen::VectorXd((m_reg.m_hat.array() - mu_ols).matrix()) : h_in;
  if (h.size() != n) throw InvalidArgument("fit_extended_propensity: h has wrong length");

  auto g = [&](double phi) { return extended_propensity_equation(base, h, m_reg.m_hat, mu_ols, t, phi); };

  double phi = 0;
  double g0 = g(0.0);
  if (std::abs(g0) > options.value_tolerance) {
    // Scan 0, +-1, +-2, ... +-max for the innermost sign change.
    double lo = 0, hi = 0, glo = g0, ghi = g0;
    bool bracketed = false;
    double inner = 0, g_pos_inner = g0, g_neg_inner = g0;
    for (double w = options.initial_half_width; !bracketed; w = std::min(2 * w, options.max_half_width)) {
      const double gp = g(w);
      const double gn = g(-w);
      if (std::signbit(gp) != std::signbit(g_pos_inner)) {
        lo = inner, glo = g_pos_inner, hi = w, ghi = gp;
        bracketed = true;
      } else if (std::signbit(gn) != std::signbit(g_neg_inner)) {
        lo = -w, glo = gn, hi = -inner, ghi = g_neg_inner;
        bracketed = true;
      }
      inner = w, g_pos_inner = gp, g_neg_inner = gn;
      if (w >= options.max_half_width) break;
    }
    if (!bracketed) {
      throw NoRoot("fit_extended_propensity: no sign change of g on [-" +
                   std::to_string(options.max_half_width) + ", " + std::to_string(options.max_half_width) +
                   "]");
    }

    // Bisection until |g| is small or the bracket is exhausted in floating point.
    for (;;) {
      const double mid = lo + 0.5 * (hi - lo);
      if (mid <= lo || mid >= hi) break;
      const double gm = g(mid);
      if (std::abs(gm) <= options.value_tolerance) {
        lo = hi = mid;
        glo = ghi = gm;
        break;
      }
      if (std::signbit(gm) == std::signbit(glo)) {
        lo = mid, glo = gm;
      } else {
        hi = mid, ghi = gm;
      }
    }
    phi = std::abs(glo) <= std::abs(ghi) ? lo : hi;
  }

  PropensityFit fit;
  fit.kind = PropensityKind::logistic_extended;
  fit.alpha = base.alpha;
  fit.phi = phi;
  fit.linear_predictor = base.linear_predictor + phi * h;
  fit.pi_hat = inverse_link(Link::logit, fit.linear_predictor);
  fit.diagnostics = weight_diagnostics(fit.pi_hat, t);
  fit.converged = true;
  fit.iterations = base.iterations;
  return fit;
}

}  // namespace drest
