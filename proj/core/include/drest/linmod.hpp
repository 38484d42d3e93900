#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string_view>

#include "drest/dgp.hpp"

namespace drest {

enum class Link { identity, logit };

std::string_view to_string(Link link) noexcept;

double expit(double u) noexcept;
double inverse_link(Link link, double eta) noexcept;
Eigen::VectorXd inverse_link(Link link, const Eigen::VectorXd& eta);

struct IrlsOptions {
  int max_iterations = 100;
  double score_tolerance = 1e-10;
  double step_tolerance = 1e-12;
  // A logit fit whose linear predictor exceeds this magnitude on a weighted
  // row has fitted probabilities that are numerically 0 or 1, i.e. the data
  // are (quasi-)separated and no finite MLE exists.
  double separation_eta = 20.0;
};

struct IrlsResult {
  Eigen::VectorXd coef;
  bool converged = false;
  int iterations = 0;
  double score_residual = 0;
};

// Scale-free max-norm of the weighted score sum_i w_i x_i (y_i - Phi(x_i' b)).
// Column k is divided by sum_i |w_i x_ik| * max(1, max_i |y_i|), so the value
// is comparable across data sets of very different magnitude.
double score_residual(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                      const Eigen::VectorXd& weights, Link link, const Eigen::VectorXd& coef);

// Weighted least squares through a column-pivoted QR of the column-equilibrated,
// sqrt-weighted design. Rows with zero weight are ignored. Throws SingularDesign
// when fewer weighted rows than columns remain or the numerical rank (pivots
// below 1e-10 of the largest) is short.
Eigen::VectorXd weighted_least_squares(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                                       const Eigen::VectorXd& weights);

// Solves sum_i w_i x_i (y_i - Phi(x_i' b)) = 0. The identity link is a single
// weighted least-squares solve; logit runs Newton/IRLS from b = 0 with step
// halving on the deviance. Throws SingularDesign or NonConvergence.
IrlsResult irls_fit(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                    const Eigen::VectorXd& weights, Link link, const IrlsOptions& options = {});

struct WeightDiagnostics {
  double max_inv_pi_respondents = 0;
  double max_inv_pi_nonrespondents = 0;
  double min_pi = 0;
  double var_inv_pi = 0;
};

WeightDiagnostics weight_diagnostics(const Eigen::VectorXd& pi_hat, const Eigen::VectorXd& t);

enum class PropensityKind {
  logistic_mle,
  inv_linear_ml,
  inv_linear_moment,
  inv_linear_unconstrained,
  logistic_extended,
};

std::string_view to_string(PropensityKind kind) noexcept;

struct PropensityFit {
  PropensityKind kind = PropensityKind::logistic_mle;
  Eigen::VectorXd alpha;
  std::optional<double> phi;
  Eigen::VectorXd pi_hat;
  // alpha' x (+ phi h(x)) for the logistic kinds; alpha' x = 1/pi for the
  // inverse-linear kinds.
  Eigen::VectorXd linear_predictor;
  WeightDiagnostics diagnostics;
  bool converged = false;
  int iterations = 0;
};

PropensityFit fit_logistic_propensity(const Eigen::MatrixXd& design, const Eigen::VectorXd& t);

enum class InverseLinearMethod { likelihood, moment, unconstrained_moment };

struct InverseLinearOptions {
  double delta = 1e-6;
  int max_iterations = 10000;
  double tolerance = 1e-10;
};

// pi(x; a) = 1 / (a' x).
//   likelihood:           max P_n[T log pi + (1-T) log(1-pi)]  s.t. a' x_i >= 1 + delta
//   moment:               min || P_n[(T/pi - 1) x] ||^2        s.t. a' x_i >= delta
//   unconstrained_moment: P_n[T x x'] a = P_n[x]
PropensityFit fit_inverse_linear(const Eigen::MatrixXd& design, const Eigen::VectorXd& t,
                                 InverseLinearMethod method, const InverseLinearOptions& options = {});

enum class OutcomeKind { reg, wls, ext_reg, dr_ipw_nr };

std::string_view to_string(OutcomeKind kind) noexcept;

struct OutcomeFit {
  OutcomeKind kind = OutcomeKind::reg;
  // For ext_reg and dr_ipw_nr the last coefficient is phi, the coefficient of
  // the appended covariate (1/pi_hat and pi_hat respectively).
  Eigen::VectorXd beta;
  Link link = Link::identity;
  Eigen::VectorXd m_hat;  // fitted values for every unit
  bool converged = false;
  int iterations = 0;
  double score_residual = 0;
};

// Unweighted fit among respondents: P_n[T x (Y - Phi(x' b))] = 0.
OutcomeFit fit_outcome_reg(const AnalysisView& view, Link link = Link::identity);

// Respondents weighted by 1/pi_hat: P_n[T/pi (Y - Phi(x' b)) x] = 0.
OutcomeFit fit_outcome_wls(const AnalysisView& view, const Eigen::VectorXd& pi_hat,
                           Link link = Link::identity);

// Covariate 1/pi_hat appended, unweighted. Needs pi_hat > 0 for every unit.
OutcomeFit fit_outcome_ext_reg(const AnalysisView& view, const Eigen::VectorXd& pi_hat,
                               Link link = Link::identity);

// Covariate pi_hat appended, weights 1/pi_hat. Needs pi_hat in (0, 1).
OutcomeFit fit_outcome_ipw_nr(const AnalysisView& view, const Eigen::VectorXd& pi_hat,
                              Link link = Link::identity);

struct RootOptions {
  double initial_half_width = 1.0;
  double max_half_width = 50.0;
  double value_tolerance = 1e-10;
};

// Extends a logistic fit to expit(a' x + phi h(x)) with phi solving
//   P_n[{T / expit(a' x + phi h(x)) - 1} {m_reg(x) - mu_ols}] = 0.
// An empty `h` selects the default h = m_reg - mu_ols. Throws NoRoot when the
// expanding bracket search finds no sign change.
PropensityFit fit_extended_propensity(const PropensityFit& base, const Eigen::VectorXd& h,
                                      const OutcomeFit& m_reg, double mu_ols, const Eigen::VectorXd& t,
                                      const RootOptions& options = {});

// The left-hand side g(phi) of the equation above.
double extended_propensity_equation(const PropensityFit& base, const Eigen::VectorXd& h,
                                    const Eigen::VectorXd& m_reg, double mu_ols,
                                    const Eigen::VectorXd& t, double phi);

}  // namespace drest
