#include "drest/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "drest/errors.hpp"
#include "drest/random.hpp"

namespace drest {

namespace {

void check_lengths(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const char* who) {
  if (a.size() != b.size()) throw InvalidArgument(std::string(who) + ": length mismatch");
}

void require_respondent_weight(double pi, Eigen::Index i, const char* who) {
  if (!(pi > 0) || !std::isfinite(pi)) {
    throw InvalidWeight(std::string(who) + ": nonpositive or non-finite propensity for respondent row " +
                        std::to_string(i));
  }
}

struct WeightedSums {
  double inv_pi = 0;    // sum T / pi
  double y_inv_pi = 0;  // sum T Y / pi
  double r_inv_pi = 0;  // sum T (Y - m) / pi
  std::size_t respondents = 0;
};

WeightedSums weighted_sums(const Eigen::VectorXd& pi_hat, const Eigen::VectorXd* m_hat,
                           const Eigen::VectorXd& t, const Eigen::VectorXd& y, const char* who) {
  check_lengths(pi_hat, t, who);
  check_lengths(y, t, who);
  if (m_hat) check_lengths(*m_hat, t, who);
  WeightedSums s;
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    if (t[i] != 1.0) continue;
    require_respondent_weight(pi_hat[i], i, who);
    const double w = 1.0 / pi_hat[i];
    s.inv_pi += w;
    s.y_inv_pi += w * y[i];
    if (m_hat) s.r_inv_pi += w * (y[i] - (*m_hat)[i]);
    ++s.respondents;
  }
  return s;
}

double mean(const Eigen::VectorXd& v) {
  if (v.size() == 0) throw UndefinedEstimator("mean of an empty vector");
  return v.sum() / static_cast<double>(v.size());
}

PropensityFit no_missingness_fit(const Eigen::VectorXd& t) {
  PropensityFit fit;
  fit.kind = PropensityKind::logistic_mle;
  fit.pi_hat = Eigen::VectorXd::Ones(t.size());
  fit.linear_predictor = Eigen::VectorXd::Constant(t.size(), std::numeric_limits<double>::infinity());
  fit.diagnostics = weight_diagnostics(fit.pi_hat, t);
  fit.converged = true;
  return fit;
}

bool all_respond(const Eigen::VectorXd& t) {
  return t.size() > 0 && (t.array() == 1.0).all();
}

}  // namespace

std::string_view to_string(EstimatorName name) noexcept {
  switch (name) {
    case EstimatorName::ols: return "OLS";
    case EstimatorName::ht: return "HT";
    case EstimatorName::ipw_pop: return "IPW_POP";
    case EstimatorName::dr_reg: return "DR_REG";
    case EstimatorName::dr_wls: return "DR_WLS";
    case EstimatorName::dr_ipw_nr: return "DR_IPW_NR";
    case EstimatorName::dr_ext_reg: return "DR_EXT_REG";
    case EstimatorName::b_dr_reg: return "B_DR_REG";
    case EstimatorName::b_dr_ext: return "B_DR_EXT";
    case EstimatorName::full: return "FULL";
  }
  return "?";
}

std::optional<EstimatorName> parse_estimator_name(std::string_view text) noexcept {
  for (EstimatorName name : kAllEstimators) {
    if (to_string(name) == text) return name;
  }
  return std::nullopt;
}

bool is_dr_estimator(EstimatorName name) noexcept {
  switch (name) {
    case EstimatorName::dr_reg:
    case EstimatorName::dr_wls:
    case EstimatorName::dr_ipw_nr:
    case EstimatorName::dr_ext_reg:
    case EstimatorName::b_dr_reg:
    case EstimatorName::b_dr_ext: return true;
    default: return false;
  }
}

std::string_view to_string(EstimateStatus status) noexcept {
  switch (status) {
    case EstimateStatus::ok: return "ok";
    case EstimateStatus::out_of_observed_range: return "out_of_observed_range";
    case EstimateStatus::fit_failed: return "fit_failed";
    case EstimateStatus::unavailable: return "unavailable";
  }
  return "?";
}

std::optional<double> EstimateSet::value(EstimatorName name) const {
  auto it = values.find(name);
  if (it == values.end()) return std::nullopt;
  return it->second;
}

bool EstimateSet::succeeded(EstimatorName name) const {
  auto it = flags.find(name);
  return it != flags.end() &&
         (it->second == EstimateStatus::ok || it->second == EstimateStatus::out_of_observed_range);
}

double mu_ht(const Eigen::VectorXd& pi_hat, const Eigen::VectorXd& t, const Eigen::VectorXd& y) {
  const WeightedSums s = weighted_sums(pi_hat, nullptr, t, y, "mu_ht");
  return s.y_inv_pi / static_cast<double>(t.size());
}

double mu_ipw_pop(const Eigen::VectorXd& pi_hat, const Eigen::VectorXd& t, const Eigen::VectorXd& y) {
  const WeightedSums s = weighted_sums(pi_hat, nullptr, t, y, "mu_ipw_pop");
  if (s.respondents == 0) throw UndefinedEstimator("mu_ipw_pop: no respondents");
  return s.y_inv_pi / s.inv_pi;
}

double mu_aipw(const Eigen::VectorXd& pi_hat, const Eigen::VectorXd& m_hat, const Eigen::VectorXd& t,
               const Eigen::VectorXd& y) {
  const WeightedSums s = weighted_sums(pi_hat, &m_hat, t, y, "mu_aipw");
  return mean(m_hat) + s.r_inv_pi / static_cast<double>(t.size());
}

double mu_b_dr(const Eigen::VectorXd& pi_hat, const Eigen::VectorXd& m_hat, const Eigen::VectorXd& t,
               const Eigen::VectorXd& y) {
  const WeightedSums s = weighted_sums(pi_hat, &m_hat, t, y, "mu_b_dr");
  if (s.respondents == 0 || !(s.inv_pi > 0)) throw UndefinedEstimator("mu_b_dr: P_n[T/pi] is zero");
  return mean(m_hat) + s.r_inv_pi / s.inv_pi;
}

double mu_from_regression(const Eigen::VectorXd& m_hat) { return mean(m_hat); }

double mu_full(const Eigen::VectorXd& y) {
  if (!y.allFinite()) throw InvalidArgument("mu_full: complete outcomes required");
  return mean(y);
}

double evaluate_dr_estimator(EstimatorName name, const AnalysisView& view, const PropensityFit& propensity,
                             Link link) {
  const Eigen::VectorXd& pi = propensity.pi_hat;
  switch (name) {
    case EstimatorName::dr_reg: {
      const OutcomeFit reg = fit_outcome_reg(view, link);
      return mu_aipw(pi, reg.m_hat, view.t, view.y_observed);
    }
    case EstimatorName::b_dr_reg: {
      const OutcomeFit reg = fit_outcome_reg(view, link);
      return mu_b_dr(pi, reg.m_hat, view.t, view.y_observed);
    }
    case EstimatorName::dr_wls: return mu_from_regression(fit_outcome_wls(view, pi, link).m_hat);
    case EstimatorName::dr_ipw_nr: return mu_from_regression(fit_outcome_ipw_nr(view, pi, link).m_hat);
    case EstimatorName::dr_ext_reg: return mu_from_regression(fit_outcome_ext_reg(view, pi, link).m_hat);
    case EstimatorName::b_dr_ext: {
      const OutcomeFit reg = fit_outcome_reg(view, link);
      const double mu_ols = mu_from_regression(reg.m_hat);
      if (all_respond(view.t)) return mu_b_dr(pi, reg.m_hat, view.t, view.y_observed);
      const PropensityFit ext = fit_extended_propensity(propensity, {}, reg, mu_ols, view.t);
      return mu_b_dr(ext.pi_hat, reg.m_hat, view.t, view.y_observed);
    }
    default:
      throw InvalidArgument("evaluate_dr_estimator: " + std::string(to_string(name)) +
                            " is not a DR estimator");
  }
}

EstimateSet estimate_all(const AnalysisView& view, std::span<const EstimatorName> which, const FullSample* full,
                         Link link) {
  EstimateSet out;

  auto wants = [&](EstimatorName name) { return std::find(which.begin(), which.end(), name) != which.end(); };

  // Lazily computed fits; each remembers its failure so that dependants are
  // flagged with the original reason.
  std::optional<PropensityFit> pi;
  std::optional<OutcomeFit> reg;
  std::string pi_error, reg_error;
  bool pi_tried = false, reg_tried = false;

  auto propensity = [&]() -> const PropensityFit& {
    if (!pi_tried) {
      pi_tried = true;
      try {
        pi = all_respond(view.t) ? no_missingness_fit(view.t) : fit_logistic_propensity(view.design_pi, view.t);
        out.diagnostics = pi->diagnostics;
      } catch (const Error& e) {
        pi_error = std::string("propensity fit: ") + e.what();
      }
    }
    if (!pi) throw Error(pi_error);
    return *pi;
  };
  auto regression = [&]() -> const OutcomeFit& {
    if (!reg_tried) {
      reg_tried = true;
      try {
        reg = fit_outcome_reg(view, link);
      } catch (const Error& e) {
        reg_error = std::string("outcome REG fit: ") + e.what();
      }
    }
    if (!reg) throw Error(reg_error);
    return *reg;
  };

  const Eigen::VectorXd& t = view.t;
  const Eigen::VectorXd& y = view.y_observed;

  auto compute = [&](EstimatorName name) -> double {
    switch (name) {
      case EstimatorName::ols: return mu_from_regression(regression().m_hat);
      case EstimatorName::ht: return mu_ht(propensity().pi_hat, t, y);
      case EstimatorName::ipw_pop: return mu_ipw_pop(propensity().pi_hat, t, y);
      case EstimatorName::dr_reg: return mu_aipw(propensity().pi_hat, regression().m_hat, t, y);
      case EstimatorName::b_dr_reg: return mu_b_dr(propensity().pi_hat, regression().m_hat, t, y);
      case EstimatorName::dr_wls: return mu_from_regression(fit_outcome_wls(view, propensity().pi_hat, link).m_hat);
      case EstimatorName::dr_ipw_nr:
        return mu_from_regression(fit_outcome_ipw_nr(view, propensity().pi_hat, link).m_hat);
      case EstimatorName::dr_ext_reg:
        return mu_from_regression(fit_outcome_ext_reg(view, propensity().pi_hat, link).m_hat);
      case EstimatorName::b_dr_ext: {
        const PropensityFit& base = propensity();
        const OutcomeFit& m = regression();
        if (all_respond(t)) {
          out.phi_ext = 0.0;
          return mu_b_dr(base.pi_hat, m.m_hat, t, y);
        }
        const PropensityFit ext = fit_extended_propensity(base, {}, m, mu_from_regression(m.m_hat), t);
        out.phi_ext = ext.phi;
        return mu_b_dr(ext.pi_hat, m.m_hat, t, y);
      }
      case EstimatorName::full: return mu_full(full->y);
    }
    throw InvalidArgument("estimate_all: unknown estimator");
  };

  double y_min = std::numeric_limits<double>::infinity();
  double y_max = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    if (t[i] == 1.0 && std::isfinite(y[i])) y_min = std::min(y_min, y[i]), y_max = std::max(y_max, y[i]);
  }

  for (EstimatorName name : kAllEstimators) {
    if (!wants(name)) continue;
    if (name == EstimatorName::full && full == nullptr) {
      out.flags[name] = EstimateStatus::unavailable;
      out.notes[name] = "complete outcomes not available";
      continue;
    }
    try {
      const double v = compute(name);
      if (!std::isfinite(v)) throw Error("non-finite estimate");
      out.values[name] = v;
      const bool inside = name == EstimatorName::full || (v >= y_min && v <= y_max);
      out.flags[name] = inside ? EstimateStatus::ok : EstimateStatus::out_of_observed_range;
    } catch (const Error& e) {
      out.flags[name] = EstimateStatus::fit_failed;
      out.notes[name] = e.what();
    }
  }
  return out;
}

bool IdentityReport::passed(double tolerance) const {
  return checked && std::abs(mu_ols - bounded_ht) <= tolerance && max_weighted_residual <= tolerance;
}

IdentityReport mu_ols_identities_check(const AnalysisView& view, std::uint64_t seed) {
  IdentityReport report;
  const Eigen::VectorXd& t = view.t;
  const Eigen::VectorXd& y = view.y_observed;
  const Eigen::MatrixXd& x = view.design_m;
  const auto n = static_cast<double>(t.size());

  OutcomeFit reg;
  PropensityFit inv;
  try {
    reg = fit_outcome_reg(view, Link::identity);
    inv = fit_inverse_linear(x, t, InverseLinearMethod::unconstrained_moment);
  } catch (const Error& e) {
    report.skipped_reason = e.what();
    return report;
  }
  report.checked = true;
  report.mu_ols = mu_from_regression(reg.m_hat);
  report.alpha_inv = inv.alpha;

  double num = 0, den = 0;
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    if (t[i] != 1.0) continue;
    const double u = inv.linear_predictor[i];
    num += u * y[i];
    den += u;
  }
  report.weighted_count = den / n;
  report.bounded_ht = num / den;

  // Weighted respondent residuals for the zero vector and three random a.
  Rng rng(seed);
  double y_scale = 1.0;
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    if (t[i] == 1.0) y_scale = std::max(y_scale, std::abs(y[i]));
  }
  for (int draw = 0; draw < 4; ++draw) {
    Eigen::VectorXd a = Eigen::VectorXd::Zero(x.cols());
    if (draw > 0) {
      for (Eigen::Index k = 0; k < a.size(); ++k) a[k] = rng.normal();
    }
    double s = 0, scale = 0;
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      if (t[i] != 1.0) continue;
      const double u = x.row(i).dot(a);
      s += u * (y[i] - reg.m_hat[i]);
      scale += std::abs(u);
    }
    if (scale > 0) report.max_weighted_residual = std::max(report.max_weighted_residual, std::abs(s) / (scale * y_scale));
  }
  return report;
}

}  // namespace drest
