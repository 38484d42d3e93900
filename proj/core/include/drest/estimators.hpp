#pragma once

#include <Eigen/Dense>
#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "drest/dgp.hpp"
#include "drest/linmod.hpp"

namespace drest {

enum class EstimatorName {
  ols,         // P_n[m_reg]
  ht,          // P_n[T Y / pi]
  ipw_pop,     // P_n[T Y / pi] / P_n[T / pi]
  dr_reg,      // AIPW with m_reg
  dr_wls,      // P_n[m_wls]
  dr_ipw_nr,   // P_n[m_dr_ipw_nr]
  dr_ext_reg,  // P_n[m_ext_reg]
  b_dr_reg,    // bounded AIPW with m_reg
  b_dr_ext,    // bounded AIPW with pi_ext and m_reg
  full,        // complete-data sample mean (simulation only)
};

inline constexpr std::array<EstimatorName, 10> kAllEstimators{
    EstimatorName::ols,       EstimatorName::ht,         EstimatorName::ipw_pop,  EstimatorName::dr_reg,
    EstimatorName::dr_wls,    EstimatorName::dr_ipw_nr,  EstimatorName::dr_ext_reg,
    EstimatorName::b_dr_reg,  EstimatorName::b_dr_ext,   EstimatorName::full};

// The eight estimators tabulated in the simulation study.
inline constexpr std::array<EstimatorName, 8> kStudyEstimators{
    EstimatorName::ols,    EstimatorName::ht,        EstimatorName::ipw_pop,  EstimatorName::dr_reg,
    EstimatorName::dr_wls, EstimatorName::dr_ipw_nr, EstimatorName::b_dr_reg, EstimatorName::b_dr_ext};

// Exact output strings: OLS, HT, IPW_POP, DR_REG, DR_WLS, DR_IPW_NR,
// DR_EXT_REG, B_DR_REG, B_DR_EXT, FULL.
std::string_view to_string(EstimatorName name) noexcept;
std::optional<EstimatorName> parse_estimator_name(std::string_view text) noexcept;

// True for the estimators that combine a propensity and an outcome model.
bool is_dr_estimator(EstimatorName name) noexcept;

enum class EstimateStatus { ok, out_of_observed_range, fit_failed, unavailable };

std::string_view to_string(EstimateStatus status) noexcept;

struct EstimateSet {
  std::map<EstimatorName, double> values;
  std::map<EstimatorName, EstimateStatus> flags;
  std::map<EstimatorName, std::string> notes;
  WeightDiagnostics diagnostics;
  std::optional<double> phi_ext;

  std::optional<double> value(EstimatorName name) const;
  bool succeeded(EstimatorName name) const;
};

// Vectors are indexed by unit; y is only read where t == 1, so it may hold
// NaN for nonrespondents. Every function throws InvalidWeight when a
// respondent has a nonpositive or non-finite pi_hat.
double mu_ht(const Eigen::VectorXd& pi_hat, const Eigen::VectorXd& t, const Eigen::VectorXd& y);
double mu_ipw_pop(const Eigen::VectorXd& pi_hat, const Eigen::VectorXd& t, const Eigen::VectorXd& y);
double mu_aipw(const Eigen::VectorXd& pi_hat, const Eigen::VectorXd& m_hat, const Eigen::VectorXd& t,
               const Eigen::VectorXd& y);
double mu_b_dr(const Eigen::VectorXd& pi_hat, const Eigen::VectorXd& m_hat, const Eigen::VectorXd& t,
               const Eigen::VectorXd& y);
double mu_from_regression(const Eigen::VectorXd& m_hat);
double mu_full(const Eigen::VectorXd& y);

// Fits the logistic propensity on design_pi and the outcome models on
// design_m, then evaluates each requested estimator. A failed fit flags only
// the estimators that depend on it. With no nonrespondents the propensity is
// taken as identically 1. `full` supplies complete outcomes for FULL.
EstimateSet estimate_all(const AnalysisView& view, std::span<const EstimatorName> which,
                         const FullSample* full = nullptr, Link link = Link::identity);

// One DR estimator from a given propensity fit; throws on any fit failure.
double evaluate_dr_estimator(EstimatorName name, const AnalysisView& view, const PropensityFit& propensity,
                             Link link = Link::identity);

struct IdentityReport {
  bool checked = false;
  std::string skipped_reason;
  double mu_ols = 0;
  double bounded_ht = 0;       // P_n[T a'X Y] / P_n[T a'X], a from the unconstrained moment solve
  double weighted_count = 0;   // P_n[T a'X]; 1 when the intercept row holds
  double max_weighted_residual = 0; // scale-free sum_resp (a'x)(y - m_reg) over random a
  Eigen::VectorXd alpha_inv;

  bool passed(double tolerance = 1e-8) const;
};

// Checks that OLS is simultaneously a DR estimator under the inverse-linear
// propensity (weighted residuals vanish for any a) and a bounded IPW
// estimator. Identity link only.
IdentityReport mu_ols_identities_check(const AnalysisView& view, std::uint64_t seed = 0x5EEDULL);

}  // namespace drest
