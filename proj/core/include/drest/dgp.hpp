#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstddef>
#include <cstdint>

namespace drest {

// Parameters of the Kang-Schafer benchmark law:
//   Z ~ N(0, I_4),  Y = intercept + slope * (w . Z) + noise_sd * eps,
//   P(T = 1 | Z) = expit(c0 + c1 Z1 + ... + c4 Z4).
struct DgpConfig {
  double intercept = 210.0;
  double slope = 13.7;
  std::array<double, 4> z_star_weights{2.0, 1.0, 1.0, 1.0};
  std::array<double, 5> propensity_coefficients{0.0, -1.0, 0.5, -0.25, -0.1};
  double noise_sd = 1.0;

  // Throws InvalidArgument on a non-finite parameter or noise_sd <= 0.
  void validate() const;

  // Analytic moments of Y under this configuration.
  double outcome_mean() const noexcept { return intercept; }
  double outcome_variance() const noexcept;
};

// One simulated draw with everything the simulation knows, including the
// outcomes of nonrespondents. t holds 0/1 values.
struct FullSample {
  Eigen::MatrixXd z;        // n x 4 latent covariates
  Eigen::MatrixXd x;        // n x 4 observed (transformed) covariates
  Eigen::VectorXd pi_true;  // P(T = 1 | Z)
  Eigen::VectorXd t;
  Eigen::VectorXd y;

  std::size_t size() const noexcept { return static_cast<std::size_t>(y.size()); }
};

// The data an analyst sees: two design matrices (first column constant 1),
// the response indicator and the outcome, NaN wherever t == 0.
struct AnalysisView {
  Eigen::MatrixXd design_pi;
  Eigen::MatrixXd design_m;
  Eigen::VectorXd t;
  Eigen::VectorXd y_observed;

  std::size_t size() const noexcept { return static_cast<std::size_t>(t.size()); }
  std::size_t respondents() const noexcept;
};

// Misspecified covariate view: X1 = exp(Z1/2), X2 = Z2/(1+exp(Z1)) + 10,
// X3 = (Z1 Z3/25 + 0.6)^3, X4 = (Z2 + Z4 + 20)^2.
Eigen::RowVector4d transform_covariates(const Eigen::RowVector4d& z) noexcept;

// Per unit the stream is consumed as Z1..Z4, eps, then the uniform deciding T.
FullSample generate_sample(std::size_t n, std::uint64_t seed, const DgpConfig& cfg = {});

// Swaps the roles of respondents and nonrespondents (T -> 1 - T, pi -> 1 - pi).
FullSample reverse_roles(FullSample sample);

AnalysisView make_view(const FullSample& sample, bool pi_model_correct, bool m_model_correct);

// [1, covariates] with the intercept column prepended.
Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& covariates);

// Copy of y with NaN where t == 0.
Eigen::VectorXd mask_outcomes(const Eigen::VectorXd& t, const Eigen::VectorXd& y);

}  // namespace drest
