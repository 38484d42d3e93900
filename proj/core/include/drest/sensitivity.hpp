#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "drest/dgp.hpp"
#include "drest/estimators.hpp"
#include "drest/linmod.hpp"

namespace drest {

enum class ModelRole { propensity, outcome };

// A candidate working model: a subset of the candidate covariates (the
// intercept is always added) and how it is fitted. Propensity specs use
// `propensity_kind` (logistic or one of the inverse-linear fits); outcome
// specs use `link`. The outcome fitting method itself follows from the DR
// estimator being tabulated.
struct ModelSpec {
  ModelRole role = ModelRole::propensity;
  std::vector<std::size_t> covariates;
  PropensityKind propensity_kind = PropensityKind::logistic_mle;
  Link link = Link::identity;
  std::string label;

  void validate(std::size_t available_covariates) const;
};

// Unit-level data shared by every candidate model. y may be NaN where t == 0.
struct SensitivityData {
  Eigen::MatrixXd covariates;
  Eigen::VectorXd t;
  Eigen::VectorXd y;

  std::size_t size() const noexcept { return static_cast<std::size_t>(t.size()); }
  SensitivityData resample(std::span<const std::size_t> rows) const;
};

// Candidate covariates [Z1..Z4, X1..X4] of a simulated sample: indices 0-3
// give the correct models, 4-7 the misspecified ones.
SensitivityData sensitivity_data(const FullSample& sample);

Eigen::MatrixXd design_for(const SensitivityData& data, const ModelSpec& spec);
PropensityFit fit_propensity_spec(const SensitivityData& data, const ModelSpec& spec);

// Entry (i, j) is the chosen DR estimator from propensity spec i and outcome
// spec j; NaN marks an entry whose fits failed. Throws InvalidArgument for a
// non-DR estimator or an empty spec list.
Eigen::MatrixXd build_matrix(const SensitivityData& data, std::span<const ModelSpec> p_specs,
                             std::span<const ModelSpec> o_specs, EstimatorName estimator);

struct HomogeneityResult {
  double statistic = 0;
  double p_value = 1;
  std::size_t df = 0;
  std::size_t draws = 0;      // bootstrap draws used
  bool reduced_rank = false;  // contrast covariance was rank deficient
  bool defined = true;        // false when the line itself has a failed entry
  std::string note;
};

// Wald test of equal means along one line of the matrix. `draws` holds one
// bootstrap replicate of the line per row; draws with a NaN are dropped.
// Contrasts are first-vs-rest; the covariance is inverted on its numerical
// range (eigenvalues above 1e-10 of the largest) and the degrees of freedom
// reduced to match.
HomogeneityResult wald_homogeneity(const Eigen::VectorXd& line, const Eigen::MatrixXd& draws);

// Bootstrap homogeneity test of the line obtained by holding `fixed` and
// varying the specs in `varying` (which must have the other role).
HomogeneityResult homogeneity_test(const SensitivityData& data, const ModelSpec& fixed,
                                   std::span<const ModelSpec> varying, EstimatorName estimator,
                                   std::size_t boot_reps, std::uint64_t seed, unsigned workers = 1);

// Bootstrap replicates of the whole matrix; draw b resamples units with
// replacement using derive_seed(seed, b).
std::vector<Eigen::MatrixXd> bootstrap_matrices(const SensitivityData& data, std::span<const ModelSpec> p_specs,
                                                std::span<const ModelSpec> o_specs, EstimatorName estimator,
                                                std::size_t boot_reps, std::uint64_t seed, unsigned workers = 1);

struct Selection {
  std::size_t i_star = 0;  // 0-based row
  std::size_t j_star = 0;  // 0-based column
};

// argmax p-value per direction; ties go to the smaller spread, then the
// lower index. Undefined (NaN) p-values never win.
Selection select_models(std::span<const double> row_p, std::span<const double> row_spread,
                        std::span<const double> col_p, std::span<const double> col_spread);

struct SensitivityOptions {
  std::size_t boot_reps = 500;
  std::uint64_t seed = 1;
  unsigned workers = 1;
};

struct SensitivityMatrix {
  EstimatorName estimator{};
  Eigen::MatrixXd estimates;
  std::vector<HomogeneityResult> row_tests;  // H_p,i
  std::vector<HomogeneityResult> col_tests;  // H_o,j
  std::vector<double> row_p_values, col_p_values;
  std::vector<double> row_spread, col_spread;  // max - min over defined entries
  Selection selection;
  std::vector<std::string> flags;
};

SensitivityMatrix analyze_sensitivity(const SensitivityData& data, std::span<const ModelSpec> p_specs,
                                      std::span<const ModelSpec> o_specs, EstimatorName estimator,
                                      const SensitivityOptions& options = {});

}  // namespace drest
