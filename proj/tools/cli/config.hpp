#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "drest/dgp.hpp"
#include "drest/estimators.hpp"
#include "drest/linmod.hpp"
#include "drest/sensitivity.hpp"

namespace drest::cli {

// Invalid configuration; `line` is 1-based, 0 when no position is known.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::size_t line, const std::string& message);
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

struct ScenarioFlags {
  bool pi_correct = true;
  bool m_correct = true;
};

struct RunConfig {
  std::uint64_t base_seed = 20070401;
  std::size_t reps = 1000;
  std::vector<std::size_t> sample_sizes{200, 1000};
  std::vector<ScenarioFlags> scenarios{{true, true}, {true, false}, {false, true}, {false, false}};
  bool reverse_roles = false;
  std::vector<EstimatorName> estimators{kStudyEstimators.begin(), kStudyEstimators.end()};
  DgpConfig dgp;
  std::string output_dir = ".";
  bool write_values = false;

  // Fully resolved echo, defaults included. The output directory is left
  // out so that moving a run does not change its hash.
  nlohmann::json to_json() const;
};

RunConfig parse_run_config(std::string_view text);

// Model choice for `estimate`; covariates are column names of the data file.
struct EstimateConfig {
  std::optional<std::vector<std::string>> propensity_covariates;
  std::optional<std::vector<std::string>> outcome_covariates;
  Link link = Link::identity;
  std::vector<EstimatorName> estimators;  // empty: every estimator except FULL
};

EstimateConfig parse_estimate_config(std::string_view text);

struct ModelEntry {
  std::string label;
  std::vector<std::string> covariates;
  PropensityKind kind = PropensityKind::logistic_mle;
  Link link = Link::identity;
};

struct SensitivityConfig {
  EstimatorName estimator = EstimatorName::dr_wls;
  std::size_t boot_reps = 500;
  std::uint64_t seed = 1;
  std::vector<ModelEntry> propensity_models;
  std::vector<ModelEntry> outcome_models;
};

SensitivityConfig parse_sensitivity_config(std::string_view text);

}  // namespace drest::cli
