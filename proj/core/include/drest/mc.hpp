#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "drest/dgp.hpp"
#include "drest/estimators.hpp"

namespace drest {

struct ScenarioSpec {
  std::size_t n = 1000;
  std::size_t reps = 1000;
  bool pi_model_correct = true;
  bool m_model_correct = true;
  bool reverse = false;
  std::uint64_t base_seed = 20070401;
  std::vector<EstimatorName> estimators{kStudyEstimators.begin(), kStudyEstimators.end()};

  void validate() const;
};

// both_right, pi_right_m_wrong, pi_wrong_m_right, both_wrong
std::string scenario_label(bool pi_model_correct, bool m_model_correct);

inline constexpr std::array<double, 7> kSummaryQuantiles{0.01, 0.05, 0.25, 0.50, 0.75, 0.95, 0.99};

struct SummaryRow {
  std::size_t count = 0;
  double bias = 0;
  double variance = 0;  // divisor count - 1; NaN when count == 1
  double mse = 0;       // divisor count
  double skewness = 0;  // population standardized third moment; 0 for constant input
  double min = 0;
  double max = 0;
  std::array<double, 7> quantiles{};
  bool variance_defined = false;
};

// Monte Carlo summary of `values` against the true mean. Quantiles use linear
// interpolation between order statistics. Throws InvalidArgument when empty.
SummaryRow summarize(std::span<const double> values, double mu_true);

// Linear interpolation at (count - 1) p on sorted input.
double quantile_sorted(std::span<const double> sorted, double p);

struct EstimatorSummary {
  EstimatorName name{};
  SummaryRow row;
  std::size_t failures = 0;
  std::vector<double> values;  // one per replication, NaN where it failed (when kept)
};

struct MCSummary {
  ScenarioSpec spec;
  double mu_true = 0;
  std::string prng;
  std::string seed_derivation;
  std::vector<EstimatorSummary> estimators;

  const EstimatorSummary* find(EstimatorName name) const;
};

struct RunOptions {
  unsigned workers = 1;
  bool keep_values = true;
};

// Replication r draws generate_sample(n, derive_seed(base_seed, r)), optionally
// reverses roles, and runs estimate_all on the scenario view. Results are
// reduced in replication order, so the summary does not depend on `workers`.
MCSummary run_scenario(const ScenarioSpec& spec, const DgpConfig& cfg = {}, const RunOptions& options = {});

// Kernel density of a set of Monte Carlo values.
struct DensityOptions {
  std::optional<double> bandwidth;      // Silverman's rule when empty
  std::optional<double> clip_quantile;  // drop values below q and above 1 - q
  std::size_t grid_points = 512;
  double pad_bandwidths = 3.0;
};

struct DensitySeries {
  std::vector<double> grid;
  std::vector<double> density;
  double bandwidth = 0;
  std::size_t used = 0;     // values kept after clipping
  std::size_t clipped = 0;  // values dropped by clipping
};

// 0.9 min(sd, IQR / 1.34) n^(-1/5); falls back to sd when the IQR is zero.
double silverman_bandwidth(std::span<const double> values);

// Gaussian-kernel density on an evenly spaced grid spanning [min, max] padded
// by pad_bandwidths bandwidths. Throws DegenerateInput for fewer than two
// distinct values.
DensitySeries density_points(std::span<const double> values, const DensityOptions& options = {});

// Trapezoid integral of the series.
double trapezoid_integral(const DensitySeries& series);

}  // namespace drest
