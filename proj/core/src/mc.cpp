#include "drest/mc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "drest/errors.hpp"
#include "drest/parallel.hpp"
#include "drest/random.hpp"

namespace drest {

void ScenarioSpec::validate() const {
  if (reps < 1) throw InvalidArgument("scenario: reps must be at least 1");
  if (n < 2) throw InvalidArgument("scenario: n must be at least 2");
  if (estimators.empty()) throw InvalidArgument("scenario: no estimators requested");
}

std::string scenario_label(bool pi_model_correct, bool m_model_correct) {
  if (pi_model_correct && m_model_correct) return "both_right";
  if (pi_model_correct) return "pi_right_m_wrong";
  if (m_model_correct) return "pi_wrong_m_right";
  return "both_wrong";
}

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw InvalidArgument("quantile of empty input");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

SummaryRow summarize(std::span<const double> values, double mu_true) {
  if (values.empty()) throw InvalidArgument("summarize: no values");
  SummaryRow row;
  const auto r = static_cast<double>(values.size());
  row.count = values.size();

  double mean = 0;
  for (double v : values) mean += v;
  mean /= r;

  double m2 = 0, m3 = 0, sq_err = 0;
  for (double v : values) {
    const double d = v - mean;
    m2 += d * d;
    m3 += d * d * d;
    sq_err += (v - mu_true) * (v - mu_true);
  }

  row.bias = mean - mu_true;
  row.mse = sq_err / r;
  row.variance_defined = values.size() > 1;
  row.variance = row.variance_defined ? m2 / (r - 1.0) : std::numeric_limits<double>::quiet_NaN();
  const double pop_var = m2 / r;
  row.skewness = pop_var > 0 ? (m3 / r) / std::pow(pop_var, 1.5) : 0.0;

  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  row.min = sorted.front();
  row.max = sorted.back();
  for (std::size_t q = 0; q < kSummaryQuantiles.size(); ++q) {
    row.quantiles[q] = quantile_sorted(sorted, kSummaryQuantiles[q]);
  }
  return row;
}

const EstimatorSummary* MCSummary::find(EstimatorName name) const {
  for (const auto& e : estimators) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

MCSummary run_scenario(const ScenarioSpec& spec, const DgpConfig& cfg, const RunOptions& options) {
  spec.validate();
  cfg.validate();

  const std::size_t reps = spec.reps;
  const std::size_t k = spec.estimators.size();
  const double nan = std::numeric_limits<double>::quiet_NaN();

  // results[r * k + e]; NaN marks a failed estimator in that replication.
  std::vector<double> results(reps * k, nan);

  parallel_for(reps, options.workers, [&](std::size_t r) {
    FullSample sample = generate_sample(spec.n, derive_seed(spec.base_seed, r), cfg);
    if (spec.reverse) sample = reverse_roles(std::move(sample));
    const AnalysisView view = make_view(sample, spec.pi_model_correct, spec.m_model_correct);
    const EstimateSet set = estimate_all(view, spec.estimators, &sample);
    for (std::size_t e = 0; e < k; ++e) {
      if (set.succeeded(spec.estimators[e])) results[r * k + e] = *set.value(spec.estimators[e]);
    }
  });

  MCSummary summary;
  summary.spec = spec;
  summary.mu_true = cfg.outcome_mean();
  summary.prng = std::string(kPrngName);
  summary.seed_derivation = std::string(kSeedDerivation);

  for (std::size_t e = 0; e < k; ++e) {
    EstimatorSummary es;
    es.name = spec.estimators[e];
    std::vector<double> ok;
    ok.reserve(reps);
    for (std::size_t r = 0; r < reps; ++r) {
      const double v = results[r * k + e];
      if (std::isnan(v)) ++es.failures;
      else ok.push_back(v);
    }
    if (!ok.empty()) es.row = summarize(ok, summary.mu_true);
    if (options.keep_values) {
      es.values.resize(reps);
      for (std::size_t r = 0; r < reps; ++r) es.values[r] = results[r * k + e];
    }
    summary.estimators.push_back(std::move(es));
  }
  return summary;
}

}  // namespace drest
