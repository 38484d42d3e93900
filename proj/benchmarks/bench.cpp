#include <benchmark/benchmark.h>

#include "drest/dgp.hpp"
#include "drest/estimators.hpp"
#include "drest/linmod.hpp"
#include "drest/mc.hpp"
#include "drest/random.hpp"

using namespace drest;

static void BM_generate_sample(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(generate_sample(n, ++seed));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_generate_sample)->Arg(200)->Arg(1000)->Arg(100000);

static void BM_logistic_irls(benchmark::State& state) {
  const FullSample s = generate_sample(static_cast<std::size_t>(state.range(0)), 1);
  const Eigen::MatrixXd d = with_intercept(s.x);
  const Eigen::VectorXd w = Eigen::VectorXd::Ones(s.t.size());
  for (auto _ : state) benchmark::DoNotOptimize(irls_fit(d, s.t, w, Link::logit));
}
BENCHMARK(BM_logistic_irls)->Arg(200)->Arg(1000)->Arg(100000);

static void BM_estimate_all(benchmark::State& state) {
  const FullSample s = generate_sample(static_cast<std::size_t>(state.range(0)), 2);
  const AnalysisView v = make_view(s, false, false);
  for (auto _ : state) benchmark::DoNotOptimize(estimate_all(v, kAllEstimators, &s));
}
BENCHMARK(BM_estimate_all)->Arg(200)->Arg(1000);

static void BM_inverse_linear_likelihood(benchmark::State& state) {
  const FullSample s = generate_sample(1000, 3);
  const Eigen::MatrixXd d = with_intercept(s.x);
  for (auto _ : state) benchmark::DoNotOptimize(fit_inverse_linear(d, s.t, InverseLinearMethod::likelihood));
}
BENCHMARK(BM_inverse_linear_likelihood);

static void BM_scenario_100_reps(benchmark::State& state) {
  ScenarioSpec spec;
  spec.n = 1000;
  spec.reps = 100;
  spec.pi_model_correct = false;
  spec.m_model_correct = false;
  spec.estimators.assign(kStudyEstimators.begin(), kStudyEstimators.end());
  for (auto _ : state) benchmark::DoNotOptimize(run_scenario(spec, DgpConfig{}, {1, false}));
}
BENCHMARK(BM_scenario_100_reps)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
