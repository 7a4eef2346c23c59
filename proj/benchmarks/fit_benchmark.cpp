#include <benchmark/benchmark.h>

#include "zee/calibration.hpp"
#include "zee/oracle.hpp"
#include "zee/simulate.hpp"
#include "zee/variance.hpp"

namespace {

zee::DgpConfig bench_config(int n) {
  zee::DgpConfig cfg;
  cfg.n = n;
  cfg.theta0 = zee::Vector(2);
  cfg.theta0 << 0.5, -0.3;
  cfg.baseline = 0.5;
  cfg.covariate_ranges = {{0.0, 1.0}, {0.0, 1.0}};
  cfg.tau = 2.0;
  cfg.c_max = 4.0;
  cfg.seed = 1;
  cfg.replicates = 1;
  return cfg;
}

void BM_FitAdditiveHazards(benchmark::State& state) {
  const auto views =
      zee::generate_views(bench_config(static_cast<int>(state.range(0))), 0);
  for (auto _ : state) {
    auto fit = zee::fit_additive_hazards(views.complete, zee::WeightScheme::unit());
    benchmark::DoNotOptimize(fit.theta);
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_FitAdditiveHazards)->RangeMultiplier(4)->Range(500, 32000)->Complexity();

void BM_InfluenceAndVariance(benchmark::State& state) {
  const auto views =
      zee::generate_views(bench_config(static_cast<int>(state.range(0))), 0);
  const auto scheme = zee::WeightScheme::ipw();
  const auto fit = zee::fit_additive_hazards(views.masked, scheme);
  for (auto _ : state) {
    zee::FitAnalysis analysis(views.masked, scheme, fit);
    auto rows = analysis.influence_theta();
    auto v = analysis.robust_variance(rows);
    benchmark::DoNotOptimize(v.value);
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_InfluenceAndVariance)->RangeMultiplier(4)->Range(500, 8000)->Complexity();

void BM_CalibrationSolve(benchmark::State& state) {
  const auto views =
      zee::generate_views(bench_config(static_cast<int>(state.range(0))), 0);
  for (auto _ : state) {
    auto sol = zee::solve_gamma(views.masked);
    benchmark::DoNotOptimize(sol.gamma);
  }
}
BENCHMARK(BM_CalibrationSolve)->RangeMultiplier(4)->Range(500, 8000);

void BM_OracleSolve(benchmark::State& state) {
  const auto views =
      zee::generate_views(bench_config(static_cast<int>(state.range(0))), 0);
  for (auto _ : state) {
    auto sol = zee::solve_ee(views.complete, zee::WeightScheme::unit());
    benchmark::DoNotOptimize(sol.theta);
  }
}
BENCHMARK(BM_OracleSolve)->Arg(20)->Arg(40);

}  // namespace

BENCHMARK_MAIN();
