#include <benchmark/benchmark.h>

#include <random>

#include "eem/allan.hpp"

using namespace eem;

static VectorXd random_walk(std::size_t n) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  VectorXd h(static_cast<Eigen::Index>(n));
  double acc = 0.0;
  for (auto& v : h) v = (acc += g(rng));
  return h;
}

static void BM_StatisticalAllan(benchmark::State& state) {
  const VectorXd h = random_walk(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(statistical_allan(h, 10, 1.0));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_StatisticalAllan)->Arg(100000)->Arg(1000000);

static void BM_AllanCurve(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const VectorXd h = random_walk(n);
  const auto ms = log_spaced_intervals(n, 30);
  for (auto _ : state) {
    auto c = allan_curve(h, 1.0, ms);
    benchmark::DoNotOptimize(c.variance.data());
  }
}
BENCHMARK(BM_AllanCurve)->Arg(100000)->Unit(benchmark::kMillisecond);
