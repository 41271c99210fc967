#include <benchmark/benchmark.h>

#include "eem/filters.hpp"
#include "eem/reference_ensemble.hpp"

using namespace eem;

static void BM_StandardKFStep(benchmark::State& state) {
  const auto model = reference::ensemble_subset(static_cast<std::size_t>(state.range(0)));
  const VectorXd u = VectorXd::Zero(static_cast<Eigen::Index>(model.N));
  const VectorXd y = VectorXd::Zero(static_cast<Eigen::Index>(model.N) - 1);
  auto st = standard_kf_init(model);
  for (auto _ : state) {
    st = standard_kf_step(model, st, u, y);
    benchmark::DoNotOptimize(st.xhat.data());
  }
}
BENCHMARK(BM_StandardKFStep)->Arg(3)->Arg(10);

static void BM_DeterminateKFStep(benchmark::State& state) {
  const auto model = reference::ensemble_subset(static_cast<std::size_t>(state.range(0)));
  const auto d = decompose(model, EnsembleWeight::uniform(model.N));
  const VectorXd u = VectorXd::Zero(static_cast<Eigen::Index>(model.N));
  const VectorXd y = VectorXd::Zero(static_cast<Eigen::Index>(model.N) - 1);
  auto st = determinate_kf_init(d);
  for (auto _ : state) {
    st = determinate_kf_step(d, model.meas.R, st, u, y);
    benchmark::DoNotOptimize(st.est.xi_o.data());
  }
}
BENCHMARK(BM_DeterminateKFStep)->Arg(3)->Arg(10);

static void BM_StationaryKFStep(benchmark::State& state) {
  const auto model = reference::ensemble();
  const auto d = decompose(model, EnsembleWeight::uniform(model.N));
  const auto g = solve_stationary(d, model.meas.R);
  const VectorXd u = VectorXd::Zero(10);
  const VectorXd y = VectorXd::Zero(9);
  auto est = stationary_kf_init(d);
  for (auto _ : state) {
    est = stationary_kf_step(d, g, est, u, y);
    benchmark::DoNotOptimize(est.xi_o.data());
  }
}
BENCHMARK(BM_StationaryKFStep);

static void BM_SolveStationary(benchmark::State& state) {
  const auto model = reference::ensemble();
  const auto d = decompose(model, EnsembleWeight::uniform(model.N));
  for (auto _ : state) {
    auto g = solve_stationary(d, model.meas.R);
    benchmark::DoNotOptimize(g.H_o_star.data());
  }
}
BENCHMARK(BM_SolveStationary)->Unit(benchmark::kMillisecond);
