#include <benchmark/benchmark.h>

#include "eem/control.hpp"
#include "eem/reference_ensemble.hpp"
#include "eem/simkit.hpp"

using namespace eem;

static void BM_FreeRun(benchmark::State& state) {
  const auto model = reference::ensemble();
  const auto T = static_cast<std::size_t>(state.range(0));
  SimulationOptions o;
  o.record_states = false;
  o.record_measurements = false;
  o.record_inputs = false;
  for (auto _ : state) {
    FreeRunPolicy p(model.N);
    auto rec = simulate(model, p, T, o);
    benchmark::DoNotOptimize(rec.h.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_FreeRun)->Arg(10000)->Unit(benchmark::kMillisecond);

static void BM_BalancedControl(benchmark::State& state) {
  const auto model = reference::ensemble();
  const auto T = static_cast<std::size_t>(state.range(0));
  ControllerConfig cfg{EnsembleWeight::uniform(model.N), default_observable_gain(model.N, 1.0),
                       default_collective_gain(200, 1.0)};
  cfg.mode = ControlMode::balanced;
  const EemController proto(model, cfg);
  SimulationOptions o;
  o.record_states = false;
  o.record_measurements = false;
  o.record_inputs = false;
  for (auto _ : state) {
    EemController ctl(model, cfg, proto.gains());
    auto rec = simulate(model, ctl, T, o);
    benchmark::DoNotOptimize(rec.h.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_BalancedControl)->Arg(10000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
