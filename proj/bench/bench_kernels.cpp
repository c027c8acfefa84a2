// Serial vs OpenMP kernels on a batch shaped like a mid-training Case 0 day.
#include <benchmark/benchmark.h>

#include <random>

#include "evfleet/fqi.hpp"
#include "evfleet/forest.hpp"

using namespace evfleet;

namespace {

std::vector<Transition> synthetic_batch(std::size_t n) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Transition> batch;
  batch.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Transition t;
    const int lo = static_cast<int>(u(rng) * 10);
    const int hi = lo + static_cast<int>(u(rng) * 60);
    t.feasible = {lo, hi};
    t.action = lo + static_cast<int>(u(rng) * (hi - lo));
    t.next_feasible = {lo, hi};
    for (int f = 0; f < 8; ++f) {
      t.state.push_back(f == 0 ? 20.0 * static_cast<double>(i % 72) : 100 * u(rng));
      t.next_state.push_back(f == 0 ? 20.0 * static_cast<double>((i + 1) % 72) : 100 * u(rng));
    }
    const double gap = 31.0 - 5.0 * t.action;
    t.reward = -gap * gap + 10 * u(rng);
    batch.push_back(std::move(t));
  }
  return batch;
}

TrainSet training_set(std::size_t n) {
  return bellman_targets(synthetic_batch(n), QModel{}, 0.95);
}

void BM_ForestFit(benchmark::State& state) {
  const TrainSet data = training_set(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(Forest::fit(data, ForestParams{}, 3));
}

void BM_ForestFitSerial(benchmark::State& state) {
  const TrainSet data = training_set(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(Forest::fit_serial(data, ForestParams{}, 3));
}

void BM_BestNext(benchmark::State& state) {
  const auto batch = synthetic_batch(static_cast<std::size_t>(state.range(0)));
  const QModel q(Forest::fit(bellman_targets(batch, QModel{}, 0.95), ForestParams{}, 3), 8);
  for (auto _ : state) benchmark::DoNotOptimize(best_next_values(batch, q));
}

void BM_BestNextSerial(benchmark::State& state) {
  const auto batch = synthetic_batch(static_cast<std::size_t>(state.range(0)));
  const QModel q(Forest::fit(bellman_targets(batch, QModel{}, 0.95), ForestParams{}, 3), 8);
  for (auto _ : state) benchmark::DoNotOptimize(best_next_values_serial(batch, q));
}

}  // namespace

BENCHMARK(BM_ForestFit)->Arg(1440)->Arg(5400)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ForestFitSerial)->Arg(1440)->Arg(5400)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BestNext)->Arg(1440)->Arg(5400)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BestNextSerial)->Arg(1440)->Arg(5400)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
