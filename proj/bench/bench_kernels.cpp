// Serial reference vs OpenMP kernels on case-study-sized inputs.
#include <benchmark/benchmark.h>

#include "cavwatch/dataset.hpp"
#include "cavwatch/detect.hpp"
#include "cavwatch/forest.hpp"
#include "cavwatch/simulator.hpp"

using namespace cavwatch;

namespace {

struct Fixture {
  Matrix X, Y;
  Fixture() {
    const auto ds = build_windows(simulate(SimConfig{}), 15, 5);
    const ConstantVelocityFrame frame(ds.spec);
    X = frame.features(ds.X);
    Y = frame.targets(ds.X, ds.Y);
  }
};

const Fixture &data() {
  static const Fixture f;
  return f;
}

ForestConfig bench_forest() {
  ForestConfig c;
  c.n_trees = 16;
  return c;
}

void BM_ForestFitSerial(benchmark::State &s) {
  for (auto _ : s) {
    RandomForest f(bench_forest());
    f.fit_serial(data().X, data().Y);
    benchmark::DoNotOptimize(f.trees().data());
  }
}

void BM_ForestFitOpenMP(benchmark::State &s) {
  for (auto _ : s) {
    RandomForest f(bench_forest());
    f.fit(data().X, data().Y);
    benchmark::DoNotOptimize(f.trees().data());
  }
}

const RandomForest &fitted() {
  static const RandomForest f = [] {
    RandomForest r(bench_forest());
    r.fit(data().X, data().Y);
    return r;
  }();
  return f;
}

void BM_ForestPredictSerial(benchmark::State &s) {
  fitted();
  for (auto _ : s) benchmark::DoNotOptimize(fitted().predict_serial(data().X).data());
}

void BM_ForestPredictOpenMP(benchmark::State &s) {
  fitted();
  for (auto _ : s) benchmark::DoNotOptimize(fitted().predict(data().X).data());
}

void BM_ResidualsSerial(benchmark::State &s) {
  const Matrix P = data().Y * 0.5;
  for (auto _ : s) benchmark::DoNotOptimize(residuals_serial(data().Y, P).S.data());
}

void BM_ResidualsOpenMP(benchmark::State &s) {
  const Matrix P = data().Y * 0.5;
  for (auto _ : s) benchmark::DoNotOptimize(residuals(data().Y, P).S.data());
}

}  // namespace

BENCHMARK(BM_ForestFitSerial)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_ForestFitOpenMP)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_ForestPredictSerial)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_ForestPredictOpenMP)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_ResidualsSerial)->Unit(benchmark::kMicrosecond)->UseRealTime();
BENCHMARK(BM_ResidualsOpenMP)->Unit(benchmark::kMicrosecond)->UseRealTime();

BENCHMARK_MAIN();
