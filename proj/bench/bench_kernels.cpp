#include <benchmark/benchmark.h>

#include <random>

#include "bci/dataset.hpp"
#include "bci/features.hpp"
#include "bci/kernels.hpp"

using namespace bci;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 4.0);
  Matrix m(rows, cols);
  for (auto& v : m.data()) v = n(rng);
  return m;
}

template <Matrix (*Fn)(const Matrix&, std::size_t, std::size_t, kernels::BandBins)>
void bm_band_power(benchmark::State& state) {
  const auto signal = random_matrix(static_cast<std::size_t>(state.range(0)), 3600, 1);
  const auto bins = kernels::band_bins(150, 600.0, 8.0, 12.0);
  for (auto _ : state) benchmark::DoNotOptimize(Fn(signal, 150, 75, bins));
}

template <std::vector<kernels::Nearest> (*Fn)(const Matrix&, const Matrix&)>
void bm_nearest(benchmark::State& state) {
  const auto exemplars = random_matrix(static_cast<std::size_t>(state.range(0)), 104, 2);
  const auto queries = random_matrix(256, 104, 3);
  for (auto _ : state) benchmark::DoNotOptimize(Fn(exemplars, queries));
}

template <std::vector<double> (*Fn)(const Matrix&)>
void bm_loo(benchmark::State& state) {
  const auto rows = random_matrix(static_cast<std::size_t>(state.range(0)), 104, 4);
  for (auto _ : state) benchmark::DoNotOptimize(Fn(rows));
}

template <Matrix (*Fn)(const std::vector<Trial>&, const FeatureSpec&)>
void bm_features(benchmark::State& state) {
  SynthConfig cfg;
  const auto ds = synthesize_dataset(cfg);
  const auto spec = fit_feature_spec(ds, FeatureSpec{});
  for (auto _ : state) benchmark::DoNotOptimize(Fn(ds.trials, spec));
}

}  // namespace

BENCHMARK(bm_band_power<kernels::band_power_rows_serial>)->Name("band_power/serial")->Arg(8)->Arg(64);
BENCHMARK(bm_band_power<kernels::band_power_rows>)->Name("band_power/openmp")->Arg(8)->Arg(64);
BENCHMARK(bm_nearest<kernels::nearest_rows_serial>)->Name("nearest/serial")->Arg(38)->Arg(1000);
BENCHMARK(bm_nearest<kernels::nearest_rows>)->Name("nearest/openmp")->Arg(38)->Arg(1000);
BENCHMARK(bm_loo<kernels::loo_nearest_serial>)->Name("loo_nearest/serial")->Arg(38)->Arg(1000);
BENCHMARK(bm_loo<kernels::loo_nearest>)->Name("loo_nearest/openmp")->Arg(38)->Arg(1000);
BENCHMARK(bm_features<extract_features_batch_serial>)->Name("features/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(bm_features<extract_features_batch>)->Name("features/openmp")->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
