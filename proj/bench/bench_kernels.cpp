// Serial reference vs OpenMP kernel timings.

#include <benchmark/benchmark.h>

#include <numeric>
#include <random>

#include "amr/gbt_kernels.hpp"
#include "amr/models.hpp"
#include "amr/vector_index.hpp"

using namespace amr;

namespace {

FeatureMatrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 100.0);
  FeatureMatrix X(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) X(r, c) = u(rng);
    X.target()[r] = 0.6 * X(r, 0) + 0.1 * u(rng);
  }
  return X;
}

struct SplitInput {
  gbt::BinnedMatrix binned;
  std::vector<std::uint32_t> rows;
  std::vector<double> grad;
  double total = 0.0;

  explicit SplitInput(std::size_t n) {
    const auto X = random_matrix(n, 8, 1);
    binned = gbt::bin_quantile(X, 64);
    rows.resize(n);
    std::iota(rows.begin(), rows.end(), 0U);
    grad.resize(n);
    for (std::size_t i = 0; i < n; ++i) grad[i] = 50.0 - X.target()[i];
    total = std::accumulate(grad.begin(), grad.end(), 0.0);
  }
};

void BM_SplitSerial(benchmark::State& state) {
  const SplitInput in(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state)
    benchmark::DoNotOptimize(gbt::find_best_split_serial(in.binned, in.rows, in.grad, in.total, {}));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_SplitParallel(benchmark::State& state) {
  const SplitInput in(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state)
    benchmark::DoNotOptimize(gbt::find_best_split_parallel(in.binned, in.rows, in.grad, in.total, {}));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

std::vector<IndexEntry> random_entries(std::size_t n) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<IndexEntry> out(n);
  for (auto& e : out) {
    for (auto& x : e.vector) x = z(rng);
    normalize(e.vector);
  }
  return out;
}

void BM_ScoreSerial(benchmark::State& state) {
  const auto entries = random_entries(static_cast<std::size_t>(state.range(0)));
  const auto q = entries.front().vector;
  for (auto _ : state) benchmark::DoNotOptimize(kernels::score_all_serial(entries, q));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_ScoreParallel(benchmark::State& state) {
  const auto entries = random_entries(static_cast<std::size_t>(state.range(0)));
  const auto q = entries.front().vector;
  for (auto _ : state) benchmark::DoNotOptimize(kernels::score_all_parallel(entries, q));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_GridSearch(benchmark::State& state) {
  const auto train = random_matrix(2000, 8, 3);
  const auto val = random_matrix(500, 8, 4);
  GbtGrid grid;
  grid.learning_rate = {0.1, 0.3};
  grid.max_depth = {3, 5};
  grid.n_estimators = {30};
  grid.subsample = {0.8, 1.0};
  const bool parallel = state.range(0) != 0;
  for (auto _ : state) benchmark::DoNotOptimize(grid_search(SplitMode::Histogram, grid, train, val, parallel));
}

}  // namespace

BENCHMARK(BM_SplitSerial)->Arg(4096)->Arg(65536)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_SplitParallel)->Arg(4096)->Arg(65536)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_ScoreSerial)->Arg(2048)->Arg(50000)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_ScoreParallel)->Arg(2048)->Arg(50000)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_GridSearch)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
