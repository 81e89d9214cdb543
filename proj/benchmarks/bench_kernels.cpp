#include <benchmark/benchmark.h>

#include <vector>

#include "erlangmix/mixture_model.hpp"
#include "erlangmix/posterior.hpp"
#include "erlangmix/special_math.hpp"

using namespace erlangmix;

static void BM_ErlangLogSf(benchmark::State& state) {
  const int m = static_cast<int>(state.range(0));
  double t = 0.9 * m;
  for (auto _ : state) {
    benchmark::DoNotOptimize(erlang_log_sf(t, {m, 1.0}));
    t += 1e-9;
  }
}
BENCHMARK(BM_ErlangLogSf)->RangeMultiplier(10)->Range(1, 10000);

// Whole table for shapes 1..M by recurrence vs M independent calls.
static void BM_ErlangLogTable(benchmark::State& state) {
  const auto M = static_cast<std::size_t>(state.range(0));
  std::vector<double> lp(M), ls(M);
  for (auto _ : state) {
    erlang_log_table(0.6 * static_cast<double>(M), 1.0, lp, ls);
    benchmark::DoNotOptimize(lp.data());
    benchmark::DoNotOptimize(ls.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ErlangLogTable)->RangeMultiplier(4)->Range(4, 4096);

static void BM_ErlangLogTableNaive(benchmark::State& state) {
  const int M = static_cast<int>(state.range(0));
  std::vector<double> lp(static_cast<std::size_t>(M)), ls(static_cast<std::size_t>(M));
  for (auto _ : state) {
    for (int m = 1; m <= M; ++m) {
      lp[static_cast<std::size_t>(m - 1)] = erlang_log_pdf(0.6 * M, {m, 1.0});
      ls[static_cast<std::size_t>(m - 1)] = erlang_log_sf(0.6 * M, {m, 1.0});
    }
    benchmark::DoNotOptimize(lp.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ErlangLogTableNaive)->RangeMultiplier(4)->Range(4, 4096);

static void BM_MixtureCurves(benchmark::State& state) {
  const int M = static_cast<int>(state.range(0));
  Rng rng(3);
  std::vector<WeightVector> draws;
  for (int k = 0; k < 100; ++k) {
    draws.emplace_back(0.2, sample_dirichlet(std::vector<double>(static_cast<std::size_t>(M), 0.5), rng));
  }
  const auto grid = uniform_grid(0.3 * M, 512);
  for (auto _ : state) benchmark::DoNotOptimize(evaluate_curves(draws, grid));
  state.SetItemsProcessed(state.iterations() * 100 * 512);
}
BENCHMARK(BM_MixtureCurves)->Arg(10)->Arg(50)->Arg(200)->Unit(benchmark::kMillisecond);
