#include <benchmark/benchmark.h>

#include "erlangmix/data_sim.hpp"
#include "erlangmix/ddp_sampler.hpp"
#include "erlangmix/dp_sampler.hpp"

using namespace erlangmix;

namespace {

SurvivalDataset lognormal_data(std::size_t n, double mu, double s2, std::optional<Group> g, std::uint64_t seed) {
  Rng rng(seed);
  return generate({LogNormalMixture{{{1.0, {mu, s2}}}}, n, g, 0.2}, rng);
}

}  // namespace

// Full sweeps per second as the sample size grows.
static void BM_DpSweep(benchmark::State& state) {
  const auto data = lognormal_data(static_cast<std::size_t>(state.range(0)), 1.0, 0.25, std::nullopt, 1);
  const DpHyperparams hp;
  Rng rng(2);
  for (auto _ : state) {
    auto out = dp::run_chain(data, hp, {20, 0.0, 1}, rng);
    benchmark::DoNotOptimize(out.draws.data());
  }
  state.SetItemsProcessed(state.iterations() * 20);
}
BENCHMARK(BM_DpSweep)->Arg(50)->Arg(200)->Arg(800)->Unit(benchmark::kMillisecond);

static void BM_DdpSweep(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto data = SurvivalDataset::concat(lognormal_data(n, 1.0, 0.25, Group::Control, 1),
                                            lognormal_data(n, 1.3, 0.16, Group::Treatment, 2));
  const DdpHyperparams hp;
  Rng rng(3);
  for (auto _ : state) {
    auto out = ddp::run_chain(data, hp, {20, 0.0, 1}, rng);
    benchmark::DoNotOptimize(out.draws.data());
  }
  state.SetItemsProcessed(state.iterations() * 20);
}
BENCHMARK(BM_DdpSweep)->Arg(50)->Arg(200)->Unit(benchmark::kMillisecond);
