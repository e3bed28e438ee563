#include <benchmark/benchmark.h>

#include <random>

#include "aff/clustering.hpp"
#include "aff/neighborhood.hpp"

namespace {

std::vector<aff::Vec2> random_tokens(std::int64_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(0.0, 1000.0);
  std::vector<aff::Vec2> out(static_cast<std::size_t>(n), aff::Vec2{});
  for (auto& p : out) p = {d(rng), d(rng)};
  return out;
}

void bm_balanced_cluster(benchmark::State& state) {
  const auto tokens = random_tokens(state.range(0), 42);
  for (auto _ : state)
    benchmark::DoNotOptimize(aff::balanced_cluster(tokens, 8, aff::CurveKind::Hilbert));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(bm_balanced_cluster)->Arg(1 << 10)->Arg(1 << 14)->Arg(1 << 17)->Arg(1 << 20);

void bm_balanced_cluster_curves(benchmark::State& state) {
  const auto tokens = random_tokens(1 << 14, 42);
  const auto curve = static_cast<aff::CurveKind>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(aff::balanced_cluster(tokens, 8, curve));
}
BENCHMARK(bm_balanced_cluster_curves)->Arg(0)->Arg(1)->Arg(2);

void bm_neighbor_table(benchmark::State& state) {
  const auto tokens = random_tokens(state.range(0), 7);
  const auto assignment = aff::balanced_cluster(tokens, 8, aff::CurveKind::Hilbert);
  for (auto _ : state)
    benchmark::DoNotOptimize(aff::build_neighbor_table(tokens, assignment, 3));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(bm_neighbor_table)->Arg(1 << 10)->Arg(1 << 14);

}  // namespace

BENCHMARK_MAIN();
