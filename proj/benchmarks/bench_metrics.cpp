#include <benchmark/benchmark.h>

#include <vector>

#include "drl/metrics.hpp"
#include "drl/rng.hpp"

namespace {

std::vector<drl::SemanticVector> random_set(std::size_t n, std::size_t dim) {
  drl::Rng rng(n * 131 + dim);
  std::vector<drl::SemanticVector> out(n);
  for (auto& v : out) {
    v.theta.resize(dim);
    double total = 0.0;
    for (double& x : v.theta) total += (x = rng.uniform() + 1e-6);
    for (double& x : v.theta) x /= total;
  }
  return out;
}

void BM_Disparity(benchmark::State& state) {
  const auto set = random_set(static_cast<std::size_t>(state.range(0)), 50);
  const drl::JrParams params;
  for (auto _ : state) benchmark::DoNotOptimize(drl::disparity(set, params));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Disparity)->Arg(100)->Arg(10000);

void BM_Relevance(benchmark::State& state) {
  const auto set = random_set(static_cast<std::size_t>(state.range(0)), 50);
  const auto query = random_set(1, 50).front();
  for (auto _ : state) benchmark::DoNotOptimize(drl::relevance(set, query));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Relevance)->Arg(100)->Arg(10000);

}  // namespace
