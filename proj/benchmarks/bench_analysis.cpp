#include <benchmark/benchmark.h>

#include "awe/cluster.hpp"
#include "awe/eval.hpp"
#include "awe/rsa.hpp"

using namespace awe;

namespace {

nn::Tensor random(std::size_t r, std::size_t c, Rng& rng) {
  nn::Tensor t(r, c);
  for (double& v : t.values()) v = rng.normal();
  return t;
}

void BM_LinearCka(benchmark::State& state) {
  Rng rng(1);
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto x = random(128, n, rng), y = random(128, n, rng);
  for (auto _ : state) benchmark::DoNotOptimize(rsa::linear_cka(x, y));
}
BENCHMARK(BM_LinearCka)->Arg(100)->Arg(500)->Arg(2000);

void BM_RbfCka(benchmark::State& state) {
  Rng rng(2);
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto x = random(128, n, rng), y = random(128, n, rng);
  for (auto _ : state) benchmark::DoNotOptimize(rsa::rbf_cka(x, y));
}
BENCHMARK(BM_RbfCka)->Arg(100)->Arg(500);

void BM_MapSameDifferent(benchmark::State& state) {
  Rng rng(3);
  const auto n = static_cast<std::size_t>(state.range(0));
  eval::EvalSet set{random(128, n, rng), {}, {}};
  for (std::size_t i = 0; i < n; ++i) {
    set.words.push_back("w" + std::to_string(i % 50));
    set.speakers.push_back("s" + std::to_string(i % 4));
  }
  for (auto _ : state) benchmark::DoNotOptimize(eval::map_same_different(set).map);
}
BENCHMARK(BM_MapSameDifferent)->Arg(200)->Arg(1000);

void BM_WardLinkage(benchmark::State& state) {
  Rng rng(4);
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto pts = random(m, m, rng);
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < m; ++i) labels.push_back("L" + std::to_string(i));
  for (auto _ : state) benchmark::DoNotOptimize(cluster::ward_linkage(pts, labels).merges.data());
}
BENCHMARK(BM_WardLinkage)->Arg(8)->Arg(64);

}  // namespace
