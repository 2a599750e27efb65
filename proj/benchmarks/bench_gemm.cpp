#include <benchmark/benchmark.h>

#include "awe/rng.hpp"
#include "awe/tensor.hpp"

using awe::nn::Tensor;

namespace {

Tensor random(std::size_t r, std::size_t c, awe::Rng& rng) {
  Tensor t(r, c);
  for (double& v : t.values()) v = rng.normal();
  return t;
}

void BM_Gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  awe::Rng rng(1);
  const Tensor a = random(n, n, rng), b = random(n, n, rng);
  Tensor c;
  for (auto _ : state) {
    awe::nn::gemm(a, b, c);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Gemm)->RangeMultiplier(2)->Range(16, 256);

// Shape of one fused GRU input projection: batch x 2h times 2h x 3h.
void BM_GemmGruShape(benchmark::State& state) {
  awe::Rng rng(2);
  const Tensor x = random(64, 128, rng), w = random(128, 192, rng);
  Tensor c;
  for (auto _ : state) {
    awe::nn::gemm(x, w, c);
    benchmark::DoNotOptimize(c.data());
  }
}
BENCHMARK(BM_GemmGruShape);

void BM_GemmTn(benchmark::State& state) {
  awe::Rng rng(3);
  const Tensor x = random(64, 128, rng), g = random(64, 192, rng);
  Tensor c;
  for (auto _ : state) {
    awe::nn::gemm_tn(x, g, c);
    benchmark::DoNotOptimize(c.data());
  }
}
BENCHMARK(BM_GemmTn);

}  // namespace
