#include <benchmark/benchmark.h>

#include "awe/encoders.hpp"
#include "awe/tape.hpp"

using namespace awe;

namespace {

enc::ModelConfig config(Objective o) {
  enc::ModelConfig c;
  c.objective = o;
  c.input_dim = 39;
  c.hidden = 64;
  c.layers = 2;
  return c;
}

std::vector<features::FeatureSequence> batch(std::size_t n, std::size_t frames, Rng& rng) {
  std::vector<features::FeatureSequence> out;
  for (std::size_t i = 0; i < n; ++i) {
    nn::Tensor t(frames, 39);
    for (double& v : t.values()) v = rng.normal();
    out.push_back({t});
  }
  return out;
}

void BM_EncodeBatch(benchmark::State& state) {
  Rng rng(1);
  const auto model = enc::EncoderModel::create(config(Objective::CSE), "A", {}, rng);
  const auto seqs = batch(static_cast<std::size_t>(state.range(0)), 40, rng);
  std::vector<const features::FeatureSequence*> refs;
  for (const auto& s : seqs) refs.push_back(&s);
  for (auto _ : state) {
    nn::Tape tape(false);
    auto out = enc::encode_batch(enc::bind(tape, model, false), refs);
    benchmark::DoNotOptimize(out.value().data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EncodeBatch)->Arg(1)->Arg(16)->Arg(64);

void BM_CseTrainStep(benchmark::State& state) {
  Rng rng(2);
  const auto model = enc::EncoderModel::create(config(Objective::CSE), "A", {}, rng);
  const auto anchors = batch(64, 40, rng), positives = batch(64, 40, rng);
  std::vector<const features::FeatureSequence*> a, p;
  std::vector<std::string> words;
  for (std::size_t i = 0; i < 64; ++i) {
    a.push_back(&anchors[i]);
    p.push_back(&positives[i]);
    words.push_back("w" + std::to_string(i % 16));
  }
  for (auto _ : state) {
    nn::Tape tape;
    const auto bound = enc::bind(tape, model);
    auto grads = tape.backward(enc::cse_batch_loss(bound, a, p, words));
    benchmark::DoNotOptimize(grads.data());
  }
}
BENCHMARK(BM_CseTrainStep)->Unit(benchmark::kMillisecond);

}  // namespace
