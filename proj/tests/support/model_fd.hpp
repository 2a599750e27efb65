#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "awe/encoders.hpp"
#include "awe/tape.hpp"
#include "oracles.hpp"

namespace oracle {

// Worst relative error between tape gradients and central differences for
// one objective's batch loss at k = 5, h = 8, 10 phones (V = 12).
inline double loss_gradient_error(awe::Objective o, std::uint64_t seed) {
  using namespace awe;
  using awe::features::FeatureSequence;
  Rng rng(seed);
  enc::ModelConfig c;
  c.objective = o;
  c.input_dim = 5;
  c.hidden = 8;
  c.layers = 2;
  c.phone_embedding_dim = 6;
  std::vector<std::string> vocab;
  for (int i = 0; i < 10; ++i) vocab.push_back("p" + std::to_string(i));
  enc::EncoderModel m = enc::EncoderModel::create(c, "T", vocab, rng);

  std::vector<FeatureSequence> seqs;
  std::vector<std::vector<std::size_t>> idx;
  for (int i = 0; i < 4; ++i) {
    seqs.push_back(FeatureSequence{random_matrix(3 + rng.uniform_int(std::uint64_t{4}), 5, rng)});
    std::vector<std::string> ph;
    const std::size_t len = 2 + rng.uniform_int(std::uint64_t{3});
    for (std::size_t j = 0; j < len; ++j) ph.push_back("p" + std::to_string(rng.uniform_int(std::uint64_t{10})));
    if (o == Objective::PGE) idx.push_back(m.phone_indices(ph));
  }
  std::vector<const FeatureSequence*> in, pos;
  for (std::size_t i = 0; i < 4; ++i) {
    in.push_back(&seqs[i]);
    pos.push_back(&seqs[(i + 1) % 4]);
  }
  const std::vector<double> w(4, 0.25);
  const std::vector<std::string> words{"a", "b", "a", "c"};
  auto run = [&](nn::Tape& tape) {
    const enc::BoundModel b = enc::bind(tape, m);
    switch (o) {
      case Objective::PGE: return enc::pge_batch_loss(b, in, idx, w);
      case Objective::CAE: return enc::cae_batch_loss(b, in, pos, w);
      case Objective::CSE: return enc::cse_batch_loss(b, in, pos, words);
    }
    return nn::Var{};
  };
  nn::Tape tape;
  const nn::Var loss = run(tape);
  const double value = loss.value()[0];
  const auto grads = tape.backward(loss);
  std::vector<Tensor*> params;
  for (std::size_t i = 0; i < m.params.size(); ++i) params.push_back(&m.params.at(i));
  // Central differences carry about eps * |L| / h of rounding noise, so the
  // floor that guards near-zero entries scales with the loss.
  return max_relative_error(
      params, grads,
      [&] {
        nn::Tape t(false);
        return run(t).value()[0];
      },
      1e-5, 1e-6 * std::max(1.0, std::abs(value)));
}

}  // namespace oracle
