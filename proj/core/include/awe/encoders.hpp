#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "awe/embedding.hpp"
#include "awe/features.hpp"
#include "awe/ops.hpp"
#include "awe/params.hpp"
#include "awe/rng.hpp"

namespace awe::enc {

struct ModelConfig {
  Objective objective = Objective::PGE;
  std::size_t input_dim = 39;
  std::size_t hidden = 64;
  std::size_t layers = 2;
  // Width of the learned phone embedding fed to the PGE decoder.
  std::size_t phone_embedding_dim = 32;
  double margin = 0.25;
  DistanceConvention distance = DistanceConvention::HalfCosine;
  // Divide PGE/CAE per-segment sums by their step count.
  bool per_step_mean = false;

  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Bidirectional GRU encoder with an objective-specific head.
//
// Parameters, in store order:
//   enc.l<i>.{fwd,bwd}.{W,U,b}               every encoder layer
//   PGE: dec.embed, dec.W_tok, dec.W_ctx, dec.U, dec.b, dec.out.W, dec.out.b
//   CAE: dec.W_ctx, dec.U, dec.b, dec.out.W, dec.out.b
// The decoder GRU has hidden size D = 2h and starts from the embedding x;
// x is also part of every decoder input (through dec.W_ctx).
struct EncoderModel {
  ModelConfig config;
  std::string language;
  std::vector<std::string> phone_vocab;  // PGE only
  nn::ParameterStore params;

  static EncoderModel create(ModelConfig config, std::string language, std::vector<std::string> phone_vocab,
                             Rng& rng);
  static EncoderModel zeros(ModelConfig config, std::string language, std::vector<std::string> phone_vocab);

  std::size_t embedding_dim() const { return 2 * config.hidden; }
  // Phones plus BOS and EOS for PGE; 0 for the other objectives.
  std::size_t vocab_size() const;
  std::size_t bos() const { return phone_vocab.size(); }
  std::size_t eos() const { return phone_vocab.size() + 1; }
  // Throws DataError for phones outside the vocabulary.
  std::size_t phone_index(std::string_view phone) const;
  std::vector<std::size_t> phone_indices(std::span<const std::string> phones) const;
};

// Model parameters registered on a tape.
struct BoundModel {
  const EncoderModel* model = nullptr;
  std::vector<nn::Var> vars;

  nn::Var operator[](std::string_view name) const { return vars[model->params.index_of(name)]; }
};

BoundModel bind(nn::Tape& tape, const EncoderModel& model, bool trainable = true);

using SequenceRefs = std::span<const features::FeatureSequence* const>;

// B x D embeddings of a batch of sequences of any lengths.
nn::Var encode_batch(const BoundModel& m, SequenceRefs batch);

// Batched losses; segment b contributes weight[b] times its summed loss.
nn::Var pge_batch_loss(const BoundModel& m, SequenceRefs inputs, std::span<const std::vector<std::size_t>> phones,
                       std::span<const double> weight);
nn::Var cae_batch_loss(const BoundModel& m, SequenceRefs inputs, SequenceRefs targets,
                       std::span<const double> weight);
// Mean over anchors of max(0, m + d(a, +) - d(a, -)) with in-batch hardest
// negatives of a different word type.
nn::Var cse_batch_loss(const BoundModel& m, SequenceRefs anchors, SequenceRefs positives,
                       std::span<const std::string> words);

// For each anchor row i of `distances` (B x 2B, columns = anchors then
// positives), the column with a different word type at minimum distance;
// ties go to the lower column. Throws DataError when only one type exists.
std::vector<std::size_t> hardest_negatives(const nn::Tensor& distances, std::span<const std::string> words);

inline double triplet_hinge(double d_pos, double d_neg, double margin) {
  const double v = margin + d_pos - d_neg;
  return v > 0.0 ? v : 0.0;
}

// Single-segment conveniences on an inference tape.
nn::Tensor encode(const EncoderModel& model, const features::FeatureSequence& a);
double pge_loss(const EncoderModel& model, const features::FeatureSequence& a, std::span<const std::string> phones);
double cae_loss(const EncoderModel& model, const features::FeatureSequence& a,
                const features::FeatureSequence& a_plus);

struct CsePair {
  const features::FeatureSequence* anchor;
  const features::FeatureSequence* positive;
  std::string word;
};
double cse_loss(const EncoderModel& model, std::span<const CsePair> batch);

struct Stimulus {
  std::string id;
  const features::FeatureSequence* features;
};

// D x N matrix of embeddings in stimulus order, tagged (stimuli_language /
// model.language).
EmbeddingMatrix embed_set(const EncoderModel& model, std::span<const Stimulus> stimuli,
                          const std::string& stimuli_language, std::size_t batch_size = 64);

// "AWEC" | u32 version | str model JSON (config, language, vocab) |
// u32 tensor count | per tensor: str name, u32 rank, u64 dims, float64 LE data.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint(const std::filesystem::path& path, const EncoderModel& model);
EncoderModel read_checkpoint(const std::filesystem::path& path);

}  // namespace awe::enc
