#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "awe/adam.hpp"
#include "awe/corpus.hpp"
#include "awe/encoders.hpp"
#include "awe/eval.hpp"

namespace awe::enc {

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  double plateau_factor = 0.5;
  std::size_t patience = 10;
  std::uint64_t seed = 0;
  double margin = 0.25;
  DistanceConvention distance = DistanceConvention::HalfCosine;
  std::size_t hidden = 64;
  std::size_t layers = 2;
  std::size_t phone_embedding_dim = 32;
  bool per_step_mean = false;
  // CAE/CSE positives come from another speaker whenever one exists.
  bool different_speaker_positives = true;
  eval::RelevanceMode validation_mode = eval::RelevanceMode::DifferentSpeaker;

  // Sizes used for full-scale runs: h = 512, batch 256, 100 epochs.
  static TrainConfig full_scale();
  void validate() const;
  ModelConfig model_config(Objective objective, std::size_t input_dim) const;
};

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double validation_map = 0.0;
  double learning_rate = 0.0;  // rate used during the epoch

  friend bool operator==(const EpochStats&, const EpochStats&) = default;
};

// Records and features of one language's train and validation splits.
struct TrainingSet {
  std::string language;
  std::vector<std::string> phone_vocab;
  std::vector<corpus::SegmentRecord> train;
  std::vector<features::FeatureSequence> train_features;
  std::vector<corpus::SegmentRecord> validation;
  std::vector<features::FeatureSequence> validation_features;

  void validate() const;
};

struct TrainResult {
  EncoderModel model;  // parameters of the best validation epoch (latest on ties)
  std::vector<EpochStats> history;
  std::size_t best_epoch = 0;  // 1-based
};

// Model initialization draws from derive_seed(config.seed, "init"), batch
// order and pairing from derive_seed(config.seed, "batches").
TrainResult train(Objective objective, const TrainingSet& data, const TrainConfig& config);

// mAP of `model` on the validation split.
double validation_map(const EncoderModel& model, const TrainingSet& data, eval::RelevanceMode mode);

eval::EvalSet make_eval_set(const EncoderModel& model, std::span<const corpus::SegmentRecord> records,
                            std::span<const features::FeatureSequence> feats);

void write_history(const std::filesystem::path& path, const TrainResult& result);

}  // namespace awe::enc
