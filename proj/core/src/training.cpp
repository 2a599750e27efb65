#include "awe/training.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "awe/error.hpp"

namespace awe::enc {

TrainConfig TrainConfig::full_scale() {
  TrainConfig c;
  c.epochs = 100;
  c.batch_size = 256;
  c.hidden = 512;
  return c;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 2) throw ConfigError("batch_size must be >= 2");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning rate must be > 0");
  if (!(plateau_factor > 0.0 && plateau_factor <= 1.0)) throw ConfigError("plateau factor must be in (0, 1]");
  if (patience < 1) throw ConfigError("patience must be >= 1");
  if (!(margin >= 0.0) || !std::isfinite(margin)) throw ConfigError("margin must be >= 0");
  if (hidden == 0 || layers == 0 || phone_embedding_dim == 0) throw ConfigError("model sizes must be >= 1");
}

ModelConfig TrainConfig::model_config(Objective objective, std::size_t input_dim) const {
  ModelConfig m;
  m.objective = objective;
  m.input_dim = input_dim;
  m.hidden = hidden;
  m.layers = layers;
  m.phone_embedding_dim = phone_embedding_dim;
  m.margin = margin;
  m.distance = distance;
  m.per_step_mean = per_step_mean;
  return m;
}

void TrainingSet::validate() const {
  if (train.empty()) throw DataError("training set for '" + language + "' has an empty train split");
  if (validation.empty()) throw DataError("training set for '" + language + "' has an empty validation split");
  if (train.size() != train_features.size() || validation.size() != validation_features.size()) {
    throw DimensionError("training set for '" + language + "': records and features differ in count");
  }
}

eval::EvalSet make_eval_set(const EncoderModel& model, std::span<const corpus::SegmentRecord> records,
                            std::span<const features::FeatureSequence> feats) {
  std::vector<Stimulus> stimuli;
  stimuli.reserve(records.size());
  eval::EvalSet set;
  for (std::size_t i = 0; i < records.size(); ++i) {
    stimuli.push_back({records[i].id, &feats[i]});
    set.words.push_back(records[i].word);
    set.speakers.push_back(records[i].speaker);
  }
  set.embeddings = embed_set(model, stimuli, model.language).values;
  return set;
}

double validation_map(const EncoderModel& model, const TrainingSet& data, eval::RelevanceMode mode) {
  return eval::map_same_different(make_eval_set(model, data.validation, data.validation_features), mode).map;
}

namespace {

using Refs = std::vector<const features::FeatureSequence*>;

struct Batch {
  Refs inputs;
  Refs targets;
  std::vector<std::vector<std::size_t>> phones;
  std::vector<std::string> words;
};

std::vector<Batch> make_batches(Objective objective, const EncoderModel& model, const TrainingSet& data,
                                const TrainConfig& config, Rng& rng) {
  std::vector<Batch> batches;
  // Shuffled items are grouped into windows of kBucketBatches batches and
  // length-sorted inside each window, which keeps padding low; the batch
  // order is shuffled afterwards.
  constexpr std::size_t kBucketBatches = 4;
  auto chunk = [&](std::vector<std::size_t> items, auto length, auto fill) {
    const std::size_t window = kBucketBatches * config.batch_size;
    for (std::size_t w = 0; w < items.size(); w += window) {
      const auto first = items.begin() + static_cast<std::ptrdiff_t>(w);
      const auto last = items.begin() + static_cast<std::ptrdiff_t>(std::min(items.size(), w + window));
      std::stable_sort(first, last, [&](std::size_t a, std::size_t b) { return length(a) < length(b); });
    }
    for (std::size_t start = 0; start < items.size(); start += config.batch_size) {
      Batch b;
      for (std::size_t i = start; i < std::min(items.size(), start + config.batch_size); ++i) fill(b, items[i]);
      batches.push_back(std::move(b));
    }
    rng.shuffle(batches);
  };
  auto frames = [&](std::size_t r) { return data.train_features[r].frames.rows(); };
  if (objective == Objective::PGE) {
    std::vector<std::size_t> order(data.train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    chunk(std::move(order), frames, [&](Batch& b, std::size_t r) {
      b.inputs.push_back(&data.train_features[r]);
      b.phones.push_back(model.phone_indices(data.train[r].phones));
    });
  } else {
    const auto pairs = corpus::pair_same_type(data.train, rng, config.different_speaker_positives);
    std::vector<std::size_t> order(pairs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    chunk(
        std::move(order), [&](std::size_t i) { return std::max(frames(pairs[i].first), frames(pairs[i].second)); },
        [&](Batch& b, std::size_t i) {
          const auto [a, p] = pairs[i];
          b.inputs.push_back(&data.train_features[a]);
          b.targets.push_back(&data.train_features[p]);
          b.words.push_back(data.train[a].word);
        });
  }
  return batches;
}

bool usable(Objective objective, const Batch& b) {
  if (b.inputs.empty()) return false;
  if (objective != Objective::CSE) return true;
  if (b.inputs.size() < 2) return false;
  std::set<std::string> types(b.words.begin(), b.words.end());
  return types.size() >= 2;
}

}  // namespace

TrainResult train(Objective objective, const TrainingSet& data, const TrainConfig& config) {
  config.validate();
  data.validate();
  const std::size_t k = data.train_features.front().frames.cols();

  Rng init_rng(derive_seed(config.seed, "init"));
  Rng batch_rng(derive_seed(config.seed, "batches"));
  EncoderModel model = EncoderModel::create(config.model_config(objective, k), data.language,
                                            objective == Objective::PGE ? data.phone_vocab
                                                                        : std::vector<std::string>{},
                                            init_rng);
  nn::Adam adam(model.params, nn::AdamConfig{config.learning_rate});

  TrainResult result;
  result.model = model;
  std::vector<double> maps;
  double best = -1.0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const double lr = adam.learning_rate();
    const auto batches = make_batches(objective, model, data, config, batch_rng);
    double loss_sum = 0.0;
    std::size_t used = 0;
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      const Batch& b = batches[bi];
      if (!usable(objective, b)) continue;
      try {
        nn::Tape tape;
        BoundModel m = bind(tape, model);
        std::vector<double> w(b.inputs.size(), 1.0 / static_cast<double>(b.inputs.size()));
        nn::Var loss;
        switch (objective) {
          case Objective::PGE: loss = pge_batch_loss(m, b.inputs, b.phones, w); break;
          case Objective::CAE: loss = cae_batch_loss(m, b.inputs, b.targets, w); break;
          case Objective::CSE: loss = cse_batch_loss(m, b.inputs, b.targets, b.words); break;
        }
        loss_sum += loss.value()[0];
        ++used;
        adam.step(model.params, tape.backward(loss));
      } catch (const NumericError& e) {
        throw NumericError("training " + std::string(to_string(objective)) + " on '" + data.language +
                           "' diverged at epoch " + std::to_string(epoch) + ", batch " + std::to_string(bi + 1) +
                           ": " + e.what());
      }
    }
    if (used == 0) throw DataError("no usable training batch for '" + data.language + "'");
    const double vmap = validation_map(model, data, config.validation_mode);
    result.history.push_back({epoch, loss_sum / static_cast<double>(used), vmap, lr});
    maps.push_back(vmap);
    // Ties go to the later epoch: once validation mAP saturates, the first
    // epoch to reach it is an arbitrary early snapshot.
    if (vmap >= best) {
      best = vmap;
      result.best_epoch = epoch;
      result.model = model;
    }
    adam.set_learning_rate(
        nn::reduce_lr_on_plateau(maps, config.learning_rate, config.plateau_factor, config.patience));
  }
  return result;
}

void write_history(const std::filesystem::path& path, const TrainResult& result) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& e : result.history) {
    epochs.push_back({{"epoch", e.epoch},
                      {"train_loss", e.train_loss},
                      {"validation_map", e.validation_map},
                      {"learning_rate", e.learning_rate}});
  }
  nlohmann::json j{{"language", result.model.language},
                   {"objective", to_string(result.model.config.objective)},
                   {"best_epoch", result.best_epoch},
                   {"epochs", std::move(epochs)}};
  std::ofstream os(path);
  if (!os) throw DataError("cannot write history '" + path.string() + "'");
  os << j.dump(1) << '\n';
}

}  // namespace awe::enc
