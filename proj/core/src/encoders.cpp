#include "awe/encoders.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "awe/error.hpp"
#include "awe/gru.hpp"

namespace awe::enc {

using nn::Tensor;
using nn::Var;

void ModelConfig::validate() const {
  if (input_dim == 0) throw ConfigError("model input_dim must be >= 1");
  if (hidden == 0) throw ConfigError("model hidden size must be >= 1");
  if (layers == 0) throw ConfigError("model needs at least one encoder layer");
  if (objective == Objective::PGE && phone_embedding_dim == 0) {
    throw ConfigError("phone_embedding_dim must be >= 1");
  }
  if (!(margin >= 0.0) || !std::isfinite(margin)) throw ConfigError("margin must be finite and >= 0");
}

namespace {

std::string layer_prefix(std::size_t layer, bool backward) {
  return "enc.l" + std::to_string(layer) + (backward ? ".bwd" : ".fwd");
}

// Adds parameters in store order; `make` supplies each tensor.
template <class Make>
void build_params(const EncoderModel& model, nn::ParameterStore& store, Make make) {
  const auto& c = model.config;
  const std::size_t h = c.hidden;
  for (std::size_t l = 0; l < c.layers; ++l) {
    const std::size_t in = l == 0 ? c.input_dim : 2 * h;
    for (bool bwd : {false, true}) {
      const std::string p = layer_prefix(l, bwd);
      store.add(p + ".W", make(in, 3 * h, in));
      store.add(p + ".U", make(h, 3 * h, h));
      store.add(p + ".b", make(1, 3 * h, h));
    }
  }
  const std::size_t d = 2 * h;
  if (c.objective == Objective::PGE) {
    const std::size_t v = model.vocab_size();
    const std::size_t e = c.phone_embedding_dim;
    store.add("dec.embed", make(v, e, 1));
    store.add("dec.W_tok", make(e, 3 * d, d));
    store.add("dec.W_ctx", make(d, 3 * d, d));
    store.add("dec.U", make(d, 3 * d, d));
    store.add("dec.b", make(1, 3 * d, d));
    store.add("dec.out.W", make(d, v, d));
    store.add("dec.out.b", make(1, v, d));
  } else if (c.objective == Objective::CAE) {
    store.add("dec.W_ctx", make(d, 3 * d, d));
    store.add("dec.U", make(d, 3 * d, d));
    store.add("dec.b", make(1, 3 * d, d));
    store.add("dec.out.W", make(d, c.input_dim, d));
    store.add("dec.out.b", make(1, c.input_dim, d));
  }
}

EncoderModel skeleton(ModelConfig config, std::string language, std::vector<std::string> phone_vocab) {
  config.validate();
  if (config.objective == Objective::PGE && phone_vocab.empty()) {
    throw ConfigError("PGE model needs a nonempty phone vocabulary");
  }
  if (config.objective != Objective::PGE) phone_vocab.clear();
  EncoderModel m;
  m.config = config;
  m.language = std::move(language);
  m.phone_vocab = std::move(phone_vocab);
  return m;
}

nn::Tape& tape_of(const BoundModel& m) {
  if (m.model == nullptr || m.vars.empty()) throw ConfigError("model is not bound to a tape");
  return *m.vars.front().tape();
}

void check_sequence(const features::FeatureSequence* seq, std::size_t k, std::size_t index) {
  if (seq == nullptr) throw DimensionError("sequence " + std::to_string(index) + " is null");
  if (seq->frames.rows() == 0) throw DimensionError("sequence " + std::to_string(index) + " has no frames");
  if (seq->frames.cols() != k) {
    throw DimensionError("sequence " + std::to_string(index) + " has " + std::to_string(seq->frames.cols()) +
                         " coefficients per frame, model expects " + std::to_string(k));
  }
}

nn::GruVars gru_vars(const BoundModel& m, const std::string& prefix) {
  return {m[prefix + ".W"], m[prefix + ".U"], m[prefix + ".b"]};
}

void require_objective(const BoundModel& m, Objective o) {
  if (m.model->config.objective != o) {
    throw ConfigError(std::string(to_string(o)) + " loss on a " +
                      std::string(to_string(m.model->config.objective)) + " model");
  }
}

}  // namespace

std::size_t EncoderModel::vocab_size() const {
  return config.objective == Objective::PGE ? phone_vocab.size() + 2 : 0;
}

std::size_t EncoderModel::phone_index(std::string_view phone) const {
  for (std::size_t i = 0; i < phone_vocab.size(); ++i) {
    if (phone_vocab[i] == phone) return i;
  }
  throw DataError("unknown phone '" + std::string(phone) + "' for model of language '" + language + "'");
}

std::vector<std::size_t> EncoderModel::phone_indices(std::span<const std::string> phones) const {
  std::vector<std::size_t> out;
  out.reserve(phones.size());
  for (const auto& p : phones) out.push_back(phone_index(p));
  return out;
}

EncoderModel EncoderModel::create(ModelConfig config, std::string language, std::vector<std::string> phone_vocab,
                                  Rng& rng) {
  EncoderModel m = skeleton(config, std::move(language), std::move(phone_vocab));
  build_params(m, m.params, [&](std::size_t r, std::size_t c, std::size_t fan_in) {
    return nn::uniform_init(r, c, fan_in, rng);
  });
  return m;
}

EncoderModel EncoderModel::zeros(ModelConfig config, std::string language, std::vector<std::string> phone_vocab) {
  EncoderModel m = skeleton(config, std::move(language), std::move(phone_vocab));
  build_params(m, m.params, [](std::size_t r, std::size_t c, std::size_t) { return Tensor(r, c); });
  return m;
}

BoundModel bind(nn::Tape& tape, const EncoderModel& model, bool trainable) {
  BoundModel b;
  b.model = &model;
  if (trainable) {
    b.vars = model.params.bind(tape);
  } else {
    b.vars.reserve(model.params.size());
    for (std::size_t i = 0; i < model.params.size(); ++i) b.vars.push_back(tape.constant(model.params.at(i)));
  }
  return b;
}

Var encode_batch(const BoundModel& m, SequenceRefs batch) {
  const ModelConfig& c = m.model->config;
  nn::Tape& tape = tape_of(m);
  const std::size_t nb = batch.size();
  if (nb == 0) throw DimensionError("encode_batch: empty batch");
  const std::size_t k = c.input_dim;
  const std::size_t h = c.hidden;

  std::vector<std::size_t> len(nb);
  std::size_t tmax = 0;
  for (std::size_t b = 0; b < nb; ++b) {
    check_sequence(batch[b], k, b);
    len[b] = batch[b]->frames.rows();
    tmax = std::max(tmax, len[b]);
  }

  // Time-major input: row t * B + b holds frame t of sequence b (zero padded).
  Tensor x(tmax * nb, k);
  for (std::size_t b = 0; b < nb; ++b) {
    const Tensor& f = batch[b]->frames;
    for (std::size_t t = 0; t < len[b]; ++t) std::copy_n(f.row(t).data(), k, x.row(t * nb + b).data());
  }
  std::vector<std::vector<std::uint8_t>> keep(tmax, std::vector<std::uint8_t>(nb, 0));
  std::vector<bool> full(tmax, true);
  for (std::size_t t = 0; t < tmax; ++t) {
    for (std::size_t b = 0; b < nb; ++b) {
      keep[t][b] = t < len[b] ? 1 : 0;
      if (!keep[t][b]) full[t] = false;
    }
  }

  Var input = tape.constant(std::move(x));
  Var below_f;
  Var below_b;
  Var final_f;
  Var final_b;
  for (std::size_t l = 0; l < c.layers; ++l) {
    const bool top = l + 1 == c.layers;
    std::vector<Var> out_f(tmax);
    std::vector<Var> out_b(tmax);
    for (bool bwd : {false, true}) {
      const nn::GruVars g = gru_vars(m, layer_prefix(l, bwd));
      Var proj;
      if (l == 0) {
        proj = nn::add_bias(nn::matmul(input, g.w_input), g.bias);
      } else {
        Var lower = nn::add(nn::matmul(below_f, nn::slice_rows(g.w_input, 0, h)),
                            nn::matmul(below_b, nn::slice_rows(g.w_input, h, 2 * h)));
        proj = nn::add_bias(lower, g.bias);
      }
      Var state = tape.constant(Tensor(nb, h));
      auto& outs = bwd ? out_b : out_f;
      for (std::size_t s = 0; s < tmax; ++s) {
        const std::size_t t = bwd ? tmax - 1 - s : s;
        Var next = nn::gru_step(g, nn::slice_rows(proj, t * nb, (t + 1) * nb), state);
        state = full[t] ? next : nn::blend(keep[t], next, state);
        if (!top) outs[t] = state;
      }
      (bwd ? final_b : final_f) = state;
    }
    if (!top) {
      below_f = nn::concat_rows(out_f);
      below_b = nn::concat_rows(out_b);
    }
  }
  return nn::concat_cols(final_f, final_b);
}

Var pge_batch_loss(const BoundModel& m, SequenceRefs inputs, std::span<const std::vector<std::size_t>> phones,
                   std::span<const double> weight) {
  require_objective(m, Objective::PGE);
  const EncoderModel& model = *m.model;
  const std::size_t nb = inputs.size();
  if (phones.size() != nb || weight.size() != nb) {
    throw DimensionError("pge_batch_loss: inputs, phone sequences and weights differ in length");
  }
  std::size_t steps = 0;
  for (const auto& p : phones) {
    for (std::size_t id : p) {
      if (id >= model.phone_vocab.size()) throw DataError("phone id " + std::to_string(id) + " outside vocabulary");
    }
    steps = std::max(steps, p.size() + 1);
  }
  Var x = encode_batch(m, inputs);

  std::vector<std::size_t> prev(steps * nb);
  for (std::size_t i = 0; i < steps; ++i) {
    for (std::size_t b = 0; b < nb; ++b) {
      prev[i * nb + b] = i == 0 ? model.bos() : (i - 1 < phones[b].size() ? phones[b][i - 1] : model.eos());
    }
  }
  Var tok = nn::matmul(nn::gather_rows(m["dec.embed"], prev), m["dec.W_tok"]);
  const nn::GruVars g{m["dec.W_ctx"], m["dec.U"], m["dec.b"]};
  Var ctx = nn::add_bias(nn::matmul(x, g.w_input), g.bias);
  Var state = x;
  std::vector<Var> states;
  states.reserve(steps);
  for (std::size_t i = 0; i < steps; ++i) {
    state = nn::gru_step(g, nn::add(nn::slice_rows(tok, i * nb, (i + 1) * nb), ctx), state);
    states.push_back(state);
  }
  Var logits = nn::add_bias(nn::matmul(nn::concat_rows(states), m["dec.out.W"]), m["dec.out.b"]);
  Var logp = nn::log_softmax_rows(logits);

  std::vector<nn::Entry> entries;
  std::vector<double> w;
  for (std::size_t i = 0; i < steps; ++i) {
    for (std::size_t b = 0; b < nb; ++b) {
      const std::size_t tau = phones[b].size();
      if (i > tau) continue;
      entries.push_back({i * nb + b, i < tau ? phones[b][i] : model.eos()});
      const double norm = model.config.per_step_mean ? 1.0 / static_cast<double>(tau + 1) : 1.0;
      w.push_back(-weight[b] * norm);
    }
  }
  return nn::weighted_sum(nn::pick(logp, entries), w);
}

Var cae_batch_loss(const BoundModel& m, SequenceRefs inputs, SequenceRefs targets, std::span<const double> weight) {
  require_objective(m, Objective::CAE);
  const EncoderModel& model = *m.model;
  const std::size_t nb = inputs.size();
  const std::size_t k = model.config.input_dim;
  if (targets.size() != nb || weight.size() != nb) {
    throw DimensionError("cae_batch_loss: inputs, targets and weights differ in length");
  }
  std::size_t steps = 0;
  for (std::size_t b = 0; b < nb; ++b) {
    check_sequence(targets[b], k, b);
    steps = std::max(steps, targets[b]->frames.rows());
  }
  Var x = encode_batch(m, inputs);

  const nn::GruVars g{m["dec.W_ctx"], m["dec.U"], m["dec.b"]};
  Var ctx = nn::add_bias(nn::matmul(x, g.w_input), g.bias);
  Var state = x;
  std::vector<Var> states;
  states.reserve(steps);
  for (std::size_t i = 0; i < steps; ++i) {
    state = nn::gru_step(g, ctx, state);
    states.push_back(state);
  }
  Var pred = nn::add_bias(nn::matmul(nn::concat_rows(states), m["dec.out.W"]), m["dec.out.b"]);

  Tensor target(steps * nb, k);
  std::vector<double> w(steps * nb, 0.0);
  for (std::size_t b = 0; b < nb; ++b) {
    const Tensor& f = targets[b]->frames;
    const double norm = model.config.per_step_mean ? 1.0 / static_cast<double>(f.rows()) : 1.0;
    for (std::size_t i = 0; i < f.rows(); ++i) {
      std::copy_n(f.row(i).data(), k, target.row(i * nb + b).data());
      w[i * nb + b] = weight[b] * norm;
    }
  }
  return nn::weighted_sq_error(pred, target, w);
}

std::vector<std::size_t> hardest_negatives(const Tensor& distances, std::span<const std::string> words) {
  const std::size_t rows = distances.rows();
  const std::size_t cols = distances.cols();
  if (words.size() != cols || rows > cols) {
    throw DimensionError("hardest_negatives: " + std::to_string(words.size()) + " labels for a " +
                         distances.shape_string() + " distance matrix");
  }
  std::vector<std::size_t> neg(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    std::size_t best = cols;
    for (std::size_t j = 0; j < cols; ++j) {
      if (words[j] == words[i]) continue;
      if (best == cols || distances(i, j) < distances(i, best)) best = j;
    }
    if (best == cols) throw DataError("no negative for anchor " + std::to_string(i) + ": batch has one word type");
    neg[i] = best;
  }
  return neg;
}

Var cse_batch_loss(const BoundModel& m, SequenceRefs anchors, SequenceRefs positives,
                   std::span<const std::string> words) {
  require_objective(m, Objective::CSE);
  const ModelConfig& c = m.model->config;
  const std::size_t nb = anchors.size();
  if (positives.size() != nb || words.size() != nb) {
    throw DimensionError("cse_batch_loss: anchors, positives and words differ in length");
  }
  if (nb < 2) throw DataError("cse batch needs at least 2 pairs");

  std::vector<const features::FeatureSequence*> all(anchors.begin(), anchors.end());
  all.insert(all.end(), positives.begin(), positives.end());
  std::vector<std::string> labels(words.begin(), words.end());
  labels.insert(labels.end(), words.begin(), words.end());

  Var unit = nn::row_normalize(encode_batch(m, all));
  Var cos = nn::matmul_nt(nn::slice_rows(unit, 0, nb), unit);
  Var dist = c.distance == DistanceConvention::HalfCosine ? nn::scale(nn::one_minus(cos), 0.5) : nn::one_minus(cos);
  const std::vector<std::size_t> neg = hardest_negatives(dist.value(), labels);

  std::vector<nn::Entry> pos_e(nb);
  std::vector<nn::Entry> neg_e(nb);
  for (std::size_t i = 0; i < nb; ++i) {
    pos_e[i] = {i, nb + i};
    neg_e[i] = {i, neg[i]};
  }
  Var gap = nn::sub(nn::pick(dist, pos_e), nn::pick(dist, neg_e));
  return nn::mean(nn::relu(nn::add_scalar(gap, c.margin)));
}

Tensor encode(const EncoderModel& model, const features::FeatureSequence& a) {
  nn::Tape tape(false);
  BoundModel m = bind(tape, model, false);
  const features::FeatureSequence* ref = &a;
  Var e = encode_batch(m, SequenceRefs(&ref, 1));
  return Tensor::vector(std::vector<double>(e.value().values().begin(), e.value().values().end()));
}

double pge_loss(const EncoderModel& model, const features::FeatureSequence& a, std::span<const std::string> phones) {
  const std::vector<std::size_t> ids = model.phone_indices(phones);
  nn::Tape tape(false);
  BoundModel m = bind(tape, model, false);
  const features::FeatureSequence* ref = &a;
  const double one = 1.0;
  return pge_batch_loss(m, SequenceRefs(&ref, 1), std::span(&ids, 1), std::span(&one, 1)).value()[0];
}

double cae_loss(const EncoderModel& model, const features::FeatureSequence& a,
                const features::FeatureSequence& a_plus) {
  nn::Tape tape(false);
  BoundModel m = bind(tape, model, false);
  const features::FeatureSequence* in = &a;
  const features::FeatureSequence* out = &a_plus;
  const double one = 1.0;
  return cae_batch_loss(m, SequenceRefs(&in, 1), SequenceRefs(&out, 1), std::span(&one, 1)).value()[0];
}

double cse_loss(const EncoderModel& model, std::span<const CsePair> batch) {
  std::vector<const features::FeatureSequence*> a;
  std::vector<const features::FeatureSequence*> p;
  std::vector<std::string> w;
  for (const auto& pair : batch) {
    a.push_back(pair.anchor);
    p.push_back(pair.positive);
    w.push_back(pair.word);
  }
  nn::Tape tape(false);
  BoundModel m = bind(tape, model, false);
  return cse_batch_loss(m, a, p, w).value()[0];
}

EmbeddingMatrix embed_set(const EncoderModel& model, std::span<const Stimulus> stimuli,
                          const std::string& stimuli_language, std::size_t batch_size) {
  if (stimuli.empty()) throw DataError("embed_set: empty stimuli set");
  if (batch_size == 0) throw ConfigError("embed_set: batch size must be >= 1");
  const std::size_t n = stimuli.size();
  for (std::size_t j = 0; j < n; ++j) {
    try {
      check_sequence(stimuli[j].features, model.config.input_dim, j);
      nn::require_finite(stimuli[j].features->frames, "features");
    } catch (const Error& e) {
      throw DataError("stimulus '" + stimuli[j].id + "': " + e.what());
    }
  }
  // Length-sorted batches keep padding small; rows are computed independently
  // so batch composition does not affect the values.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return stimuli[a].features->frames.rows() < stimuli[b].features->frames.rows();
  });

  EmbeddingMatrix out;
  out.values = Tensor(model.embedding_dim(), n);
  out.stimuli_language = stimuli_language;
  out.encoder_language = model.language;
  out.objective = model.config.objective;
  for (const auto& s : stimuli) out.ids.push_back(s.id);

  nn::Tape tape(false);
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t stop = std::min(n, start + batch_size);
    std::vector<const features::FeatureSequence*> refs;
    for (std::size_t i = start; i < stop; ++i) refs.push_back(stimuli[order[i]].features);
    BoundModel m = bind(tape, model, false);
    const Tensor e = encode_batch(m, refs).value();
    for (std::size_t i = start; i < stop; ++i) {
      for (std::size_t d = 0; d < e.cols(); ++d) out.values(d, order[i]) = e(i - start, d);
    }
    tape.clear();
  }
  return out;
}

}  // namespace awe::enc
