#include "awe/synthlang.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "awe/error.hpp"

namespace awe::synth {

std::string_view to_string(PhoneClass c) { return c == PhoneClass::Vowel ? "vowel" : "consonant"; }

std::string_view to_string(StressMode m) {
  switch (m) {
    case StressMode::FixedInitial: return "fixed-initial";
    case StressMode::FixedPenultimate: return "fixed-penultimate";
    case StressMode::FreeMovable: return "free-movable";
  }
  return "?";
}

PhoneClass phone_class_from_string(std::string_view s) {
  if (s == "vowel") return PhoneClass::Vowel;
  if (s == "consonant") return PhoneClass::Consonant;
  throw ConfigError("unknown phone class '" + std::string(s) + "'");
}

StressMode stress_mode_from_string(std::string_view s) {
  if (s == "fixed-initial") return StressMode::FixedInitial;
  if (s == "fixed-penultimate") return StressMode::FixedPenultimate;
  if (s == "free-movable") return StressMode::FreeMovable;
  throw ConfigError("unknown stress mode '" + std::string(s) + "'");
}

std::size_t LanguageSpec::dim() const { return phones.empty() ? 0 : phones.front().prototype.cols(); }
std::size_t LanguageSpec::sub_states() const {
  return phones.empty() ? 0 : phones.front().prototype.rows();
}

std::size_t LanguageSpec::index_of(std::string_view phone_id) const {
  for (std::size_t i = 0; i < phones.size(); ++i) {
    if (phones[i].id == phone_id) return i;
  }
  throw NotFoundError("phone '" + std::string(phone_id) + "' not in inventory of language '" + id + "'");
}

void LanguageSpec::validate() const {
  const std::string where = "language '" + id + "': ";
  if (phones.empty()) throw ConfigError(where + "empty phone inventory");
  std::size_t vowels = 0, consonants = 0;
  std::set<std::string> ids;
  for (const auto& p : phones) {
    if (!ids.insert(p.id).second) throw ConfigError(where + "duplicate phone id '" + p.id + "'");
    if (p.prototype.rows() != sub_states() || p.prototype.cols() != dim() || dim() == 0) {
      throw ConfigError(where + "prototype shape mismatch for phone '" + p.id + "'");
    }
    if (!p.prototype.all_finite()) throw ConfigError(where + "non-finite prototype for '" + p.id + "'");
    if (p.min_frames < 1 || p.max_frames < p.min_frames) {
      throw ConfigError(where + "invalid duration range for '" + p.id + "'");
    }
    (p.cls == PhoneClass::Vowel ? vowels : consonants)++;
  }
  if (vowels == 0 || consonants == 0) throw ConfigError(where + "needs at least one vowel and one consonant");
  const std::size_t n = phones.size();
  if (transitions.rows() != n + 1 || transitions.cols() != n + 1) {
    throw ConfigError(where + "transition matrix must be " + std::to_string(n + 1) + " x " +
                      std::to_string(n + 1));
  }
  for (std::size_t r = 0; r <= n; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c <= n; ++c) {
      const double v = transitions(r, c);
      if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError(where + "negative or non-finite transition");
      s += v;
    }
    if (std::abs(s - 1.0) > 1e-9) {
      throw ConfigError(where + "transition row " + std::to_string(r) + " sums to " + std::to_string(s));
    }
  }
  if (transitions(start_state(), end_state()) != 0.0) {
    throw ConfigError(where + "word-start state may not transition directly to word end");
  }
  if (!(vowel_reduction >= 0.0 && vowel_reduction <= 1.0)) {
    throw ConfigError(where + "vowel reduction must lie in [0, 1]");
  }
}

namespace {

nn::Tensor random_prototype(std::size_t sub_states, std::size_t dim, double scale, Rng& rng) {
  nn::Tensor proto(sub_states, dim);
  std::vector<double> steady(dim);
  for (auto& v : steady) v = rng.normal(0.0, scale);
  for (std::size_t s = 0; s < sub_states; ++s) {
    // Onset and offset glide away from the steady state.
    const bool edge = sub_states > 2 && (s == 0 || s + 1 == sub_states);
    for (std::size_t d = 0; d < dim; ++d) {
      proto(s, d) = steady[d] + (edge ? rng.normal(0.0, 0.5 * scale) : 0.0);
    }
  }
  return proto;
}

// Rows: phones then word-start; columns: phones then word-end.
nn::Tensor random_transitions(const std::vector<Phone>& phones, double forbidden_fraction,
                              double end_mass, Rng& rng) {
  const std::size_t n = phones.size();
  nn::Tensor t(n + 1, n + 1);
  for (std::size_t r = 0; r <= n; ++r) {
    std::vector<double> w(n);
    for (std::size_t c = 0; c < n; ++c) {
      w[c] = -std::log(1.0 - rng.uniform());
      // Favour alternation of vowels and consonants.
      if (r < n && phones[r].cls != phones[c].cls) w[c] *= 3.0;
      if (rng.uniform() < forbidden_fraction) w[c] = 0.0;
    }
    std::size_t allowed = 0;
    for (double x : w) allowed += x > 0.0;
    while (allowed < std::min<std::size_t>(2, n)) {
      const std::size_t c = rng.uniform_int(static_cast<std::uint64_t>(n));
      if (w[c] == 0.0) {
        w[c] = -std::log(1.0 - rng.uniform()) + 1e-3;
        ++allowed;
      }
    }
    double total = 0.0;
    for (double x : w) total += x;
    const double phone_mass = r < n ? 1.0 - end_mass : 1.0;
    for (std::size_t c = 0; c < n; ++c) t(r, c) = phone_mass * w[c] / total;
    t(r, n) = r < n ? end_mass : 0.0;
  }
  return t;
}

}  // namespace

LanguageSpec random_language(std::string id, const LanguageParams& params, Rng& rng) {
  if (params.num_vowels == 0 || params.num_consonants == 0) {
    throw ConfigError("random_language: need at least one vowel and one consonant");
  }
  if (params.sub_states == 0 || params.dim == 0) throw ConfigError("random_language: empty prototypes");
  if (!(params.end_mass > 0.0 && params.end_mass < 1.0)) {
    throw ConfigError("random_language: end_mass must lie in (0, 1)");
  }
  LanguageSpec spec;
  spec.id = std::move(id);
  spec.stress = params.stress;
  spec.vowel_reduction = params.vowel_reduction;
  for (std::size_t i = 0; i < params.num_vowels + params.num_consonants; ++i) {
    Phone p;
    const bool vowel = i < params.num_vowels;
    p.cls = vowel ? PhoneClass::Vowel : PhoneClass::Consonant;
    p.id = spec.id + (vowel ? ".v" : ".c") + std::to_string(vowel ? i : i - params.num_vowels);
    p.prototype = random_prototype(params.sub_states, params.dim, params.prototype_scale, rng);
    p.min_frames = params.min_frames;
    p.max_frames = params.max_frames;
    spec.phones.push_back(std::move(p));
  }
  spec.transitions = random_transitions(spec.phones, params.forbidden_fraction, params.end_mass, rng);
  spec.validate();
  return spec;
}

LanguageSpec derive_language(const LanguageSpec& base, double perturbation, Rng& rng,
                             std::string new_id) {
  if (!(perturbation >= 0.0 && perturbation <= 1.0)) {
    throw ConfigError("derive_language: perturbation must lie in [0, 1]");
  }
  base.validate();
  LanguageSpec out = base;
  out.id = new_id.empty() ? base.id + "'" : std::move(new_id);
  if (perturbation == 0.0) return out;

  const double p = perturbation;
  const std::size_t n = base.num_phones();
  const double scale = [&] {
    double ss = 0.0;
    std::size_t count = 0;
    for (const auto& ph : base.phones) {
      for (double v : ph.prototype.values()) {
        ss += v * v;
        ++count;
      }
    }
    return std::sqrt(ss / static_cast<double>(count));
  }();

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  rng.shuffle(order);
  const auto n_replace = static_cast<std::size_t>(std::llround(p * static_cast<double>(n)));
  std::vector<bool> replaced(n, false);
  for (std::size_t i = 0; i < n_replace; ++i) replaced[order[i]] = true;

  std::size_t fresh = 0;
  for (std::size_t i = 0; i < n; ++i) {
    Phone& ph = out.phones[i];
    nn::Tensor target = random_prototype(base.sub_states(), base.dim(), scale, rng);
    if (replaced[i]) {
      ph.prototype = std::move(target);
      ph.id = out.id + (ph.cls == PhoneClass::Vowel ? ".nv" : ".nc") + std::to_string(fresh++);
    } else {
      for (std::size_t j = 0; j < ph.prototype.size(); ++j) {
        ph.prototype[j] = (1.0 - p) * ph.prototype[j] + p * target[j];
      }
    }
  }

  const nn::Tensor mix = random_transitions(out.phones, 0.3, base.transitions(0, n), rng);
  for (std::size_t r = 0; r <= n; ++r) {
    for (std::size_t c = 0; c <= n; ++c) {
      out.transitions(r, c) = (1.0 - p) * base.transitions(r, c) + p * mix(r, c);
    }
  }
  // Keep rows exactly stochastic after the mixture.
  for (std::size_t r = 0; r <= n; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c <= n; ++c) s += out.transitions(r, c);
    for (std::size_t c = 0; c <= n; ++c) out.transitions(r, c) /= s;
  }

  if (rng.uniform() < p) out.stress = static_cast<StressMode>(rng.uniform_int(std::uint64_t{3}));
  out.vowel_reduction = (1.0 - p) * base.vowel_reduction + p * rng.uniform();
  out.validate();
  return out;
}

double language_distance(const LanguageSpec& a, const LanguageSpec& b) {
  if (a.dim() != b.dim() || a.sub_states() != b.sub_states()) {
    throw DimensionError("language_distance: incompatible feature dimensionality (" +
                         std::to_string(a.dim()) + " vs " + std::to_string(b.dim()) + ")");
  }
  std::map<std::string, std::size_t> ia, ib;
  for (std::size_t i = 0; i < a.num_phones(); ++i) ia[a.phones[i].id] = i;
  for (std::size_t i = 0; i < b.num_phones(); ++i) ib[b.phones[i].id] = i;

  // Iterate in sorted id order so the sum does not depend on argument order.
  double proto = 0.0;
  std::size_t matched = 0;
  std::set<std::string> all;
  for (const auto& [id, i] : ia) all.insert(id);
  for (const auto& [id, i] : ib) all.insert(id);
  for (const auto& id : all) {
    auto fa = ia.find(id), fb = ib.find(id);
    if (fa == ia.end() || fb == ib.end()) continue;
    const nn::Tensor& pa = a.phones[fa->second].prototype;
    const nn::Tensor& pb = b.phones[fb->second].prototype;
    double ss = 0.0;
    for (std::size_t j = 0; j < pa.size(); ++j) ss += (pa[j] - pb[j]) * (pa[j] - pb[j]);
    proto += std::sqrt(ss);
    ++matched;
  }
  const double proto_term = matched ? proto / static_cast<double>(matched) : 0.0;
  const double unmatched =
      static_cast<double>(all.size() - matched) / static_cast<double>(all.size());

  // Bigram L1 over the union of states, absent entries counting as zero.
  static const std::string kBoundary = "#";
  auto prob = [](const LanguageSpec& s, const std::map<std::string, std::size_t>& idx,
                 const std::string& from, const std::string& to) {
    std::size_t r, c;
    if (from == kBoundary) {
      r = s.start_state();
    } else {
      auto it = idx.find(from);
      if (it == idx.end()) return 0.0;
      r = it->second;
    }
    if (to == kBoundary) {
      c = s.end_state();
    } else {
      auto it = idx.find(to);
      if (it == idx.end()) return 0.0;
      c = it->second;
    }
    return s.transitions(r, c);
  };
  std::vector<std::string> states(all.begin(), all.end());
  states.push_back(kBoundary);
  double l1 = 0.0;
  for (const auto& from : states) {
    for (const auto& to : states) {
      l1 += std::abs(prob(a, ia, from, to) - prob(b, ib, from, to));
    }
  }
  const double phonotactic = l1 / static_cast<double>(states.size());
  const double prosody = std::abs(a.vowel_reduction - b.vowel_reduction) + (a.stress != b.stress ? 1.0 : 0.0);
  return proto_term + kUnmatchedPenalty * unmatched + phonotactic + prosody;
}

std::vector<std::string> sample_word(const LanguageSpec& spec, std::size_t min_len,
                                     std::size_t max_len, Rng& rng, std::size_t max_retries) {
  if (min_len < 1 || max_len < min_len) throw ConfigError("sample_word: need 1 <= min <= max");
  const std::size_t n = spec.num_phones();
  std::vector<double> weights(n + 1);
  for (std::size_t attempt = 0; attempt < max_retries; ++attempt) {
    std::vector<std::size_t> seq;
    std::size_t state = spec.start_state();
    bool ok = false;
    while (true) {
      for (std::size_t c = 0; c <= n; ++c) weights[c] = spec.transitions(state, c);
      if (seq.size() >= max_len) {
        ok = weights[n] > 0.0;
        break;
      }
      if (seq.size() < min_len) weights[n] = 0.0;
      const std::size_t pick = rng.categorical(weights);
      if (pick > n) break;  // dead end
      if (pick == n) {
        ok = true;
        break;
      }
      seq.push_back(pick);
      state = pick;
    }
    if (ok) {
      std::vector<std::string> out;
      out.reserve(seq.size());
      for (std::size_t i : seq) out.push_back(spec.phones[i].id);
      return out;
    }
  }
  throw ConfigError("sample_word: phonotactics of '" + spec.id + "' cannot produce a word of " +
                    std::to_string(min_len) + ".." + std::to_string(max_len) + " phones after " +
                    std::to_string(max_retries) + " attempts");
}

void SpeakerModel::validate(std::size_t dim) const {
  if (scale.size() != dim || offset.size() != dim) {
    throw DimensionError("speaker '" + id + "' warp has wrong dimensionality");
  }
  for (double s : scale) {
    if (!(s > 0.0)) throw ConfigError("speaker '" + id + "' has a non-positive scale entry");
  }
  if (!(rate >= 0.7 && rate <= 1.3)) throw ConfigError("speaker '" + id + "' rate outside [0.7, 1.3]");
  if (!(noise >= 0.0)) throw ConfigError("speaker '" + id + "' has negative noise");
}

SpeakerModel identity_speaker(std::size_t dim) {
  return SpeakerModel{"identity", "n/a", std::vector<double>(dim, 1.0), std::vector<double>(dim, 0.0), 1.0, 0.0};
}

SpeakerModel random_speaker(std::string id, std::string gender, std::size_t dim, Rng& rng, double noise) {
  SpeakerModel s;
  s.id = std::move(id);
  s.gender = std::move(gender);
  // Gender shifts the warp mean so that labels carry acoustic signal.
  const double shift = s.gender == "f" ? 0.15 : -0.15;
  s.scale.resize(dim);
  s.offset.resize(dim);
  for (std::size_t d = 0; d < dim; ++d) {
    s.scale[d] = std::exp(rng.normal(0.0, 0.1));
    s.offset[d] = shift + rng.normal(0.0, 0.2);
  }
  s.rate = rng.uniform(0.8, 1.2);
  s.noise = noise;
  return s;
}

features::FeatureSequence render(std::span<const std::string> phones, const LanguageSpec& spec,
                                 const SpeakerModel& speaker, Rng& rng,
                                 std::vector<std::size_t>* phone_starts) {
  if (phones.empty()) throw DataError("render: empty phone sequence");
  const std::size_t dim = spec.dim(), S = spec.sub_states();
  speaker.validate(dim);
  std::vector<std::size_t> idx;
  idx.reserve(phones.size());
  for (const auto& p : phones) idx.push_back(spec.index_of(p));

  std::vector<std::size_t> vowel_positions;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (spec.phones[idx[i]].cls == PhoneClass::Vowel) vowel_positions.push_back(i);
  }
  std::size_t stressed = idx.size();
  if (!vowel_positions.empty()) {
    switch (spec.stress) {
      case StressMode::FixedInitial: stressed = vowel_positions.front(); break;
      case StressMode::FixedPenultimate:
        stressed = vowel_positions[vowel_positions.size() >= 2 ? vowel_positions.size() - 2 : 0];
        break;
      case StressMode::FreeMovable:
        stressed = vowel_positions[rng.uniform_int(static_cast<std::uint64_t>(vowel_positions.size()))];
        break;
    }
  }
  const bool reduce = spec.stress == StressMode::FreeMovable && spec.vowel_reduction > 0.0;

  // Durations first so that identical seeds give identical segmentations
  // regardless of the speaker's noise draws.
  std::vector<std::size_t> durations(idx.size() * S);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const Phone& ph = spec.phones[idx[i]];
    const bool shrink = reduce && ph.cls == PhoneClass::Vowel && i != stressed;
    const auto lo = static_cast<std::size_t>(std::ceil(0.7 * static_cast<double>(ph.min_frames)));
    const auto hi = static_cast<std::size_t>(std::floor(1.3 * static_cast<double>(ph.max_frames)));
    for (std::size_t s = 0; s < S; ++s) {
      const auto base = static_cast<double>(rng.uniform_int(static_cast<std::int64_t>(ph.min_frames),
                                                            static_cast<std::int64_t>(ph.max_frames)));
      double d = base * speaker.rate;
      if (shrink) d *= 1.0 - 0.5 * spec.vowel_reduction;
      durations[i * S + s] = std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(d)),
                                                     std::max<std::size_t>(lo, 1), hi);
    }
  }

  std::vector<double> centroid(dim, 0.0);
  if (reduce) {
    std::size_t rows = 0;
    for (const auto& ph : spec.phones) {
      for (std::size_t s = 0; s < S; ++s, ++rows) {
        for (std::size_t d = 0; d < dim; ++d) centroid[d] += ph.prototype(s, d);
      }
    }
    for (auto& c : centroid) c /= static_cast<double>(rows);
  }

  std::size_t total = 0;
  for (std::size_t d : durations) total += d;
  features::FeatureSequence seq;
  seq.frames = nn::Tensor(total, dim);
  if (phone_starts) phone_starts->clear();
  std::size_t t = 0;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const Phone& ph = spec.phones[idx[i]];
    if (phone_starts) phone_starts->push_back(t);
    const double pull = (reduce && ph.cls == PhoneClass::Vowel && i != stressed) ? spec.vowel_reduction : 0.0;
    for (std::size_t s = 0; s < S; ++s) {
      for (std::size_t rep = 0; rep < durations[i * S + s]; ++rep, ++t) {
        for (std::size_t d = 0; d < dim; ++d) {
          double v = ph.prototype(s, d);
          if (pull > 0.0) v = (1.0 - pull) * v + pull * centroid[d];
          v = speaker.scale[d] * v + speaker.offset[d];
          if (speaker.noise > 0.0) v += rng.normal(0.0, speaker.noise);
          seq.frames(t, d) = v;
        }
      }
    }
  }
  return seq;
}

}  // namespace awe::synth
