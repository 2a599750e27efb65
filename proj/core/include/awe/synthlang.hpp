#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "awe/features.hpp"
#include "awe/rng.hpp"
#include "awe/tensor.hpp"

namespace awe::synth {

enum class PhoneClass { Vowel, Consonant };
enum class StressMode { FixedInitial, FixedPenultimate, FreeMovable };

std::string_view to_string(PhoneClass c);
std::string_view to_string(StressMode m);
PhoneClass phone_class_from_string(std::string_view s);
StressMode stress_mode_from_string(std::string_view s);

struct Phone {
  std::string id;
  PhoneClass cls = PhoneClass::Consonant;
  nn::Tensor prototype;  // S x k sub-state trajectory
  std::size_t min_frames = 1;
  std::size_t max_frames = 2;

  friend bool operator==(const Phone&, const Phone&) = default;
};

// A synthetic language. The bigram matrix has one row per phone plus a final
// word-start row, and one column per phone plus a final word-end column.
struct LanguageSpec {
  std::string id;
  std::vector<Phone> phones;
  nn::Tensor transitions;  // (n + 1) x (n + 1)
  StressMode stress = StressMode::FixedInitial;
  double vowel_reduction = 0.0;

  std::size_t num_phones() const { return phones.size(); }
  std::size_t dim() const;
  std::size_t sub_states() const;
  std::size_t start_state() const { return phones.size(); }
  std::size_t end_state() const { return phones.size(); }
  // Throws NotFoundError for unknown phone ids.
  std::size_t index_of(std::string_view phone_id) const;
  // Throws ConfigError when an invariant is violated.
  void validate() const;

  friend bool operator==(const LanguageSpec&, const LanguageSpec&) = default;
};

struct LanguageParams {
  std::size_t num_vowels = 8;
  std::size_t num_consonants = 16;
  std::size_t dim = 39;
  std::size_t sub_states = 3;
  std::size_t min_frames = 1;
  std::size_t max_frames = 2;
  double prototype_scale = 1.0;
  // Fraction of phone-to-phone bigrams that are forbidden.
  double forbidden_fraction = 0.3;
  // Probability mass of the word-end transition from every phone.
  double end_mass = 0.2;
  StressMode stress = StressMode::FixedInitial;
  double vowel_reduction = 0.0;
};

LanguageSpec random_language(std::string id, const LanguageParams& params, Rng& rng);

// Moves every prototype a fraction `perturbation` toward a fresh random
// prototype, replaces round(perturbation * n) phones outright (new ids, same
// class), mixes the bigram matrix toward a random one by the same fraction,
// and redraws prosody with matching probability. perturbation = 0 returns the
// base spec unchanged apart from `new_id`.
LanguageSpec derive_language(const LanguageSpec& base, double perturbation, Rng& rng,
                             std::string new_id = {});

// Ground-truth typological distance: mean Frobenius distance of prototypes of
// phones shared by id, plus kUnmatchedPenalty times the unmatched share of the
// inventory union, plus the L1 distance between bigram matrices aligned by
// phone id (normalized by the number of source states), plus prosody terms.
inline constexpr double kUnmatchedPenalty = 20.0;
double language_distance(const LanguageSpec& a, const LanguageSpec& b);

// Constrained Markov walk: no word end before min_len, forced end at max_len.
// Dead ends are retried; throws ConfigError after `max_retries` failures.
std::vector<std::string> sample_word(const LanguageSpec& spec, std::size_t min_len,
                                     std::size_t max_len, Rng& rng, std::size_t max_retries = 1000);

struct SpeakerModel {
  std::string id;
  std::string gender;
  std::vector<double> scale;   // per-dimension, > 0
  std::vector<double> offset;  // per-dimension
  double rate = 1.0;           // in [0.7, 1.3]
  double noise = 0.0;          // Gaussian std-dev added per coefficient

  void validate(std::size_t dim) const;
};

SpeakerModel identity_speaker(std::size_t dim);
SpeakerModel random_speaker(std::string id, std::string gender, std::size_t dim, Rng& rng,
                            double noise = 0.15);

// Frames per sub-state are drawn from [min_frames, max_frames], scaled by the
// speaker rate and clamped to [ceil(0.7 min), floor(1.3 max)]. Under free
// stress, unstressed vowels are shortened and pulled toward the inventory
// centroid by the vowel-reduction factor. The speaker's affine warp and noise
// are applied last. `phone_starts`, when given, receives the first frame of
// every phone.
features::FeatureSequence render(std::span<const std::string> phones, const LanguageSpec& spec,
                                 const SpeakerModel& speaker, Rng& rng,
                                 std::vector<std::size_t>* phone_starts = nullptr);

std::string language_to_json(const LanguageSpec& spec);
LanguageSpec language_from_json(std::string_view text);

}  // namespace awe::synth
