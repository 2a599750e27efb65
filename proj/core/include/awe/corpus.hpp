#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "awe/features.hpp"
#include "awe/rng.hpp"

namespace awe::corpus {

struct FeatureRef {
  std::string file;  // relative to the manifest directory
  std::string seg_id;

  friend bool operator==(const FeatureRef&, const FeatureRef&) = default;
};

struct SegmentRecord {
  std::string id;
  std::string word;
  std::vector<std::string> phones;
  std::string speaker;
  double duration_s = 0.0;
  FeatureRef feat;

  friend bool operator==(const SegmentRecord&, const SegmentRecord&) = default;
};

struct SplitManifest {
  std::string language;
  std::vector<std::string> train;
  std::vector<std::string> validation;
  std::vector<std::string> test;
  std::vector<std::string> train_speakers;
  std::vector<std::string> validation_speakers;
  std::vector<std::string> test_speakers;

  // Throws DataError unless the three splits are pairwise disjoint both in
  // segment ids and in speakers.
  void validate() const;

  friend bool operator==(const SplitManifest&, const SplitManifest&) = default;
};

struct SplitFractions {
  double train = 6.0;
  double validation = 1.0;
  double test = 1.0;
};

inline constexpr std::size_t kMinPhones = 4;       // "longer than 3 phonemes"
inline constexpr double kMaxDurationSeconds = 1.1;  // exclusive

// Keeps records with more than three phones and duration below 1.1 s.
std::vector<SegmentRecord> filter_segments(std::span<const SegmentRecord> records);

// Partitions speakers first (sorted, then shuffled), by largest-remainder
// rounding of the fractions, then assigns every segment to its speaker's
// split. Throws ConfigError if a split with a positive fraction would get no
// speaker or fewer than three speakers are present.
SplitManifest split_by_speaker(std::span<const SegmentRecord> records, SplitFractions fractions, Rng& rng,
                               std::string language = {});

// For every record whose word type has another instance, emits (anchor,
// positive) record indices with the positive drawn uniformly from the other
// instances. With prefer_different_speaker, the draw is restricted to other
// speakers whenever such an instance exists. Singleton types emit nothing.
std::vector<std::pair<std::size_t, std::size_t>> pair_same_type(std::span<const SegmentRecord> records,
                                                                Rng& rng,
                                                                bool prefer_different_speaker = true);

// A language's segment inventory plus its split.
struct Corpus {
  std::string language;
  std::vector<SegmentRecord> segments;
  SplitManifest splits;

  const SegmentRecord& segment(const std::string& id) const;
  std::vector<SegmentRecord> records(std::span<const std::string> ids) const;
};

// {language, segments:[{id, word, phones, speaker, dur_s, feat:{file, seg_id}}],
//  splits:{train, validation, test}, speakers:{train, validation, test}}
void write_manifest(const std::filesystem::path& path, const Corpus& corpus);
Corpus read_manifest(const std::filesystem::path& path);

// Loads the features of `records` from files referenced relative to `root`.
std::vector<features::FeatureSequence> load_features(std::span<const SegmentRecord> records,
                                                     const std::filesystem::path& root);

}  // namespace awe::corpus
