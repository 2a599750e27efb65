#pragma once

#include <vector>

#include "awe/corpus.hpp"
#include "awe/feature_file.hpp"
#include "awe/synthlang.hpp"

namespace awe::synth {

struct CorpusConfig {
  std::size_t speakers = 8;
  std::size_t words = 100;        // distinct word types in the lexicon
  std::size_t repetitions = 1;    // tokens per word per speaker
  std::size_t min_phones = 4;
  std::size_t max_phones = 7;
  double speaker_noise = 0.15;
  corpus::SplitFractions fractions{4.0, 2.0, 2.0};
  std::string feature_file = "features.awef";

  void validate() const;
};

struct SynthCorpus {
  corpus::Corpus corpus;
  std::vector<features::FeatureSegment> features;
  std::vector<SpeakerModel> speakers;
};

// Draws a lexicon of distinct words, renders every word for every speaker,
// filters the records and splits them by speaker. Segment ids are
// "<language>-<speaker>-<word>-<repetition>".
SynthCorpus synthesize_corpus(const LanguageSpec& spec, const CorpusConfig& config, Rng& rng);

}  // namespace awe::synth
