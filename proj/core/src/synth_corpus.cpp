#include "awe/synth_corpus.hpp"

#include <cstdio>
#include <map>
#include <set>

#include "awe/error.hpp"

namespace awe::synth {

void CorpusConfig::validate() const {
  if (speakers < 3) throw ConfigError("corpus needs at least 3 speakers");
  if (words < 2) throw ConfigError("corpus needs at least 2 word types");
  if (repetitions < 1) throw ConfigError("repetitions must be >= 1");
  if (min_phones < 1 || max_phones < min_phones) throw ConfigError("invalid word length range");
  if (!(speaker_noise >= 0.0)) throw ConfigError("speaker noise must be >= 0");
}

SynthCorpus synthesize_corpus(const LanguageSpec& spec, const CorpusConfig& config, Rng& rng) {
  config.validate();
  spec.validate();
  Rng lex_rng = rng.fork("lexicon");
  Rng spk_rng = rng.fork("speakers");
  Rng render_rng = rng.fork("render");
  Rng split_rng = rng.fork("split");

  std::vector<std::vector<std::string>> lexicon;
  std::set<std::vector<std::string>> seen;
  for (std::size_t attempts = 0; lexicon.size() < config.words; ++attempts) {
    if (attempts > 100 * config.words) {
      throw ConfigError("language '" + spec.id + "' cannot produce " + std::to_string(config.words) +
                        " distinct words");
    }
    auto w = sample_word(spec, config.min_phones, config.max_phones, lex_rng);
    if (seen.insert(w).second) lexicon.push_back(std::move(w));
  }

  SynthCorpus out;
  out.corpus.language = spec.id;
  char buf[32];
  for (std::size_t s = 0; s < config.speakers; ++s) {
    std::snprintf(buf, sizeof buf, "s%02zu", s);
    out.speakers.push_back(random_speaker(spec.id + "." + buf, s % 2 == 0 ? "f" : "m", spec.dim(), spk_rng,
                                          config.speaker_noise));
  }

  std::vector<corpus::SegmentRecord> records;
  for (const auto& speaker : out.speakers) {
    for (std::size_t w = 0; w < lexicon.size(); ++w) {
      for (std::size_t r = 0; r < config.repetitions; ++r) {
        std::snprintf(buf, sizeof buf, "w%03zu", w);
        const std::string word = buf;
        corpus::SegmentRecord rec;
        rec.id = speaker.id + "-" + word + "-" + std::to_string(r);
        rec.word = word;
        rec.phones = lexicon[w];
        rec.speaker = speaker.id;
        features::FeatureSequence f = render(lexicon[w], spec, speaker, render_rng);
        rec.duration_s = static_cast<double>(f.frames.rows()) * f.frame_shift_ms / 1000.0;
        rec.feat = {config.feature_file, rec.id};
        records.push_back(rec);
        out.features.push_back({rec.id, std::move(f)});
      }
    }
  }

  out.corpus.segments = corpus::filter_segments(records);
  if (out.corpus.segments.size() != records.size()) {
    std::set<std::string> kept;
    for (const auto& r : out.corpus.segments) kept.insert(r.id);
    std::erase_if(out.features, [&](const features::FeatureSegment& f) { return kept.count(f.id) == 0; });
  }
  out.corpus.splits = corpus::split_by_speaker(out.corpus.segments, config.fractions, split_rng, spec.id);
  return out;
}

}  // namespace awe::synth
