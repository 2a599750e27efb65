#include "awe/corpus.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "awe/error.hpp"
#include "awe/feature_file.hpp"

namespace awe::corpus {

void SplitManifest::validate() const {
  auto disjoint = [](const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::set<std::string> sa(a.begin(), a.end());
    return std::none_of(b.begin(), b.end(), [&](const std::string& x) { return sa.count(x) != 0; });
  };
  if (!disjoint(train, validation) || !disjoint(train, test) || !disjoint(validation, test)) {
    throw DataError("split manifest for '" + language + "': segment appears in two splits");
  }
  if (!disjoint(train_speakers, validation_speakers) || !disjoint(train_speakers, test_speakers) ||
      !disjoint(validation_speakers, test_speakers)) {
    throw DataError("split manifest for '" + language + "': speaker appears in two splits");
  }
}

std::vector<SegmentRecord> filter_segments(std::span<const SegmentRecord> records) {
  std::vector<SegmentRecord> kept;
  for (const auto& r : records) {
    if (r.phones.size() >= kMinPhones && r.duration_s < kMaxDurationSeconds) kept.push_back(r);
  }
  return kept;
}

SplitManifest split_by_speaker(std::span<const SegmentRecord> records, SplitFractions fractions, Rng& rng,
                               std::string language) {
  const double fr[3] = {fractions.train, fractions.validation, fractions.test};
  double total = 0.0;
  for (double f : fr) {
    if (!(f >= 0.0)) throw ConfigError("split fractions must be nonnegative");
    total += f;
  }
  if (!(total > 0.0)) throw ConfigError("split fractions sum to zero");

  std::set<std::string> speaker_set;
  for (const auto& r : records) speaker_set.insert(r.speaker);
  std::vector<std::string> speakers(speaker_set.begin(), speaker_set.end());
  if (speakers.size() < 3) {
    throw ConfigError("split_by_speaker: need at least 3 speakers, found " + std::to_string(speakers.size()));
  }
  rng.shuffle(speakers);

  const auto n = static_cast<double>(speakers.size());
  std::size_t counts[3];
  double remainders[3];
  std::size_t assigned = 0;
  for (int i = 0; i < 3; ++i) {
    const double exact = fr[i] / total * n;
    counts[i] = static_cast<std::size_t>(std::floor(exact));
    remainders[i] = exact - std::floor(exact);
    assigned += counts[i];
  }
  while (assigned < speakers.size()) {
    int best = 0;
    for (int i = 1; i < 3; ++i) {
      if (remainders[i] > remainders[best]) best = i;
    }
    ++counts[best];
    remainders[best] = -1.0;
    ++assigned;
  }
  for (int i = 0; i < 3; ++i) {
    if (fr[i] > 0.0 && counts[i] == 0) {
      throw ConfigError("split_by_speaker: " + std::to_string(speakers.size()) +
                        " speakers are too few for the requested fractions");
    }
  }

  SplitManifest m;
  m.language = std::move(language);
  std::map<std::string, int> split_of;
  std::size_t pos = 0;
  std::vector<std::string>* spk[3] = {&m.train_speakers, &m.validation_speakers, &m.test_speakers};
  for (int i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < counts[i]; ++j, ++pos) {
      spk[i]->push_back(speakers[pos]);
      split_of[speakers[pos]] = i;
    }
    std::sort(spk[i]->begin(), spk[i]->end());
  }
  std::vector<std::string>* seg[3] = {&m.train, &m.validation, &m.test};
  for (const auto& r : records) seg[split_of.at(r.speaker)]->push_back(r.id);
  m.validate();
  return m;
}

std::vector<std::pair<std::size_t, std::size_t>> pair_same_type(std::span<const SegmentRecord> records,
                                                                Rng& rng, bool prefer_different_speaker) {
  std::map<std::string, std::vector<std::size_t>> by_word;
  for (std::size_t i = 0; i < records.size(); ++i) by_word[records[i].word].push_back(i);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& group = by_word[records[i].word];
    if (group.size() < 2) continue;
    candidates.clear();
    if (prefer_different_speaker) {
      for (std::size_t j : group) {
        if (j != i && records[j].speaker != records[i].speaker && records[j].id != records[i].id) {
          candidates.push_back(j);
        }
      }
    }
    if (candidates.empty()) {
      for (std::size_t j : group) {
        if (j != i && records[j].id != records[i].id) candidates.push_back(j);
      }
    }
    if (candidates.empty()) continue;
    pairs.emplace_back(i, candidates[rng.uniform_int(static_cast<std::uint64_t>(candidates.size()))]);
  }
  return pairs;
}

const SegmentRecord& Corpus::segment(const std::string& id) const {
  for (const auto& s : segments) {
    if (s.id == id) return s;
  }
  throw NotFoundError("segment '" + id + "' not in corpus '" + language + "'");
}

std::vector<SegmentRecord> Corpus::records(std::span<const std::string> ids) const {
  std::map<std::string, const SegmentRecord*> index;
  for (const auto& s : segments) index[s.id] = &s;
  std::vector<SegmentRecord> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    auto it = index.find(id);
    if (it == index.end()) throw NotFoundError("segment '" + id + "' not in corpus '" + language + "'");
    out.push_back(*it->second);
  }
  return out;
}

void write_manifest(const std::filesystem::path& path, const Corpus& corpus) {
  nlohmann::json j;
  j["language"] = corpus.language;
  nlohmann::json segs = nlohmann::json::array();
  for (const auto& s : corpus.segments) {
    segs.push_back({{"id", s.id},
                    {"word", s.word},
                    {"phones", s.phones},
                    {"speaker", s.speaker},
                    {"dur_s", s.duration_s},
                    {"feat", {{"file", s.feat.file}, {"seg_id", s.feat.seg_id}}}});
  }
  j["segments"] = std::move(segs);
  j["splits"] = {{"train", corpus.splits.train},
                 {"validation", corpus.splits.validation},
                 {"test", corpus.splits.test}};
  j["speakers"] = {{"train", corpus.splits.train_speakers},
                   {"validation", corpus.splits.validation_speakers},
                   {"test", corpus.splits.test_speakers}};
  std::ofstream os(path);
  if (!os) throw DataError("cannot write manifest '" + path.string() + "'");
  os << j.dump(1) << '\n';
}

Corpus read_manifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw NotFoundError("manifest '" + path.string() + "' not found");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("manifest '" + path.string() + "': " + e.what());
  }
  try {
    Corpus c;
    c.language = j.at("language").get<std::string>();
    for (const auto& s : j.at("segments")) {
      SegmentRecord r;
      r.id = s.at("id").get<std::string>();
      r.word = s.at("word").get<std::string>();
      r.phones = s.at("phones").get<std::vector<std::string>>();
      r.speaker = s.at("speaker").get<std::string>();
      r.duration_s = s.at("dur_s").get<double>();
      r.feat.file = s.at("feat").at("file").get<std::string>();
      r.feat.seg_id = s.at("feat").at("seg_id").get<std::string>();
      if (!(r.duration_s > 0.0) || r.phones.empty()) {
        throw DataError("manifest '" + path.string() + "': invalid segment '" + r.id + "'");
      }
      c.segments.push_back(std::move(r));
    }
    c.splits.language = c.language;
    const auto& sp = j.at("splits");
    c.splits.train = sp.at("train").get<std::vector<std::string>>();
    c.splits.validation = sp.at("validation").get<std::vector<std::string>>();
    c.splits.test = sp.at("test").get<std::vector<std::string>>();
    const auto& spk = j.at("speakers");
    c.splits.train_speakers = spk.at("train").get<std::vector<std::string>>();
    c.splits.validation_speakers = spk.at("validation").get<std::vector<std::string>>();
    c.splits.test_speakers = spk.at("test").get<std::vector<std::string>>();
    c.splits.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("manifest '" + path.string() + "': " + e.what());
  }
}

std::vector<features::FeatureSequence> load_features(std::span<const SegmentRecord> records,
                                                     const std::filesystem::path& root) {
  std::map<std::string, std::unique_ptr<features::FeatureReader>> readers;
  std::vector<features::FeatureSequence> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    auto& reader = readers[r.feat.file];
    if (!reader) reader = std::make_unique<features::FeatureReader>(root / r.feat.file);
    out.push_back(reader->read(r.feat.seg_id));
  }
  return out;
}

}  // namespace awe::corpus
