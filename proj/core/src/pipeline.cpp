#include "awe/pipeline.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "awe/error.hpp"

namespace awe::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(ClusterVariant v) {
  switch (v) {
    case ClusterVariant::Rows: return "rows";
    case ClusterVariant::Columns: return "columns";
    case ClusterVariant::Symmetrized: return "symmetrized";
  }
  return "rows";
}

ClusterVariant parse_cluster_variant(std::string_view name) {
  if (name == "rows") return ClusterVariant::Rows;
  if (name == "columns") return ClusterVariant::Columns;
  if (name == "symmetrized") return ClusterVariant::Symmetrized;
  throw ConfigError("unknown cluster variant '" + std::string(name) + "'");
}

std::vector<std::string> RunConfig::language_ids() const {
  std::vector<std::string> out;
  for (const auto& l : languages) out.push_back(l.id);
  return out;
}

void RunConfig::validate() const {
  if (name.empty()) throw ConfigError("$.name: must not be empty");
  if (output_dir.empty()) throw ConfigError("$.output_dir: must not be empty");
  if (languages.size() < 2) throw ConfigError("$.languages: at least 2 languages are required");
  std::set<std::string> seen;
  for (std::size_t i = 0; i < languages.size(); ++i) {
    const auto& l = languages[i];
    const std::string at = "$.languages[" + std::to_string(i) + "]";
    if (l.id.empty() || l.id.find_first_of("/\\ ") != std::string::npos) {
      throw ConfigError(at + ".id: must be a nonempty name without slashes or spaces");
    }
    if (!seen.insert(l.id).second) throw ConfigError(at + ".id: duplicate language '" + l.id + "'");
    if (l.parent.empty()) {
      if (i != 0) throw ConfigError(at + ".parent: only the first language may be a base language");
    } else if (!seen.count(l.parent) || l.parent == l.id) {
      throw ConfigError(at + ".parent: '" + l.parent + "' is not defined earlier");
    }
    if (!(l.perturbation >= 0.0 && l.perturbation <= 1.0)) {
      throw ConfigError(at + ".perturbation: must lie in [0, 1]");
    }
  }
  if (!languages.front().parent.empty()) throw ConfigError("$.languages[0]: the first language must be a base");
  if (objectives.empty()) throw ConfigError("$.objectives: at least one objective is required");
  if (std::set<Objective>(objectives.begin(), objectives.end()).size() != objectives.size()) {
    throw ConfigError("$.objectives: duplicate objective");
  }
  if (kernels.empty()) throw ConfigError("$.kernels: at least one kernel is required");
  for (const auto& k : kernels) {
    if (k.kind == rsa::Kernel::Kind::Rbf && !(k.bandwidth_fraction > 0.0)) {
      throw ConfigError("$.kernels: rbf bandwidth fraction must be positive");
    }
  }
  for (const std::string* id : {&ordering.reference, &ordering.near, &ordering.far}) {
    if (!seen.count(*id)) throw ConfigError("$.ordering: language '" + *id + "' is not defined");
  }
  try {
    corpus.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("$.corpus: ") + e.what());
  }
  try {
    train.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("$.train: ") + e.what());
  }
  if (language_params.dim == 0 || language_params.num_vowels == 0 || language_params.num_consonants == 0) {
    throw ConfigError("$.language_params: dim and phone counts must be positive");
  }
}

namespace {

// Typed view of one JSON object that records which keys were consumed.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail("", "expected an object");
  }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    throw ConfigError(at(key) + ": " + what);
  }

  std::string at(const std::string& key) const { return key.empty() ? path_ : path_ + "." + key; }

  const json* find(const std::string& key) {
    known_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void number(const std::string& key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) fail(key, "expected a number");
      out = v->get<double>();
      if (!std::isfinite(out)) fail(key, "expected a finite number");
    }
  }

  void count(const std::string& key, std::size_t& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer() || v->get<std::int64_t>() < 0) fail(key, "expected a nonnegative integer");
      out = v->get<std::size_t>();
    }
  }

  void u64(const std::string& key, std::uint64_t& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<std::int64_t>() >= 0)) {
        fail(key, "expected an unsigned integer");
      }
      out = v->get<std::uint64_t>();
    }
  }

  void boolean(const std::string& key, bool& out) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) fail(key, "expected true or false");
      out = v->get<bool>();
    }
  }

  void string(const std::string& key, std::string& out) {
    if (const json* v = find(key)) {
      if (!v->is_string()) fail(key, "expected a string");
      out = v->get<std::string>();
    }
  }

  template <class F>
  void parsed(const std::string& key, F&& parse) {
    if (const json* v = find(key)) {
      if (!v->is_string()) fail(key, "expected a string");
      try {
        parse(v->get<std::string>());
      } catch (const Error& e) {
        fail(key, e.what());
      }
    }
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!known_.count(it.key())) fail(it.key(), "unknown key");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> known_;
};

void read_language_params(Reader r, synth::LanguageParams& p) {
  r.count("num_vowels", p.num_vowels);
  r.count("num_consonants", p.num_consonants);
  r.count("dim", p.dim);
  r.count("sub_states", p.sub_states);
  r.count("min_frames", p.min_frames);
  r.count("max_frames", p.max_frames);
  r.number("prototype_scale", p.prototype_scale);
  r.number("forbidden_fraction", p.forbidden_fraction);
  r.number("end_mass", p.end_mass);
  r.parsed("stress", [&](const std::string& s) { p.stress = synth::stress_mode_from_string(s); });
  r.number("vowel_reduction", p.vowel_reduction);
  r.finish();
}

void read_corpus(Reader r, synth::CorpusConfig& c) {
  r.count("speakers", c.speakers);
  r.count("words", c.words);
  r.count("repetitions", c.repetitions);
  r.count("min_phones", c.min_phones);
  r.count("max_phones", c.max_phones);
  r.number("speaker_noise", c.speaker_noise);
  if (const json* f = r.find("split_fractions")) {
    if (!f->is_array() || f->size() != 3) r.fail("split_fractions", "expected [train, validation, test]");
    for (std::size_t i = 0; i < 3; ++i) {
      if (!(*f)[i].is_number()) r.fail("split_fractions[" + std::to_string(i) + "]", "expected a number");
    }
    c.fractions = {(*f)[0].get<double>(), (*f)[1].get<double>(), (*f)[2].get<double>()};
  }
  r.finish();
}

void read_train(Reader r, enc::TrainConfig& t) {
  // A named profile sets the base values; explicit keys override it.
  r.parsed("profile", [&](const std::string& s) {
    if (s == "full") {
      t = enc::TrainConfig::full_scale();
    } else if (s == "desk") {
      t = enc::TrainConfig{};
    } else {
      throw ConfigError("unknown profile '" + s + "' (expected desk or full)");
    }
  });
  r.count("epochs", t.epochs);
  r.count("batch_size", t.batch_size);
  r.number("learning_rate", t.learning_rate);
  r.number("plateau_factor", t.plateau_factor);
  r.count("patience", t.patience);
  r.number("margin", t.margin);
  r.parsed("distance", [&](const std::string& s) { t.distance = parse_distance_convention(s); });
  r.count("hidden", t.hidden);
  r.count("layers", t.layers);
  r.count("phone_embedding_dim", t.phone_embedding_dim);
  r.boolean("per_step_mean", t.per_step_mean);
  r.boolean("different_speaker_positives", t.different_speaker_positives);
  r.parsed("validation_mode", [&](const std::string& s) { t.validation_mode = eval::parse_relevance_mode(s); });
  r.finish();
}

template <class T, class F>
void read_string_list(Reader& r, const std::string& key, std::vector<T>& out, F&& parse) {
  if (const json* v = r.find(key)) {
    if (!v->is_array()) r.fail(key, "expected an array of strings");
    out.clear();
    for (std::size_t i = 0; i < v->size(); ++i) {
      const std::string item = key + "[" + std::to_string(i) + "]";
      if (!(*v)[i].is_string()) r.fail(item, "expected a string");
      try {
        out.push_back(parse((*v)[i].get<std::string>()));
      } catch (const Error& e) {
        r.fail(item, e.what());
      }
    }
  }
}

}  // namespace

RunConfig config_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("$: invalid JSON: ") + e.what());
  }
  RunConfig c;
  Reader r(j, "$");
  r.string("name", c.name);
  r.u64("seed", c.seed);
  std::string out = c.output_dir.string();
  r.string("output_dir", out);
  c.output_dir = out;
  if (const json* v = r.find("language_params")) read_language_params(Reader(*v, r.at("language_params")), c.language_params);
  if (const json* v = r.find("languages")) {
    if (!v->is_array()) r.fail("languages", "expected an array");
    c.languages.clear();
    for (std::size_t i = 0; i < v->size(); ++i) {
      Reader lr((*v)[i], r.at("languages[" + std::to_string(i) + "]"));
      LanguageDef d;
      lr.string("id", d.id);
      lr.string("parent", d.parent);
      lr.number("perturbation", d.perturbation);
      lr.finish();
      c.languages.push_back(std::move(d));
    }
  }
  if (const json* v = r.find("corpus")) read_corpus(Reader(*v, r.at("corpus")), c.corpus);
  read_string_list(r, "objectives", c.objectives, [](const std::string& s) { return parse_objective(s); });
  if (const json* v = r.find("train")) read_train(Reader(*v, r.at("train")), c.train);
  r.boolean("shared_init", c.shared_init);
  read_string_list(r, "kernels", c.kernels, [](const std::string& s) { return rsa::Kernel::parse(s); });
  r.parsed("cluster", [&](const std::string& s) { c.cluster = parse_cluster_variant(s); });
  r.parsed("eval_mode", [&](const std::string& s) { c.eval_mode = eval::parse_relevance_mode(s); });
  r.count("baseline_trials", c.baseline_trials);
  if (const json* v = r.find("ordering")) {
    Reader orr(*v, r.at("ordering"));
    orr.string("reference", c.ordering.reference);
    orr.string("near", c.ordering.near);
    orr.string("far", c.ordering.far);
    orr.finish();
  }
  r.finish();
  c.validate();
  return c;
}

namespace {

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed for " + path.string());
}

}  // namespace

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str());
}

std::string config_to_json(const RunConfig& c) {
  json langs = json::array();
  for (const auto& l : c.languages) langs.push_back({{"id", l.id}, {"parent", l.parent}, {"perturbation", l.perturbation}});
  json objectives = json::array();
  for (Objective o : c.objectives) objectives.push_back(std::string(to_string(o)));
  json kernels = json::array();
  for (const auto& k : c.kernels) kernels.push_back(k.tag());
  const auto& p = c.language_params;
  const auto& t = c.train;
  const auto& k = c.corpus;
  json j = {
      {"name", c.name},
      {"seed", c.seed},
      {"output_dir", c.output_dir.string()},
      {"language_params",
       {{"num_vowels", p.num_vowels},
        {"num_consonants", p.num_consonants},
        {"dim", p.dim},
        {"sub_states", p.sub_states},
        {"min_frames", p.min_frames},
        {"max_frames", p.max_frames},
        {"prototype_scale", p.prototype_scale},
        {"forbidden_fraction", p.forbidden_fraction},
        {"end_mass", p.end_mass},
        {"stress", std::string(synth::to_string(p.stress))},
        {"vowel_reduction", p.vowel_reduction}}},
      {"languages", langs},
      {"corpus",
       {{"speakers", k.speakers},
        {"words", k.words},
        {"repetitions", k.repetitions},
        {"min_phones", k.min_phones},
        {"max_phones", k.max_phones},
        {"speaker_noise", k.speaker_noise},
        {"split_fractions", {k.fractions.train, k.fractions.validation, k.fractions.test}}}},
      {"objectives", objectives},
      {"train",
       {{"epochs", t.epochs},
        {"batch_size", t.batch_size},
        {"learning_rate", t.learning_rate},
        {"plateau_factor", t.plateau_factor},
        {"patience", t.patience},
        {"margin", t.margin},
        {"distance", std::string(to_string(t.distance))},
        {"hidden", t.hidden},
        {"layers", t.layers},
        {"phone_embedding_dim", t.phone_embedding_dim},
        {"per_step_mean", t.per_step_mean},
        {"different_speaker_positives", t.different_speaker_positives},
        {"validation_mode", std::string(eval::to_string(t.validation_mode))}}},
      {"shared_init", c.shared_init},
      {"kernels", kernels},
      {"cluster", std::string(to_string(c.cluster))},
      {"eval_mode", std::string(eval::to_string(c.eval_mode))},
      {"baseline_trials", c.baseline_trials},
      {"ordering", {{"reference", c.ordering.reference}, {"near", c.ordering.near}, {"far", c.ordering.far}}},
  };
  return j.dump(2);
}

namespace {

std::string objective_dir(Objective o) {
  std::string s(to_string(o));
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char ch) { return std::tolower(ch); });
  return s;
}

std::string kernel_dir(const rsa::Kernel& k) {
  std::string out;
  for (char ch : k.tag()) {
    if (ch == '(') {
      out += '_';
    } else if (ch != ')') {
      out += ch;
    }
  }
  return out;
}

}  // namespace

fs::path Layout::language_spec(const std::string& lang) const { return root / "languages" / (lang + ".json"); }
fs::path Layout::distances_csv() const { return root / "languages" / "distances.csv"; }
fs::path Layout::distances_json() const { return root / "languages" / "distances.json"; }
fs::path Layout::corpus_dir(const std::string& lang) const { return root / "corpus" / lang; }
fs::path Layout::manifest(const std::string& lang) const { return corpus_dir(lang) / "manifest.json"; }
fs::path Layout::checkpoint(const std::string& lang, Objective o) const {
  return root / "models" / lang / (objective_dir(o) + ".awec");
}
fs::path Layout::history(const std::string& lang, Objective o) const {
  return root / "models" / lang / (objective_dir(o) + ".history.json");
}
fs::path Layout::embedding(const std::string& stimuli, const std::string& encoder, Objective o) const {
  return root / "embeddings" / objective_dir(o) / (stimuli + "__" + encoder + ".awex");
}
fs::path Layout::eval_result(const std::string& lang, Objective o) const {
  return root / "eval" / (lang + "." + objective_dir(o) + ".json");
}
fs::path Layout::analysis_dir(Objective o, const rsa::Kernel& k) const {
  return root / "analysis" / objective_dir(o) / kernel_dir(k);
}
fs::path Layout::cross_model(const rsa::Kernel& k, std::string_view ext) const {
  return root / "analysis" / ("cross_model." + kernel_dir(k) + "." + std::string(ext));
}
fs::path Layout::summary() const { return root / "analysis" / "summary.json"; }
fs::path Layout::report() const { return root / "report.md"; }

std::uint64_t stage_seed(const RunConfig& config, std::string_view stage) {
  return derive_seed(config.seed, stage);
}

std::uint64_t train_seed(const RunConfig& config, const std::string& language, Objective objective) {
  const std::string stage = "train/" + objective_dir(objective);
  return stage_seed(config, config.shared_init ? stage : stage + "/" + language);
}

namespace {

Layout layout_of(const RunConfig& c) { return Layout{c.output_dir}; }

synth::LanguageSpec load_language(const Layout& lay, const std::string& lang) {
  const fs::path p = lay.language_spec(lang);
  if (!fs::exists(p)) throw NotFoundError("missing language spec " + p.string() + " (run synth first)");
  return synth::language_from_json(read_text(p));
}

corpus::Corpus load_corpus(const Layout& lay, const std::string& lang) {
  const fs::path p = lay.manifest(lang);
  if (!fs::exists(p)) throw NotFoundError("missing manifest " + p.string() + " (run synth first)");
  return corpus::read_manifest(p);
}

bool selected(const Filter& f, const std::string& lang, Objective o) {
  return (!f.language || *f.language == lang) && (!f.objective || *f.objective == o);
}

void check_filter(const RunConfig& c, const Filter& f) {
  if (f.language) {
    const auto ids = c.language_ids();
    if (std::find(ids.begin(), ids.end(), *f.language) == ids.end()) {
      throw ConfigError("language '" + *f.language + "' is not defined in the config");
    }
  }
  if (f.objective && std::find(c.objectives.begin(), c.objectives.end(), *f.objective) == c.objectives.end()) {
    throw ConfigError("objective " + std::string(to_string(*f.objective)) + " is not enabled in the config");
  }
}

enc::EncoderModel load_model(const Layout& lay, const std::string& lang, Objective o) {
  const fs::path p = lay.checkpoint(lang, o);
  if (!fs::exists(p)) throw NotFoundError("missing checkpoint " + p.string());
  return enc::read_checkpoint(p);
}

}  // namespace

void run_synth(const RunConfig& config) {
  config.validate();
  const Layout lay = layout_of(config);
  std::map<std::string, synth::LanguageSpec> specs;
  std::vector<synth::LanguageSpec> ordered;
  for (const auto& def : config.languages) {
    Rng rng(stage_seed(config, "synth/language/" + def.id));
    synth::LanguageSpec spec = def.parent.empty()
                                   ? synth::random_language(def.id, config.language_params, rng)
                                   : synth::derive_language(specs.at(def.parent), def.perturbation, rng, def.id);
    write_text(lay.language_spec(def.id), synth::language_to_json(spec));
    specs.emplace(def.id, spec);
    ordered.push_back(std::move(spec));
  }

  const std::size_t m = ordered.size();
  json table = json::array();
  std::ostringstream csv;
  csv << "language";
  for (const auto& s : ordered) csv << ',' << s.id;
  csv << '\n';
  for (std::size_t i = 0; i < m; ++i) {
    json row = json::array();
    csv << ordered[i].id;
    for (std::size_t j = 0; j < m; ++j) {
      const double d = i == j ? 0.0 : synth::language_distance(ordered[i], ordered[j]);
      row.push_back(d);
      char buf[32];
      std::snprintf(buf, sizeof buf, ",%.6f", d);
      csv << buf;
    }
    csv << '\n';
    table.push_back(row);
  }
  write_text(lay.distances_csv(), csv.str());
  write_text(lay.distances_json(), json{{"languages", config.language_ids()}, {"distances", table}}.dump(1));

  for (const auto& spec : ordered) {
    Rng rng(stage_seed(config, "synth/corpus/" + spec.id));
    synth::SynthCorpus sc = synth::synthesize_corpus(spec, config.corpus, rng);
    const fs::path dir = lay.corpus_dir(spec.id);
    fs::create_directories(dir);
    features::write_features(dir / config.corpus.feature_file, sc.features);
    corpus::write_manifest(lay.manifest(spec.id), sc.corpus);
  }
}

namespace {

enc::TrainingSet training_set(const Layout& lay, const std::string& lang) {
  const synth::LanguageSpec spec = load_language(lay, lang);
  const corpus::Corpus corp = load_corpus(lay, lang);
  enc::TrainingSet ts;
  ts.language = lang;
  for (const auto& p : spec.phones) ts.phone_vocab.push_back(p.id);
  ts.train = corp.records(corp.splits.train);
  ts.validation = corp.records(corp.splits.validation);
  ts.train_features = corpus::load_features(ts.train, lay.corpus_dir(lang));
  ts.validation_features = corpus::load_features(ts.validation, lay.corpus_dir(lang));
  return ts;
}

}  // namespace

void run_train(const RunConfig& config, const Filter& filter) {
  config.validate();
  check_filter(config, filter);
  const Layout lay = layout_of(config);
  for (const auto& lang : config.language_ids()) {
    if (filter.language && *filter.language != lang) continue;
    const enc::TrainingSet ts = training_set(lay, lang);
    for (Objective o : config.objectives) {
      if (!selected(filter, lang, o)) continue;
      enc::TrainConfig tc = config.train;
      tc.seed = train_seed(config, lang, o);
      const enc::TrainResult result = enc::train(o, ts, tc);
      fs::create_directories(lay.checkpoint(lang, o).parent_path());
      enc::write_checkpoint(lay.checkpoint(lang, o), result.model);
      enc::write_history(lay.history(lang, o), result);
    }
  }
}

namespace {

struct SplitData {
  std::vector<corpus::SegmentRecord> records;
  std::vector<features::FeatureSequence> feats;
};

SplitData load_split(const Layout& lay, const corpus::Corpus& corp, const std::string& lang,
                     const std::vector<std::string>& ids) {
  SplitData d;
  d.records = corp.records(ids);
  d.feats = corpus::load_features(d.records, lay.corpus_dir(lang));
  return d;
}

std::vector<enc::Stimulus> stimuli_of(const SplitData& d) {
  std::vector<enc::Stimulus> out;
  for (std::size_t i = 0; i < d.records.size(); ++i) out.push_back({d.records[i].id, &d.feats[i]});
  return out;
}

void require_checkpoints(const RunConfig& config, const Layout& lay) {
  std::vector<std::string> missing;
  for (const auto& lang : config.language_ids()) {
    for (Objective o : config.objectives) {
      if (!fs::exists(lay.checkpoint(lang, o))) missing.push_back(lay.checkpoint(lang, o).string());
    }
  }
  if (!missing.empty()) {
    std::string msg = "missing checkpoints:";
    for (const auto& p : missing) msg += "\n  " + p;
    throw NotFoundError(msg);
  }
}

}  // namespace

rsa::ViewTable run_embed(const RunConfig& config) {
  config.validate();
  const Layout lay = layout_of(config);
  require_checkpoints(config, lay);
  const auto langs = config.language_ids();
  std::map<std::string, SplitData> tests;
  for (const auto& lang : langs) {
    const corpus::Corpus corp = load_corpus(lay, lang);
    tests.emplace(lang, load_split(lay, corp, lang, corp.splits.test));
  }
  rsa::ViewTable views;
  for (Objective o : config.objectives) {
    for (const auto& encoder : langs) {
      const enc::EncoderModel model = load_model(lay, encoder, o);
      for (const auto& stim : langs) {
        const auto items = stimuli_of(tests.at(stim));
        EmbeddingMatrix view = enc::embed_set(model, items, stim);
        const fs::path p = lay.embedding(stim, encoder, o);
        fs::create_directories(p.parent_path());
        write_embedding_matrix(p, view);
        views.add(std::move(view));
      }
    }
  }
  return views;
}

rsa::ViewTable load_views(const RunConfig& config) {
  const Layout lay = layout_of(config);
  rsa::ViewTable views;
  for (Objective o : config.objectives) {
    for (const auto& encoder : config.language_ids()) {
      for (const auto& stim : config.language_ids()) {
        const fs::path p = lay.embedding(stim, encoder, o);
        if (!fs::exists(p)) throw NotFoundError("missing embedding matrix " + p.string());
        views.add(read_embedding_matrix(p));
      }
    }
  }
  return views;
}

void run_eval(const RunConfig& config, const Filter& filter) {
  config.validate();
  check_filter(config, filter);
  const Layout lay = layout_of(config);
  for (const auto& lang : config.language_ids()) {
    if (filter.language && *filter.language != lang) continue;
    const corpus::Corpus corp = load_corpus(lay, lang);
    const SplitData val = load_split(lay, corp, lang, corp.splits.validation);
    const SplitData test = load_split(lay, corp, lang, corp.splits.test);
    for (Objective o : config.objectives) {
      if (!selected(filter, lang, o)) continue;
      const enc::EncoderModel model = load_model(lay, lang, o);
      json splits;
      for (const auto& [name, data] : {std::pair<std::string, const SplitData*>{"validation", &val},
                                       std::pair<std::string, const SplitData*>{"test", &test}}) {
        const eval::EvalSet set = enc::make_eval_set(model, data->records, data->feats);
        const eval::MapResult r = eval::map_same_different(set, config.eval_mode);
        Rng rng(stage_seed(config, "eval/baseline/" + lang + "/" + objective_dir(o) + "/" + name));
        const double base = eval::shuffled_baseline(set, config.baseline_trials, rng, config.eval_mode);
        splits[name] = {{"mAP", r.map}, {"n_queries", r.n_queries}, {"baseline", base}};
      }
      write_text(lay.eval_result(lang, o), json{{"language", lang},
                                                {"objective", std::string(to_string(o))},
                                                {"mode", std::string(eval::to_string(config.eval_mode))},
                                                {"validation", splits["validation"]},
                                                {"test", splits["test"]}}
                                               .dump(2));
    }
  }
}

nn::Tensor cluster_points(const rsa::XRSM& m, ClusterVariant variant) {
  switch (variant) {
    case ClusterVariant::Rows: return m.values;
    case ClusterVariant::Columns: return nn::transpose(m.values);
    case ClusterVariant::Symmetrized: {
      nn::Tensor t = nn::transpose(m.values);
      for (std::size_t i = 0; i < t.size(); ++i) t[i] = 0.5 * (t[i] + m.values[i]);
      return t;
    }
  }
  return m.values;
}

namespace {

json ordering_json(const rsa::XRSM& m, const OrderingCheck& chk, const cluster::MergeTree& tree) {
  const std::size_t r = m.index_of(chk.reference);
  const std::size_t n = m.index_of(chk.near);
  const std::size_t f = m.index_of(chk.far);
  const double rn = m(r, n), rf = m(r, f), nr = m(n, r), nf = m(n, f);
  const auto& first = tree.merges.front();
  const bool ward_first =
      first.a < tree.leaves() && first.b < tree.leaves() &&
      std::set<std::size_t>{first.a, first.b} == std::set<std::size_t>{r, n};
  return {{"reference", chk.reference},
          {"near", chk.near},
          {"far", chk.far},
          {"sim_reference_near", rn},
          {"sim_reference_far", rf},
          {"sim_near_reference", nr},
          {"sim_near_far", nf},
          {"reference_prefers_near", rn > rf},
          {"near_prefers_reference", nr > nf},
          {"holds", rn > rf && nr > nf},
          {"ward_first_merge", {tree.labels[first.a], tree.labels[first.b]}},
          {"ward_groups_reference_near", ward_first}};
}

}  // namespace

void run_analyze(const RunConfig& config) {
  config.validate();
  const Layout lay = layout_of(config);
  const auto langs = config.language_ids();
  const rsa::ViewTable views = run_embed(config);

  json xrsms = json::array();
  for (Objective o : config.objectives) {
    for (const auto& kernel : config.kernels) {
      rsa::XRSM m = rsa::build_xrsm(langs, views, o, kernel);
      m.seed = config.seed;
      double diag_dev = 0.0;
      for (std::size_t i = 0; i < langs.size(); ++i) diag_dev = std::max(diag_dev, std::abs(m(i, i) - 1.0));
      const fs::path dir = lay.analysis_dir(o, kernel);
      write_text(dir / "xrsm.csv", rsa::xrsm_to_csv(m));
      write_text(dir / "xrsm.json", rsa::xrsm_to_json(m));
      write_text(dir / "xrsm.svg", rsa::render_xrsm_svg(m));

      const cluster::MergeTree tree = cluster::ward_linkage(cluster_points(m, config.cluster), langs);
      cluster::DendrogramOptions opt;
      opt.title = std::string(to_string(o)) + " " + kernel.tag() + " (" + std::string(to_string(config.cluster)) + ")";
      write_text(dir / "dendrogram.nwk", cluster::to_newick(tree) + "\n");
      write_text(dir / "dendrogram.svg", cluster::render_dendrogram_svg(tree, opt));
      write_text(dir / "dendrogram.json", cluster::merges_to_json(tree));

      xrsms.push_back({{"objective", std::string(to_string(o))},
                       {"kernel", kernel.tag()},
                       {"cluster_variant", std::string(to_string(config.cluster))},
                       {"directory", fs::relative(dir, lay.root).generic_string()},
                       {"diagonal_max_deviation", diag_dev},
                       {"ordering", ordering_json(m, config.ordering, tree)},
                       {"newick", cluster::to_newick(tree)}});
    }
  }

  json cross = json::array();
  const bool all_objectives = config.objectives.size() == 3;
  if (all_objectives) {
    for (const auto& kernel : config.kernels) {
      const rsa::CrossModelTable t = rsa::cross_model_table(langs, views, kernel);
      write_text(lay.cross_model(kernel, "csv"), rsa::cross_model_to_csv(t));
      write_text(lay.cross_model(kernel, "json"), rsa::cross_model_to_json(t));
      json means;
      for (std::size_t p = 0; p < rsa::CrossModelTable::kPairs; ++p) {
        means[rsa::CrossModelTable::pair_name(p)] = t.means[p];
      }
      cross.push_back({{"kernel", kernel.tag()},
                       {"means", means},
                       {"pge_cae_highest", t.means[0] > t.means[1] && t.means[0] > t.means[2]}});
    }
  }

  json training = json::array();
  for (const auto& lang : langs) {
    for (Objective o : config.objectives) {
      const fs::path p = lay.eval_result(lang, o);
      if (!fs::exists(p)) continue;
      const json e = json::parse(read_text(p));
      const double v = e["validation"]["mAP"].get<double>();
      const double b = e["validation"]["baseline"].get<double>();
      training.push_back({{"language", lang},
                          {"objective", std::string(to_string(o))},
                          {"validation_map", v},
                          {"baseline", b},
                          {"ratio", b > 0.0 ? v / b : 0.0},
                          {"test_map", e["test"]["mAP"].get<double>()}});
    }
  }

  const json summary = {{"name", config.name},
                        {"seed", config.seed},
                        {"languages", langs},
                        {"cluster_variant", std::string(to_string(config.cluster))},
                        {"xrsm", xrsms},
                        {"cross_model", cross},
                        {"training", training}};
  write_text(lay.summary(), summary.dump(2));
}

void run_report(const RunConfig& config) {
  const Layout lay = layout_of(config);
  if (!fs::exists(lay.summary())) throw NotFoundError("missing " + lay.summary().string() + " (run analyze first)");
  const json s = json::parse(read_text(lay.summary()));
  std::ostringstream md;
  char buf[256];
  md << "# " << s["name"].get<std::string>() << "\n\nSeed " << s["seed"].get<std::uint64_t>() << ", languages";
  for (const auto& l : s["languages"]) md << ' ' << l.get<std::string>();
  md << ", clustering on " << s["cluster_variant"].get<std::string>() << ".\n\n";

  if (!s["training"].empty()) {
    md << "## Same-different mAP\n\n| language | objective | validation | baseline | test |\n|---|---|---|---|---|\n";
    for (const auto& t : s["training"]) {
      std::snprintf(buf, sizeof buf, "| %s | %s | %.3f | %.3f | %.3f |\n", t["language"].get<std::string>().c_str(),
                    t["objective"].get<std::string>().c_str(), t["validation_map"].get<double>(),
                    t["baseline"].get<double>(), t["test_map"].get<double>());
      md << buf;
    }
    md << '\n';
  }

  md << "## Cross-lingual similarity\n\n";
  for (const auto& x : s["xrsm"]) {
    const json& o = x["ordering"];
    const std::string r = o["reference"], n = o["near"], f = o["far"];
    std::snprintf(buf, sizeof buf, "- %s, %s: sim(%s,%s)=%.3f vs sim(%s,%s)=%.3f; sim(%s,%s)=%.3f vs sim(%s,%s)=%.3f; ",
                  x["objective"].get<std::string>().c_str(), x["kernel"].get<std::string>().c_str(), r.c_str(),
                  n.c_str(), o["sim_reference_near"].get<double>(), r.c_str(), f.c_str(),
                  o["sim_reference_far"].get<double>(), n.c_str(), r.c_str(), o["sim_near_reference"].get<double>(),
                  n.c_str(), f.c_str(), o["sim_near_far"].get<double>());
    md << buf << "ordering " << (o["holds"].get<bool>() ? "holds" : "fails") << ", first Ward merge "
       << o["ward_first_merge"][0].get<std::string>() << '+' << o["ward_first_merge"][1].get<std::string>() << " `"
       << x["newick"].get<std::string>() << "`\n";
  }
  if (!s["cross_model"].empty()) {
    md << "\n## Cross-model CKA (mean over languages)\n\n| kernel | PGE-CAE | PGE-CSE | CAE-CSE |\n|---|---|---|---|\n";
    for (const auto& c : s["cross_model"]) {
      std::snprintf(buf, sizeof buf, "| %s | %.3f | %.3f | %.3f |\n", c["kernel"].get<std::string>().c_str(),
                    c["means"]["PGE-CAE"].get<double>(), c["means"]["PGE-CSE"].get<double>(),
                    c["means"]["CAE-CSE"].get<double>());
      md << buf;
    }
  }
  write_text(lay.report(), md.str());
}

void run_all(const RunConfig& config) {
  run_synth(config);
  run_train(config);
  run_eval(config);
  run_analyze(config);
  run_report(config);
}

}  // namespace awe::pipeline
