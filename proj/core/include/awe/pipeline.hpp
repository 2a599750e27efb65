#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "awe/cluster.hpp"
#include "awe/rsa.hpp"
#include "awe/synth_corpus.hpp"
#include "awe/training.hpp"

namespace awe::pipeline {

// A language of the synthetic family. The base language has no parent.
struct LanguageDef {
  std::string id;
  std::string parent;
  double perturbation = 0.0;
};

enum class ClusterVariant { Rows, Columns, Symmetrized };
std::string_view to_string(ClusterVariant v);
ClusterVariant parse_cluster_variant(std::string_view name);

// sim(reference, near) > sim(reference, far) and sim(near, reference) >
// sim(near, far), plus {reference, near} being the first Ward merge.
struct OrderingCheck {
  std::string reference = "A";
  std::string near = "B";
  std::string far = "C";
};

struct RunConfig {
  std::string name = "experiment";
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "runs/experiment";
  synth::LanguageParams language_params;
  std::vector<LanguageDef> languages{{"A", "", 0.0}, {"B", "A", 0.15}, {"C", "A", 0.9}};
  synth::CorpusConfig corpus;
  std::vector<Objective> objectives{Objective::PGE, Objective::CAE, Objective::CSE};
  enc::TrainConfig train;
  // Same initial weights for every language's encoder of one objective.
  bool shared_init = true;
  std::vector<rsa::Kernel> kernels{rsa::Kernel::linear(), rsa::Kernel::rbf(0.5)};
  ClusterVariant cluster = ClusterVariant::Rows;
  eval::RelevanceMode eval_mode = eval::RelevanceMode::DifferentSpeaker;
  std::size_t baseline_trials = 20;
  OrderingCheck ordering;

  std::vector<std::string> language_ids() const;
  void validate() const;
};

// Unknown keys and wrong types are ConfigErrors naming the JSON path
// ("$.train.epochs: ...").
RunConfig config_from_json(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const RunConfig& config);

// File layout under output_dir.
struct Layout {
  std::filesystem::path root;

  std::filesystem::path language_spec(const std::string& lang) const;
  std::filesystem::path distances_csv() const;
  std::filesystem::path distances_json() const;
  std::filesystem::path corpus_dir(const std::string& lang) const;
  std::filesystem::path manifest(const std::string& lang) const;
  std::filesystem::path checkpoint(const std::string& lang, Objective objective) const;
  std::filesystem::path history(const std::string& lang, Objective objective) const;
  std::filesystem::path embedding(const std::string& stimuli, const std::string& encoder,
                                  Objective objective) const;
  std::filesystem::path eval_result(const std::string& lang, Objective objective) const;
  std::filesystem::path analysis_dir(Objective objective, const rsa::Kernel& kernel) const;
  std::filesystem::path cross_model(const rsa::Kernel& kernel, std::string_view ext) const;
  std::filesystem::path summary() const;
  std::filesystem::path report() const;
};

// Per-stage seeds derived from the global seed.
std::uint64_t stage_seed(const RunConfig& config, std::string_view stage);
std::uint64_t train_seed(const RunConfig& config, const std::string& language, Objective objective);

struct Filter {
  std::optional<std::string> language;
  std::optional<Objective> objective;
};

void run_synth(const RunConfig& config);
void run_train(const RunConfig& config, const Filter& filter = {});
rsa::ViewTable run_embed(const RunConfig& config);
void run_eval(const RunConfig& config, const Filter& filter = {});
void run_analyze(const RunConfig& config);
void run_report(const RunConfig& config);
void run_all(const RunConfig& config);

// Views of every (stimuli, encoder, objective) triple read back from disk.
rsa::ViewTable load_views(const RunConfig& config);

// Rows to cluster for the configured variant.
nn::Tensor cluster_points(const rsa::XRSM& m, ClusterVariant variant);

}  // namespace awe::pipeline
