#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "awe/error.hpp"
#include "awe/pipeline.hpp"

namespace {

enum Exit { kOk = 0, kInternal = 1, kConfig = 2, kData = 3, kNumeric = 4 };

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string language;
  std::string objective;
};

awe::pipeline::RunConfig resolve(const Options& o) {
  awe::pipeline::RunConfig c = o.config.empty() ? awe::pipeline::RunConfig{} : awe::pipeline::load_config(o.config);
  if (o.seed) c.seed = *o.seed;
  if (!o.out.empty()) c.output_dir = o.out;
  c.validate();
  return c;
}

awe::pipeline::Filter filter_of(const Options& o) {
  awe::pipeline::Filter f;
  if (!o.language.empty()) f.language = o.language;
  if (!o.objective.empty()) f.objective = awe::parse_objective(o.objective);
  return f;
}

int report_error(const char* category, const std::exception& e, int code) {
  std::fprintf(stderr, "awebench: %s error: %s\n", category, e.what());
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acoustic word embedding workbench: synthetic corpora, encoder training and cross-lingual RSA"};
  app.require_subcommand(1);
  Options opt;
  app.add_option("--config", opt.config, "Run configuration JSON");
  app.add_option("--seed", opt.seed, "Global seed (overrides the config)");
  app.add_option("--out", opt.out, "Output directory (overrides the config)");

  auto* synth = app.add_subcommand("synth", "Generate languages, corpora, features and manifests");
  auto* train = app.add_subcommand("train", "Train encoders and write checkpoints and histories");
  train->add_option("--language", opt.language, "Only this language");
  train->add_option("--objective", opt.objective, "Only this objective (pge, cae, cse)");
  auto* embed = app.add_subcommand("embed", "Embed every test set with every encoder");
  auto* evaluate = app.add_subcommand("eval", "Same-different mAP per language and objective");
  evaluate->add_option("--language", opt.language, "Only this language");
  evaluate->add_option("--objective", opt.objective, "Only this objective (pge, cae, cse)");
  auto* analyze = app.add_subcommand("analyze", "xRSMs, cross-model table, dendrograms and summary");
  auto* report = app.add_subcommand("report", "Markdown report from the analysis summary");
  auto* all = app.add_subcommand("run", "All stages in order");
  auto* show = app.add_subcommand("config", "Print the resolved configuration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    const awe::pipeline::RunConfig config = resolve(opt);
    if (*synth) {
      awe::pipeline::run_synth(config);
    } else if (*train) {
      awe::pipeline::run_train(config, filter_of(opt));
    } else if (*embed) {
      awe::pipeline::run_embed(config);
    } else if (*evaluate) {
      awe::pipeline::run_eval(config, filter_of(opt));
    } else if (*analyze) {
      awe::pipeline::run_analyze(config);
    } else if (*report) {
      awe::pipeline::run_report(config);
    } else if (*all) {
      awe::pipeline::run_all(config);
    } else if (*show) {
      std::cout << awe::pipeline::config_to_json(config) << '\n';
    }
  } catch (const awe::ConfigError& e) {
    return report_error("config", e, kConfig);
  } catch (const awe::DataError& e) {
    return report_error("data", e, kData);
  } catch (const awe::DimensionError& e) {
    return report_error("data", e, kData);
  } catch (const awe::NumericError& e) {
    return report_error("numeric", e, kNumeric);
  } catch (const std::filesystem::filesystem_error& e) {
    return report_error("data", e, kData);
  } catch (const std::exception& e) {
    return report_error("internal", e, kInternal);
  }
  return kOk;
}
