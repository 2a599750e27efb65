#include <doctest.h>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <sys/wait.h>

#include "awe/error.hpp"
#include "awe/pipeline.hpp"

using namespace awe;
using namespace awe::pipeline;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const char* kTiny = R"({
  "name": "tiny",
  "seed": 5,
  "corpus": {"words": 10, "max_phones": 5},
  "train": {"epochs": 1, "hidden": 8, "batch_size": 16, "phone_embedding_dim": 4},
  "baseline_trials": 2
})";

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("awe_pipeline_" + name);
  fs::remove_all(p);
  return p;
}

RunConfig tiny(const std::string& dir) {
  RunConfig c = config_from_json(kTiny);
  c.output_dir = scratch(dir);
  return c;
}

std::string config_error(const std::string& text) {
  try {
    config_from_json(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

int run_tool(const std::string& args) {
  const std::string cmd = std::string(AWEBENCH_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("defaults") {
    const RunConfig c;
    c.validate();
    CHECK(c.language_ids() == std::vector<std::string>{"A", "B", "C"});
    CHECK(c.train.hidden == 64);
    CHECK(c.train.epochs == 30);
    CHECK(c.kernels.size() == 2);
  }

  TEST_CASE("JSON round trip") {
    const RunConfig c = config_from_json(kTiny);
    CHECK(c.corpus.words == 10);
    CHECK(c.train.hidden == 8);
    CHECK(config_to_json(config_from_json(config_to_json(c))) == config_to_json(c));
  }

  TEST_CASE("training profiles") {
    const RunConfig full = config_from_json(R"({"train": {"profile": "full"}})");
    CHECK(full.train.hidden == 512);
    CHECK(full.train.epochs == 100);
    CHECK(full.train.batch_size == 256);
    const RunConfig mixed = config_from_json(R"({"train": {"profile": "full", "epochs": 5}})");
    CHECK(mixed.train.epochs == 5);
    CHECK(mixed.train.hidden == 512);
    CHECK(config_from_json(R"({"train": {"profile": "desk"}})").train.hidden == 64);
    CHECK(config_error(R"({"train": {"profile": "huge"}})").find("$.train.profile") != std::string::npos);
  }

  TEST_CASE("errors name the JSON path") {
    CHECK(config_error(R"({"train": {"epochz": 3}})").find("$.train.epochz") != std::string::npos);
    CHECK(config_error(R"({"corpus": {"words": "many"}})").find("$.corpus.words") != std::string::npos);
    CHECK(config_error(R"({"languages": [{"id": "A"}, {"id": "B", "parent": "Z", "perturbation": 0.1}]})")
              .find("$.languages") != std::string::npos);
    CHECK_FALSE(config_error(R"({"train": {"epochs": 0}})").empty());
    CHECK_FALSE(config_error(R"({"kernels": ["poly"]})").empty());
    CHECK_FALSE(config_error("{").empty());
  }

  TEST_CASE("stage seeds differ by stage and language") {
    RunConfig c;
    CHECK(stage_seed(c, "synth/language/A") != stage_seed(c, "synth/language/B"));
    CHECK(train_seed(c, "A", Objective::PGE) == train_seed(c, "B", Objective::PGE));
    c.shared_init = false;
    CHECK(train_seed(c, "A", Objective::PGE) != train_seed(c, "B", Objective::PGE));
  }
}

TEST_SUITE("pipeline") {
  TEST_CASE("tiny end-to-end run writes every artifact") {
    const RunConfig c = tiny("full");
    run_all(c);
    const Layout l{c.output_dir};
    for (const auto& lang : c.language_ids()) {
      CHECK(fs::exists(l.language_spec(lang)));
      CHECK(fs::exists(l.manifest(lang)));
      CHECK(fs::exists(l.corpus_dir(lang) / "features.awef"));
      for (Objective o : c.objectives) {
        CHECK(fs::exists(l.checkpoint(lang, o)));
        CHECK(fs::exists(l.history(lang, o)));
        CHECK(fs::exists(l.eval_result(lang, o)));
        for (const auto& enc : c.language_ids()) CHECK(fs::exists(l.embedding(lang, enc, o)));
      }
    }
    CHECK(fs::exists(l.distances_csv()));
    for (Objective o : c.objectives) {
      for (const auto& k : c.kernels) {
        for (const char* f : {"xrsm.csv", "xrsm.json", "xrsm.svg", "dendrogram.nwk", "dendrogram.svg", "dendrogram.json"}) {
          CHECK_MESSAGE(fs::exists(l.analysis_dir(o, k) / f), (l.analysis_dir(o, k) / f).string());
        }
        std::istringstream svg(slurp(l.analysis_dir(o, k) / "dendrogram.svg"));
        boost::property_tree::ptree tree;
        CHECK_NOTHROW(boost::property_tree::read_xml(svg, tree));
      }
    }
    for (const auto& k : c.kernels) CHECK(fs::exists(l.cross_model(k, "csv")));
    CHECK(fs::exists(l.report()));

    const json summary = json::parse(slurp(l.summary()));
    CHECK(summary["seed"] == 5);
    CHECK(summary["xrsm"].size() == 6);
    CHECK(summary["cross_model"].size() == 2);
    for (const auto& x : summary["xrsm"]) {
      CHECK(x["diagonal_max_deviation"].get<double>() <= 1e-9);
      CHECK(x["ordering"].contains("holds"));
    }
    const json eval = json::parse(slurp(l.eval_result("A", Objective::CSE)));
    CHECK(eval["language"] == "A");
    CHECK(eval["validation"]["mAP"].get<double>() >= 0.0);
    CHECK(eval["test"]["n_queries"].get<std::size_t>() > 0);

    // Views on disk reproduce the stored xRSM.
    const auto views = load_views(c);
    const auto ids = c.language_ids();
    const rsa::XRSM m = rsa::build_xrsm(ids, views, Objective::PGE, rsa::Kernel::linear());
    const rsa::XRSM stored = rsa::xrsm_from_json(slurp(l.analysis_dir(Objective::PGE, rsa::Kernel::linear()) / "xrsm.json"));
    CHECK(m.values == stored.values);
  }

  TEST_CASE("same seed, same bytes") {
    const RunConfig a = tiny("repeat_a"), b = tiny("repeat_b");
    run_synth(a);
    run_synth(b);
    for (const auto& lang : a.language_ids()) {
      CHECK(slurp(Layout{a.output_dir}.manifest(lang)) == slurp(Layout{b.output_dir}.manifest(lang)));
      CHECK(slurp(Layout{a.output_dir}.corpus_dir(lang) / "features.awef") ==
            slurp(Layout{b.output_dir}.corpus_dir(lang) / "features.awef"));
    }
    RunConfig c = tiny("repeat_c");
    c.seed = 6;
    run_synth(c);
    CHECK(slurp(Layout{a.output_dir}.manifest("A")) != slurp(Layout{c.output_dir}.manifest("A")));
  }

  TEST_CASE("stages report missing inputs") {
    const RunConfig c = tiny("missing");
    CHECK_THROWS_AS(run_train(c), NotFoundError);
    run_synth(c);
    try {
      run_embed(c);
      FAIL("expected NotFoundError");
    } catch (const NotFoundError& e) {
      CHECK(std::string(e.what()).find(".awec") != std::string::npos);
    }
  }

  TEST_CASE("cluster variants") {
    rsa::XRSM m;
    m.values = nn::Tensor({2, 2}, {1.0, 0.2, 0.6, 1.0});
    m.languages = {"A", "B"};
    CHECK(cluster_points(m, ClusterVariant::Rows) == m.values);
    CHECK(cluster_points(m, ClusterVariant::Columns) == nn::transpose(m.values));
    CHECK(cluster_points(m, ClusterVariant::Symmetrized) == nn::Tensor({2, 2}, {1.0, 0.4, 0.4, 1.0}));
    CHECK(parse_cluster_variant("columns") == ClusterVariant::Columns);
  }
}

TEST_SUITE("cli") {
  TEST_CASE("exit codes") {
    const fs::path dir = scratch("cli");
    fs::create_directories(dir);
    std::ofstream(dir / "tiny.json") << kTiny;
    std::ofstream(dir / "bad.json") << R"({"train": {"epochz": 1}})";
    const std::string base = "--config " + (dir / "tiny.json").string() + " --out " + (dir / "run").string();
    CHECK(run_tool(base + " config") == 0);
    CHECK(run_tool("--config " + (dir / "bad.json").string() + " config") == 2);
    CHECK(run_tool("--config " + (dir / "nope.json").string() + " config") == 2);
    CHECK(run_tool(base + " frobnicate") == 2);
    CHECK(run_tool(base + " train") == 3);
    CHECK(run_tool(base + " synth") == 0);
    CHECK(run_tool(base + " train --objective xyz") == 2);
    CHECK(run_tool(base + " embed") == 3);
    CHECK(run_tool(base + " train --language A --objective cse") == 0);
    CHECK(fs::exists(Layout{dir / "run"}.checkpoint("A", Objective::CSE)));
    CHECK_FALSE(fs::exists(Layout{dir / "run"}.checkpoint("B", Objective::CSE)));
  }
}
