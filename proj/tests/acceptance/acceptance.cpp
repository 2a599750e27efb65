// End-to-end acceptance run: property suites, then the synthetic-family
// pipeline over five seeds. One PASS/FAIL line per criterion; exit status is
// nonzero when any criterion fails.

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <json.hpp>
#include <sstream>

#include "awe/cluster.hpp"
#include "awe/eval.hpp"
#include "awe/pipeline.hpp"
#include "awe/rsa.hpp"
#include "model_fd.hpp"
#include "oracles.hpp"

using namespace awe;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Pinned tolerances and thresholds.
constexpr double kSelfTol = 1e-12;
constexpr double kOrthoTol = 1e-6;
constexpr double kScaleTol = 1e-9;
constexpr double kSymTol = 1e-12;
constexpr double kCkaOracleTol = 1e-10;
constexpr double kGradTol = 1e-4;
constexpr double kMapTol = 1e-12;
constexpr double kWardTol = 1e-9;
constexpr double kMapOverBaseline = 5.0;
constexpr int kSeeds = 5;
constexpr int kOrderingSeeds = 4;
constexpr int kRbfSeeds = 3;
// Runtime target for the five pipeline runs; reported, not a pass condition.
constexpr double kRuntimeTarget = 1800.0;

struct Line {
  int id;
  bool pass;
  std::string detail;
  double seconds;
};

std::vector<Line> lines;

void report(int id, bool pass, const std::string& detail, double seconds) {
  lines.push_back({id, pass, detail, seconds});
  std::printf("criterion %2d: %s  %s  (%.1f s)\n", id, pass ? "PASS" : "FAIL", detail.c_str(), seconds);
  std::fflush(stdout);
}

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* f, double a, double b = 0.0) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

nn::Tensor orthogonal(std::size_t d, Rng& rng) {
  nn::Tensor q(d, d);
  for (std::size_t i = 0; i < d; ++i) q(i, i) = 1.0;
  for (int k = 0; k < 4; ++k) {
    std::vector<double> v(d);
    double n2 = 0.0;
    for (double& e : v) {
      e = rng.normal();
      n2 += e * e;
    }
    nn::Tensor h(d, d);
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) h(i, j) = (i == j ? 1.0 : 0.0) - 2.0 * v[i] * v[j] / n2;
    }
    nn::Tensor next;
    nn::gemm(h, q, next);
    q = next;
  }
  return q;
}

void criterion_1() {
  const Timer t;
  Rng rng(101);
  double self = 0, ortho = 0, scale = 0, sym = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 4 + rng.uniform_int(std::uint64_t{40});
    const std::size_t d1 = 2 + rng.uniform_int(std::uint64_t{10}), d2 = 2 + rng.uniform_int(std::uint64_t{10});
    const nn::Tensor x = oracle::random_matrix(d1, n, rng), y = oracle::random_matrix(d2, n, rng);
    nn::Tensor qx;
    nn::gemm(orthogonal(d1, rng), x, qx);
    for (const auto k : {rsa::Kernel::linear(), rsa::Kernel::rbf(0.5)}) {
      const double base = rsa::cka(x, y, k);
      self = std::max(self, std::abs(rsa::cka(x, x, k) - 1.0));
      sym = std::max(sym, std::abs(rsa::cka(y, x, k) - base));
      ortho = std::max(ortho, std::abs(rsa::cka(qx, y, k) - base));
      for (double c : {1e-3, 1.0, 1e3}) {
        nn::Tensor cx = x;
        for (double& v : cx.values()) v *= c;
        scale = std::max(scale, std::abs(rsa::cka(cx, y, k) - base));
      }
    }
  }
  const double s = t.seconds();
  report(1, self <= kSelfTol && ortho <= kOrthoTol && scale <= kScaleTol && sym <= kSymTol && s < 10.0,
         "CKA properties, 100 instances x {linear, rbf}: self " + fmt("%.1e", self) + ", orthogonal " +
             fmt("%.1e", ortho) + ", scale " + fmt("%.1e", scale) + ", symmetry " + fmt("%.1e", sym),
         s);
}

void criterion_2() {
  const Timer t;
  Rng rng(102);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.uniform_int(std::uint64_t{11});
    const nn::Tensor x = oracle::random_matrix(1 + rng.uniform_int(std::uint64_t{8}), n, rng);
    const nn::Tensor y = oracle::random_matrix(1 + rng.uniform_int(std::uint64_t{8}), n, rng);
    worst = std::max(worst, std::abs(rsa::linear_cka(x, y) - oracle::linear_cka(x, y)));
    worst = std::max(worst, std::abs(rsa::rbf_cka(x, y, 0.5) - oracle::rbf_cka(x, y, 0.5)));
  }
  const double s = t.seconds();
  report(2, worst <= kCkaOracleTol && s < 10.0,
         "linear and rbf CKA vs HSIC oracles, 200 instances N <= 12: max deviation " + fmt("%.1e", worst), s);
}

void criterion_3() {
  const Timer t;
  double worst[3] = {0, 0, 0};
  const Objective objs[3] = {Objective::PGE, Objective::CAE, Objective::CSE};
  for (int o = 0; o < 3; ++o) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      worst[o] = std::max(worst[o], oracle::loss_gradient_error(objs[o], 300 + seed));
    }
  }
  const double s = t.seconds();
  report(3, worst[0] <= kGradTol && worst[1] <= kGradTol && worst[2] <= kGradTol && s < 120.0,
         "finite differences, 20 seeds, k=5 h=8 V=12: PGE " + fmt("%.1e", worst[0]) + ", CAE " +
             fmt("%.1e", worst[1]) + ", CSE " + fmt("%.1e", worst[2]),
         s);
}

void criterion_4() {
  const Timer t;
  Rng rng(104);
  double worst = 0.0;
  int checked = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 4 + rng.uniform_int(std::uint64_t{47});
    eval::EvalSet set{oracle::random_matrix(6, n, rng), {}, {}};
    for (std::size_t i = 0; i < n; ++i) {
      set.words.push_back("w" + std::to_string(rng.uniform_int(std::uint64_t{2 + n / 6})));
      set.speakers.push_back("s" + std::to_string(rng.uniform_int(std::uint64_t{3})));
    }
    for (bool diff : {false, true}) {
      const auto [ref, q] = oracle::map_same_different(set.embeddings, set.words, set.speakers, diff);
      if (q == 0) continue;
      const auto got = eval::map_same_different(
          set, diff ? eval::RelevanceMode::DifferentSpeaker : eval::RelevanceMode::AnySpeaker);
      worst = std::max(worst, got.n_queries == q ? std::abs(got.map - ref) : 1.0);
      ++checked;
    }
  }
  const double s = t.seconds();
  report(4, worst <= kMapTol && checked >= 90 && s < 30.0,
         "mAP vs brute force, 50 instances N <= 50, both modes (" + std::to_string(checked) +
             " checks): max deviation " + fmt("%.1e", worst),
         s);
}

void criterion_5() {
  const Timer t;
  Rng rng(105);
  double worst = 0.0;
  bool topology = true;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t m = 2 + rng.uniform_int(std::uint64_t{9});
    const nn::Tensor pts = oracle::random_matrix(m, 1 + rng.uniform_int(std::uint64_t{6}), rng);
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < m; ++i) labels.push_back("L" + std::to_string(i));
    const auto tree = cluster::ward_linkage(pts, labels);
    const auto ref = oracle::naive_ward(pts);
    for (std::size_t i = 0; i < ref.size(); ++i) {
      worst = std::max(worst, std::abs(tree.merges[i].height - ref[i].height));
      const auto a = tree.members(tree.merges[i].a), b = tree.members(tree.merges[i].b);
      topology = topology && std::set<std::size_t>(a.begin(), a.end()) == ref[i].a &&
                 std::set<std::size_t>(b.begin(), b.end()) == ref[i].b;
    }
  }
  const auto three = cluster::ward_linkage(nn::Tensor({3, 1}, {0, 1, 10}), {"0", "1", "10"});
  const bool hand = three.merges[0].a == 0 && three.merges[0].b == 1 && std::abs(three.merges[0].height - 1.0) <= kWardTol &&
                    std::abs(three.merges[1].height - std::sqrt(4.0 / 3.0) * 9.5) <= kWardTol &&
                    std::abs(three.merges[1].height - 10.970) < 5e-4;
  const double s = t.seconds();
  report(5, worst <= kWardTol && topology && hand && s < 10.0,
         "Ward vs naive, 50 instances M <= 10: max height deviation " + fmt("%.1e", worst) +
             (topology ? ", topology identical" : ", topology differs") + "; {0,1,10} heights " +
             fmt("{%.3f, %.3f}", three.merges[0].height, three.merges[1].height),
         s);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("missing " + p.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

struct Ordering {
  double rn, rf, nr, nf;
  bool sims() const { return rn > rf && nr > nf; }
};

Ordering ordering(const rsa::XRSM& m, const pipeline::OrderingCheck& c) {
  const std::size_t r = m.index_of(c.reference), n = m.index_of(c.near), f = m.index_of(c.far);
  return {m(r, n), m(r, f), m(n, r), m(n, f)};
}

// Reference and near language share a cluster before either joins far.
bool ward_groups(const cluster::MergeTree& tree, const pipeline::OrderingCheck& c) {
  std::size_t r = 0, n = 0, f = 0;
  for (std::size_t i = 0; i < tree.labels.size(); ++i) {
    if (tree.labels[i] == c.reference) r = i;
    if (tree.labels[i] == c.near) n = i;
    if (tree.labels[i] == c.far) f = i;
  }
  for (std::size_t i = 0; i < tree.merges.size(); ++i) {
    const auto members = tree.members(tree.leaves() + i);
    const auto has = [&](std::size_t x) { return std::find(members.begin(), members.end(), x) != members.end(); };
    if (has(r) && has(n)) return !has(f);
    if (has(f) && (has(r) || has(n))) return false;
  }
  return false;
}

struct SeedResult {
  std::uint64_t seed = 0;
  Ordering linear[3]{};
  Ordering rbf[3]{};
  bool rbf_ward[3]{};
  double cross[3]{};  // PGE-CAE, PGE-CSE, CAE-CSE linear means
  double worst_ratio = 0.0;
  std::string worst_ratio_at;
  std::vector<std::string> xrsm_files;
};

const Objective kObjectives[3] = {Objective::PGE, Objective::CAE, Objective::CSE};

SeedResult inspect(const pipeline::RunConfig& config) {
  const pipeline::Layout layout{config.output_dir};
  SeedResult r;
  r.seed = config.seed;
  r.worst_ratio = std::numeric_limits<double>::infinity();
  for (int o = 0; o < 3; ++o) {
    for (const auto& k : {rsa::Kernel::linear(), rsa::Kernel::rbf(0.5)}) {
      const fs::path dir = layout.analysis_dir(kObjectives[o], k);
      const rsa::XRSM m = rsa::xrsm_from_json(slurp(dir / "xrsm.json"));
      r.xrsm_files.push_back((dir / "xrsm.json").string());
      if (k.kind == rsa::Kernel::Kind::Linear) {
        r.linear[o] = ordering(m, config.ordering);
      } else {
        r.rbf[o] = ordering(m, config.ordering);
        r.rbf_ward[o] = ward_groups(cluster::from_newick(slurp(dir / "dendrogram.nwk"), m.languages), config.ordering);
      }
    }
    for (const auto& lang : config.language_ids()) {
      const json e = json::parse(slurp(layout.eval_result(lang, kObjectives[o])));
      const double ratio = e["validation"]["mAP"].get<double>() / e["validation"]["baseline"].get<double>();
      if (ratio < r.worst_ratio) {
        r.worst_ratio = ratio;
        r.worst_ratio_at = lang + "/" + std::string(to_string(kObjectives[o]));
      }
    }
  }
  const json cm = json::parse(slurp(layout.cross_model(rsa::Kernel::linear(), "json")));
  for (std::size_t p = 0; p < 3; ++p) r.cross[p] = cm["means"][rsa::CrossModelTable::pair_name(p)].get<double>();
  return r;
}

std::string seed_list(const std::vector<SeedResult>& runs, const std::function<bool(const SeedResult&)>& ok) {
  std::string s;
  for (const auto& r : runs) s += (ok(r) ? "+" : "-");
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::string config_path, out_dir;
  bool reuse = false;
  app.add_option("--config", config_path, "Run configuration for the synthetic family")->required();
  app.add_option("--out", out_dir, "Directory for pipeline runs")->required();
  app.add_flag("--reuse", reuse, "Analyze existing runs instead of running the pipeline");
  CLI11_PARSE(app, argc, argv);

  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  criterion_5();

  const pipeline::RunConfig base = pipeline::load_config(config_path);
  std::vector<SeedResult> runs;
  const Timer pipeline_timer;
  for (int s = 0; s < kSeeds; ++s) {
    pipeline::RunConfig c = base;
    c.seed = static_cast<std::uint64_t>(s);
    c.output_dir = fs::path(out_dir) / ("seed_" + std::to_string(s));
    const Timer t;
    if (!reuse) {
      fs::remove_all(c.output_dir);
      pipeline::run_all(c);
    }
    runs.push_back(inspect(c));
    std::printf("  seed %d: %.1f s\n", s, t.seconds());
    std::fflush(stdout);
  }
  const double pipeline_seconds = pipeline_timer.seconds();

  auto holds = [&](int o) {
    return seed_list(runs, [o](const SeedResult& r) { return r.linear[o].sims(); });
  };
  auto count = [](const std::string& s) { return static_cast<int>(std::count(s.begin(), s.end(), '+')); };
  const std::string pge6 = holds(0), cae6 = holds(1);
  report(6, count(pge6) >= kOrderingSeeds && count(cae6) >= kOrderingSeeds,
         "linear sim(A,B)>sim(A,C) and sim(B,A)>sim(B,C) per seed: PGE " + pge6 + ", CAE " + cae6 + " (need " +
             std::to_string(kOrderingSeeds) + "/5 each; " + fmt("%.0f s for 5 runs", pipeline_seconds) +
             (pipeline_seconds < kRuntimeTarget ? ", within" : ", over") + " the 1800 s runtime target)",
         pipeline_seconds);

  const std::string c7 = seed_list(runs, [](const SeedResult& r) { return r.cross[0] > r.cross[1] && r.cross[0] > r.cross[2]; });
  std::string means;
  for (const auto& r : runs) means += fmt(" %.2f/", r.cross[0]) + fmt("%.2f/", r.cross[1]) + fmt("%.2f", r.cross[2]);
  report(7, count(c7) >= kOrderingSeeds,
         "mean linear CKA PGE-CAE above PGE-CSE and CAE-CSE per seed: " + c7 + " (PGE-CAE/PGE-CSE/CAE-CSE:" + means + ")",
         0.0);

  double worst = std::numeric_limits<double>::infinity();
  std::string where;
  for (const auto& r : runs) {
    if (r.worst_ratio < worst) {
      worst = r.worst_ratio;
      where = "seed " + std::to_string(r.seed) + " " + r.worst_ratio_at;
    }
  }
  report(8, worst >= kMapOverBaseline,
         "validation mAP / shuffled baseline, every language and objective: minimum " + fmt("%.1f", worst) + " at " + where,
         0.0);

  {
    const Timer t;
    pipeline::RunConfig c = base;
    c.seed = 0;
    c.output_dir = fs::path(out_dir) / "seed_0_repeat";
    fs::remove_all(c.output_dir);
    pipeline::run_all(c);
    const SeedResult again = inspect(c);
    bool identical = again.xrsm_files.size() == runs[0].xrsm_files.size();
    for (std::size_t i = 0; identical && i < again.xrsm_files.size(); ++i) {
      const rsa::XRSM a = rsa::xrsm_from_json(slurp(runs[0].xrsm_files[i]));
      const rsa::XRSM b = rsa::xrsm_from_json(slurp(again.xrsm_files[i]));
      identical = a.values == b.values && slurp(runs[0].xrsm_files[i]) == slurp(again.xrsm_files[i]);
    }
    report(9, identical,
           "seed 0 rerun: " + std::to_string(again.xrsm_files.size()) + " xRSMs " +
               (identical ? "bit-identical" : "differ"),
           t.seconds());
  }

  auto rbf_ok = [](const SeedResult& r, int o) { return r.rbf[o].sims() && r.rbf_ward[o]; };
  const std::string pge10 = seed_list(runs, [&](const SeedResult& r) { return rbf_ok(r, 0); });
  const std::string cae10 = seed_list(runs, [&](const SeedResult& r) { return rbf_ok(r, 1); });
  report(10, count(pge10) >= kRbfSeeds && count(cae10) >= kRbfSeeds,
         "rbf(0.5) xRSM ordering and Ward tree grouping A with B before C per seed: PGE " + pge10 + ", CAE " + cae10 +
             " (need " + std::to_string(kRbfSeeds) + "/5 each)",
         0.0);

  int failed = 0;
  for (const auto& l : lines) failed += l.pass ? 0 : 1;
  std::printf("%d of %zu criteria passed\n", static_cast<int>(lines.size()) - failed, lines.size());
  return failed == 0 ? 0 : 1;
}
