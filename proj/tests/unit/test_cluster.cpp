#include <doctest.h>

#include <algorithm>
#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <cmath>
#include <set>
#include <sstream>

#include "awe/cluster.hpp"
#include "awe/error.hpp"
#include "oracles.hpp"

using namespace awe;
using namespace awe::cluster;
using awe::nn::Tensor;
namespace pt = boost::property_tree;

namespace {

std::vector<std::string> names(std::size_t m) {
  std::vector<std::string> v;
  for (std::size_t i = 0; i < m; ++i) v.push_back("L" + std::to_string(i));
  return v;
}

std::set<std::size_t> leaf_set(const MergeTree& t, std::size_t id) {
  const auto m = t.members(id);
  return {m.begin(), m.end()};
}

// Partition into clusters after each merge, as sets of label names.
std::vector<std::set<std::set<std::string>>> partitions(const MergeTree& t) {
  std::vector<std::set<std::set<std::string>>> out;
  std::vector<std::set<std::string>> active;
  for (const auto& l : t.labels) active.push_back({l});
  for (const Merge& g : t.merges) {
    std::set<std::string> joined = active[g.a];
    joined.insert(active[g.b].begin(), active[g.b].end());
    active.push_back(joined);
    active[g.a].clear();
    active[g.b].clear();
    std::set<std::set<std::string>> p;
    for (const auto& c : active) {
      if (!c.empty()) p.insert(c);
    }
    out.push_back(p);
  }
  return out;
}

pt::ptree parse_svg(const std::string& svg) {
  std::istringstream in(svg);
  pt::ptree tree;
  pt::read_xml(in, tree);
  return tree;
}

std::size_t count_children(const pt::ptree& node, const std::string& tag) {
  std::size_t n = 0;
  for (const auto& [k, v] : node) {
    if (k == tag) ++n;
    n += count_children(v, tag);
  }
  return n;
}

void collect_text(const pt::ptree& node, std::vector<std::string>& out) {
  for (const auto& [k, v] : node) {
    if (k == "text") out.push_back(v.get_value<std::string>());
    collect_text(v, out);
  }
}

}  // namespace

TEST_CASE("two points merge at their distance") {
  const MergeTree t = ward_linkage(Tensor({2, 2}, {0, 0, 3, 4}), {"a", "b"});
  REQUIRE(t.merges.size() == 1);
  CHECK(t.merges[0] == Merge{0, 1, 5.0, 2});
  CHECK(to_newick(t) == "(a:5,b:5);");
}

TEST_CASE("identical points merge at zero") {
  const MergeTree t = ward_linkage(Tensor(5, 3, 0.7), names(5));
  for (const Merge& g : t.merges) CHECK(g.height == 0.0);
  t.validate();
}

TEST_CASE("three points on a line") {
  const MergeTree t = ward_linkage(Tensor({3, 1}, {0, 1, 10}), {"x0", "x1", "x10"});
  REQUIRE(t.merges.size() == 2);
  CHECK(t.merges[0] == Merge{0, 1, 1.0, 2});
  CHECK(t.merges[1].a == 2);
  CHECK(t.merges[1].b == 3);
  CHECK(std::abs(t.merges[1].height - std::sqrt(4.0 / 3.0) * 9.5) <= 1e-12);
  CHECK(t.merges[1].height == doctest::Approx(10.970).epsilon(1e-4));
  const MergeTree back = from_newick(to_newick(t), t.labels);
  CHECK(back.merges.size() == 2);
  CHECK(leaf_set(back, 3) == std::set<std::size_t>{0, 1});
  CHECK(std::abs(back.merges[1].height - t.merges[1].height) <= 1e-12);
}

TEST_CASE("matches naive Ward on random instances") {
  Rng rng(41);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t m = 2 + rng.uniform_int(std::uint64_t{9});
    const Tensor pts = oracle::random_matrix(m, 1 + rng.uniform_int(std::uint64_t{5}), rng);
    const MergeTree t = ward_linkage(pts, names(m));
    const auto ref = oracle::naive_ward(pts);
    REQUIRE(ref.size() == t.merges.size());
    for (std::size_t i = 0; i < ref.size(); ++i) {
      CHECK(std::abs(t.merges[i].height - ref[i].height) <= 1e-9);
      CHECK(leaf_set(t, t.merges[i].a) == ref[i].a);
      CHECK(leaf_set(t, t.merges[i].b) == ref[i].b);
    }
    t.validate();
    for (std::size_t i = 1; i < t.merges.size(); ++i) CHECK(t.merges[i].height >= t.merges[i - 1].height);
  }
}

TEST_CASE("row permutation gives an isomorphic tree") {
  Rng rng(42);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t m = 3 + rng.uniform_int(std::uint64_t{6});
    const Tensor pts = oracle::random_matrix(m, 3, rng);
    std::vector<std::size_t> perm(m);
    for (std::size_t i = 0; i < m; ++i) perm[i] = i;
    rng.shuffle(perm);
    Tensor shuffled(m, 3);
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t k = 0; k < 3; ++k) shuffled(i, k) = pts(perm[i], k);
      labels.push_back("L" + std::to_string(perm[i]));
    }
    const MergeTree a = ward_linkage(pts, names(m)), b = ward_linkage(shuffled, labels);
    for (std::size_t i = 0; i < a.merges.size(); ++i) CHECK(std::abs(a.merges[i].height - b.merges[i].height) <= 1e-12);
    CHECK(partitions(a) == partitions(b));
  }
}

TEST_CASE("ties go to the smallest id pair") {
  // Square corners: four equal nearest-neighbour distances.
  const MergeTree t = ward_linkage(Tensor({4, 2}, {0, 0, 1, 0, 0, 1, 1, 1}), names(4));
  CHECK(t.merges[0].a == 0);
  CHECK(t.merges[0].b == 1);
  CHECK(t.merges[1].a == 2);
  CHECK(t.merges[1].b == 3);
}

TEST_CASE("input errors") {
  CHECK_THROWS_AS(ward_linkage(Tensor(1, 2), {"a"}), DimensionError);
  CHECK_THROWS_AS(ward_linkage(Tensor(2, 2), {"a"}), DimensionError);
  Tensor bad(2, 2);
  bad(1, 1) = std::nan("");
  CHECK_THROWS_AS(ward_linkage(bad, {"a", "b"}), NumericError);
}

TEST_CASE("Newick round trip") {
  Rng rng(43);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t m = 2 + rng.uniform_int(std::uint64_t{7});
    const MergeTree t = ward_linkage(oracle::random_matrix(m, 2, rng), names(m));
    const std::string text = to_newick(t);
    CHECK(text.back() == ';');
    const MergeTree back = from_newick(text, t.labels);
    REQUIRE(back.merges.size() == t.merges.size());
    CHECK(partitions(back) == partitions(t));
    for (std::size_t i = 0; i < t.merges.size(); ++i) {
      CHECK(std::abs(back.merges[i].height - t.merges[i].height) <= 1e-12 * (1.0 + t.merges[i].height));
    }
  }
  CHECK(from_newick("(a:5,b:5);").labels == std::vector<std::string>{"a", "b"});
  CHECK(from_newick("('x y':1,b:1);").labels[0] == "x y");
  CHECK_THROWS_AS(from_newick("(a:5,b:5"), FormatError);
  CHECK_THROWS_AS(from_newick("(a:5,b:5);", {"a", "c"}), FormatError);
}

TEST_CASE("merge tree validation") {
  MergeTree t{{{0, 1, 2.0, 2}, {2, 3, 1.0, 3}}, {"a", "b", "c"}};
  CHECK_THROWS_AS(t.validate(), DataError);
  t.merges = {{0, 1, 1.0, 2}, {0, 2, 2.0, 2}};
  CHECK_THROWS_AS(t.validate(), DataError);
  t.merges = {{0, 1, 1.0, 2}, {2, 3, 2.0, 3}};
  t.validate();
  CHECK(t.leaf_order() == std::vector<std::size_t>{2, 0, 1});
  CHECK(t.members(3) == std::vector<std::size_t>{0, 1});
}

TEST_CASE("dendrogram SVG") {
  const MergeTree two = ward_linkage(Tensor({2, 1}, {0, 2}), {"a", "b"});
  const auto doc = parse_svg(render_dendrogram_svg(two));
  CHECK(count_children(doc, "line") == 3);
  CHECK(count_children(doc, "text") == 2);

  Rng rng(44);
  const MergeTree t = ward_linkage(oracle::random_matrix(6, 3, rng), names(6));
  DendrogramOptions opt;
  opt.title = "CAE & <rows>";
  const std::string svg = render_dendrogram_svg(t, opt);
  const auto tree = parse_svg(svg);
  CHECK(count_children(tree, "line") == 3 * t.merges.size());
  std::vector<std::string> texts;
  collect_text(tree, texts);
  std::vector<std::string> expected;
  for (std::size_t leaf : t.leaf_order()) expected.push_back(t.labels[leaf]);
  CHECK(texts == expected);
  CHECK(tree.get<std::string>("svg.title") == "CAE & <rows>");
}

TEST_CASE("merge JSON lists every merge") {
  const MergeTree t = ward_linkage(Tensor({3, 1}, {0, 1, 10}), {"x", "y", "z"});
  const std::string json = merges_to_json(t);
  CHECK(json.find("\"labels\"") != std::string::npos);
  CHECK(std::count(json.begin(), json.end(), '{') >= 3);
}
