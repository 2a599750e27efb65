#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "awe/tensor.hpp"

namespace awe::cluster {

// Cluster ids: 0..M-1 are leaves, M + i is the cluster formed by merge i.
struct Merge {
  std::size_t a;  // smaller id
  std::size_t b;
  double height;
  std::size_t size;

  friend bool operator==(const Merge&, const Merge&) = default;
};

struct MergeTree {
  std::vector<Merge> merges;
  std::vector<std::string> labels;

  std::size_t leaves() const { return labels.size(); }
  std::size_t root() const { return 2 * labels.size() - 2; }
  // Throws DataError unless the merges form one binary tree over all leaves
  // with nondecreasing heights.
  void validate() const;
  // Leaves in recursive left-first (a before b) order.
  std::vector<std::size_t> leaf_order() const;
  // Leaf ids under cluster `id`, ascending.
  std::vector<std::size_t> members(std::size_t id) const;

  friend bool operator==(const MergeTree&, const MergeTree&) = default;
};

// Ward linkage on the rows of `points` (M x F), Euclidean metric, via
// Lance-Williams updates. Two singletons merge at their distance. Ties go to
// the lexicographically smallest (a, b) pair of cluster ids.
MergeTree ward_linkage(const nn::Tensor& points, std::vector<std::string> labels);

// "(a:5,b:5);" style output; branch lengths are height differences and
// numbers use the shortest round-trip representation.
std::string to_newick(const MergeTree& tree);

// Reads binary Newick with branch lengths. Leaf ids follow `labels` when
// given (every leaf name must appear there), else order of appearance.
// Merges are ordered by height, ties by post-order position.
MergeTree from_newick(std::string_view text, const std::vector<std::string>& labels = {});

std::string merges_to_json(const MergeTree& tree);

struct DendrogramOptions {
  double width = 480.0;
  double leaf_spacing = 28.0;
  double margin = 24.0;
  double label_width = 60.0;
  std::string title;
};

// Leaves on the left in leaf_order(), merge height growing to the right.
// Every merge draws two horizontal branches and one vertical join.
std::string render_dendrogram_svg(const MergeTree& tree, const DendrogramOptions& options = {});

}  // namespace awe::cluster
