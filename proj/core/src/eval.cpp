#include "awe/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "awe/error.hpp"

namespace awe::eval {

std::string_view to_string(RelevanceMode mode) {
  return mode == RelevanceMode::AnySpeaker ? "any_speaker" : "different_speaker";
}

RelevanceMode parse_relevance_mode(std::string_view name) {
  if (name == "any_speaker") return RelevanceMode::AnySpeaker;
  if (name == "different_speaker") return RelevanceMode::DifferentSpeaker;
  throw ConfigError("unknown relevance mode '" + std::string(name) +
                    "' (expected any_speaker or different_speaker)");
}

void EvalSet::validate() const {
  const std::size_t n = embeddings.cols();
  if (embeddings.rank() != 2 || words.size() != n || speakers.size() != n) {
    throw DimensionError("eval set: " + std::to_string(n) + " columns, " + std::to_string(words.size()) +
                         " word labels, " + std::to_string(speakers.size()) + " speaker labels");
  }
  if (n < 2) throw DimensionError("eval set needs at least 2 items");
}

namespace {

// Pairwise distances between all columns, N x N.
nn::Tensor distance_matrix(const nn::Tensor& x, DistanceConvention convention) {
  const std::size_t d = x.rows();
  const std::size_t n = x.cols();
  nn::Tensor unit(n, d);
  for (std::size_t j = 0; j < n; ++j) {
    double sq = 0.0;
    for (std::size_t i = 0; i < d; ++i) sq += x(i, j) * x(i, j);
    if (!(sq > 0.0)) {
      throw DegenerateInputError("zero-norm embedding at column " + std::to_string(j));
    }
    const double inv = 1.0 / std::sqrt(sq);
    for (std::size_t i = 0; i < d; ++i) unit(j, i) = x(i, j) * inv;
  }
  nn::Tensor cos(n, n);
  nn::gemm_nt(unit, unit, cos);
  for (double& c : cos.values()) c = cosine_to_distance(std::clamp(c, -1.0, 1.0), convention);
  return cos;
}

std::vector<std::size_t> ranking(const nn::Tensor& dist, std::size_t q) {
  const std::size_t n = dist.cols();
  std::vector<std::size_t> order;
  order.reserve(n - 1);
  for (std::size_t j = 0; j < n; ++j) {
    if (j != q) order.push_back(j);
  }
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double da = dist(q, a);
    const double db = dist(q, b);
    return da < db || (da == db && a < b);
  });
  return order;
}

struct Rankings {
  std::vector<std::vector<std::size_t>> order;
};

Rankings all_rankings(const EvalSet& set) {
  const nn::Tensor dist = distance_matrix(set.embeddings, DistanceConvention::HalfCosine);
  Rankings r;
  r.order.reserve(set.size());
  for (std::size_t q = 0; q < set.size(); ++q) r.order.push_back(ranking(dist, q));
  return r;
}

// Word labels are passed as integer codes so shuffled trials can permute them.
MapResult score(const Rankings& rankings, std::span<const std::size_t> word,
                std::span<const std::size_t> speaker, RelevanceMode mode) {
  MapResult result;
  double total = 0.0;
  for (std::size_t q = 0; q < rankings.order.size(); ++q) {
    std::size_t seen = 0;
    std::size_t hits = 0;
    double ap = 0.0;
    for (std::size_t j : rankings.order[q]) {
      const bool same_word = word[j] == word[q];
      const bool same_speaker = speaker[j] == speaker[q];
      if (mode == RelevanceMode::DifferentSpeaker && same_word && same_speaker) continue;
      ++seen;
      if (same_word) {
        ++hits;
        ap += static_cast<double>(hits) / static_cast<double>(seen);
      }
    }
    if (hits == 0) continue;
    total += ap / static_cast<double>(hits);
    ++result.n_queries;
  }
  if (result.n_queries == 0) throw DataError("no query has a relevant item under " + std::string(to_string(mode)));
  result.map = total / static_cast<double>(result.n_queries);
  return result;
}

std::vector<std::size_t> codes(const std::vector<std::string>& labels) {
  std::vector<std::string> uniq(labels);
  std::sort(uniq.begin(), uniq.end());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  std::vector<std::size_t> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out[i] = static_cast<std::size_t>(std::lower_bound(uniq.begin(), uniq.end(), labels[i]) - uniq.begin());
  }
  return out;
}

}  // namespace

std::vector<Neighbor> cosine_rank(const nn::Tensor& embeddings, std::size_t query, DistanceConvention convention) {
  if (query >= embeddings.cols()) {
    throw DimensionError("query index " + std::to_string(query) + " out of range for " +
                         std::to_string(embeddings.cols()) + " columns");
  }
  const nn::Tensor dist = distance_matrix(embeddings, convention);
  std::vector<Neighbor> out;
  for (std::size_t j : ranking(dist, query)) out.push_back({j, dist(query, j)});
  return out;
}

double average_precision(const std::vector<bool>& relevant) {
  std::size_t hits = 0;
  double sum = 0.0;
  for (std::size_t r = 0; r < relevant.size(); ++r) {
    if (!relevant[r]) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(r + 1);
  }
  return hits == 0 ? 0.0 : sum / static_cast<double>(hits);
}

MapResult map_same_different(const EvalSet& set, RelevanceMode mode) {
  set.validate();
  const Rankings r = all_rankings(set);
  return score(r, codes(set.words), codes(set.speakers), mode);
}

double shuffled_baseline(const EvalSet& set, std::size_t trials, Rng& rng, RelevanceMode mode) {
  set.validate();
  if (trials == 0) throw ConfigError("shuffled_baseline needs at least one trial");
  const Rankings r = all_rankings(set);
  std::vector<std::size_t> word = codes(set.words);
  const std::vector<std::size_t> speaker = codes(set.speakers);
  double total = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    rng.shuffle(word);
    total += score(r, word, speaker, mode).map;
  }
  return total / static_cast<double>(trials);
}

double expected_random_ap(std::size_t n, std::size_t r) {
  if (r == 0 || r > n) throw ConfigError("expected_random_ap: need 1 <= r <= n");
  double harmonic = 0.0;
  for (std::size_t i = 1; i <= n; ++i) harmonic += 1.0 / static_cast<double>(i);
  if (n == 1) return 1.0;
  const double nd = static_cast<double>(n);
  return (harmonic + static_cast<double>(r - 1) / (nd - 1.0) * (nd - harmonic)) / nd;
}

}  // namespace awe::eval
