#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "awe/embedding.hpp"
#include "awe/rng.hpp"

namespace awe::eval {

enum class RelevanceMode {
  AnySpeaker,        // relevant: same word type
  DifferentSpeaker,  // relevant: same word type, other speaker; same-speaker
                     // tokens of the query's type are dropped from the ranking
};

std::string_view to_string(RelevanceMode mode);
RelevanceMode parse_relevance_mode(std::string_view name);

struct EvalSet {
  nn::Tensor embeddings;  // D x N
  std::vector<std::string> words;
  std::vector<std::string> speakers;

  std::size_t size() const { return embeddings.cols(); }
  // Throws DimensionError for label arrays of the wrong length or N < 2.
  void validate() const;
};

struct Neighbor {
  std::size_t index;
  double distance;

  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

// All columns except `query`, ascending by cosine distance, ties by index.
// Throws DegenerateInputError naming the first zero-norm column.
std::vector<Neighbor> cosine_rank(const nn::Tensor& embeddings, std::size_t query,
                                  DistanceConvention convention = DistanceConvention::HalfCosine);

// Mean over relevant ranks r of (relevant items in the top r) / r.
// Precondition: at least one flag is set (returns 0 otherwise).
double average_precision(const std::vector<bool>& relevant);

struct MapResult {
  double map = 0.0;
  std::size_t n_queries = 0;
};

// Throws DataError if no query has a relevant item.
MapResult map_same_different(const EvalSet& set, RelevanceMode mode = RelevanceMode::DifferentSpeaker);

// Mean mAP over `trials` uniform permutations of the word labels.
double shuffled_baseline(const EvalSet& set, std::size_t trials, Rng& rng,
                         RelevanceMode mode = RelevanceMode::DifferentSpeaker);

// Expected AP of a uniformly random ranking of n items, r of them relevant.
double expected_random_ap(std::size_t n, std::size_t r);

}  // namespace awe::eval
