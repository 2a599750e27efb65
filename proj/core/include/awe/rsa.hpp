#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "awe/embedding.hpp"
#include "awe/encoders.hpp"

namespace awe::rsa {

// CKA between two views of the same N stimuli, given as D1 x N and D2 x N
// (one column per stimulus). Features are centered across stimuli.
// Throws DimensionError on N mismatch or N < 2 and DegenerateInputError for
// a constant representation.
double linear_cka(const nn::Tensor& x, const nn::Tensor& y);

// Gaussian-kernel CKA; sigma = bandwidth_fraction * median pairwise distance,
// chosen per representation. Biased HSIC.
double rbf_cka(const nn::Tensor& x, const nn::Tensor& y, double bandwidth_fraction = 0.5);

// Median of the N(N-1)/2 pairwise Euclidean distances between columns.
double median_pairwise_distance(const nn::Tensor& x);

struct Kernel {
  enum class Kind { Linear, Rbf };
  Kind kind = Kind::Linear;
  double bandwidth_fraction = 0.5;

  static Kernel linear() { return {}; }
  static Kernel rbf(double fraction = 0.5) { return {Kind::Rbf, fraction}; }
  // "linear" or "rbf(<fraction>)".
  std::string tag() const;
  static Kernel parse(std::string_view tag);

  friend bool operator==(const Kernel&, const Kernel&) = default;
};

double cka(const nn::Tensor& x, const nn::Tensor& y, const Kernel& kernel);

// CKA(X^(l/l), X^(l/a)). Rejects views whose tags, ids or objectives do not
// describe the same stimuli seen by a native and a foreign encoder.
double sim(const EmbeddingMatrix& native, const EmbeddingMatrix& foreign, const Kernel& kernel);

// Embeds `stimuli` (language `stimuli_language`) with both encoders first.
double sim(const std::string& stimuli_language, std::span<const enc::Stimulus> stimuli,
           const enc::EncoderModel& native, const enc::EncoderModel& foreign, const Kernel& kernel);

// Embedding matrices keyed by (stimuli language, encoder language, objective).
class ViewTable {
 public:
  void add(EmbeddingMatrix view);
  bool contains(const std::string& stimuli, const std::string& encoder, Objective objective) const;
  // Throws NotFoundError naming the missing view.
  const EmbeddingMatrix& get(const std::string& stimuli, const std::string& encoder, Objective objective) const;
  std::size_t size() const { return views_.size(); }

 private:
  std::map<std::tuple<std::string, std::string, Objective>, EmbeddingMatrix> views_;
};

// Rows index stimuli languages, columns encoder languages.
struct XRSM {
  nn::Tensor values;  // M x M
  std::vector<std::string> languages;
  Objective objective = Objective::PGE;
  Kernel kernel;
  std::uint64_t seed = 0;
  std::vector<std::size_t> stimuli_sizes;

  double operator()(std::size_t stimuli, std::size_t encoder) const { return values(stimuli, encoder); }
  std::size_t index_of(std::string_view language) const;
};

XRSM build_xrsm(std::span<const std::string> languages, const ViewTable& views, Objective objective,
                const Kernel& kernel);

struct StimulusSet {
  std::string language;
  std::vector<enc::Stimulus> items;
};

// One encoder and one stimulus set per language, matched by language id.
XRSM build_xrsm(std::span<const enc::EncoderModel> encoders, std::span<const StimulusSet> stimuli,
                const Kernel& kernel);

struct CrossModelTable {
  static constexpr std::size_t kPairs = 3;  // PGE-CAE, PGE-CSE, CAE-CSE
  static constexpr Objective kPairObjectives[kPairs][2] = {
      {Objective::PGE, Objective::CAE}, {Objective::PGE, Objective::CSE}, {Objective::CAE, Objective::CSE}};

  std::vector<std::string> languages;
  Kernel kernel;
  std::vector<std::array<double, kPairs>> values;  // per language
  std::array<double, kPairs> means{};

  static std::string pair_name(std::size_t pair);
};

// Per language, CKA between the native views of every objective pair.
CrossModelTable cross_model_table(std::span<const std::string> languages, const ViewTable& views,
                                  const Kernel& kernel);

std::string xrsm_to_csv(const XRSM& m);
std::string xrsm_to_json(const XRSM& m);
XRSM xrsm_from_json(std::string_view text);
// Heatmap with a white-yellow-red scale, one labelled cell per entry.
std::string render_xrsm_svg(const XRSM& m);

std::string cross_model_to_csv(const CrossModelTable& t);
std::string cross_model_to_json(const CrossModelTable& t);

}  // namespace awe::rsa
