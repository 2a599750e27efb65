#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "awe/tensor.hpp"

namespace awe {

enum class Objective { PGE, CAE, CSE };

std::string_view to_string(Objective objective);
// Case-insensitive; throws ConfigError for unknown names.
Objective parse_objective(std::string_view name);

// Cosine distance convention: (1 - cos) / 2 in [0, 1], or 1 - cos in [0, 2].
enum class DistanceConvention { HalfCosine, OneMinusCosine };

std::string_view to_string(DistanceConvention convention);
DistanceConvention parse_distance_convention(std::string_view name);

inline double cosine_to_distance(double cosine, DistanceConvention convention) {
  return convention == DistanceConvention::HalfCosine ? (1.0 - cosine) / 2.0 : 1.0 - cosine;
}

// X^(stimuli/encoder): one D-dim column per stimulus, in id order.
struct EmbeddingMatrix {
  nn::Tensor values;  // D x N
  std::vector<std::string> ids;
  std::string stimuli_language;
  std::string encoder_language;
  Objective objective = Objective::PGE;

  std::size_t dim() const { return values.rows(); }
  std::size_t count() const { return values.cols(); }
  // Column j as a contiguous vector.
  std::vector<double> column(std::size_t j) const;
  // Throws DimensionError / NumericError when ids and columns disagree or
  // an entry is non-finite.
  void validate() const;

  friend bool operator==(const EmbeddingMatrix&, const EmbeddingMatrix&) = default;
};

// "AWEX" | u32 version | u64 D | u64 N | str stimuli | str encoder |
// str objective | N x str id | D*N float64 LE, row-major.
// Strings are u32 length-prefixed.
inline constexpr std::uint32_t kEmbeddingFileVersion = 1;

void write_embedding_matrix(const std::filesystem::path& path, const EmbeddingMatrix& m);
EmbeddingMatrix read_embedding_matrix(const std::filesystem::path& path);

}  // namespace awe
