#include "awe/embedding.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include "awe/binary_io.hpp"
#include "awe/error.hpp"

namespace awe {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

}  // namespace

std::string_view to_string(Objective objective) {
  switch (objective) {
    case Objective::PGE: return "PGE";
    case Objective::CAE: return "CAE";
    case Objective::CSE: return "CSE";
  }
  return "?";
}

Objective parse_objective(std::string_view name) {
  const std::string n = lower(name);
  if (n == "pge") return Objective::PGE;
  if (n == "cae") return Objective::CAE;
  if (n == "cse") return Objective::CSE;
  throw ConfigError("unknown objective '" + std::string(name) + "' (expected PGE, CAE or CSE)");
}

std::string_view to_string(DistanceConvention convention) {
  return convention == DistanceConvention::HalfCosine ? "half_cosine" : "one_minus_cosine";
}

DistanceConvention parse_distance_convention(std::string_view name) {
  const std::string n = lower(name);
  if (n == "half_cosine") return DistanceConvention::HalfCosine;
  if (n == "one_minus_cosine") return DistanceConvention::OneMinusCosine;
  throw ConfigError("unknown distance convention '" + std::string(name) +
                    "' (expected half_cosine or one_minus_cosine)");
}

std::vector<double> EmbeddingMatrix::column(std::size_t j) const {
  std::vector<double> out(dim());
  for (std::size_t i = 0; i < dim(); ++i) out[i] = values(i, j);
  return out;
}

void EmbeddingMatrix::validate() const {
  if (values.rank() != 2) throw DimensionError("embedding matrix must be rank 2");
  if (ids.size() != values.cols()) {
    throw DimensionError("embedding matrix has " + std::to_string(values.cols()) + " columns but " +
                         std::to_string(ids.size()) + " ids");
  }
  require_finite(values, "embedding matrix " + stimuli_language + "/" + encoder_language);
}

void write_embedding_matrix(const std::filesystem::path& path, const EmbeddingMatrix& m) {
  m.validate();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write '" + path.string() + "'");
  os.write("AWEX", 4);
  io::write_le<std::uint32_t>(os, kEmbeddingFileVersion);
  io::write_le<std::uint64_t>(os, m.dim());
  io::write_le<std::uint64_t>(os, m.count());
  io::write_string(os, m.stimuli_language);
  io::write_string(os, m.encoder_language);
  io::write_string(os, to_string(m.objective));
  for (const auto& id : m.ids) io::write_string(os, id);
  for (double v : m.values.values()) io::write_le<double>(os, v);
  if (!os) throw DataError("write failed for '" + path.string() + "'");
}

EmbeddingMatrix read_embedding_matrix(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw NotFoundError("embedding file '" + path.string() + "' not found");
  io::expect_magic(is, "AWEX", path.string());
  const auto version = io::read_le<std::uint32_t>(is, "version");
  if (version != kEmbeddingFileVersion) {
    throw FormatError(path.string() + ": unsupported embedding file version " + std::to_string(version));
  }
  const auto d = io::read_le<std::uint64_t>(is, "D");
  const auto n = io::read_le<std::uint64_t>(is, "N");
  if (d > (1u << 24) || n > (1u << 26)) throw FormatError(path.string() + ": implausible shape");
  EmbeddingMatrix m;
  m.stimuli_language = io::read_string(is, "stimuli language");
  m.encoder_language = io::read_string(is, "encoder language");
  try {
    m.objective = parse_objective(io::read_string(is, "objective"));
  } catch (const ConfigError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  m.ids.reserve(n);
  for (std::uint64_t j = 0; j < n; ++j) m.ids.push_back(io::read_string(is, "stimulus id"));
  std::vector<double> data(d * n);
  for (auto& v : data) v = io::read_le<double>(is, "payload");
  m.values = nn::Tensor({d, n}, std::move(data));
  m.validate();
  return m;
}

}  // namespace awe
