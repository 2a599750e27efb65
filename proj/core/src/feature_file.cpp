#include "awe/feature_file.hpp"

#include <set>

#include "awe/binary_io.hpp"
#include "awe/error.hpp"

namespace awe::features {

void write_features(const std::filesystem::path& path, std::span<const FeatureSegment> segments) {
  std::uint32_t k = segments.empty() ? 0 : static_cast<std::uint32_t>(segments.front().features.dim());
  std::set<std::string> seen;
  for (const auto& s : segments) {
    s.features.validate();
    if (s.features.dim() != k) {
      throw DataError("write_features: segment '" + s.id + "' has k=" + std::to_string(s.features.dim()) +
                      ", expected " + std::to_string(k));
    }
    if (!seen.insert(s.id).second) throw DataError("write_features: duplicate segment id '" + s.id + "'");
  }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot open '" + path.string() + "' for writing");
  os.write("AWEF", 4);
  io::write_le<std::uint32_t>(os, kFeatureFileVersion);
  io::write_le<std::uint32_t>(os, k);
  io::write_le<std::uint64_t>(os, segments.size());
  std::uint64_t offset = 0;
  for (const auto& s : segments) {
    io::write_string(os, s.id);
    io::write_le<std::uint64_t>(os, offset);
    io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(s.features.num_frames()));
    io::write_le<float>(os, static_cast<float>(s.features.frame_shift_ms));
    io::write_le<float>(os, static_cast<float>(s.features.frame_length_ms));
    offset += static_cast<std::uint64_t>(s.features.frames.size()) * sizeof(float);
  }
  for (const auto& s : segments) {
    for (double v : s.features.frames.values()) io::write_le<float>(os, static_cast<float>(v));
  }
  if (!os) throw DataError("write failure on '" + path.string() + "'");
}

FeatureReader::FeatureReader(std::filesystem::path path) : path_(std::move(path)) {
  std::ifstream is(path_, std::ios::binary);
  if (!is) throw NotFoundError("cannot open feature file '" + path_.string() + "'");
  io::expect_magic(is, "AWEF", path_.string());
  const auto version = io::read_le<std::uint32_t>(is, "version");
  if (version != kFeatureFileVersion) {
    throw FormatError(path_.string() + ": unsupported feature file version " + std::to_string(version));
  }
  k_ = io::read_le<std::uint32_t>(is, "k");
  const auto count = io::read_le<std::uint64_t>(is, "segment count");
  std::uint64_t expected_payload = 0;
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string id = io::read_string(is, "segment id");
    Entry e{};
    e.offset = io::read_le<std::uint64_t>(is, "segment offset");
    e.frames = io::read_le<std::uint32_t>(is, "segment frames");
    e.shift_ms = io::read_le<float>(is, "frame shift");
    e.length_ms = io::read_le<float>(is, "frame length");
    if (e.offset != expected_payload) throw FormatError(path_.string() + ": index offset out of sequence for '" + id + "'");
    expected_payload += static_cast<std::uint64_t>(e.frames) * k_ * sizeof(float);
    if (!index_.emplace(id, e).second) throw FormatError(path_.string() + ": duplicate id '" + id + "'");
    order_.push_back(std::move(id));
  }
  payload_start_ = static_cast<std::uint64_t>(is.tellg());
  is.seekg(0, std::ios::end);
  const auto file_size = static_cast<std::uint64_t>(is.tellg());
  if (file_size < payload_start_ + expected_payload) {
    throw FormatError(path_.string() + ": truncated payload (" + std::to_string(file_size - payload_start_) +
                      " of " + std::to_string(expected_payload) + " bytes)");
  }
}

std::size_t FeatureReader::num_frames(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw NotFoundError("segment '" + id + "' not in " + path_.string());
  return it->second.frames;
}

FeatureSequence FeatureReader::read(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw NotFoundError("segment '" + id + "' not in " + path_.string());
  const Entry& e = it->second;
  std::ifstream is(path_, std::ios::binary);
  if (!is) throw DataError("cannot reopen '" + path_.string() + "'");
  is.seekg(static_cast<std::streamoff>(payload_start_ + e.offset));
  FeatureSequence seq;
  seq.frame_shift_ms = e.shift_ms;
  seq.frame_length_ms = e.length_ms;
  seq.frames = nn::Tensor(e.frames, k_);
  for (std::size_t i = 0; i < seq.frames.size(); ++i) {
    seq.frames[i] = static_cast<double>(io::read_le<float>(is, "payload"));
  }
  return seq;
}

std::vector<FeatureSegment> FeatureReader::read_all() const {
  std::vector<FeatureSegment> out;
  out.reserve(order_.size());
  for (const auto& id : order_) out.push_back({id, read(id)});
  return out;
}

}  // namespace awe::features
