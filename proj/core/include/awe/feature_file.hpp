#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "awe/features.hpp"

namespace awe::features {

// Binary feature container:
//
//   "AWEF" | u32 version | u32 k | u64 segment count
//   index:   per segment  u32 id length, id bytes, u64 payload byte offset,
//                         u32 T, f32 frame shift ms, f32 frame length ms
//   payload: T x k little-endian float32 per segment, row-major
//
// All integers little-endian.
inline constexpr std::uint32_t kFeatureFileVersion = 1;

struct FeatureSegment {
  std::string id;
  FeatureSequence features;
};

// Throws DataError on inconsistent k, duplicate ids or IO failure.
void write_features(const std::filesystem::path& path, std::span<const FeatureSegment> segments);

// Random-access reader; safe to share across threads once opened (each read
// reopens its own stream).
class FeatureReader {
 public:
  explicit FeatureReader(std::filesystem::path path);

  std::uint32_t dim() const { return k_; }
  std::size_t size() const { return order_.size(); }
  const std::vector<std::string>& ids() const { return order_; }
  bool contains(const std::string& id) const { return index_.count(id) != 0; }
  std::size_t num_frames(const std::string& id) const;

  // Throws NotFoundError for absent ids.
  FeatureSequence read(const std::string& id) const;
  std::vector<FeatureSegment> read_all() const;

 private:
  struct Entry {
    std::uint64_t offset;
    std::uint32_t frames;
    float shift_ms;
    float length_ms;
  };
  std::filesystem::path path_;
  std::uint32_t k_ = 0;
  std::uint64_t payload_start_ = 0;
  std::map<std::string, Entry> index_;
  std::vector<std::string> order_;
};

inline std::vector<FeatureSegment> read_features(const std::filesystem::path& path) {
  return FeatureReader(path).read_all();
}

}  // namespace awe::features
