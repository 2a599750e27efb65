#include <json.hpp>

#include "awe/error.hpp"
#include "awe/synthlang.hpp"

namespace awe::synth {

namespace {

constexpr int kLanguageSchemaVersion = 1;

nlohmann::json matrix_to_json(const nn::Tensor& t) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t r = 0; r < t.rows(); ++r) {
    auto row = t.row(r);
    rows.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return rows;
}

nn::Tensor matrix_from_json(const nlohmann::json& j, const std::string& where) {
  if (!j.is_array() || j.empty() || !j.front().is_array()) {
    throw ConfigError(where + ": expected a non-empty array of rows");
  }
  const std::size_t cols = j.front().size();
  nn::Tensor t(j.size(), cols);
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_array() || j[r].size() != cols) throw ConfigError(where + ": ragged matrix");
    for (std::size_t c = 0; c < cols; ++c) {
      if (!j[r][c].is_number()) throw ConfigError(where + "[" + std::to_string(r) + "]: non-numeric entry");
      t(r, c) = j[r][c].get<double>();
    }
  }
  return t;
}

}  // namespace

std::string language_to_json(const LanguageSpec& spec) {
  nlohmann::json j;
  j["schema_version"] = kLanguageSchemaVersion;
  j["id"] = spec.id;
  j["stress"] = std::string(to_string(spec.stress));
  j["vowel_reduction"] = spec.vowel_reduction;
  nlohmann::json phones = nlohmann::json::array();
  for (const auto& p : spec.phones) {
    phones.push_back({{"id", p.id},
                      {"class", std::string(to_string(p.cls))},
                      {"min_frames", p.min_frames},
                      {"max_frames", p.max_frames},
                      {"prototype", matrix_to_json(p.prototype)}});
  }
  j["phones"] = std::move(phones);
  j["transitions"] = matrix_to_json(spec.transitions);
  return j.dump(1);
}

LanguageSpec language_from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("language JSON: ") + e.what());
  }
  try {
    if (j.at("schema_version").get<int>() != kLanguageSchemaVersion) {
      throw FormatError("language JSON: unsupported schema_version");
    }
    LanguageSpec spec;
    spec.id = j.at("id").get<std::string>();
    spec.stress = stress_mode_from_string(j.at("stress").get<std::string>());
    spec.vowel_reduction = j.at("vowel_reduction").get<double>();
    const auto& phones = j.at("phones");
    for (std::size_t i = 0; i < phones.size(); ++i) {
      const auto& pj = phones[i];
      Phone p;
      p.id = pj.at("id").get<std::string>();
      p.cls = phone_class_from_string(pj.at("class").get<std::string>());
      p.min_frames = pj.at("min_frames").get<std::size_t>();
      p.max_frames = pj.at("max_frames").get<std::size_t>();
      p.prototype = matrix_from_json(pj.at("prototype"), "$.phones[" + std::to_string(i) + "].prototype");
      spec.phones.push_back(std::move(p));
    }
    spec.transitions = matrix_from_json(j.at("transitions"), "$.transitions");
    spec.validate();
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("language JSON: ") + e.what());
  }
}

}  // namespace awe::synth
