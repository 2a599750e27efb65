#include <json.hpp>

#include <fstream>

#include "awe/binary_io.hpp"
#include "awe/encoders.hpp"
#include "awe/error.hpp"

namespace awe::enc {

namespace {

nlohmann::json model_json(const EncoderModel& m) {
  const ModelConfig& c = m.config;
  return {{"objective", to_string(c.objective)},
          {"input_dim", c.input_dim},
          {"hidden", c.hidden},
          {"layers", c.layers},
          {"phone_embedding_dim", c.phone_embedding_dim},
          {"margin", c.margin},
          {"distance", to_string(c.distance)},
          {"per_step_mean", c.per_step_mean},
          {"language", m.language},
          {"phone_vocab", m.phone_vocab}};
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const EncoderModel& model) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write checkpoint '" + path.string() + "'");
  os.write("AWEC", 4);
  io::write_le<std::uint32_t>(os, kCheckpointVersion);
  io::write_string(os, model_json(model).dump());
  io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(model.params.size()));
  for (std::size_t i = 0; i < model.params.size(); ++i) {
    const nn::Tensor& t = model.params.at(i);
    io::write_string(os, model.params.name(i));
    io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) io::write_le<std::uint64_t>(os, d);
    for (double v : t.values()) io::write_le<double>(os, v);
  }
  if (!os) throw DataError("write failed for checkpoint '" + path.string() + "'");
}

EncoderModel read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw NotFoundError("checkpoint '" + path.string() + "' not found");
  const std::string where = "checkpoint '" + path.string() + "'";
  io::expect_magic(is, "AWEC", where);
  const auto version = io::read_le<std::uint32_t>(is, "version");
  if (version != kCheckpointVersion) {
    throw FormatError(where + ": unsupported version " + std::to_string(version));
  }
  EncoderModel model;
  try {
    const auto j = nlohmann::json::parse(io::read_string(is, "model header"));
    ModelConfig c;
    c.objective = parse_objective(j.at("objective").get<std::string>());
    c.input_dim = j.at("input_dim").get<std::size_t>();
    c.hidden = j.at("hidden").get<std::size_t>();
    c.layers = j.at("layers").get<std::size_t>();
    c.phone_embedding_dim = j.at("phone_embedding_dim").get<std::size_t>();
    c.margin = j.at("margin").get<double>();
    c.distance = parse_distance_convention(j.at("distance").get<std::string>());
    c.per_step_mean = j.at("per_step_mean").get<bool>();
    model = EncoderModel::zeros(c, j.at("language").get<std::string>(),
                                j.at("phone_vocab").get<std::vector<std::string>>());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(where + ": bad model header: " + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(where + ": " + e.what());
  }
  const auto count = io::read_le<std::uint32_t>(is, "tensor count");
  if (count != model.params.size()) {
    throw FormatError(where + ": expected " + std::to_string(model.params.size()) + " tensors, found " +
                      std::to_string(count));
  }
  for (std::size_t i = 0; i < count; ++i) {
    const std::string name = io::read_string(is, "tensor name");
    if (name != model.params.name(i)) {
      throw FormatError(where + ": tensor " + std::to_string(i) + " is '" + name + "', expected '" +
                        model.params.name(i) + "'");
    }
    nn::Tensor& t = model.params.at(i);
    const auto rank = io::read_le<std::uint32_t>(is, "tensor rank");
    std::vector<std::size_t> shape(rank);
    for (auto& d : shape) d = io::read_le<std::uint64_t>(is, "tensor shape");
    if (shape != t.shape()) throw FormatError(where + ": tensor '" + name + "' has unexpected shape");
    for (double& v : t.values()) v = io::read_le<double>(is, "tensor data");
  }
  return model;
}

}  // namespace awe::enc
