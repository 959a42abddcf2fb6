#pragma once

// Model checkpoint, little-endian:
//   "TCFM", u32 version, u32 length + JSON model config,
//   then per parameter: u32 length + name, u32 rank, u32 dims..., f32 values.

#include <filesystem>
#include <string>

#include <json.hpp>

#include "isba/io.hpp"
#include "isba/model.hpp"
#include "isba/train.hpp"

namespace isba {

inline constexpr std::array<char, 4> kCheckpointMagic = {'T', 'C', 'F', 'M'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

template <class S>
std::string encode_checkpoint(const TrainedModel<S>& model) {
  std::string out(kCheckpointMagic.begin(), kCheckpointMagic.end());
  detail::put_u32(out, kCheckpointVersion);
  nlohmann::json header = model.config();
  header["training_log"] = model.training_log;
  const std::string text = header.dump();
  detail::put_u32(out, static_cast<std::uint32_t>(text.size()));
  out += text;
  for (const auto* p : model.network.parameters()) {
    detail::put_u32(out, static_cast<std::uint32_t>(p->name.size()));
    out += p->name;
    detail::put_u32(out, static_cast<std::uint32_t>(p->shape.size()));
    for (auto d : p->shape) detail::put_u32(out, static_cast<std::uint32_t>(d));
    for (S v : p->value) detail::put_f32(out, static_cast<float>(v));
  }
  return out;
}

template <class S>
TrainedModel<S> decode_checkpoint(const std::string& bytes, const std::string& source) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kCheckpointMagic.data(), 4) != 0) {
    fail(ErrorKind::format, source + ": bad magic, expected \"TCFM\"");
  }
  detail::ByteReader reader(bytes, source);
  reader.take(4, "magic");
  const std::uint32_t version = reader.u32("version");
  require(version == kCheckpointVersion, ErrorKind::format,
          source + ": unsupported checkpoint version " + std::to_string(version));
  const std::uint32_t length = reader.u32("config length");
  nlohmann::json header;
  ModelConfig config;
  TrainedModel<S> model;
  try {
    header = nlohmann::json::parse(reader.str(length, "config"));
    config = header.get<ModelConfig>();
    if (header.contains("training_log")) model.training_log = header["training_log"].get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::format, source + ": invalid config block: " + e.what());
  }
  model.network = nn::Network<S>(config);
  auto params = model.network.parameters();
  std::size_t index = 0;
  while (!reader.done()) {
    const std::uint32_t name_length = reader.u32("parameter name length");
    const std::string name = reader.str(name_length, "parameter name");
    require(index < params.size(), ErrorKind::format, source + ": unexpected parameter '" + name + "'");
    auto* p = params[index++];
    require(p->name == name, ErrorKind::format,
            source + ": expected parameter '" + p->name + "', found '" + name + "'");
    const std::uint32_t rank = reader.u32("rank");
    require(rank == p->shape.size(), ErrorKind::format, source + ": rank mismatch for '" + name + "'");
    for (std::uint32_t r = 0; r < rank; ++r) {
      require(reader.u32("dimension") == p->shape[r], ErrorKind::format,
              source + ": shape mismatch for '" + name + "'");
    }
    for (auto& v : p->value) {
      const float f = reader.f32("parameter values");
      require(std::isfinite(f), ErrorKind::non_finite, source + ": non-finite value in '" + name + "'");
      v = static_cast<S>(f);
    }
  }
  require(index == params.size(), ErrorKind::truncated,
          source + ": checkpoint holds " + std::to_string(index) + " of " + std::to_string(params.size()) +
              " parameters");
  return model;
}

template <class S>
void save_checkpoint(const std::filesystem::path& path, const TrainedModel<S>& model) {
  detail::write_file(path, encode_checkpoint(model));
}

template <class S>
TrainedModel<S> load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint<S>(detail::read_file(path), path.string());
}

}  // namespace isba
