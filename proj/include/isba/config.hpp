#pragma once

// Effective run configuration: defaults <- JSON file <- command-line flags.

#include <charconv>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "isba/driver.hpp"
#include "isba/error.hpp"
#include "isba/io.hpp"
#include "isba/model.hpp"
#include "isba/refine.hpp"
#include "isba/soft_target.hpp"
#include "isba/train.hpp"

namespace isba {

enum class RunMode { full, weak };

struct RunConfig {
  RunMode mode = RunMode::weak;
  std::string data;
  std::string out;
  std::string eval;  // optional evaluation split manifest
  std::size_t jobs = 1;

  BoundarySpec boundary;
  TargetKind targets = TargetKind::soft;
  RefinementConfig refinement;
  ModelConfig model;
  TrainConfig train{.precision = Precision::f32};

  void validate() const {
    boundary.validate();
    refinement.validate();
    train.validate();
    require(jobs >= 1, ErrorKind::config, "jobs must be >= 1");
    ModelConfig probe = model;
    probe.num_classes = 1;
    probe.input_dim = 1;
    probe.validate();
  }
};

namespace detail {

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  std::from_chars_result res;
  if constexpr (std::is_floating_point_v<T>) {
    try {
      std::size_t used = 0;
      value = static_cast<T>(std::stod(text, &used));
      res.ptr = first + used;
      res.ec = std::errc{};
    } catch (const std::exception&) {
      res.ec = std::errc::invalid_argument;
    }
  } else {
    res = std::from_chars(first, last, value);
  }
  if (res.ec != std::errc{} || res.ptr != last) {
    fail(ErrorKind::config, "invalid value '" + text + "' for '" + key + "'");
  }
  return value;
}

inline bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  fail(ErrorKind::config, "invalid boolean '" + text + "' for '" + key + "'");
}

inline std::vector<std::size_t> parse_list(const std::string& key, const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<std::size_t>(key, item));
  require(!out.empty(), ErrorKind::config, "empty list for '" + key + "'");
  return out;
}

// One configurable key: how to read it from a flag string, from JSON, and how to emit it.
struct Field {
  std::function<void(RunConfig&, const std::string&)> from_text;
  std::function<void(RunConfig&, const nlohmann::json&)> from_json;
  std::function<nlohmann::json(const RunConfig&)> to_json;
};

inline std::string json_text(const nlohmann::json& j) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_array()) {
    std::string out;
    for (const auto& item : j) {
      if (!out.empty()) out += ',';
      out += json_text(item);
    }
    return out;
  }
  return j.dump();
}

template <class Get, class Set>
Field text_field(Get get, Set set) {
  return Field{
      set,
      [set](RunConfig& c, const nlohmann::json& j) { set(c, json_text(j)); },
      [get](const RunConfig& c) { return nlohmann::json(get(c)); },
  };
}

#define ISBA_NUMBER_FIELD(key, type, member)                                                           \
  {                                                                                                    \
    key, text_field([](const RunConfig& c) { return c.member; },                                       \
                    [](RunConfig& c, const std::string& v) { c.member = parse_number<type>(key, v); }) \
  }

inline const std::map<std::string, Field>& config_fields() {
  static const std::map<std::string, Field> fields = {
      {"mode", text_field([](const RunConfig& c) { return std::string(c.mode == RunMode::full ? "full" : "weak"); },
                          [](RunConfig& c, const std::string& v) {
                            if (v == "full") c.mode = RunMode::full;
                            else if (v == "weak") c.mode = RunMode::weak;
                            else fail(ErrorKind::config, "mode must be 'full' or 'weak', got '" + v + "'");
                          })},
      {"data", text_field([](const RunConfig& c) { return c.data; }, [](RunConfig& c, const std::string& v) { c.data = v; })},
      {"out", text_field([](const RunConfig& c) { return c.out; }, [](RunConfig& c, const std::string& v) { c.out = v; })},
      {"eval", text_field([](const RunConfig& c) { return c.eval; }, [](RunConfig& c, const std::string& v) { c.eval = v; })},
      ISBA_NUMBER_FIELD("jobs", std::size_t, jobs),
      ISBA_NUMBER_FIELD("beta", double, boundary.beta),
      {"targets", text_field([](const RunConfig& c) { return std::string(to_string(c.targets)); },
                             [](RunConfig& c, const std::string& v) { c.targets = parse_target_kind(v); })},
      ISBA_NUMBER_FIELD("rho", double, refinement.rho),
      ISBA_NUMBER_FIELD("theta", double, refinement.theta),
      ISBA_NUMBER_FIELD("align_iters", std::size_t, refinement.align_iters),
      ISBA_NUMBER_FIELD("patience", std::size_t, refinement.patience),
      ISBA_NUMBER_FIELD("max_iters", std::size_t, refinement.max_iters),
      {"warm_start", text_field([](const RunConfig& c) { return c.refinement.warm_start; },
                                [](RunConfig& c, const std::string& v) { c.refinement.warm_start = parse_bool("warm_start", v); })},
      {"seed", text_field([](const RunConfig& c) { return c.train.seed; },
                          [](RunConfig& c, const std::string& v) {
                            c.train.seed = parse_number<std::uint64_t>("seed", v);
                            c.refinement.seed = c.train.seed;
                          })},
      {"kind", text_field([](const RunConfig& c) { return std::string(to_string(c.model.kind)); },
                          [](RunConfig& c, const std::string& v) { c.model.kind = parse_model_kind(v); })},
      ISBA_NUMBER_FIELD("depth", std::size_t, model.depth),
      ISBA_NUMBER_FIELD("conv_width", std::size_t, model.conv_width),
      {"encoder_filters", text_field([](const RunConfig& c) { return c.model.encoder_filters; },
                                     [](RunConfig& c, const std::string& v) {
                                       c.model.encoder_filters = parse_list("encoder_filters", v);
                                     })},
      ISBA_NUMBER_FIELD("lateral_dim", std::size_t, model.lateral_dim),
      ISBA_NUMBER_FIELD("epochs", std::size_t, train.epochs),
      ISBA_NUMBER_FIELD("learning_rate", double, train.learning_rate),
      {"optimizer", text_field([](const RunConfig& c) { return std::string(to_string(c.train.optimizer)); },
                               [](RunConfig& c, const std::string& v) { c.train.optimizer = parse_optimizer(v); })},
      {"precision", text_field([](const RunConfig& c) { return std::string(to_string(c.train.precision)); },
                               [](RunConfig& c, const std::string& v) { c.train.precision = parse_precision(v); })},
  };
  return fields;
}

#undef ISBA_NUMBER_FIELD

}  // namespace detail

inline bool is_config_key(const std::string& key) { return detail::config_fields().count(key) > 0; }

inline nlohmann::json to_json(const RunConfig& config) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [key, field] : detail::config_fields()) j[key] = field.to_json(config);
  return j;
}

// Overrides are (key, value) pairs with keys spelled as in the JSON file.
inline RunConfig config_resolve(const std::optional<std::filesystem::path>& file,
                                const std::vector<std::pair<std::string, std::string>>& overrides) {
  RunConfig config;
  const auto& fields = detail::config_fields();
  if (file) {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(detail::read_file(*file));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::config, file->string() + ": invalid JSON: " + e.what());
    }
    require(doc.is_object(), ErrorKind::config, file->string() + ": configuration must be a JSON object");
    for (const auto& [key, value] : doc.items()) {
      auto it = fields.find(key);
      if (it == fields.end()) fail(ErrorKind::config, file->string() + ": unknown configuration key '" + key + "'");
      it->second.from_json(config, value);
    }
  }
  for (const auto& [key, value] : overrides) {
    auto it = fields.find(key);
    if (it == fields.end()) fail(ErrorKind::config, "unknown configuration key '" + key + "'");
    it->second.from_text(config, value);
  }
  config.validate();
  return config;
}

}  // namespace isba
