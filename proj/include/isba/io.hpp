#pragma once

// On-disk formats: binary feature files, label/transcript text files,
// vocabulary files, and JSON dataset manifests.

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "isba/error.hpp"
#include "isba/seq_data.hpp"

namespace isba {

namespace fs = std::filesystem;

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

inline void put_f32(std::string& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

inline std::uint32_t get_u32(const unsigned char* p) {
  return std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) | (std::uint32_t{p[2]} << 16) |
         (std::uint32_t{p[3]} << 24);
}

// Bounds-checked little-endian reader over an in-memory buffer.
class ByteReader {
 public:
  ByteReader(const std::string& bytes, std::string source)
      : bytes_(bytes), source_(std::move(source)) {}

  bool done() const { return pos_ == bytes_.size(); }
  std::size_t remaining() const { return bytes_.size() - pos_; }

  const unsigned char* take(std::size_t count, const char* what) {
    if (remaining() < count) {
      fail(ErrorKind::truncated, source_ + ": truncated while reading " + what);
    }
    auto* p = reinterpret_cast<const unsigned char*>(bytes_.data() + pos_);
    pos_ += count;
    return p;
  }

  std::uint32_t u32(const char* what) { return get_u32(take(4, what)); }
  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }

  std::string str(std::size_t count, const char* what) {
    auto* p = take(count, what);
    return std::string(reinterpret_cast<const char*>(p), count);
  }

 private:
  const std::string& bytes_;
  std::string source_;
  std::size_t pos_ = 0;
};

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open '" + path.string() + "'");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) fail(ErrorKind::io, "error reading '" + path.string() + "'");
  return bytes;
}

inline void write_file(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::io, "cannot write '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::io, "error writing '" + path.string() + "'");
}

inline std::vector<std::string> read_lines(const fs::path& path) {
  const std::string text = read_file(path);
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
    start = end + 1;
  }
  return lines;
}

}  // namespace detail

inline constexpr std::array<char, 4> kFeatureMagic = {'T', 'C', 'F', 'B'};
inline constexpr std::uint32_t kFeatureVersion = 1;

inline std::string encode_features(const FeatureSequence& features) {
  std::string out(kFeatureMagic.begin(), kFeatureMagic.end());
  detail::put_u32(out, kFeatureVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(features.frames()));
  detail::put_u32(out, static_cast<std::uint32_t>(features.dim()));
  out.reserve(out.size() + 4 * features.values().size());
  for (float v : features.values()) detail::put_f32(out, v);
  return out;
}

inline FeatureSequence decode_features(const std::string& bytes, const std::string& source) {
  detail::ByteReader reader(bytes, source);
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kFeatureMagic.data(), 4) != 0) {
    fail(ErrorKind::format, source + ": bad magic, expected \"TCFB\"");
  }
  reader.take(4, "magic");
  const std::uint32_t version = reader.u32("version");
  require(version == kFeatureVersion, ErrorKind::format,
          source + ": unsupported feature file version " + std::to_string(version));
  const std::uint32_t n = reader.u32("frame count");
  const std::uint32_t d = reader.u32("dimension");
  require(n >= 1 && d >= 1, ErrorKind::format, source + ": header has n or d equal to zero");
  const std::uint64_t count = std::uint64_t{n} * d;
  if (reader.remaining() < count * 4) {
    fail(ErrorKind::truncated, source + ": payload holds " + std::to_string(reader.remaining() / 4) +
                                   " values, header promises " + std::to_string(count));
  }
  require(reader.remaining() == count * 4, ErrorKind::format,
          source + ": trailing bytes after feature payload");
  std::vector<float> values(count);
  for (auto& v : values) {
    v = reader.f32("values");
    if (!std::isfinite(v)) fail(ErrorKind::non_finite, source + ": non-finite feature value");
  }
  return FeatureSequence(n, d, std::move(values));
}

inline FeatureSequence load_features(const fs::path& path) {
  if (!fs::exists(path)) fail(ErrorKind::io, "feature file '" + path.string() + "' does not exist");
  return decode_features(detail::read_file(path), path.string());
}

inline void write_features(const fs::path& path, const FeatureSequence& features) {
  detail::write_file(path, encode_features(features));
}

// Text label files: one label name per line.

inline std::vector<LabelId> parse_label_lines(const std::vector<std::string>& lines,
                                              const LabelVocab& vocab, const std::string& source) {
  std::vector<LabelId> out;
  out.reserve(lines.size());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    auto id = vocab.find(lines[i]);
    if (!id) {
      fail(ErrorKind::unknown_label, source + ":" + std::to_string(i + 1) + ": unknown label '" +
                                         lines[i] + "'");
    }
    out.push_back(*id);
  }
  return out;
}

inline Transcript load_transcript(const fs::path& path, const LabelVocab& vocab) {
  auto lines = detail::read_lines(path);
  require(!lines.empty(), ErrorKind::empty_input, "transcript '" + path.string() + "' is empty");
  return Transcript(parse_label_lines(lines, vocab, path.string()));
}

inline LabelSequence load_label_sequence(const fs::path& path, const LabelVocab& vocab) {
  auto lines = detail::read_lines(path);
  require(!lines.empty(), ErrorKind::empty_input, "label file '" + path.string() + "' is empty");
  return LabelSequence(parse_label_lines(lines, vocab, path.string()));
}

inline std::string encode_labels(std::span<const LabelId> labels, const LabelVocab& vocab) {
  std::string out;
  for (LabelId l : labels) {
    out += vocab.name(l);
    out += '\n';
  }
  return out;
}

inline void write_labels(const fs::path& path, std::span<const LabelId> labels,
                         const LabelVocab& vocab) {
  detail::write_file(path, encode_labels(labels, vocab));
}

// Vocabulary: one name per line, optional leading "#background <name>".

inline constexpr std::string_view kBackgroundDirective = "#background ";

inline LabelVocab load_vocab(const fs::path& path) {
  auto lines = detail::read_lines(path);
  std::optional<std::string> background_name;
  if (!lines.empty() && lines.front().starts_with(kBackgroundDirective)) {
    background_name = lines.front().substr(kBackgroundDirective.size());
    lines.erase(lines.begin());
  }
  require(!lines.empty(), ErrorKind::empty_input, "vocabulary '" + path.string() + "' is empty");
  std::optional<LabelId> background;
  if (background_name) {
    auto it = std::find(lines.begin(), lines.end(), *background_name);
    require(it != lines.end(), ErrorKind::unknown_label,
            path.string() + ": background label '" + *background_name + "' is not in the vocabulary");
    background = static_cast<LabelId>(it - lines.begin());
  }
  return LabelVocab(std::move(lines), background);
}

inline std::string encode_vocab(const LabelVocab& vocab) {
  std::string out;
  if (vocab.background()) {
    out += kBackgroundDirective;
    out += vocab.name(*vocab.background());
    out += '\n';
  }
  for (const auto& name : vocab.names()) {
    out += name;
    out += '\n';
  }
  return out;
}

inline void write_vocab(const fs::path& path, const LabelVocab& vocab) {
  detail::write_file(path, encode_vocab(vocab));
}

// Manifest: {"vocab": path, "videos": [{"id", "features", "transcript", "ground_truth"?}]}.
// Relative paths resolve against the manifest's directory.

inline Dataset load_dataset(const fs::path& manifest_path) {
  const std::string text = detail::read_file(manifest_path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::format, manifest_path.string() + ": invalid JSON: " + e.what());
  }
  const fs::path base = manifest_path.parent_path();
  auto resolve = [&](const nlohmann::json& node, const char* key) -> fs::path {
    if (!node.contains(key) || !node[key].is_string()) {
      fail(ErrorKind::format, manifest_path.string() + ": missing string field '" + key + "'");
    }
    fs::path p = node[key].get<std::string>();
    return p.is_absolute() ? p : base / p;
  };
  require(doc.is_object(), ErrorKind::format, manifest_path.string() + ": manifest must be an object");
  Dataset data;
  data.vocab = load_vocab(resolve(doc, "vocab"));
  require(doc.contains("videos") && doc["videos"].is_array(), ErrorKind::format,
          manifest_path.string() + ": missing 'videos' array");
  for (const auto& node : doc["videos"]) {
    require(node.is_object() && node.contains("id") && node["id"].is_string(), ErrorKind::format,
            manifest_path.string() + ": video entry without string 'id'");
    VideoRecord rec;
    rec.id = node["id"].get<std::string>();
    rec.features = load_features(resolve(node, "features"));
    rec.transcript = load_transcript(resolve(node, "transcript"), data.vocab);
    if (node.contains("ground_truth") && !node["ground_truth"].is_null()) {
      rec.ground_truth = load_label_sequence(resolve(node, "ground_truth"), data.vocab);
    }
    data.videos.push_back(std::move(rec));
  }
  data.validate();
  return data;
}

// Writes vocab.txt, features/, transcripts/, labels/ and the manifest under `dir`.
inline void write_dataset(const fs::path& dir, const Dataset& data,
                          const std::string& manifest_name = "manifest.json") {
  fs::create_directories(dir);
  write_vocab(dir / "vocab.txt", data.vocab);
  nlohmann::json videos = nlohmann::json::array();
  for (const auto& v : data.videos) {
    nlohmann::json node;
    node["id"] = v.id;
    node["features"] = "features/" + v.id + ".tcfb";
    node["transcript"] = "transcripts/" + v.id + ".txt";
    write_features(dir / "features" / (v.id + ".tcfb"), v.features);
    write_labels(dir / "transcripts" / (v.id + ".txt"), v.transcript.labels, data.vocab);
    if (v.ground_truth) {
      node["ground_truth"] = "labels/" + v.id + ".txt";
      write_labels(dir / "labels" / (v.id + ".txt"), v.ground_truth->labels, data.vocab);
    }
    videos.push_back(std::move(node));
  }
  nlohmann::json doc{{"vocab", "vocab.txt"}, {"videos", std::move(videos)}};
  detail::write_file(dir / manifest_name, doc.dump(2) + "\n");
}

}  // namespace isba
