#pragma once

// On-disk results: weak-training run directories, metric reports and
// per-video prediction files.
//
//   iterations.json      [{index, recognition_loss, transcripts_file, checkpoint_file}]
//   transcripts_<i>.json [{id, labels: [name...]}]
//   model_<i>.bin        checkpoint
//   best.json            {best_index}

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "isba/checkpoint.hpp"
#include "isba/driver.hpp"
#include "isba/error.hpp"
#include "isba/io.hpp"
#include "isba/metrics.hpp"
#include "isba/seq_data.hpp"

namespace isba {

namespace fs = std::filesystem;

inline std::string dump_json(const nlohmann::json& j) { return j.dump(2) + "\n"; }

inline nlohmann::json read_json(const fs::path& path) {
  try {
    return nlohmann::json::parse(detail::read_file(path));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::format, path.string() + ": invalid JSON: " + e.what());
  }
}

inline nlohmann::json transcripts_json(const Dataset& data, const std::vector<Transcript>& transcripts) {
  require(transcripts.size() == data.videos.size(), ErrorKind::shape_mismatch,
          "transcript count differs from video count");
  nlohmann::json out = nlohmann::json::array();
  for (std::size_t v = 0; v < transcripts.size(); ++v) {
    nlohmann::json labels = nlohmann::json::array();
    for (LabelId l : transcripts[v].labels) labels.push_back(data.vocab.name(l));
    out.push_back({{"id", data.videos[v].id}, {"labels", std::move(labels)}});
  }
  return out;
}

// Transcripts in file order, paired with their video ids.
inline std::vector<std::pair<std::string, Transcript>> load_transcripts_json(const fs::path& path,
                                                                             const LabelVocab& vocab) {
  const nlohmann::json doc = read_json(path);
  require(doc.is_array(), ErrorKind::format, path.string() + ": expected an array");
  std::vector<std::pair<std::string, Transcript>> out;
  for (const auto& node : doc) {
    require(node.is_object() && node.contains("id") && node["id"].is_string() && node.contains("labels") &&
                node["labels"].is_array(),
            ErrorKind::format, path.string() + ": entry needs string 'id' and array 'labels'");
    std::vector<std::string> names;
    for (const auto& l : node["labels"]) {
      require(l.is_string(), ErrorKind::format, path.string() + ": labels must be strings");
      names.push_back(l.get<std::string>());
    }
    std::vector<LabelId> ids;
    for (std::size_t i = 0; i < names.size(); ++i) {
      auto id = vocab.find(names[i]);
      if (!id) fail(ErrorKind::unknown_label, path.string() + ": unknown label '" + names[i] + "'");
      ids.push_back(*id);
    }
    require(!ids.empty(), ErrorKind::format, path.string() + ": empty transcript");
    out.emplace_back(node["id"].get<std::string>(), Transcript(std::move(ids)));
  }
  return out;
}

template <class S>
void write_run_directory(const fs::path& dir, const Dataset& data, const RunResult<TrainedModel<S>>& run) {
  fs::create_directories(dir);
  nlohmann::json iterations = nlohmann::json::array();
  for (const auto& rec : run.records) {
    const std::string index = std::to_string(rec.index);
    const std::string transcripts_file = "transcripts_" + index + ".json";
    const std::string checkpoint_file = "model_" + index + ".bin";
    detail::write_file(dir / transcripts_file, dump_json(transcripts_json(data, rec.transcripts)));
    save_checkpoint(dir / checkpoint_file, *rec.checkpoint);
    iterations.push_back({{"index", rec.index},
                          {"recognition_loss", rec.recognition_loss},
                          {"transcripts_file", transcripts_file},
                          {"checkpoint_file", checkpoint_file}});
  }
  detail::write_file(dir / "iterations.json", dump_json(iterations));
  detail::write_file(dir / "best.json", dump_json({{"best_index", run.best_index}}));
}

// Accepts a checkpoint file or a run directory (then its best checkpoint).
inline fs::path resolve_checkpoint(const fs::path& path) {
  if (!fs::is_directory(path)) return path;
  const nlohmann::json best = read_json(path / "best.json");
  require(best.contains("best_index") && best["best_index"].is_number_unsigned(), ErrorKind::format,
          (path / "best.json").string() + ": missing 'best_index'");
  return path / ("model_" + std::to_string(best["best_index"].get<std::size_t>()) + ".bin");
}

inline void write_metrics(const fs::path& path, const MetricReport& report) {
  detail::write_file(path, dump_json(to_json(report)));
}

inline void write_predictions(const fs::path& dir, const Dataset& data, const std::vector<LabelSequence>& preds) {
  require(preds.size() == data.videos.size(), ErrorKind::shape_mismatch,
          "prediction count differs from video count");
  fs::create_directories(dir);
  for (std::size_t v = 0; v < preds.size(); ++v) {
    write_labels(dir / (data.videos[v].id + ".txt"), preds[v].labels, data.vocab);
  }
}

inline std::vector<LabelSequence> load_predictions(const fs::path& dir, const Dataset& data) {
  std::vector<LabelSequence> preds;
  for (const auto& v : data.videos) preds.push_back(load_label_sequence(dir / (v.id + ".txt"), data.vocab));
  return preds;
}

inline std::vector<LabelSequence> ground_truths(const Dataset& data) {
  std::vector<LabelSequence> gts;
  for (const auto& v : data.videos) {
    require(v.ground_truth.has_value(), ErrorKind::invalid_argument,
            "video '" + v.id + "' has no ground truth to evaluate against");
    gts.push_back(*v.ground_truth);
  }
  return gts;
}

inline MetricReport evaluate(const Dataset& data, const std::vector<LabelSequence>& preds) {
  return evaluate(preds, ground_truths(data), data.vocab.background());
}

}  // namespace isba
