#pragma once

// End-to-end commands behind the CLI: train (full or weak), segment, align
// and evaluate over whole datasets, writing their results to disk.

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "isba/checkpoint.hpp"
#include "isba/config.hpp"
#include "isba/driver.hpp"
#include "isba/io.hpp"
#include "isba/log.hpp"
#include "isba/metrics.hpp"
#include "isba/parallel.hpp"
#include "isba/refine.hpp"
#include "isba/run_dir.hpp"

namespace isba {

template <class S>
std::vector<LabelSequence> segment_all(const TrainedModel<S>& model, const Dataset& data, std::size_t jobs = 1) {
  std::vector<LabelSequence> out(data.videos.size());
  parallel_for(out.size(), jobs, [&](std::size_t v) { out[v] = segment(model, data.videos[v].features); });
  return out;
}

// Each video refines under its own random stream keyed by its id.
template <class S>
std::vector<LabelSequence> align_all(const TrainedModel<S>& model, const Dataset& data, const RefinementConfig& cfg,
                                     std::size_t jobs = 1) {
  std::vector<LabelSequence> out(data.videos.size());
  parallel_for(out.size(), jobs, [&](std::size_t v) {
    const auto& video = data.videos[v];
    out[v] = align(model, video.features, video.transcript, cfg, video.id);
  });
  return out;
}

inline void check_model_fits(const ModelConfig& mc, const Dataset& data, const std::string& source) {
  require(!data.videos.empty(), ErrorKind::empty_input, "dataset has no videos");
  require(mc.num_classes == data.num_classes(), ErrorKind::shape_mismatch,
          source + ": model has " + std::to_string(mc.num_classes) + " classes, dataset " +
              std::to_string(data.num_classes()));
  require(mc.input_dim == data.videos.front().features.dim(), ErrorKind::shape_mismatch,
          source + ": model expects " + std::to_string(mc.input_dim) + "-dimensional features, dataset has " +
              std::to_string(data.videos.front().features.dim()));
}

template <class S>
TrainedModel<S> load_model_for(const std::filesystem::path& path, const Dataset& data) {
  const auto file = resolve_checkpoint(path);
  auto model = load_checkpoint<S>(file);
  check_model_fits(model.config(), data, file.string());
  return model;
}

namespace detail {

inline DriverOptions driver_options(const RunConfig& c) { return {c.boundary, c.targets, c.jobs}; }

template <class S>
nlohmann::json train_impl(const RunConfig& c) {
  const std::filesystem::path out = c.out;
  const Dataset data = load_dataset(c.data);
  std::optional<Dataset> eval_data;
  if (!c.eval.empty()) eval_data = load_dataset(c.eval);
  std::filesystem::create_directories(out);
  detail::write_file(out / "config_resolved.json", dump_json(to_json(c)));

  nlohmann::json summary{{"mode", c.mode == RunMode::full ? "full" : "weak"}, {"out", out.string()}};
  const Dataset& scored = eval_data ? *eval_data : data;

  if (c.mode == RunMode::full) {
    log::info("supervised training on ", data.videos.size(), " videos");
    const auto model = full_train<S>(data, c.model, c.train);
    save_checkpoint(out / "model.bin", model);
    check_model_fits(model.config(), scored, c.eval.empty() ? c.data : c.eval);
    const MetricReport report = evaluate(scored, segment_all(model, scored, c.jobs));
    write_metrics(out / "metrics.json", report);
    summary["metrics"] = to_json(report);
    summary["metrics"].erase("per_video");
    return summary;
  }

  log::info("weak training on ", data.videos.size(), " videos");
  const auto run = weak_train<S>(data, c.model, c.train, c.refinement, driver_options(c));
  write_run_directory(out, data, run);
  summary["iterations"] = run.records.size();
  summary["best_index"] = run.best_index;
  if (eval_data) {
    const auto& model = *run.best_model;
    check_model_fits(model.config(), *eval_data, c.eval);
    const MetricReport seg = evaluate(*eval_data, segment_all(model, *eval_data, c.jobs));
    const MetricReport ali = evaluate(*eval_data, align_all(model, *eval_data, c.refinement, c.jobs));
    write_metrics(out / "metrics.json", seg);
    write_metrics(out / "alignment_metrics.json", ali);
    summary["metrics"] = to_json(seg);
    summary["metrics"].erase("per_video");
    summary["alignment_metrics"] = to_json(ali);
    summary["alignment_metrics"].erase("per_video");
  }
  return summary;
}

}  // namespace detail

// Runs `train` for a resolved configuration; returns a JSON summary.
inline nlohmann::json run_training(const RunConfig& c) {
  require(!c.data.empty(), ErrorKind::config, "no training data given (data)");
  require(!c.out.empty(), ErrorKind::config, "no output directory given (out)");
  return c.train.precision == Precision::f32 ? detail::train_impl<float>(c) : detail::train_impl<double>(c);
}

}  // namespace isba
