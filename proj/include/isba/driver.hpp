#pragma once

// The iterative weak-supervision loop: build targets from the current
// transcripts, train a model, infer on the training videos, score the
// video-level recognition loss, then refine every transcript and repeat until
// the loss stops improving.

#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "isba/error.hpp"
#include "isba/log.hpp"
#include "isba/metrics.hpp"
#include "isba/model.hpp"
#include "isba/parallel.hpp"
#include "isba/refine.hpp"
#include "isba/seq_data.hpp"
#include "isba/soft_target.hpp"
#include "isba/train.hpp"

namespace isba {

// Halts once the running minimum has gone `patience` consecutive records
// without a strict improvement, or after `max_iters` records.
class StopMonitor {
 public:
  StopMonitor(std::size_t patience, std::size_t max_iters) : patience_(patience), max_iters_(max_iters) {}

  // Returns true when the driver should stop after this record.
  bool observe(double loss) {
    if (count_ == 0 || loss < best_loss_) {
      best_loss_ = loss;
      best_index_ = count_;
      stale_ = 0;
    } else {
      ++stale_;
    }
    ++count_;
    return stale_ >= patience_ || count_ >= max_iters_;
  }

  std::size_t best_index() const { return best_index_; }
  std::size_t count() const { return count_; }

 private:
  std::size_t patience_;
  std::size_t max_iters_;
  std::size_t count_ = 0;
  std::size_t stale_ = 0;
  std::size_t best_index_ = 0;
  double best_loss_ = std::numeric_limits<double>::infinity();
};

enum class TargetKind { soft, hard };

inline std::string_view to_string(TargetKind k) { return k == TargetKind::soft ? "soft" : "hard"; }

inline TargetKind parse_target_kind(std::string_view text) {
  if (text == "soft") return TargetKind::soft;
  if (text == "hard") return TargetKind::hard;
  fail(ErrorKind::config, "unknown target kind '" + std::string(text) + "'");
}

inline SoftLabelSequence make_targets(const Transcript& transcript, std::size_t frames, std::size_t classes,
                                      TargetKind kind, const BoundarySpec& boundary) {
  return kind == TargetKind::soft ? soft_targets(transcript, frames, classes, boundary)
                                  : hard_targets(transcript, frames, classes);
}

struct DriverOptions {
  BoundarySpec boundary;
  TargetKind targets = TargetKind::soft;
  std::size_t jobs = 1;
};

template <class Model>
struct IterationRecord {
  std::size_t index = 0;
  std::vector<Transcript> transcripts;  // the transcripts this iteration trained on
  double recognition_loss = 0.0;
  std::shared_ptr<const Model> checkpoint;
};

template <class Model>
struct RunResult {
  std::vector<IterationRecord<Model>> records;
  std::size_t best_index = 0;
  std::shared_ptr<const Model> best_model;
  std::vector<Transcript> best_transcripts;
};

// What the driver needs from a model family. A backend may also provide
// `double recognition_loss(std::size_t iteration, double computed)` to
// replace the measured loss (used to drive the stop rule with known sequences).
template <class B>
concept IsbaBackend = requires(B& backend, const B& cbackend, const std::vector<TrainingExample>& examples,
                               std::size_t iteration, const typename B::Model* previous,
                               const typename B::Model& model, const FeatureSequence& features) {
  { backend.train(examples, iteration, previous) } -> std::same_as<typename B::Model>;
  { cbackend.infer(model, features) } -> std::same_as<SoftLabelSequence>;
};

template <IsbaBackend Backend>
RunResult<typename Backend::Model> run_isba(const Dataset& data, Backend& backend, const RefinementConfig& cfg,
                                            const DriverOptions& options = {}) {
  using Model = typename Backend::Model;
  cfg.validate();
  options.boundary.validate();
  require(!data.videos.empty(), ErrorKind::empty_input, "weak training needs at least one video");
  data.validate();
  const std::size_t k = data.num_classes();
  const std::size_t count = data.videos.size();

  std::vector<Transcript> transcripts;
  std::vector<std::vector<std::uint8_t>> occurrences;
  for (const auto& v : data.videos) {
    check_expandable(v.transcript, v.features.frames());
    transcripts.push_back(v.transcript);
    occurrences.push_back(occurrence(v.transcript, k));
  }

  RunResult<Model> result;
  StopMonitor monitor(cfg.patience, cfg.max_iters);
  std::shared_ptr<const Model> previous;

  for (std::size_t it = 0;; ++it) {
    std::vector<SoftLabelSequence> targets(count);
    parallel_for(count, options.jobs, [&](std::size_t v) {
      targets[v] = make_targets(transcripts[v], data.videos[v].features.frames(), k, options.targets,
                                options.boundary);
    });
    std::vector<TrainingExample> examples;
    for (std::size_t v = 0; v < count; ++v) examples.push_back({&data.videos[v].features, &targets[v]});

    auto model = std::make_shared<const Model>(
        backend.train(examples, it, cfg.warm_start && previous ? previous.get() : nullptr));

    std::vector<SoftLabelSequence> probs(count);
    std::vector<double> losses(count);
    parallel_for(count, options.jobs, [&](std::size_t v) {
      probs[v] = std::as_const(backend).infer(*model, data.videos[v].features);
      losses[v] = video_recognition_loss(probs[v], occurrences[v]);
    });
    double loss = 0.0;
    for (double l : losses) loss += l;
    loss /= static_cast<double>(count);
    if constexpr (requires { { backend.recognition_loss(it, loss) } -> std::convertible_to<double>; }) {
      loss = backend.recognition_loss(it, loss);
    }
    require(std::isfinite(loss) && loss >= 0.0, ErrorKind::numeric,
            "recognition loss at iteration " + std::to_string(it) + " is not a finite non-negative number");

    result.records.push_back({it, transcripts, loss, model});
    const bool stop = monitor.observe(loss);
    log::info("iteration ", it, ": recognition loss ", loss, stop ? " (stop)" : "");
    if (stop) break;

    parallel_for(count, options.jobs, [&](std::size_t v) {
      Rng rng = refinement_rng(cfg.seed, data.videos[v].id, it);
      transcripts[v] = refine_transcript(transcripts[v], probs[v], cfg, rng);
    });
    previous = model;
  }

  result.best_index = monitor.best_index();
  result.best_model = result.records[result.best_index].checkpoint;
  result.best_transcripts = result.records[result.best_index].transcripts;
  return result;
}

// Backend for the network classifiers: every iteration trains a fresh model
// seeded with tc.seed + iteration (or continues from the previous one).
template <class S>
class NetworkBackend {
 public:
  using Model = TrainedModel<S>;

  NetworkBackend(ModelConfig model, TrainConfig train) : model_(std::move(model)), train_(train) {}

  Model train(const std::vector<TrainingExample>& examples, std::size_t iteration, const Model* previous) {
    TrainConfig tc = train_;
    tc.seed = train_.seed + iteration;
    return isba::train<S>(model_, examples, tc, previous);
  }

  SoftLabelSequence infer(const Model& model, const FeatureSequence& features) const {
    return forward(model, features);
  }

 private:
  ModelConfig model_;
  TrainConfig train_;
};

inline ModelConfig fit_to_data(ModelConfig mc, const Dataset& data) {
  require(!data.videos.empty(), ErrorKind::empty_input, "dataset has no videos");
  mc.num_classes = data.num_classes();
  mc.input_dim = data.videos.front().features.dim();
  return mc;
}

template <class S>
RunResult<TrainedModel<S>> weak_train(const Dataset& data, const ModelConfig& mc, const TrainConfig& tc,
                                      const RefinementConfig& cfg, const DriverOptions& options = {}) {
  NetworkBackend<S> backend(fit_to_data(mc, data), tc);
  return run_isba(data, backend, cfg, options);
}

// Supervised training against one-hot ground truth.
template <class S>
TrainedModel<S> full_train(const Dataset& data, const ModelConfig& mc, const TrainConfig& tc) {
  const std::size_t k = data.num_classes();
  std::vector<SoftLabelSequence> targets;
  targets.reserve(data.videos.size());
  for (const auto& v : data.videos) {
    require(v.ground_truth.has_value(), ErrorKind::invalid_argument,
            "video '" + v.id + "' has no ground truth for supervised training");
    SoftLabelSequence y(v.features.frames(), k);
    for (std::size_t t = 0; t < y.frames(); ++t) y.at(t, (*v.ground_truth)[t]) = 1.0;
    targets.push_back(std::move(y));
  }
  std::vector<TrainingExample> examples;
  for (std::size_t i = 0; i < data.videos.size(); ++i) examples.push_back({&data.videos[i].features, &targets[i]});
  return train<S>(fit_to_data(mc, data), examples, tc);
}

}  // namespace isba
