#pragma once

// Frame accuracy (with and without background), segment-level Jaccard
// measures (IoU, IoD), and the video-level recognition loss used to pick the
// best refinement iteration.

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "isba/error.hpp"
#include "isba/seq_data.hpp"
#include "isba/soft_target.hpp"

namespace isba {

namespace detail {
inline void check_pair(const LabelSequence& pred, const LabelSequence& gt) {
  require(pred.size() == gt.size(), ErrorKind::shape_mismatch,
          "prediction has " + std::to_string(pred.size()) + " frames, ground truth " +
              std::to_string(gt.size()));
}
}  // namespace detail

inline double frame_accuracy(const LabelSequence& pred, const LabelSequence& gt) {
  detail::check_pair(pred, gt);
  require(!gt.labels.empty(), ErrorKind::empty_input, "cannot score an empty sequence");
  std::size_t hits = 0;
  for (std::size_t t = 0; t < gt.size(); ++t) hits += pred[t] == gt[t];
  return static_cast<double>(hits) / static_cast<double>(gt.size());
}

// Accuracy over frames whose ground truth is not background; absent when there are none.
inline std::optional<double> frame_accuracy_no_bg(const LabelSequence& pred, const LabelSequence& gt,
                                                  LabelId background) {
  detail::check_pair(pred, gt);
  std::size_t hits = 0, total = 0;
  for (std::size_t t = 0; t < gt.size(); ++t) {
    if (gt[t] == background) continue;
    ++total;
    hits += pred[t] == gt[t];
  }
  if (total == 0) return std::nullopt;
  return static_cast<double>(hits) / static_cast<double>(total);
}

struct JaccardScore {
  double iou = 0.0;
  double iod = 0.0;
};

// For each maximal ground-truth segment of class c (c != background), the
// detection is every frame predicted as c anywhere in the video. Scores are
// unweighted means over segments; absent when no non-background segment exists.
inline std::optional<JaccardScore> jaccard(const LabelSequence& pred, const LabelSequence& gt,
                                           std::optional<LabelId> background) {
  detail::check_pair(pred, gt);
  if (gt.labels.empty()) return std::nullopt;
  LabelId top = 0;
  for (LabelId l : gt.labels) top = std::max(top, l);
  for (LabelId l : pred.labels) top = std::max(top, l);
  std::vector<std::size_t> predicted(static_cast<std::size_t>(top) + 1, 0);
  for (LabelId l : pred.labels) ++predicted[l];

  double iou_sum = 0.0, iod_sum = 0.0;
  std::size_t segments = 0;
  std::size_t start = 0;
  while (start < gt.size()) {
    std::size_t end = start;
    while (end < gt.size() && gt[end] == gt[start]) ++end;
    const LabelId c = gt[start];
    if (!background || c != *background) {
      std::size_t inter = 0;
      for (std::size_t t = start; t < end; ++t) inter += pred[t] == c;
      const std::size_t detected = predicted[c];
      const std::size_t uni = detected + (end - start) - inter;
      iou_sum += static_cast<double>(inter) / static_cast<double>(uni);
      iod_sum += detected == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(detected);
      ++segments;
    }
    start = end;
  }
  if (segments == 0) return std::nullopt;
  return JaccardScore{iou_sum / static_cast<double>(segments), iod_sum / static_cast<double>(segments)};
}

inline constexpr double kRecognitionClamp = 1e-7;

// Binary cross-entropy between max-pooled class probabilities and class
// occurrence, averaged over classes. Lower is better.
inline double video_recognition_loss(const SoftLabelSequence& probs, std::span<const std::uint8_t> occurrence) {
  require(probs.classes() == occurrence.size(), ErrorKind::shape_mismatch,
          "occurrence vector length differs from the class count");
  require(probs.frames() >= 1, ErrorKind::empty_input, "no frames to pool");
  const std::size_t k = probs.classes();
  double total = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    double peak = 0.0;
    for (std::size_t t = 0; t < probs.frames(); ++t) peak = std::max(peak, probs.at(t, c));
    peak = std::clamp(peak, kRecognitionClamp, 1.0 - kRecognitionClamp);
    total -= occurrence[c] ? std::log(peak) : std::log(1.0 - peak);
  }
  return total / static_cast<double>(k);
}

struct VideoMetrics {
  double acc = 0.0;
  std::optional<double> acc_no_bg;
  std::optional<double> iou;
  std::optional<double> iod;
};

struct MetricReport {
  double acc = 0.0;
  std::optional<double> acc_no_bg;
  std::optional<double> iou;
  std::optional<double> iod;
  std::vector<VideoMetrics> per_video;
};

inline VideoMetrics score_video(const LabelSequence& pred, const LabelSequence& gt,
                                std::optional<LabelId> background) {
  VideoMetrics m;
  m.acc = frame_accuracy(pred, gt);
  if (background) m.acc_no_bg = frame_accuracy_no_bg(pred, gt, *background);
  if (auto j = jaccard(pred, gt, background)) {
    m.iou = j->iou;
    m.iod = j->iod;
  }
  return m;
}

// Unweighted mean over videos of each metric, skipping videos where it is absent.
inline MetricReport evaluate(const std::vector<LabelSequence>& preds, const std::vector<LabelSequence>& gts,
                             std::optional<LabelId> background) {
  require(preds.size() == gts.size(), ErrorKind::shape_mismatch, "prediction and ground-truth counts differ");
  require(!gts.empty(), ErrorKind::empty_input, "no videos to evaluate");
  MetricReport report;
  double acc = 0.0;
  double sums[3] = {0, 0, 0};
  std::size_t counts[3] = {0, 0, 0};
  for (std::size_t v = 0; v < gts.size(); ++v) {
    VideoMetrics m = score_video(preds[v], gts[v], background);
    acc += m.acc;
    const std::optional<double>* fields[3] = {&m.acc_no_bg, &m.iou, &m.iod};
    for (int f = 0; f < 3; ++f) {
      if (*fields[f]) {
        sums[f] += **fields[f];
        ++counts[f];
      }
    }
    report.per_video.push_back(m);
  }
  report.acc = acc / static_cast<double>(gts.size());
  std::optional<double>* out[3] = {&report.acc_no_bg, &report.iou, &report.iod};
  for (int f = 0; f < 3; ++f) {
    if (counts[f]) *out[f] = sums[f] / static_cast<double>(counts[f]);
  }
  return report;
}

namespace detail {
inline nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}
}  // namespace detail

inline nlohmann::json to_json(const VideoMetrics& m) {
  return {{"acc", m.acc},
          {"acc_no_bg", detail::optional_json(m.acc_no_bg)},
          {"iou", detail::optional_json(m.iou)},
          {"iod", detail::optional_json(m.iod)}};
}

inline nlohmann::json to_json(const MetricReport& r) {
  nlohmann::json per_video = nlohmann::json::array();
  for (const auto& m : r.per_video) per_video.push_back(to_json(m));
  return {{"acc", r.acc},
          {"acc_no_bg", detail::optional_json(r.acc_no_bg)},
          {"iou", detail::optional_json(r.iou)},
          {"iod", detail::optional_json(r.iod)},
          {"per_video", std::move(per_video)}};
}

}  // namespace isba
