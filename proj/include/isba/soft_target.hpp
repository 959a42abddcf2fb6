#pragma once

// Frame-level training targets built from a transcript: hard uniform
// expansion and the soft-boundary variant that ramps linearly between the two
// labels adjacent to every action change.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "isba/error.hpp"
#include "isba/seq_data.hpp"

namespace isba {

// Row-stochastic n x k matrix of per-frame class probabilities.
class SoftLabelSequence {
 public:
  SoftLabelSequence() = default;
  SoftLabelSequence(std::size_t frames, std::size_t classes)
      : frames_(frames), classes_(classes), probs_(frames * classes, 0.0) {}
  SoftLabelSequence(std::size_t frames, std::size_t classes, std::vector<double> probs)
      : frames_(frames), classes_(classes), probs_(std::move(probs)) {
    require(probs_.size() == frames_ * classes_, ErrorKind::shape_mismatch,
            "probability payload size does not match n*k");
  }

  std::size_t frames() const { return frames_; }
  std::size_t classes() const { return classes_; }

  double& at(std::size_t t, std::size_t c) { return probs_[t * classes_ + c]; }
  double at(std::size_t t, std::size_t c) const { return probs_[t * classes_ + c]; }

  std::span<const double> row(std::size_t t) const {
    return std::span<const double>(probs_).subspan(t * classes_, classes_);
  }
  std::span<double> row(std::size_t t) {
    return std::span<double>(probs_).subspan(t * classes_, classes_);
  }
  std::span<const double> values() const& { return probs_; }
  std::span<const double> values() const&& = delete;

  friend bool operator==(const SoftLabelSequence&, const SoftLabelSequence&) = default;

 private:
  std::size_t frames_ = 0;
  std::size_t classes_ = 0;
  std::vector<double> probs_;
};

inline bool is_row_stochastic(const SoftLabelSequence& p, double tol = 1e-6) {
  for (std::size_t t = 0; t < p.frames(); ++t) {
    double sum = 0.0;
    for (double v : p.row(t)) {
      if (!(v >= 0.0 && v <= 1.0)) return false;
      sum += v;
    }
    if (std::abs(sum - 1.0) > tol) return false;
  }
  return true;
}

// Half-width factor of the soft window, as a fraction of the uniform segment length n/n'.
struct BoundarySpec {
  double beta = 0.5;

  void validate() const {
    require(beta >= 0.0 && beta <= 1.0, ErrorKind::config, "beta must lie in [0, 1]");
  }
};

// round(n*i/m) for non-negative integers, halves rounded up.
inline std::size_t rounded_ratio(std::size_t n, std::size_t i, std::size_t m) {
  return (2 * n * i + m) / (2 * m);
}

inline void check_expandable(const Transcript& transcript, std::size_t frames) {
  require(!transcript.labels.empty(), ErrorKind::empty_input, "transcript is empty");
  require(frames >= transcript.size(), ErrorKind::invalid_argument,
          "cannot expand a transcript of length " + std::to_string(transcript.size()) + " onto " +
              std::to_string(frames) + " frames");
}

// First frame of each transcript entry, plus n as a sentinel.
inline std::vector<std::size_t> segment_starts(std::size_t entries, std::size_t frames) {
  std::vector<std::size_t> starts(entries + 1);
  for (std::size_t i = 0; i <= entries; ++i) starts[i] = rounded_ratio(frames, i, entries);
  return starts;
}

inline LabelSequence uniform_expand(const Transcript& transcript, std::size_t frames) {
  check_expandable(transcript, frames);
  const auto starts = segment_starts(transcript.size(), frames);
  std::vector<LabelId> out;
  out.reserve(frames);
  for (std::size_t i = 0; i < transcript.size(); ++i) {
    out.insert(out.end(), starts[i + 1] - starts[i], transcript[i]);
  }
  return LabelSequence(std::move(out));
}

inline std::size_t required_classes(const Transcript& transcript) {
  return static_cast<std::size_t>(*std::max_element(transcript.labels.begin(), transcript.labels.end())) + 1;
}

inline SoftLabelSequence hard_targets(const Transcript& transcript, std::size_t frames,
                                      std::size_t classes) {
  const LabelSequence hard = uniform_expand(transcript, frames);
  require(classes >= required_classes(transcript), ErrorKind::invalid_argument,
          "class count does not cover the transcript labels");
  SoftLabelSequence out(frames, classes);
  for (std::size_t t = 0; t < frames; ++t) out.at(t, hard[t]) = 1.0;
  return out;
}

inline SoftLabelSequence soft_targets(const Transcript& transcript, std::size_t frames,
                                      std::size_t classes, const BoundarySpec& spec) {
  spec.validate();
  SoftLabelSequence out = hard_targets(transcript, frames, classes);
  const std::size_t entries = transcript.size();
  const auto starts = segment_starts(entries, frames);
  const double segment = static_cast<double>(frames) / static_cast<double>(entries);
  const auto nominal = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(spec.beta * segment)));

  for (std::size_t i = 1; i < entries; ++i) {
    const LabelId left = transcript[i - 1];
    const LabelId right = transcript[i];
    if (left == right) continue;
    const std::size_t b = starts[i];
    const std::size_t shorter = std::min(starts[i] - starts[i - 1], starts[i + 1] - starts[i]);
    const std::size_t w = std::min(nominal, shorter / 2);
    if (w == 0) continue;
    for (std::size_t t = b - w; t < b + w; ++t) {
      const double alpha = (static_cast<double>(t - (b - w)) + 0.5) / static_cast<double>(2 * w);
      auto row = out.row(t);
      std::fill(row.begin(), row.end(), 0.0);
      row[right] = alpha;
      row[left] = 1.0 - alpha;
    }
  }
  return out;
}

}  // namespace isba
