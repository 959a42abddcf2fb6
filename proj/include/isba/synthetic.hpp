#pragma once

// Desk-scale synthetic datasets: random ordered segment layouts with
// class-conditional Gaussian frame features.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <string>
#include <vector>

#include "isba/error.hpp"
#include "isba/random.hpp"
#include "isba/seq_data.hpp"

namespace isba {

struct SyntheticSpec {
  std::size_t num_videos = 10;
  std::size_t num_classes = 3;  // k, including the background label when enabled
  bool background = false;
  std::size_t min_frames = 80;
  std::size_t max_frames = 120;
  std::size_t dim = 8;
  double mean_separation = 4.0;  // pairwise distance between class means
  std::size_t min_segments = 3;
  std::size_t max_segments = 6;
  std::size_t min_duration = 5;
};

inline constexpr std::size_t kMinSegmentDuration = 5;

inline void validate(const SyntheticSpec& spec) {
  require(spec.num_classes >= 2, ErrorKind::infeasible, "synthetic spec needs k >= 2");
  require(spec.dim >= 1, ErrorKind::infeasible, "synthetic spec needs d >= 1");
  require(spec.dim >= spec.num_classes, ErrorKind::infeasible,
          "synthetic spec needs d >= k to place equidistant class means");
  require(spec.min_frames >= 1 && spec.min_frames <= spec.max_frames, ErrorKind::infeasible,
          "synthetic spec has an empty frame-count range");
  require(spec.min_segments >= 1 && spec.min_segments <= spec.max_segments, ErrorKind::infeasible,
          "synthetic spec has an empty segment-count range");
  require(spec.min_duration >= kMinSegmentDuration, ErrorKind::infeasible,
          "segment durations below 5 frames are not allowed");
  require(spec.min_frames >= spec.max_segments * spec.min_duration, ErrorKind::infeasible,
          "min_frames=" + std::to_string(spec.min_frames) + " cannot hold " +
              std::to_string(spec.max_segments) + " segments of >= " +
              std::to_string(spec.min_duration) + " frames");
  require(spec.mean_separation >= 0.0 && std::isfinite(spec.mean_separation), ErrorKind::infeasible,
          "mean separation must be finite and non-negative");
  const std::size_t actions = spec.background ? spec.num_classes - 1 : spec.num_classes;
  // Interior segments must alternate between distinct actions.
  require(actions >= 2 || spec.max_segments <= (spec.background ? 3u : 1u), ErrorKind::infeasible,
          "not enough action classes to lay out segments without immediate repeats");
}

inline std::vector<std::string> synthetic_label_names(std::size_t num_classes, bool background) {
  std::vector<std::string> names;
  std::size_t action = 1;
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (background && c == 0) {
      names.emplace_back("SIL");
    } else {
      char buf[32];
      std::snprintf(buf, sizeof buf, "action_%zu", action++);
      names.emplace_back(buf);
    }
  }
  return names;
}

// Class means sit on scaled, randomly permuted coordinate axes, so every pair
// is exactly `mean_separation` apart.
inline std::vector<std::vector<double>> synthetic_class_means(const SyntheticSpec& spec, Rng& rng) {
  std::vector<std::size_t> axes(spec.dim);
  std::iota(axes.begin(), axes.end(), std::size_t{0});
  rng.shuffle(axes);
  const double scale = spec.mean_separation / std::sqrt(2.0);
  std::vector<std::vector<double>> means(spec.num_classes, std::vector<double>(spec.dim, 0.0));
  for (std::size_t c = 0; c < spec.num_classes; ++c) means[c][axes[c]] = scale;
  return means;
}

inline Dataset generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
  validate(spec);
  Rng rng(derive_seed(seed, "synthetic"));
  const auto means = synthetic_class_means(spec, rng);

  Dataset data;
  const std::optional<LabelId> bg = spec.background ? std::optional<LabelId>(0) : std::nullopt;
  data.vocab = LabelVocab(synthetic_label_names(spec.num_classes, spec.background), bg);

  std::vector<LabelId> actions;
  for (LabelId c = 0; c < spec.num_classes; ++c) {
    if (!bg || c != *bg) actions.push_back(c);
  }

  for (std::size_t v = 0; v < spec.num_videos; ++v) {
    const auto segments = static_cast<std::size_t>(
        rng.uniform_int(static_cast<std::int64_t>(spec.min_segments),
                        static_cast<std::int64_t>(spec.max_segments)));
    const auto frames = static_cast<std::size_t>(
        rng.uniform_int(static_cast<std::int64_t>(spec.min_frames),
                        static_cast<std::int64_t>(spec.max_frames)));

    // Layout: background brackets the video when enabled; inside, no immediate repeats.
    std::vector<LabelId> layout(segments);
    for (std::size_t s = 0; s < segments; ++s) {
      const bool edge = s == 0 || s + 1 == segments;
      if (bg && edge && segments >= 3) {
        layout[s] = *bg;
        continue;
      }
      std::vector<LabelId> allowed;
      for (LabelId c : actions) {
        if (s > 0 && layout[s - 1] == c) continue;
        allowed.push_back(c);
      }
      layout[s] = allowed[rng.below(allowed.size())];
    }

    // Durations: a uniformly random composition of `frames` with every part >= min_duration.
    const std::size_t slack = frames - segments * spec.min_duration;
    std::vector<std::size_t> cuts(segments - 1);
    for (auto& c : cuts) c = static_cast<std::size_t>(rng.below(slack + 1));
    std::sort(cuts.begin(), cuts.end());
    std::vector<LabelId> gt;
    gt.reserve(frames);
    std::size_t prev = 0;
    for (std::size_t s = 0; s < segments; ++s) {
      const std::size_t cut = s + 1 < segments ? cuts[s] : slack;
      const std::size_t length = spec.min_duration + (cut - prev);
      prev = cut;
      gt.insert(gt.end(), length, layout[s]);
    }

    std::vector<float> values(frames * spec.dim);
    for (std::size_t t = 0; t < frames; ++t) {
      const auto& mu = means[gt[t]];
      for (std::size_t j = 0; j < spec.dim; ++j) {
        values[t * spec.dim + j] = static_cast<float>(mu[j] + rng.normal());
      }
    }

    char id[32];
    std::snprintf(id, sizeof id, "vid_%04zu", v);
    VideoRecord rec;
    rec.id = id;
    rec.features = FeatureSequence(frames, spec.dim, std::move(values));
    LabelSequence ground_truth(std::move(gt));
    rec.transcript = collapse(ground_truth);
    rec.ground_truth = std::move(ground_truth);
    data.videos.push_back(std::move(rec));
  }
  return data;
}

}  // namespace isba
