#pragma once

// Insertion-only transcript refinement and the two decoders built on it.

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "isba/error.hpp"
#include "isba/model.hpp"
#include "isba/random.hpp"
#include "isba/seq_data.hpp"
#include "isba/soft_target.hpp"

namespace isba {

struct RefinementConfig {
  double rho = 0.3;    // minimum probability margin at a boundary
  double theta = 0.1;  // chance of inserting the lower-probability label
  std::uint64_t seed = 0;
  std::size_t align_iters = 10;
  std::size_t patience = 3;
  std::size_t max_iters = 30;
  bool warm_start = false;

  void validate() const {
    require(rho > 0.0 && rho < 1.0, ErrorKind::config, "rho must lie in (0, 1)");
    require(theta >= 0.0 && theta <= 0.5, ErrorKind::config, "theta must lie in [0, 0.5]");
    require(patience >= 1, ErrorKind::config, "patience must be >= 1");
    require(max_iters >= 1, ErrorKind::config, "max_iters must be >= 1");
  }
};

struct Boundary {
  std::size_t position;  // 1-based: between entries position and position+1
  std::size_t frame;
};

// t = round(n*i/n') for every internal position, clamped to [0, n-1].
inline std::vector<Boundary> boundary_frames(const Transcript& transcript, std::size_t frames) {
  check_expandable(transcript, frames);
  std::vector<Boundary> out;
  const std::size_t entries = transcript.size();
  for (std::size_t i = 1; i < entries; ++i) {
    out.push_back({i, std::min(rounded_ratio(frames, i, entries), frames - 1)});
  }
  return out;
}

// One left-to-right pass over the boundaries of the input transcript. Where
// the two adjacent labels differ and their probabilities at the boundary
// frame differ by more than rho, the more likely label (or, with probability
// theta, the other one) is inserted between them. Insertions are staged and
// applied after the pass. The result never grows beyond n entries.
inline Transcript refine_transcript(const Transcript& transcript, const SoftLabelSequence& probs,
                                    const RefinementConfig& cfg, Rng& rng) {
  const std::size_t frames = probs.frames();
  const auto boundaries = boundary_frames(transcript, frames);
  for (std::size_t i = 0; i < transcript.size(); ++i) {
    require(transcript[i] < probs.classes(), ErrorKind::invalid_argument,
            "probability rows do not cover transcript label " + std::to_string(transcript[i]));
  }

  std::vector<std::pair<std::size_t, LabelId>> inserts;  // (position, label)
  for (const auto& b : boundaries) {
    const LabelId left = transcript[b.position - 1];
    const LabelId right = transcript[b.position];
    if (left == right) continue;
    const double p_left = probs.at(b.frame, left);
    const double p_right = probs.at(b.frame, right);
    if (!(std::abs(p_left - p_right) > cfg.rho)) continue;
    const LabelId likely = p_left > p_right ? left : right;
    const LabelId other = likely == left ? right : left;
    inserts.emplace_back(b.position, rng.bernoulli(cfg.theta) ? other : likely);
  }

  const std::size_t room = frames - std::min(frames, transcript.size());
  if (inserts.size() > room) inserts.resize(room);

  std::vector<LabelId> out;
  out.reserve(transcript.size() + inserts.size());
  std::size_t next = 0;
  for (std::size_t i = 0; i < transcript.size(); ++i) {
    out.push_back(transcript[i]);
    if (next < inserts.size() && inserts[next].first == i + 1) out.push_back(inserts[next++].second);
  }
  return Transcript(std::move(out));
}

inline std::vector<std::uint8_t> occurrence(const Transcript& transcript, std::size_t classes) {
  check_labels(transcript.labels, classes);
  std::vector<std::uint8_t> y(classes, 0);
  for (LabelId l : transcript.labels) y[l] = 1;
  return y;
}

// Per-frame argmax; ties go to the lowest class index.
inline LabelSequence argmax_labels(const SoftLabelSequence& probs) {
  std::vector<LabelId> out(probs.frames());
  for (std::size_t t = 0; t < probs.frames(); ++t) {
    auto row = probs.row(t);
    std::size_t best = 0;
    for (std::size_t c = 1; c < row.size(); ++c) {
      if (row[c] > row[best]) best = c;
    }
    out[t] = static_cast<LabelId>(best);
  }
  return LabelSequence(std::move(out));
}

template <class S>
LabelSequence segment(const TrainedModel<S>& model, const FeatureSequence& features) {
  return argmax_labels(forward(model, features));
}

// Refinement stream for one video at one iteration.
inline Rng refinement_rng(std::uint64_t seed, const std::string& video_id, std::uint64_t iteration) {
  return Rng(derive_seed(derive_seed(seed, video_id), iteration));
}

// Transcript after `cfg.align_iters` rounds of inference + refinement.
template <class S>
Transcript align_transcript(const TrainedModel<S>& model, const FeatureSequence& features,
                            Transcript transcript, const RefinementConfig& cfg,
                            const std::string& stream = "align") {
  check_expandable(transcript, features.frames());
  for (std::size_t it = 0; it < cfg.align_iters; ++it) {
    const SoftLabelSequence probs = forward(model, features);
    Rng rng = refinement_rng(cfg.seed, stream, it);
    transcript = refine_transcript(transcript, probs, cfg, rng);
  }
  return transcript;
}

template <class S>
LabelSequence align(const TrainedModel<S>& model, const FeatureSequence& features, const Transcript& transcript,
                    const RefinementConfig& cfg, const std::string& stream = "align") {
  return uniform_expand(align_transcript(model, features, transcript, cfg, stream), features.frames());
}

}  // namespace isba
