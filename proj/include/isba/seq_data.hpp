#pragma once

// Core sequence and label types shared by every other module.

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "isba/error.hpp"

namespace isba {

using LabelId = std::uint32_t;

class LabelVocab {
 public:
  LabelVocab() = default;

  explicit LabelVocab(std::vector<std::string> names,
                      std::optional<LabelId> background = std::nullopt)
      : names_(std::move(names)), background_(background) {
    require(!names_.empty(), ErrorKind::empty_input, "label vocabulary is empty");
    for (std::size_t i = 0; i < names_.size(); ++i) {
      require(!names_[i].empty(), ErrorKind::format,
              "empty label name at index " + std::to_string(i));
      auto [it, inserted] = index_.emplace(names_[i], static_cast<LabelId>(i));
      require(inserted, ErrorKind::format, "duplicate label name '" + names_[i] + "'");
    }
    if (background_) {
      require(*background_ < names_.size(), ErrorKind::invalid_argument,
              "background index out of range");
    }
  }

  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  const std::string& name(LabelId id) const { return names_.at(id); }
  std::optional<LabelId> background() const { return background_; }

  std::optional<LabelId> find(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  friend bool operator==(const LabelVocab& a, const LabelVocab& b) {
    return a.names_ == b.names_ && a.background_ == b.background_;
  }

 private:
  std::vector<std::string> names_;
  std::optional<LabelId> background_;
  std::unordered_map<std::string, LabelId> index_;
};

// Per-frame feature matrix, frame-major.
class FeatureSequence {
 public:
  FeatureSequence() = default;

  FeatureSequence(std::size_t frames, std::size_t dim, std::vector<float> values)
      : frames_(frames), dim_(dim), values_(std::move(values)) {
    require(frames_ >= 1 && dim_ >= 1, ErrorKind::invalid_argument,
            "feature sequence needs n >= 1 and d >= 1");
    require(values_.size() == frames_ * dim_, ErrorKind::shape_mismatch,
            "feature payload size does not match n*d");
    for (float v : values_) {
      require(std::isfinite(v), ErrorKind::non_finite, "non-finite feature value");
    }
  }

  std::size_t frames() const { return frames_; }
  std::size_t dim() const { return dim_; }
  std::span<const float> values() const& { return values_; }
  std::span<const float> values() const&& = delete;
  std::span<const float> row(std::size_t t) const {
    return std::span<const float>(values_).subspan(t * dim_, dim_);
  }
  float at(std::size_t t, std::size_t j) const { return values_[t * dim_ + j]; }

  friend bool operator==(const FeatureSequence&, const FeatureSequence&) = default;

 private:
  std::size_t frames_ = 0;
  std::size_t dim_ = 0;
  std::vector<float> values_;
};

// Ordered action labels without temporal extents. Never empty.
struct Transcript {
  std::vector<LabelId> labels;

  Transcript() = default;
  explicit Transcript(std::vector<LabelId> l) : labels(std::move(l)) {
    require(!labels.empty(), ErrorKind::empty_input, "transcript is empty");
  }

  std::size_t size() const { return labels.size(); }
  LabelId operator[](std::size_t i) const { return labels[i]; }

  friend bool operator==(const Transcript&, const Transcript&) = default;
};

// Hard per-frame labels.
struct LabelSequence {
  std::vector<LabelId> labels;

  LabelSequence() = default;
  explicit LabelSequence(std::vector<LabelId> l) : labels(std::move(l)) {}

  std::size_t size() const { return labels.size(); }
  LabelId operator[](std::size_t i) const { return labels[i]; }

  friend bool operator==(const LabelSequence&, const LabelSequence&) = default;
};

inline void check_labels(std::span<const LabelId> labels, std::size_t num_classes) {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    require(labels[i] < num_classes, ErrorKind::invalid_argument,
            "label index " + std::to_string(labels[i]) + " at position " + std::to_string(i) +
                " is not below k=" + std::to_string(num_classes));
  }
}

// Merge consecutive duplicates, keeping order.
inline Transcript collapse(std::span<const LabelId> labels) {
  require(!labels.empty(), ErrorKind::empty_input, "cannot collapse an empty sequence");
  std::vector<LabelId> out;
  out.push_back(labels.front());
  for (LabelId l : labels.subspan(1)) {
    if (l != out.back()) out.push_back(l);
  }
  return Transcript(std::move(out));
}

inline Transcript collapse(const Transcript& t) { return collapse(std::span<const LabelId>(t.labels)); }
inline Transcript collapse(const LabelSequence& s) { return collapse(std::span<const LabelId>(s.labels)); }

struct VideoRecord {
  std::string id;
  FeatureSequence features;
  Transcript transcript;
  std::optional<LabelSequence> ground_truth;
};

struct Dataset {
  LabelVocab vocab;
  std::vector<VideoRecord> videos;

  std::size_t num_classes() const { return vocab.size(); }

  // Throws if any video breaks the weak-supervision contract.
  void validate() const {
    const std::size_t k = vocab.size();
    std::optional<std::size_t> dim;
    for (const auto& v : videos) {
      check_labels(v.transcript.labels, k);
      if (dim) {
        require(v.features.dim() == *dim, ErrorKind::shape_mismatch,
                "video '" + v.id + "' has feature dimension " + std::to_string(v.features.dim()) +
                    ", expected " + std::to_string(*dim));
      }
      dim = v.features.dim();
      if (v.ground_truth) {
        require(v.ground_truth->size() == v.features.frames(), ErrorKind::shape_mismatch,
                "video '" + v.id + "': ground truth length differs from frame count");
        check_labels(v.ground_truth->labels, k);
        require(collapse(*v.ground_truth) == collapse(v.transcript), ErrorKind::invalid_argument,
                "video '" + v.id + "': transcript does not match collapsed ground truth");
      }
    }
  }
};

}  // namespace isba
