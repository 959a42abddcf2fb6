#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include "isba/error.hpp"
#include "isba/model.hpp"
#include "isba/random.hpp"
#include "isba/seq_data.hpp"
#include "isba/soft_target.hpp"

namespace isba {

enum class OptimizerKind { sgd, adam };
enum class Precision { f32, f64 };

inline std::string_view to_string(OptimizerKind k) { return k == OptimizerKind::sgd ? "sgd" : "adam"; }
inline std::string_view to_string(Precision p) { return p == Precision::f32 ? "32" : "64"; }

inline OptimizerKind parse_optimizer(std::string_view text) {
  if (text == "sgd") return OptimizerKind::sgd;
  if (text == "adam") return OptimizerKind::adam;
  fail(ErrorKind::config, "unknown optimizer '" + std::string(text) + "'");
}

inline Precision parse_precision(std::string_view text) {
  if (text == "32" || text == "f32" || text == "float") return Precision::f32;
  if (text == "64" || text == "f64" || text == "double") return Precision::f64;
  fail(ErrorKind::config, "unknown precision '" + std::string(text) + "'");
}

struct TrainConfig {
  std::size_t epochs = 30;
  double learning_rate = 1e-3;
  OptimizerKind optimizer = OptimizerKind::adam;
  std::uint64_t seed = 0;
  Precision precision = Precision::f64;

  void validate() const {
    require(epochs >= 1, ErrorKind::config, "epochs must be >= 1");
    require(learning_rate > 0.0 && std::isfinite(learning_rate), ErrorKind::config,
            "learning_rate must be positive");
  }
};

struct TrainingExample {
  const FeatureSequence* features;
  const SoftLabelSequence* target;
};

namespace nn {

template <class S>
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double lr) : kind_(kind), lr_(lr) {}

  void step(const std::vector<Param<S>*>& params) {
    if (moments_.empty()) {
      for (auto* p : params) {
        moments_.emplace_back(p->size(), S{0});
        second_.emplace_back(p->size(), S{0});
      }
    }
    ++steps_;
    const S lr = static_cast<S>(lr_);
    if (kind_ == OptimizerKind::sgd) {
      for (auto* p : params) {
        if (!p->trainable) continue;
        for (std::size_t i = 0; i < p->size(); ++i) p->value[i] -= lr * p->grad[i];
      }
      return;
    }
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    const S c1 = static_cast<S>(1.0 / (1.0 - std::pow(b1, static_cast<double>(steps_))));
    const S c2 = static_cast<S>(1.0 / (1.0 - std::pow(b2, static_cast<double>(steps_))));
    for (std::size_t k = 0; k < params.size(); ++k) {
      auto* p = params[k];
      if (!p->trainable) continue;
      auto& m = moments_[k];
      auto& v = second_[k];
      for (std::size_t i = 0; i < p->size(); ++i) {
        const S g = p->grad[i];
        m[i] = static_cast<S>(b1) * m[i] + static_cast<S>(1 - b1) * g;
        v[i] = static_cast<S>(b2) * v[i] + static_cast<S>(1 - b2) * g * g;
        p->value[i] -= lr * (m[i] * c1) / (std::sqrt(v[i] * c2) + static_cast<S>(eps));
      }
    }
  }

 private:
  OptimizerKind kind_;
  double lr_;
  std::uint64_t steps_ = 0;
  std::vector<std::vector<S>> moments_;
  std::vector<std::vector<S>> second_;
};

}  // namespace nn

// Minimizes mean per-frame cross-entropy against soft targets, one video per
// step, videos shuffled every epoch. `warm_start` replaces the random
// initialization when given.
template <class S>
TrainedModel<S> train(const ModelConfig& config, const std::vector<TrainingExample>& data,
                      const TrainConfig& tc, const TrainedModel<S>* warm_start = nullptr) {
  config.validate();
  tc.validate();
  require(!data.empty(), ErrorKind::empty_input, "no training examples");
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& ex = data[i];
    require(ex.features->dim() == config.input_dim, ErrorKind::shape_mismatch,
            "example " + std::to_string(i) + ": feature dimension does not match the model");
    require(ex.target->classes() == config.num_classes, ErrorKind::shape_mismatch,
            "example " + std::to_string(i) + ": target class count does not match the model");
    require(ex.target->frames() == ex.features->frames(), ErrorKind::shape_mismatch,
            "example " + std::to_string(i) + ": target length differs from the frame count");
  }

  TrainedModel<S> model;
  if (warm_start) {
    require(warm_start->config() == config, ErrorKind::config, "warm start model has a different config");
    model.network = warm_start->network;
  } else {
    model.network = nn::Network<S>(config);
    model.network.initialize(tc.seed);
  }

  std::vector<nn::Matrix<S>> inputs, targets;
  for (const auto& ex : data) {
    inputs.push_back(nn::to_matrix<S>(*ex.features));
    targets.push_back(nn::to_matrix<S>(*ex.target));
  }

  Rng rng(derive_seed(tc.seed, "shuffle"));
  nn::Optimizer<S> optimizer(tc.optimizer, tc.learning_rate);
  auto params = model.network.parameters();
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  typename nn::Network<S>::Tape tape;

  for (std::size_t epoch = 0; epoch < tc.epochs; ++epoch) {
    rng.shuffle(order);
    double total = 0.0;
    for (std::size_t step = 0; step < order.size(); ++step) {
      const std::size_t idx = order[step];
      model.network.zero_grad();
      S value{};
      try {
        value = model.network.accumulate_gradients(inputs[idx], targets[idx], nullptr, &tape);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::numeric) throw;
        fail(ErrorKind::numeric, "epoch " + std::to_string(epoch) + ", step " + std::to_string(step) + ": " +
                                     e.what());
      }
      if (!std::isfinite(value)) {
        fail(ErrorKind::numeric, "NaN loss at epoch " + std::to_string(epoch) + ", step " +
                                     std::to_string(step) + " (example " + std::to_string(idx) + ")");
      }
      optimizer.step(params);
      model.network.update_running_stats(tape);
      total += static_cast<double>(value);
    }
    model.training_log.push_back(total / static_cast<double>(order.size()));
  }
  return model;
}

}  // namespace isba
