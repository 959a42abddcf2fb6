#pragma once

// Frame classifiers behind one interface:
//
//   tcfpn  encoder of K levels (level 1 is the input, deeper levels are
//          conv -> time norm -> ReLU -> max-pool x2); decoder starts from a
//          1x1 projection of the deepest encoder level and, level by level,
//          adds the x2-upsampled previous decoder level to a 1x1 lateral
//          projection of the matching encoder level. Every decoder level goes
//          through a temporal conv and a softmax head; the K probability
//          sequences are upsampled to full length and averaged.
//   edtcn  the same encoder, a mirrored upsample -> conv -> norm -> ReLU
//          decoder, and a single softmax head.
//   mlp    per-frame affine -> ReLU -> affine -> softmax.
//
// Inputs are edge-padded to a multiple of 2^(K-1) frames and outputs trimmed.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "isba/error.hpp"
#include "isba/layers.hpp"
#include "isba/random.hpp"
#include "isba/seq_data.hpp"
#include "isba/soft_target.hpp"

namespace isba {

enum class ModelKind { tcfpn, edtcn, mlp };

inline std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::tcfpn: return "tcfpn";
    case ModelKind::edtcn: return "edtcn";
    case ModelKind::mlp: return "mlp";
  }
  return "tcfpn";
}

inline ModelKind parse_model_kind(std::string_view text) {
  if (text == "tcfpn") return ModelKind::tcfpn;
  if (text == "edtcn") return ModelKind::edtcn;
  if (text == "mlp") return ModelKind::mlp;
  fail(ErrorKind::config, "unknown model kind '" + std::string(text) + "'");
}

// encoder_filters[s] is the channel count of encoder level s+1 for s >= 1;
// level 1 is the raw input, so entry 0 sizes the hidden layer of the mlp.
struct ModelConfig {
  ModelKind kind = ModelKind::tcfpn;
  std::size_t depth = 3;
  std::size_t conv_width = 25;
  std::vector<std::size_t> encoder_filters = {48, 64, 96};
  std::size_t lateral_dim = 64;
  std::size_t num_classes = 0;
  std::size_t input_dim = 0;

  void validate() const {
    require(depth >= 1, ErrorKind::config, "depth must be >= 1");
    require(conv_width >= 1 && conv_width % 2 == 1, ErrorKind::config, "conv_width must be odd and >= 1");
    require(encoder_filters.size() == depth, ErrorKind::config,
            "encoder_filters must have exactly depth=" + std::to_string(depth) + " entries");
    for (auto f : encoder_filters) require(f >= 1, ErrorKind::config, "encoder_filters entries must be >= 1");
    require(lateral_dim >= 1, ErrorKind::config, "lateral_dim must be >= 1");
    require(num_classes >= 1, ErrorKind::config, "num_classes must be >= 1");
    require(input_dim >= 1, ErrorKind::config, "input_dim must be >= 1");
  }

  std::size_t time_multiple() const {
    return kind == ModelKind::mlp ? 1 : std::size_t{1} << (depth - 1);
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"kind", std::string(to_string(c.kind))},
                     {"depth", c.depth},
                     {"conv_width", c.conv_width},
                     {"encoder_filters", c.encoder_filters},
                     {"lateral_dim", c.lateral_dim},
                     {"num_classes", c.num_classes},
                     {"input_dim", c.input_dim}};
}

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
  c.kind = parse_model_kind(j.at("kind").get<std::string>());
  c.depth = j.at("depth").get<std::size_t>();
  c.conv_width = j.at("conv_width").get<std::size_t>();
  c.encoder_filters = j.at("encoder_filters").get<std::vector<std::size_t>>();
  c.lateral_dim = j.at("lateral_dim").get<std::size_t>();
  c.num_classes = j.at("num_classes").get<std::size_t>();
  c.input_dim = j.at("input_dim").get<std::size_t>();
}

namespace nn {

// conv -> norm -> ReLU -> max-pool x2
template <class S>
struct EncoderStage {
  struct Tape {
    Matrix<S> input;
    typename TimeNorm<S>::Cache norm;
    Matrix<S> activated;
    std::vector<std::uint8_t> argmax;
  };

  Conv1d<S> conv;
  TimeNorm<S> norm;

  EncoderStage() = default;
  EncoderStage(const std::string& name, std::size_t in, std::size_t out, std::size_t width)
      : conv(name + ".conv", in, out, width), norm(name + ".norm", out) {}

  Matrix<S> forward(const Matrix<S>& x, Phase phase, Tape* tape) const {
    Matrix<S> h = conv.forward(x);
    check_finite(h, conv.name());
    h = norm.forward(h, phase, tape ? &tape->norm : nullptr);
    relu_inplace(h);
    Matrix<S> y = max_pool2(h, tape ? &tape->argmax : nullptr);
    if (tape) {
      tape->input = x;
      tape->activated = std::move(h);
    }
    return y;
  }

  Matrix<S> backward(const Tape& tape, const Matrix<S>& dy) {
    Matrix<S> g = max_pool2_backward(dy, tape.argmax);
    g = relu_backward(tape.activated, std::move(g));
    g = norm.backward(tape.norm, g);
    return conv.backward(tape.input, g);
  }

  void collect(std::vector<Param<S>*>& out) {
    conv.collect(out);
    norm.collect(out);
  }
};

// upsample x2 -> conv -> norm -> ReLU
template <class S>
struct DecoderStage {
  struct Tape {
    Matrix<S> upsampled;
    typename TimeNorm<S>::Cache norm;
    Matrix<S> activated;
  };

  Conv1d<S> conv;
  TimeNorm<S> norm;

  DecoderStage() = default;
  DecoderStage(const std::string& name, std::size_t in, std::size_t out, std::size_t width)
      : conv(name + ".conv", in, out, width), norm(name + ".norm", out) {}

  Matrix<S> forward(const Matrix<S>& x, Phase phase, Tape* tape) const {
    Matrix<S> up = upsample(x, 2);
    Matrix<S> h = conv.forward(up);
    check_finite(h, conv.name());
    h = norm.forward(h, phase, tape ? &tape->norm : nullptr);
    relu_inplace(h);
    if (tape) {
      tape->upsampled = std::move(up);
      tape->activated = h;
    }
    return h;
  }

  Matrix<S> backward(const Tape& tape, const Matrix<S>& dy) {
    Matrix<S> g = relu_backward(tape.activated, dy);
    g = norm.backward(tape.norm, g);
    g = conv.backward(tape.upsampled, g);
    return upsample_backward(g, 2);
  }

  void collect(std::vector<Param<S>*>& out) {
    conv.collect(out);
    norm.collect(out);
  }
};

template <class S>
class Network {
 public:
  // Everything the backward pass needs from one forward pass.
  struct Tape {
    std::size_t frames = 0;
    Matrix<S> input;
    std::vector<typename EncoderStage<S>::Tape> encoder;
    std::vector<Matrix<S>> encoded;  // encoder levels 1..K
    std::vector<typename DecoderStage<S>::Tape> decoder;
    std::vector<Matrix<S>> lateral;  // tcfpn decoder levels
    std::vector<Matrix<S>> smoothed;
    std::vector<Matrix<S>> hidden;   // mlp / edtcn head input
    std::vector<Matrix<S>> level_probs;
    Matrix<S> output;
  };

  Network() = default;

  explicit Network(ModelConfig config) : config_(std::move(config)) {
    config_.validate();
    const auto& f = config_.encoder_filters;
    const std::size_t k = config_.num_classes;
    const std::size_t w = config_.conv_width;
    const std::size_t levels = config_.depth;
    switch (config_.kind) {
      case ModelKind::mlp:
        heads_.emplace_back("mlp.hidden", config_.input_dim, f[0], 1);
        heads_.emplace_back("mlp.out", f[0], k, 1);
        break;
      case ModelKind::tcfpn: {
        std::size_t channels = config_.input_dim;
        for (std::size_t s = 1; s < levels; ++s) {
          encoder_.emplace_back("enc" + std::to_string(s + 1), channels, f[s], w);
          channels = f[s];
        }
        // lateral i projects encoder level K-i (0-based) into decoder level i.
        for (std::size_t i = 0; i < levels; ++i) {
          const std::size_t level = levels - 1 - i;
          const std::size_t src = level == 0 ? config_.input_dim : f[level];
          const std::string tag = std::to_string(i + 1);
          lateral_.emplace_back("dec" + tag + ".lateral", src, config_.lateral_dim, 1);
          smooth_.emplace_back("dec" + tag + ".smooth", config_.lateral_dim, config_.lateral_dim, w);
          heads_.emplace_back("dec" + tag + ".head", config_.lateral_dim, k, 1);
        }
        break;
      }
      case ModelKind::edtcn: {
        std::size_t channels = config_.input_dim;
        for (std::size_t s = 1; s < levels; ++s) {
          encoder_.emplace_back("enc" + std::to_string(s + 1), channels, f[s], w);
          channels = f[s];
        }
        for (std::size_t j = 1; j < levels; ++j) {
          const std::size_t out = f[levels - j];
          decoder_.emplace_back("dec" + std::to_string(j), channels, out, w);
          channels = out;
        }
        heads_.emplace_back("head", channels, k, 1);
        break;
      }
    }
  }

  const ModelConfig& config() const { return config_; }

  // Trainable parameters and normalization buffers, in a stable order.
  std::vector<Param<S>*> parameters() {
    std::vector<Param<S>*> out;
    for (auto& e : encoder_) e.collect(out);
    for (auto& d : decoder_) d.collect(out);
    for (auto& l : lateral_) l.collect(out);
    for (auto& s : smooth_) s.collect(out);
    for (auto& h : heads_) h.collect(out);
    return out;
  }

  std::vector<const Param<S>*> parameters() const {
    auto mutable_params = const_cast<Network*>(this)->parameters();
    return {mutable_params.begin(), mutable_params.end()};
  }

  void initialize(std::uint64_t seed) {
    Rng rng(derive_seed(seed, "init"));
    for (auto& e : encoder_) e.conv.initialize(rng);
    for (auto& d : decoder_) d.conv.initialize(rng);
    for (auto& l : lateral_) l.initialize(rng);
    for (auto& s : smooth_) s.initialize(rng);
    for (auto& h : heads_) h.initialize(rng);
  }

  std::size_t padded_length(std::size_t frames) const {
    const std::size_t m = config_.time_multiple();
    return (frames + m - 1) / m * m;
  }

  Matrix<S> pad(const Matrix<S>& x) const {
    const std::size_t total = padded_length(x.rows);
    if (total == x.rows) return x;
    Matrix<S> out(total, x.cols);
    std::copy(x.data.begin(), x.data.end(), out.data.begin());
    for (std::size_t t = x.rows; t < total; ++t) {
      std::copy(x.row(x.rows - 1), x.row(x.rows - 1) + x.cols, out.row(t));
    }
    return out;
  }

  // Probabilities for every frame of `x` (n x d in, n x k out).
  Matrix<S> forward(const Matrix<S>& x, Phase phase = Phase::eval, Tape* tape = nullptr) const {
    require(x.cols == config_.input_dim, ErrorKind::shape_mismatch,
            "feature dimension " + std::to_string(x.cols) + " does not match model input_dim " +
                std::to_string(config_.input_dim));
    require(x.rows >= 1, ErrorKind::empty_input, "cannot run a model on zero frames");
    Tape local;
    Tape& tp = tape ? *tape : local;
    tp = Tape{};
    tp.frames = x.rows;
    tp.input = pad(x);
    switch (config_.kind) {
      case ModelKind::mlp: forward_mlp(tp); break;
      case ModelKind::tcfpn: forward_tcfpn(tp, phase); break;
      case ModelKind::edtcn: forward_edtcn(tp, phase); break;
    }
    Matrix<S> out(x.rows, config_.num_classes);
    std::copy(tp.output.data.begin(), tp.output.data.begin() + static_cast<std::ptrdiff_t>(out.data.size()),
              out.data.begin());
    return out;
  }

  // Per-level probability sequences of a tcfpn, upsampled to the padded length.
  std::vector<Matrix<S>> level_outputs(const Matrix<S>& x, Phase phase = Phase::eval) const {
    Tape tape;
    forward(x, phase, &tape);
    std::vector<Matrix<S>> out;
    const std::size_t total = tape.input.rows;
    for (const auto& p : tape.level_probs) out.push_back(upsample(p, total / p.rows));
    return out;
  }

  // Train-phase loss only (no gradients, no buffer updates).
  S loss(const Matrix<S>& x, const Matrix<S>& target) const {
    const Matrix<S> probs = forward(x, Phase::train);
    return cross_entropy(probs, target, x.rows);
  }

  // Train-phase forward + mean cross-entropy + backward. Gradients accumulate
  // into the parameters; `input_grad`, if given, receives dLoss/dx.
  S accumulate_gradients(const Matrix<S>& x, const Matrix<S>& target, Matrix<S>* input_grad = nullptr,
                         Tape* keep = nullptr) {
    require(target.rows == x.rows && target.cols == config_.num_classes, ErrorKind::shape_mismatch,
            "target shape does not match input frames x num_classes");
    Tape local;
    Tape& tape = keep ? *keep : local;
    forward(x, Phase::train, &tape);
    const S value = cross_entropy(tape.output, target, x.rows);
    Matrix<S> dx;
    switch (config_.kind) {
      case ModelKind::mlp: dx = backward_mlp(tape, target); break;
      case ModelKind::tcfpn: dx = backward_tcfpn(tape, target); break;
      case ModelKind::edtcn: dx = backward_edtcn(tape, target); break;
    }
    if (input_grad) {
      // Gradients reaching replicated padding frames belong to the last real frame.
      Matrix<S> g(x.rows, x.cols);
      for (std::size_t t = 0; t < dx.rows; ++t) {
        const std::size_t dst = std::min(t, x.rows - 1);
        for (std::size_t c = 0; c < x.cols; ++c) g(dst, c) += dx(t, c);
      }
      *input_grad = std::move(g);
    }
    return value;
  }

  // Fold one train-phase tape's sequence statistics into the running statistics.
  void update_running_stats(const Tape& tape) {
    for (std::size_t s = 0; s < encoder_.size(); ++s) {
      encoder_[s].norm.update_running(tape.encoder[s].norm, tape.encoder[s].activated.rows);
    }
    for (std::size_t s = 0; s < decoder_.size(); ++s) {
      decoder_[s].norm.update_running(tape.decoder[s].norm, tape.decoder[s].activated.rows);
    }
  }

  void zero_grad() {
    for (auto* p : parameters()) p->zero_grad();
  }

 private:
  // Fused softmax + cross-entropy gradient for a single head: (p - y) / n.
  Matrix<S> head_logit_grad(const Tape& tape, const Matrix<S>& target) const {
    const Matrix<S>& p = tape.output;
    Matrix<S> dz(p.rows, p.cols);
    const S inv = S{1} / static_cast<S>(tape.frames);
    for (std::size_t t = 0; t < tape.frames; ++t) {
      for (std::size_t c = 0; c < p.cols; ++c) dz(t, c) = (p(t, c) - target(t, c)) * inv;
    }
    return dz;
  }

  void forward_mlp(Tape& tape) const {
    Matrix<S> h = heads_[0].forward(tape.input);
    relu_inplace(h);
    check_finite(h, heads_[0].name());
    Matrix<S> z = heads_[1].forward(h);
    check_finite(z, heads_[1].name());
    softmax_rows(z);
    tape.hidden.push_back(std::move(h));
    tape.output = std::move(z);
  }

  Matrix<S> backward_mlp(Tape& tape, const Matrix<S>& target) {
    Matrix<S> g = heads_[1].backward(tape.hidden[0], head_logit_grad(tape, target));
    g = relu_backward(tape.hidden[0], std::move(g));
    return heads_[0].backward(tape.input, g);
  }

  void run_encoder(Tape& tape, Phase phase) const {
    tape.encoded.push_back(tape.input);
    tape.encoder.resize(encoder_.size());
    for (std::size_t s = 0; s < encoder_.size(); ++s) {
      tape.encoded.push_back(encoder_[s].forward(tape.encoded.back(), phase, &tape.encoder[s]));
    }
  }

  // Gradient flowing into encoder level `top` (and deeper) back to the input.
  Matrix<S> backward_encoder(Tape& tape, std::vector<Matrix<S>>& d_encoded) {
    for (std::size_t s = encoder_.size(); s-- > 0;) {
      d_encoded[s] += encoder_[s].backward(tape.encoder[s], d_encoded[s + 1]);
    }
    return d_encoded[0];
  }

  void forward_tcfpn(Tape& tape, Phase phase) const {
    run_encoder(tape, phase);
    const std::size_t levels = config_.depth;
    const std::size_t total = tape.input.rows;
    tape.output = Matrix<S>(total, config_.num_classes);
    for (std::size_t i = 0; i < levels; ++i) {
      Matrix<S> d = lateral_[i].forward(tape.encoded[levels - 1 - i]);
      if (i > 0) d += upsample(tape.lateral[i - 1], 2);
      check_finite(d, lateral_[i].name());
      Matrix<S> h = smooth_[i].forward(d);
      check_finite(h, smooth_[i].name());
      Matrix<S> p = heads_[i].forward(h);
      check_finite(p, heads_[i].name());
      softmax_rows(p);
      const std::size_t factor = total / p.rows;
      const S scale = S{1} / static_cast<S>(levels);
      for (std::size_t t = 0; t < total; ++t) {
        const S* pr = p.row(t / factor);
        S* o = tape.output.row(t);
        for (std::size_t c = 0; c < p.cols; ++c) o[c] += scale * pr[c];
      }
      tape.lateral.push_back(std::move(d));
      tape.smoothed.push_back(std::move(h));
      tape.level_probs.push_back(std::move(p));
    }
  }

  Matrix<S> backward_tcfpn(Tape& tape, const Matrix<S>& target) {
    const std::size_t levels = config_.depth;
    const std::size_t total = tape.input.rows;
    // dL/d(avg output), zero on padding frames.
    Matrix<S> d_out(total, config_.num_classes);
    const S inv = S{1} / static_cast<S>(tape.frames);
    for (std::size_t t = 0; t < tape.frames; ++t) {
      for (std::size_t c = 0; c < d_out.cols; ++c) {
        const S y = target(t, c);
        if (y != S{0}) d_out(t, c) = -y * inv / std::max(tape.output(t, c), std::numeric_limits<S>::min());
      }
    }
    const S scale = S{1} / static_cast<S>(levels);
    std::vector<Matrix<S>> d_encoded;
    for (const auto& e : tape.encoded) d_encoded.emplace_back(e.rows, e.cols);
    Matrix<S> d_lateral_next;  // gradient w.r.t. decoder level i+1
    for (std::size_t i = levels; i-- > 0;) {
      const Matrix<S>& p = tape.level_probs[i];
      const std::size_t factor = total / p.rows;
      Matrix<S> dp = upsample_backward(d_out, factor);
      for (auto& v : dp.data) v *= scale;
      Matrix<S> dz = softmax_backward(p, dp);
      Matrix<S> dh = heads_[i].backward(tape.smoothed[i], dz);
      Matrix<S> dd = smooth_[i].backward(tape.lateral[i], dh);
      if (i + 1 < levels) dd += upsample_backward(d_lateral_next, 2);
      d_encoded[levels - 1 - i] += lateral_[i].backward(tape.encoded[levels - 1 - i], dd);
      d_lateral_next = std::move(dd);
    }
    return backward_encoder(tape, d_encoded);
  }

  void forward_edtcn(Tape& tape, Phase phase) const {
    run_encoder(tape, phase);
    Matrix<S> h = tape.encoded.back();
    tape.decoder.resize(decoder_.size());
    for (std::size_t j = 0; j < decoder_.size(); ++j) h = decoder_[j].forward(h, phase, &tape.decoder[j]);
    Matrix<S> z = heads_[0].forward(h);
    check_finite(z, heads_[0].name());
    softmax_rows(z);
    tape.hidden.push_back(std::move(h));
    tape.output = std::move(z);
  }

  Matrix<S> backward_edtcn(Tape& tape, const Matrix<S>& target) {
    Matrix<S> g = heads_[0].backward(tape.hidden[0], head_logit_grad(tape, target));
    for (std::size_t j = decoder_.size(); j-- > 0;) g = decoder_[j].backward(tape.decoder[j], g);
    std::vector<Matrix<S>> d_encoded;
    for (const auto& e : tape.encoded) d_encoded.emplace_back(e.rows, e.cols);
    d_encoded.back() += g;
    return backward_encoder(tape, d_encoded);
  }

  ModelConfig config_;
  std::vector<EncoderStage<S>> encoder_;
  std::vector<DecoderStage<S>> decoder_;
  std::vector<Conv1d<S>> lateral_;
  std::vector<Conv1d<S>> smooth_;
  std::vector<Conv1d<S>> heads_;
};

template <class S>
Matrix<S> to_matrix(const FeatureSequence& features) {
  Matrix<S> m(features.frames(), features.dim());
  auto values = features.values();
  for (std::size_t i = 0; i < values.size(); ++i) m.data[i] = static_cast<S>(values[i]);
  return m;
}

template <class S>
Matrix<S> to_matrix(const SoftLabelSequence& probs) {
  Matrix<S> m(probs.frames(), probs.classes());
  auto values = probs.values();
  for (std::size_t i = 0; i < values.size(); ++i) m.data[i] = static_cast<S>(values[i]);
  return m;
}

template <class S>
SoftLabelSequence to_soft_labels(const Matrix<S>& m) {
  std::vector<double> values(m.data.begin(), m.data.end());
  return SoftLabelSequence(m.rows, m.cols, std::move(values));
}

}  // namespace nn

template <class S>
struct TrainedModel {
  nn::Network<S> network;
  std::vector<double> training_log;  // mean loss per epoch

  const ModelConfig& config() const { return network.config(); }
};

template <class S>
SoftLabelSequence forward(const TrainedModel<S>& model, const FeatureSequence& features) {
  return nn::to_soft_labels(model.network.forward(nn::to_matrix<S>(features), nn::Phase::eval));
}

}  // namespace isba
