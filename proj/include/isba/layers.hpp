#pragma once

// Layer primitives with hand-derived backward passes. Forward functions are
// const so a trained network can be shared across threads; backward
// functions take the saved forward inputs and accumulate parameter gradients.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "isba/error.hpp"
#include "isba/random.hpp"
#include "isba/tensor.hpp"

namespace isba::nn {

enum class Phase { train, eval };

template <class S>
void check_finite(const Matrix<S>& m, const std::string& layer) {
  for (S v : m.data) {
    if (!std::isfinite(v)) fail(ErrorKind::numeric, "non-finite activation in layer '" + layer + "'");
  }
}

template <class S>
void glorot_uniform(Param<S>& p, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (auto& v : p.value) v = static_cast<S>(rng.uniform(-limit, limit));
}

// Temporal convolution with zero "same" padding; width 1 is a frame-wise affine map.
template <class S>
class Conv1d {
 public:
  Conv1d() = default;
  Conv1d(const std::string& name, std::size_t in, std::size_t out, std::size_t width)
      : weight(name + ".weight", {width, in, out}), bias(name + ".bias", {out}),
        name_(name), in_(in), out_(out), width_(width) {
    require(width % 2 == 1, ErrorKind::config, "convolution width must be odd");
  }

  std::size_t in_channels() const { return in_; }
  std::size_t out_channels() const { return out_; }
  const std::string& name() const { return name_; }

  void initialize(Rng& rng) {
    glorot_uniform(weight, in_ * width_, out_ * width_, rng);
    std::fill(bias.value.begin(), bias.value.end(), S{0});
  }

  Matrix<S> forward(const Matrix<S>& x) const {
    require(x.cols == in_, ErrorKind::shape_mismatch,
            name_ + ": expected " + std::to_string(in_) + " input channels, got " + std::to_string(x.cols));
    const std::size_t steps = x.rows;
    const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(width_ / 2);
    Matrix<S> y(steps, out_);
    const S* w = weight.value.data();
    for (std::size_t t = 0; t < steps; ++t) {
      S* yr = y.row(t);
      std::copy(bias.value.begin(), bias.value.end(), yr);
      for (std::size_t j = 0; j < width_; ++j) {
        const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + j) - half;
        if (src < 0 || src >= static_cast<std::ptrdiff_t>(steps)) continue;
        const S* xr = x.row(static_cast<std::size_t>(src));
        for (std::size_t i = 0; i < in_; ++i) {
          const S xv = xr[i];
          const S* wr = w + (j * in_ + i) * out_;
          for (std::size_t o = 0; o < out_; ++o) yr[o] += xv * wr[o];
        }
      }
    }
    return y;
  }

  Matrix<S> backward(const Matrix<S>& x, const Matrix<S>& dy) {
    const std::size_t steps = x.rows;
    const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(width_ / 2);
    Matrix<S> dx(steps, in_);
    const S* w = weight.value.data();
    S* dw = weight.grad.data();
    for (std::size_t t = 0; t < steps; ++t) {
      const S* dyr = dy.row(t);
      for (std::size_t o = 0; o < out_; ++o) bias.grad[o] += dyr[o];
      for (std::size_t j = 0; j < width_; ++j) {
        const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + j) - half;
        if (src < 0 || src >= static_cast<std::ptrdiff_t>(steps)) continue;
        const S* xr = x.row(static_cast<std::size_t>(src));
        S* dxr = dx.row(static_cast<std::size_t>(src));
        for (std::size_t i = 0; i < in_; ++i) {
          const S xv = xr[i];
          const S* wr = w + (j * in_ + i) * out_;
          S* dwr = dw + (j * in_ + i) * out_;
          S acc{0};
          for (std::size_t o = 0; o < out_; ++o) {
            dwr[o] += xv * dyr[o];
            acc += wr[o] * dyr[o];
          }
          dxr[i] += acc;
        }
      }
    }
    return dx;
  }

  void collect(std::vector<Param<S>*>& out) {
    out.push_back(&weight);
    out.push_back(&bias);
  }

  Param<S> weight;
  Param<S> bias;

 private:
  std::string name_;
  std::size_t in_ = 0;
  std::size_t out_ = 0;
  std::size_t width_ = 1;
};

// Per-channel normalization over the time axis of one sequence. Train phase
// uses the sequence's own statistics; eval phase uses running statistics.
template <class S>
class TimeNorm {
 public:
  static constexpr double kEpsilon = 1e-5;
  static constexpr double kMomentum = 0.1;

  struct Cache {
    Matrix<S> normalized;
    std::vector<S> inv_std;
    std::vector<S> mean;
    std::vector<S> var;  // biased
  };

  TimeNorm() = default;
  TimeNorm(const std::string& name, std::size_t channels)
      : gamma(name + ".gamma", {channels}), beta(name + ".beta", {channels}),
        running_mean(name + ".running_mean", {channels}, false),
        running_var(name + ".running_var", {channels}, false), channels_(channels) {
    std::fill(gamma.value.begin(), gamma.value.end(), S{1});
    std::fill(running_var.value.begin(), running_var.value.end(), S{1});
  }

  Matrix<S> forward(const Matrix<S>& x, Phase phase, Cache* cache) const {
    const std::size_t steps = x.rows;
    std::vector<S> mean(channels_, S{0}), var(channels_, S{0});
    if (phase == Phase::train) {
      for (std::size_t t = 0; t < steps; ++t) {
        const S* xr = x.row(t);
        for (std::size_t c = 0; c < channels_; ++c) mean[c] += xr[c];
      }
      for (auto& m : mean) m /= static_cast<S>(steps);
      for (std::size_t t = 0; t < steps; ++t) {
        const S* xr = x.row(t);
        for (std::size_t c = 0; c < channels_; ++c) {
          const S d = xr[c] - mean[c];
          var[c] += d * d;
        }
      }
      for (auto& v : var) v /= static_cast<S>(steps);
    } else {
      mean = running_mean.value;
      var = running_var.value;
    }
    std::vector<S> inv_std(channels_);
    for (std::size_t c = 0; c < channels_; ++c) {
      inv_std[c] = S{1} / std::sqrt(var[c] + static_cast<S>(kEpsilon));
    }
    Matrix<S> y(steps, channels_);
    Matrix<S> normalized;
    if (cache) normalized = Matrix<S>(steps, channels_);
    for (std::size_t t = 0; t < steps; ++t) {
      const S* xr = x.row(t);
      S* yr = y.row(t);
      for (std::size_t c = 0; c < channels_; ++c) {
        const S xh = (xr[c] - mean[c]) * inv_std[c];
        if (cache) normalized(t, c) = xh;
        yr[c] = gamma.value[c] * xh + beta.value[c];
      }
    }
    if (cache) {
      cache->normalized = std::move(normalized);
      cache->inv_std = std::move(inv_std);
      cache->mean = std::move(mean);
      cache->var = std::move(var);
    }
    return y;
  }

  // Backward through train-phase statistics.
  Matrix<S> backward(const Cache& cache, const Matrix<S>& dy) {
    const std::size_t steps = dy.rows;
    const S count = static_cast<S>(steps);
    std::vector<S> sum_dy(channels_, S{0}), sum_dy_xh(channels_, S{0});
    for (std::size_t t = 0; t < steps; ++t) {
      const S* dyr = dy.row(t);
      const S* xh = cache.normalized.row(t);
      for (std::size_t c = 0; c < channels_; ++c) {
        sum_dy[c] += dyr[c];
        sum_dy_xh[c] += dyr[c] * xh[c];
      }
    }
    for (std::size_t c = 0; c < channels_; ++c) {
      beta.grad[c] += sum_dy[c];
      gamma.grad[c] += sum_dy_xh[c];
    }
    Matrix<S> dx(steps, channels_);
    for (std::size_t t = 0; t < steps; ++t) {
      const S* dyr = dy.row(t);
      const S* xh = cache.normalized.row(t);
      S* dxr = dx.row(t);
      for (std::size_t c = 0; c < channels_; ++c) {
        const S scale = gamma.value[c] * cache.inv_std[c] / count;
        dxr[c] = scale * (count * dyr[c] - sum_dy[c] - xh[c] * sum_dy_xh[c]);
      }
    }
    return dx;
  }

  void update_running(const Cache& cache, std::size_t steps) {
    const S m = static_cast<S>(kMomentum);
    const S correction = steps > 1 ? static_cast<S>(steps) / static_cast<S>(steps - 1) : S{1};
    for (std::size_t c = 0; c < channels_; ++c) {
      running_mean.value[c] = (S{1} - m) * running_mean.value[c] + m * cache.mean[c];
      running_var.value[c] = (S{1} - m) * running_var.value[c] + m * cache.var[c] * correction;
    }
  }

  void collect(std::vector<Param<S>*>& out) {
    out.push_back(&gamma);
    out.push_back(&beta);
    out.push_back(&running_mean);
    out.push_back(&running_var);
  }

  Param<S> gamma;
  Param<S> beta;
  Param<S> running_mean;
  Param<S> running_var;

 private:
  std::size_t channels_ = 0;
};

template <class S>
void relu_inplace(Matrix<S>& x) {
  for (auto& v : x.data) v = v > S{0} ? v : S{0};
}

// Gradient mask from the ReLU output.
template <class S>
Matrix<S> relu_backward(const Matrix<S>& activated, Matrix<S> dy) {
  for (std::size_t i = 0; i < dy.data.size(); ++i) {
    if (!(activated.data[i] > S{0})) dy.data[i] = S{0};
  }
  return dy;
}

// Max pooling by 2 over time; ties go to the earlier frame. Rows must be even.
template <class S>
Matrix<S> max_pool2(const Matrix<S>& x, std::vector<std::uint8_t>* argmax) {
  require(x.rows % 2 == 0, ErrorKind::shape_mismatch, "max pooling needs an even length");
  Matrix<S> y(x.rows / 2, x.cols);
  if (argmax) argmax->assign(y.data.size(), 0);
  for (std::size_t t = 0; t < y.rows; ++t) {
    const S* a = x.row(2 * t);
    const S* b = x.row(2 * t + 1);
    S* yr = y.row(t);
    for (std::size_t c = 0; c < x.cols; ++c) {
      const bool second = b[c] > a[c];
      yr[c] = second ? b[c] : a[c];
      if (argmax) (*argmax)[t * x.cols + c] = second ? 1 : 0;
    }
  }
  return y;
}

template <class S>
Matrix<S> max_pool2_backward(const Matrix<S>& dy, const std::vector<std::uint8_t>& argmax) {
  Matrix<S> dx(dy.rows * 2, dy.cols);
  for (std::size_t t = 0; t < dy.rows; ++t) {
    for (std::size_t c = 0; c < dy.cols; ++c) {
      dx(2 * t + argmax[t * dy.cols + c], c) = dy(t, c);
    }
  }
  return dx;
}

// Nearest-neighbour upsampling by repetition.
template <class S>
Matrix<S> upsample(const Matrix<S>& x, std::size_t factor) {
  Matrix<S> y(x.rows * factor, x.cols);
  for (std::size_t t = 0; t < y.rows; ++t) {
    std::copy(x.row(t / factor), x.row(t / factor) + x.cols, y.row(t));
  }
  return y;
}

template <class S>
Matrix<S> upsample_backward(const Matrix<S>& dy, std::size_t factor) {
  Matrix<S> dx(dy.rows / factor, dy.cols);
  for (std::size_t t = 0; t < dy.rows; ++t) {
    S* dxr = dx.row(t / factor);
    const S* dyr = dy.row(t);
    for (std::size_t c = 0; c < dy.cols; ++c) dxr[c] += dyr[c];
  }
  return dx;
}

template <class S>
void softmax_rows(Matrix<S>& x) {
  for (std::size_t t = 0; t < x.rows; ++t) {
    S* r = x.row(t);
    const S peak = *std::max_element(r, r + x.cols);
    S sum{0};
    for (std::size_t c = 0; c < x.cols; ++c) {
      r[c] = std::exp(r[c] - peak);
      sum += r[c];
    }
    for (std::size_t c = 0; c < x.cols; ++c) r[c] /= sum;
  }
}

// dz = p * (dp - <p, dp>) row by row.
template <class S>
Matrix<S> softmax_backward(const Matrix<S>& probs, const Matrix<S>& dp) {
  Matrix<S> dz(probs.rows, probs.cols);
  for (std::size_t t = 0; t < probs.rows; ++t) {
    const S* p = probs.row(t);
    const S* g = dp.row(t);
    S dot{0};
    for (std::size_t c = 0; c < probs.cols; ++c) dot += p[c] * g[c];
    S* z = dz.row(t);
    for (std::size_t c = 0; c < probs.cols; ++c) z[c] = p[c] * (g[c] - dot);
  }
  return dz;
}

template <class S>
S safe_log(S p) {
  return std::log(std::max(p, std::numeric_limits<S>::min()));
}

// Mean per-frame cross-entropy over the first `frames` rows.
template <class S>
S cross_entropy(const Matrix<S>& probs, const Matrix<S>& target, std::size_t frames) {
  S total{0};
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t c = 0; c < probs.cols; ++c) {
      const S y = target(t, c);
      if (y != S{0}) total -= y * safe_log(probs(t, c));
    }
  }
  return total / static_cast<S>(frames);
}

}  // namespace isba::nn
