#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace isba::nn {

// Dense time x channel matrix, channels contiguous.
template <class S>
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<S> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, S fill = S{0}) : rows(r), cols(c), data(r * c, fill) {}

  S& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  S operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  S* row(std::size_t r) { return data.data() + r * cols; }
  const S* row(std::size_t r) const { return data.data() + r * cols; }

  void fill(S v) { std::fill(data.begin(), data.end(), v); }

  Matrix& operator+=(const Matrix& other) {
    for (std::size_t i = 0; i < data.size(); ++i) data[i] += other.data[i];
    return *this;
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

// A trainable (or buffered) tensor with its gradient.
template <class S>
struct Param {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<S> value;
  std::vector<S> grad;
  bool trainable = true;

  Param() = default;
  Param(std::string n, std::vector<std::size_t> s, bool train = true)
      : name(std::move(n)), shape(std::move(s)), trainable(train) {
    std::size_t count = 1;
    for (auto d : shape) count *= d;
    value.assign(count, S{0});
    grad.assign(count, S{0});
  }

  std::size_t size() const { return value.size(); }
  void zero_grad() { std::fill(grad.begin(), grad.end(), S{0}); }
};

}  // namespace isba::nn
