#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "attnlab/errors.hpp"

namespace attnlab {

/// Dense row-major tensor. T is the working precision: double for every
/// verification suite, float as a training-speed option. No broadcasting;
/// shapes are explicit everywhere.
template <typename T>
struct Tensor {
  std::vector<int> shape;
  std::vector<T> data;

  Tensor() = default;

  static Tensor zeros(std::vector<int> shape) {
    Tensor t;
    t.shape = std::move(shape);
    t.data.assign(numel_of(t.shape), T(0));
    return t;
  }

  static Tensor full(std::vector<int> shape, T value) {
    Tensor t = zeros(std::move(shape));
    std::fill(t.data.begin(), t.data.end(), value);
    return t;
  }

  /// Explicit-value construction; rejects non-finite values.
  static Tensor from(std::vector<int> shape, std::vector<T> values) {
    if (values.size() != numel_of(shape)) {
      throw std::invalid_argument("tensor data length does not match shape");
    }
    for (T v : values) {
      if (!std::isfinite(static_cast<double>(v))) {
        throw std::invalid_argument("tensor values must be finite");
      }
    }
    Tensor t;
    t.shape = std::move(shape);
    t.data = std::move(values);
    return t;
  }

  static Tensor randn(std::vector<int> shape, T stddev, std::mt19937_64& rng) {
    Tensor t = zeros(std::move(shape));
    std::normal_distribution<double> dist(0.0, static_cast<double>(stddev));
    for (T& v : t.data) v = static_cast<T>(dist(rng));
    return t;
  }

  size_t numel() const { return data.size(); }
  int dim(int k) const { return shape[static_cast<size_t>(k)]; }
  int rows() const { return shape.at(0); }
  int cols() const { return shape.at(1); }

  T& at(int i, int j) { return data[static_cast<size_t>(i) * cols() + j]; }
  T at(int i, int j) const { return data[static_cast<size_t>(i) * cols() + j]; }
  T* row(int i) { return data.data() + static_cast<size_t>(i) * cols(); }
  const T* row(int i) const { return data.data() + static_cast<size_t>(i) * cols(); }

  void fill(T v) { std::fill(data.begin(), data.end(), v); }

  bool same_shape(const Tensor& rhs) const { return shape == rhs.shape; }

  static size_t numel_of(const std::vector<int>& shape) {
    size_t n = 1;
    for (int d : shape) {
      if (d < 0) throw std::invalid_argument("tensor dims must be non-negative");
      n *= static_cast<size_t>(d);
    }
    return n;
  }
};

template <typename T>
void check_finite(const Tensor<T>& t, const char* what) {
  for (T v : t.data) {
    if (!std::isfinite(static_cast<double>(v))) {
      throw numerical_error(std::string("non-finite value in ") + what);
    }
  }
}

}  // namespace attnlab
