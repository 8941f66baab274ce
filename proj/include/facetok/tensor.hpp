#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "facetok/common.hpp"

namespace facetok {

// Dense row-major array, rank 0..2 in practice.
template <typename T>
struct Tensor {
  std::vector<int> shape;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
    data.assign(size_t(count(shape)), T(0));
  }

  static int64_t count(const std::vector<int>& s) {
    int64_t n = 1;
    for (int d : s) n *= d;
    return n;
  }

  static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }

  static Tensor full(std::vector<int> s, T v) {
    Tensor t(std::move(s));
    std::fill(t.data.begin(), t.data.end(), v);
    return t;
  }

  static Tensor scalar(T v) {
    Tensor t(std::vector<int>{});
    t.data.assign(1, v);
    return t;
  }

  static Tensor randn(std::vector<int> s, Rng& rng, T stddev) {
    Tensor t(std::move(s));
    for (auto& v : t.data) v = T(rng.normal()) * stddev;
    return t;
  }

  int64_t size() const { return int64_t(data.size()); }
  int rank() const { return int(shape.size()); }
  int rows() const { return rank() >= 1 ? shape[0] : 1; }
  int cols() const { return rank() >= 2 ? shape[1] : 1; }

  T& at(int i, int j) { return data[size_t(i) * cols() + j]; }
  T at(int i, int j) const { return data[size_t(i) * cols() + j]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  bool all_finite() const {
    for (T v : data)
      if (!std::isfinite(double(v))) return false;
    return true;
  }

  std::string shape_str() const {
    std::string s = "[";
    for (size_t i = 0; i < shape.size(); ++i)
      s += (i ? "," : "") + std::to_string(shape[i]);
    return s + "]";
  }
};

template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;

  Parameter() = default;
  Parameter(std::string n, Tensor<T> v)
      : name(std::move(n)), value(std::move(v)), grad(Tensor<T>::zeros(value.shape)) {}

  void zero_grad() { std::fill(grad.data.begin(), grad.data.end(), T(0)); }
};

}  // namespace facetok
