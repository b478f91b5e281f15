#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "topodepth/errors.hpp"

namespace topodepth {

// Dense row-major tensor of doubles. All training math is 64-bit so
// finite-difference gradient gates are meaningful.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
    data.assign(static_cast<std::size_t>(numel_of(shape)), 0.0);
  }

  static std::int64_t numel_of(const std::vector<int>& s) {
    std::int64_t n = 1;
    for (int d : s) n *= d;
    return n;
  }

  std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }

  double* ptr() { return data.data(); }
  const double* ptr() const { return data.data(); }

  void fill(double v) { std::fill(data.begin(), data.end(), v); }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

inline void require_shape(const Tensor& t, const std::vector<int>& shape,
                          const char* what) {
  if (t.shape != shape) {
    std::string msg = std::string("shape mismatch for ") + what + ": got [";
    for (std::size_t i = 0; i < t.shape.size(); ++i)
      msg += (i ? "," : "") + std::to_string(t.shape[i]);
    msg += "], want [";
    for (std::size_t i = 0; i < shape.size(); ++i)
      msg += (i ? "," : "") + std::to_string(shape[i]);
    msg += "]";
    throw ShapeMismatch(msg);
  }
}

}  // namespace topodepth
