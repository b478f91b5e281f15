#pragma once

#include <cmath>
#include <vector>

#include "topodepth/errors.hpp"
#include "topodepth/image.hpp"

namespace topodepth {

// Replaces hole pixels (NaN) with the discrete harmonic interpolant of the
// valid values: Jacobi averaging of 4-neighbors over the hole set with valid
// pixels held fixed. Holes start at the global valid mean, which also covers
// masks where a hole region never touches a valid pixel. Valid pixels pass
// through bit-for-bit.
inline DepthMap fill_holes(const DepthMap& depth, double tol = 1e-6,
                           int max_iters = 10000) {
  const int w = depth.width, h = depth.height;
  const std::size_t n = depth.depths.size();

  std::vector<std::size_t> holes;
  double sum = 0;
  std::size_t valid = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (std::isnan(depth.depths[i])) {
      holes.push_back(i);
    } else {
      sum += depth.depths[i];
      ++valid;
    }
  }
  if (valid == 0) throw AllHoles("depth map has no valid pixels");
  if (holes.empty()) return depth;

  DepthMap out = depth;
  const double mean = sum / static_cast<double>(valid);
  for (std::size_t i : holes) out.depths[i] = mean;

  std::vector<double> next(holes.size());
  for (int iter = 0; iter < max_iters; ++iter) {
    double max_change = 0;
    for (std::size_t k = 0; k < holes.size(); ++k) {
      std::size_t i = holes[k];
      int x = static_cast<int>(i % static_cast<std::size_t>(w));
      int y = static_cast<int>(i / static_cast<std::size_t>(w));
      double acc = 0;
      int cnt = 0;
      if (x > 0) { acc += out.depths[i - 1]; ++cnt; }
      if (x + 1 < w) { acc += out.depths[i + 1]; ++cnt; }
      if (y > 0) { acc += out.depths[i - static_cast<std::size_t>(w)]; ++cnt; }
      if (y + 1 < h) { acc += out.depths[i + static_cast<std::size_t>(w)]; ++cnt; }
      double v = cnt > 0 ? acc / cnt : out.depths[i];
      next[k] = v;
      double change = std::abs(v - out.depths[i]);
      if (change > max_change) max_change = change;
    }
    for (std::size_t k = 0; k < holes.size(); ++k) out.depths[holes[k]] = next[k];
    if (max_change < tol) break;
  }
  return out;
}

struct NormalizationSpec {
  double max_depth = 1.0;  // meters mapped to 1.0; linear

  void validate() const {
    if (!(max_depth > 0)) throw OutOfRange("max_depth must be > 0");
  }
};

struct NormalizedDepth {
  int width = 0, height = 0;
  std::vector<double> values;  // [0,1]
};

struct NormalizeResult {
  NormalizedDepth raster;
  long clamped = 0;  // pixels above max_depth clipped to 1.0
};

inline NormalizeResult normalize_depth(const DepthMap& depth,
                                       const NormalizationSpec& spec) {
  spec.validate();
  NormalizeResult res;
  res.raster.width = depth.width;
  res.raster.height = depth.height;
  res.raster.values.resize(depth.depths.size());
  for (std::size_t i = 0; i < depth.depths.size(); ++i) {
    double d = depth.depths[i];
    if (std::isnan(d))
      throw HolePresent("normalize_depth requires a dense map; fill holes first");
    double v = d / spec.max_depth;
    if (v > 1.0) {
      v = 1.0;
      ++res.clamped;
    }
    res.raster.values[i] = v;
  }
  return res;
}

inline DepthMap denormalize_depth(const NormalizedDepth& raster,
                                  const NormalizationSpec& spec) {
  spec.validate();
  DepthMap out = DepthMap::zeros(raster.width, raster.height);
  for (std::size_t i = 0; i < raster.values.size(); ++i) {
    double v = raster.values[i];
    if (!(v >= 0.0) || !(v <= 1.0))
      throw OutOfRange("normalized value outside [0,1]");
    out.depths[i] = v * spec.max_depth;
  }
  return out;
}

}  // namespace topodepth
