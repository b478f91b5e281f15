#pragma once

// Bridges between file-facing rasters (interleaved RGB, depth maps) and the
// planar CHW tensors the networks consume.

#include "topodepth/image.hpp"
#include "topodepth/preprocess.hpp"
#include "topodepth/tensor.hpp"

namespace topodepth {

inline Tensor rgb_to_tensor(const RgbImage& im) {
  Tensor t({3, im.height, im.width});
  const std::size_t plane = static_cast<std::size_t>(im.width) * im.height;
  for (int y = 0; y < im.height; ++y)
    for (int x = 0; x < im.width; ++x)
      for (int c = 0; c < 3; ++c)
        t.data[static_cast<std::size_t>(c) * plane +
               static_cast<std::size_t>(y) * im.width + x] = im.at(x, y, c);
  return t;
}

inline RgbImage tensor_to_rgb(const Tensor& t) {
  RgbImage im = RgbImage::zeros(t.shape[2], t.shape[1]);
  const std::size_t plane = static_cast<std::size_t>(im.width) * im.height;
  for (int y = 0; y < im.height; ++y)
    for (int x = 0; x < im.width; ++x)
      for (int c = 0; c < 3; ++c)
        im.at(x, y, c) = t.data[static_cast<std::size_t>(c) * plane +
                                static_cast<std::size_t>(y) * im.width + x];
  return im;
}

inline Tensor depth_to_tensor(const NormalizedDepth& d) {
  Tensor t({1, d.height, d.width});
  t.data = d.values;
  return t;
}

inline NormalizedDepth tensor_to_depth_raster(const Tensor& t) {
  NormalizedDepth d;
  d.width = t.shape[2];
  d.height = t.shape[1];
  d.values = t.data;
  return d;
}

}  // namespace topodepth
