#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "topodepth/errors.hpp"
#include "topodepth/textio.hpp"

namespace topodepth {

// Dense RGB raster, 3 floats per pixel in [0,1], row-major.
struct RgbImage {
  int width = 0, height = 0;
  std::vector<double> pixels;  // width*height*3

  static RgbImage zeros(int w, int h) {
    RgbImage im;
    im.width = w;
    im.height = h;
    im.pixels.assign(static_cast<std::size_t>(w) * h * 3, 0.0);
    return im;
  }
  double& at(int x, int y, int c) {
    return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  double at(int x, int y, int c) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
};

// Dense depth raster in meters, row-major. NaN marks a hole.
struct DepthMap {
  int width = 0, height = 0;
  std::vector<double> depths;  // width*height

  static DepthMap zeros(int w, int h) {
    DepthMap d;
    d.width = w;
    d.height = h;
    d.depths.assign(static_cast<std::size_t>(w) * h, 0.0);
    return d;
  }
  double& at(int x, int y) { return depths[static_cast<std::size_t>(y) * width + x]; }
  double at(int x, int y) const { return depths[static_cast<std::size_t>(y) * width + x]; }

  std::size_t hole_count() const {
    std::size_t n = 0;
    for (double v : depths)
      if (std::isnan(v)) ++n;
    return n;
  }
};

// --- RGB file: binary PPM (P6), 8-bit, values = round(255 * float) ---

inline void write_ppm(const RgbImage& im, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << "P6\n" << im.width << " " << im.height << "\n255\n";
  std::vector<unsigned char> bytes(im.pixels.size());
  for (std::size_t i = 0; i < im.pixels.size(); ++i) {
    double v = im.pixels[i];
    if (v < 0.0) v = 0.0;
    if (v > 1.0) v = 1.0;
    bytes[i] = static_cast<unsigned char>(std::lround(255.0 * v));
  }
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path);
}

inline RgbImage read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::string magic;
  int w = 0, h = 0, maxv = 0;
  in >> magic >> w >> h >> maxv;
  if (magic != "P6" || maxv != 255 || w <= 0 || h <= 0)
    throw IoError("not an 8-bit P6 PPM: " + path);
  in.get();  // single whitespace after header
  std::vector<unsigned char> bytes(static_cast<std::size_t>(w) * h * 3);
  in.read(reinterpret_cast<char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size()))
    throw IoError("truncated PPM payload: " + path);
  RgbImage im = RgbImage::zeros(w, h);
  for (std::size_t i = 0; i < bytes.size(); ++i)
    im.pixels[i] = static_cast<double>(bytes[i]) / 255.0;
  return im;
}

// --- Depth file: "DEPTHF32 <w> <h>\n" then w*h little-endian f32, row-major.
//     NaN encodes holes. ---

inline void write_depth(const DepthMap& d, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << "DEPTHF32 " << d.width << " " << d.height << "\n";
  std::vector<float> f(d.depths.size());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = static_cast<float>(d.depths[i]);
  out.write(reinterpret_cast<const char*>(f.data()),
            static_cast<std::streamsize>(f.size() * sizeof(float)));
  if (!out) throw IoError("short write to " + path);
}

inline DepthMap read_depth(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw IoError("missing depth header: " + path);
  auto tok = split_ws(line);
  if (tok.size() != 3 || tok[0] != "DEPTHF32")
    throw IoError("bad depth header in " + path + ": '" + line + "'");
  int w = static_cast<int>(parse_i64(tok[1], "width"));
  int h = static_cast<int>(parse_i64(tok[2], "height"));
  if (w <= 0 || h <= 0) throw IoError("bad depth dimensions in " + path);
  std::vector<float> f(static_cast<std::size_t>(w) * h);
  in.read(reinterpret_cast<char*>(f.data()),
          static_cast<std::streamsize>(f.size() * sizeof(float)));
  if (in.gcount() != static_cast<std::streamsize>(f.size() * sizeof(float)))
    throw IoError("truncated depth payload: " + path);
  DepthMap d = DepthMap::zeros(w, h);
  for (std::size_t i = 0; i < f.size(); ++i) d.depths[i] = static_cast<double>(f[i]);
  return d;
}

}  // namespace topodepth
