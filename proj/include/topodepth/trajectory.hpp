#pragma once

#include <cmath>
#include <vector>

#include "topodepth/errors.hpp"
#include "topodepth/geometry.hpp"
#include "topodepth/rng.hpp"

namespace topodepth {

struct TrajectoryParams {
  std::vector<Vec2> waypoints;     // closed loop; segment last->first implied
  double frame_spacing = 0.25;     // meters of arc between frames
  double lateral_offset_step = 0.25;
  int num_laps = 1;
  double noise_std = 0.0;          // meters, perpendicular to the path
  std::uint64_t rng_seed = 0;
  double camera_height = 1.2;

  void validate() const {
    if (!(frame_spacing > 0)) throw OutOfRange("frame_spacing must be > 0");
    if (num_laps < 1) throw OutOfRange("num_laps must be >= 1");
    if (noise_std < 0) throw OutOfRange("noise_std must be >= 0");
  }
};

// Piecewise-linear closed loop with arc-length lookup.
class LoopPath {
 public:
  explicit LoopPath(const std::vector<Vec2>& waypoints) : pts_(waypoints) {
    if (pts_.size() < 2) throw DegenerateLoop("need at least 2 waypoints");
    cum_.resize(pts_.size() + 1);
    cum_[0] = 0;
    for (std::size_t i = 0; i < pts_.size(); ++i) {
      Vec2 a = pts_[i];
      Vec2 b = pts_[(i + 1) % pts_.size()];
      cum_[i + 1] = cum_[i] + dist(a, b);
    }
    if (!(total_length() > 0)) throw DegenerateLoop("loop has zero length");
  }

  double total_length() const { return cum_.back(); }

  Vec2 point_at(double s) const {
    std::size_t i = segment_index(s);
    double t = segment_fraction(s, i);
    Vec2 a = pts_[i];
    Vec2 b = pts_[(i + 1) % pts_.size()];
    return a + (b - a) * t;
  }

  // Unit tangent of the segment containing arc length s.
  Vec2 tangent_at(double s) const {
    std::size_t i = segment_index(s);
    Vec2 a = pts_[i];
    Vec2 b = pts_[(i + 1) % pts_.size()];
    Vec2 d = b - a;
    double n = norm(d);
    return {d.x / n, d.y / n};
  }

 private:
  std::size_t segment_index(double s) const {
    // s is expected in [0, total); clamp defensively at the seam
    if (s >= cum_.back()) s = cum_.back();
    std::size_t i = 0;
    while (i + 1 < cum_.size() - 1 && cum_[i + 1] <= s) {
      // skip zero-length segments too
      ++i;
    }
    // make sure the chosen segment has positive length
    while (cum_[i + 1] - cum_[i] <= 0 && i + 1 < pts_.size()) ++i;
    return i;
  }
  double segment_fraction(double s, std::size_t i) const {
    double len = cum_[i + 1] - cum_[i];
    return len > 0 ? (s - cum_[i]) / len : 0.0;
  }

  std::vector<Vec2> pts_;
  std::vector<double> cum_;
};

struct TrajectorySample {
  Pose pose;
  double arc_length = 0;  // lap-local reference arc length
  int lap = 0;
};

// Lateral variant multipliers: reference lap, then offsets on either side of
// it, cycling every five laps.
inline double lateral_variant_multiplier(int lap) {
  static constexpr double kMult[5] = {0.0, 1.0, -1.0, 2.0, -2.0};
  return kMult[lap % 5];
}

// Samples poses every frame_spacing meters of arc along the loop for
// num_laps laps. Lap k rides a lateral offset of
// lateral_variant_multiplier(k) * lateral_offset_step plus per-frame
// Gaussian noise, both applied along the path's left normal. Yaw follows the
// local tangent. Fully determined by rng_seed.
inline std::vector<TrajectorySample> generate_trajectory_samples(
    const TrajectoryParams& params) {
  params.validate();
  LoopPath path(params.waypoints);
  const double total = path.total_length();
  Rng rng = named_rng(params.rng_seed, "trajectory-noise");

  std::vector<TrajectorySample> out;
  for (int lap = 0; lap < params.num_laps; ++lap) {
    double base_offset = lateral_variant_multiplier(lap) * params.lateral_offset_step;
    for (int j = 0;; ++j) {
      double s = j * params.frame_spacing;
      if (s >= total - 1e-12) break;
      double offset = base_offset;
      if (params.noise_std > 0) offset += params.noise_std * rng.normal();
      Vec2 t = path.tangent_at(s);
      Vec2 left{-t.y, t.x};
      Vec2 p = path.point_at(s) + left * offset;
      TrajectorySample sample;
      sample.pose.position = {p.x, p.y, params.camera_height};
      sample.pose.yaw = wrap_angle(std::atan2(t.y, t.x));
      sample.arc_length = s;
      sample.lap = lap;
      out.push_back(sample);
    }
  }
  return out;
}

inline std::vector<Pose> generate_trajectory(const TrajectoryParams& params) {
  std::vector<Pose> poses;
  for (const auto& s : generate_trajectory_samples(params)) poses.push_back(s.pose);
  return poses;
}

// The reference trajectory: one clean lap with no offsets and no noise.
// The topological map is built from this.
inline std::vector<Pose> reference_trajectory(const TrajectoryParams& params) {
  TrajectoryParams ref = params;
  ref.num_laps = 1;
  ref.noise_std = 0;
  ref.lateral_offset_step = 0;
  return generate_trajectory(ref);
}

}  // namespace topodepth
