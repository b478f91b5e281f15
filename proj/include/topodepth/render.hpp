#pragma once

#include <cmath>
#include <optional>

#include "topodepth/errors.hpp"
#include "topodepth/geometry.hpp"
#include "topodepth/image.hpp"
#include "topodepth/scene.hpp"

namespace topodepth {

struct CameraIntrinsics {
  int width = 32;
  int height = 32;
  double horizontal_fov = 1.2;  // radians

  void validate() const {
    if (width < 8 || height < 8)
      throw ShapeMismatch("camera raster must be at least 8x8");
    if (!(horizontal_fov > 0.0) || !(horizontal_fov < kPi))
      throw OutOfRange("horizontal fov must be in (0, pi)");
  }
};

struct FramePair {
  RgbImage rgb;
  DepthMap depth;
};

namespace detail {

struct SurfaceHit {
  double t;
  Vec3 normal;
  Color color;
};

inline SurfaceHit trace(const Scene& scene, Vec3 origin, Vec3 dir) {
  // Nearest obstacle entry, else the room wall behind everything.
  std::optional<RayHit> best;
  const Obstacle* best_obs = nullptr;
  for (const auto& o : scene.obstacles) {
    auto h = ray_box_enter(origin, dir, o.box);
    if (h && (!best || h->t < best->t)) {
      best = h;
      best_obs = &o;
    }
  }
  if (best) return {best->t, best->normal, best_obs->color};
  RayHit wall = ray_box_exit(origin, dir, scene.room_extent);
  // wall index: axis*2 + (0 if low face, 1 if high face); normal points
  // inward so a +axis normal means the low face was hit
  int face = wall.axis * 2 + (wall.normal[wall.axis] > 0 ? 0 : 1);
  return {wall.t, wall.normal, scene.wall_colors[static_cast<std::size_t>(face)]};
}

}  // namespace detail

// Ray direction through the center of pixel (px, py). Square pixels; the
// vertical extent follows from the aspect ratio.
inline Vec3 pixel_ray(const Pose& pose, const CameraIntrinsics& cam, int px, int py) {
  double tan_half = std::tan(cam.horizontal_fov / 2.0);
  double u = (2.0 * (px + 0.5) / cam.width - 1.0) * tan_half;
  double v = (1.0 - 2.0 * (py + 0.5) / cam.height) * tan_half *
             (static_cast<double>(cam.height) / cam.width);
  Vec3 forward{std::cos(pose.yaw), std::sin(pose.yaw), 0.0};
  Vec3 right{std::sin(pose.yaw), -std::cos(pose.yaw), 0.0};
  Vec3 up{0.0, 0.0, 1.0};
  return normalized(forward + right * u + up * v);
}

// Raycasts one frame. Depth is Euclidean distance along the ray to the
// nearest surface (not z-depth), so "distance to obstacle" semantics hold
// for every pixel. RGB is flat surface color times a clamped Lambert term.
inline FramePair render_frame(const Scene& scene, const Pose& pose,
                              const CameraIntrinsics& cam) {
  cam.validate();
  if (!scene.room_extent.strictly_contains(pose.position))
    throw PoseInsideObstacle("camera position outside the room");
  for (std::size_t i = 0; i < scene.obstacles.size(); ++i)
    if (scene.obstacles[i].box.contains(pose.position))
      throw PoseInsideObstacle("camera position inside obstacle " + std::to_string(i));

  FramePair out;
  out.rgb = RgbImage::zeros(cam.width, cam.height);
  out.depth = DepthMap::zeros(cam.width, cam.height);
  for (int py = 0; py < cam.height; ++py) {
    for (int px = 0; px < cam.width; ++px) {
      Vec3 dir = pixel_ray(pose, cam, px, py);
      auto hit = detail::trace(scene, pose.position, dir);
      double lambert = -dot(hit.normal, scene.light_direction);
      if (lambert < 0.1) lambert = 0.1;
      out.depth.at(px, py) = hit.t;
      out.rgb.at(px, py, 0) = hit.color.r * lambert;
      out.rgb.at(px, py, 1) = hit.color.g * lambert;
      out.rgb.at(px, py, 2) = hit.color.b * lambert;
    }
  }
  return out;
}

}  // namespace topodepth
