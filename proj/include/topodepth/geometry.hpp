#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <optional>

namespace topodepth {

struct Vec2 {
  double x = 0, y = 0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(Vec2 a, double s) { return {a.x * s, a.y * s}; }
inline double norm(Vec2 a) { return std::sqrt(a.x * a.x + a.y * a.y); }
inline double dist(Vec2 a, Vec2 b) { return norm(a - b); }

struct Vec3 {
  double x = 0, y = 0, z = 0;

  double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
};

inline Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
inline Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
inline Vec3 operator*(Vec3 a, double s) { return {a.x * s, a.y * s, a.z * s}; }
inline double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline double norm(Vec3 a) { return std::sqrt(dot(a, a)); }
inline Vec3 normalized(Vec3 a) {
  double n = norm(a);
  return {a.x / n, a.y / n, a.z / n};
}

// Camera stays level: position plus yaw about +z.
struct Pose {
  Vec3 position;
  double yaw = 0;  // radians in [-pi, pi)
};

struct Box3 {
  Vec3 lo, hi;

  bool valid() const { return lo.x < hi.x && lo.y < hi.y && lo.z < hi.z; }
  bool contains(Vec3 p) const {
    return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y &&
           p.z >= lo.z && p.z <= hi.z;
  }
  bool strictly_contains(Vec3 p) const {
    return p.x > lo.x && p.x < hi.x && p.y > lo.y && p.y < hi.y &&
           p.z > lo.z && p.z < hi.z;
  }
  // b strictly inside this box (no shared faces)
  bool strictly_contains(const Box3& b) const {
    return strictly_contains(b.lo) && strictly_contains(b.hi);
  }
  Vec3 extent() const { return hi - lo; }
  double diagonal() const { return norm(extent()); }
};

struct RayHit {
  double t = 0;    // distance along the (unit) ray
  int axis = 0;    // slab axis of the face that was hit
  Vec3 normal;     // unit normal opposing the ray on that axis
};

// Slab-method entry hit from outside the box. dir must be unit length.
inline std::optional<RayHit> ray_box_enter(Vec3 origin, Vec3 dir, const Box3& box) {
  double t_near = -std::numeric_limits<double>::infinity();
  double t_far = std::numeric_limits<double>::infinity();
  int near_axis = -1;
  const double lo[3] = {box.lo.x, box.lo.y, box.lo.z};
  const double hi[3] = {box.hi.x, box.hi.y, box.hi.z};
  const double o[3] = {origin.x, origin.y, origin.z};
  const double d[3] = {dir.x, dir.y, dir.z};
  for (int a = 0; a < 3; ++a) {
    if (d[a] == 0.0) {
      if (o[a] < lo[a] || o[a] > hi[a]) return std::nullopt;
      continue;
    }
    double t1 = (lo[a] - o[a]) / d[a];
    double t2 = (hi[a] - o[a]) / d[a];
    if (t1 > t2) std::swap(t1, t2);
    if (t1 > t_near) {
      t_near = t1;
      near_axis = a;
    }
    if (t2 < t_far) t_far = t2;
  }
  if (near_axis < 0 || t_near > t_far || t_near <= 0.0) return std::nullopt;
  RayHit hit;
  hit.t = t_near;
  hit.axis = near_axis;
  double s = d[near_axis] > 0 ? -1.0 : 1.0;
  hit.normal = {near_axis == 0 ? s : 0.0, near_axis == 1 ? s : 0.0,
                near_axis == 2 ? s : 0.0};
  return hit;
}

// Exit hit for a ray starting inside the box (the room walls seen from
// within). Normal points back into the interior.
inline RayHit ray_box_exit(Vec3 origin, Vec3 dir, const Box3& box) {
  double t_far = std::numeric_limits<double>::infinity();
  int far_axis = 0;
  const double lo[3] = {box.lo.x, box.lo.y, box.lo.z};
  const double hi[3] = {box.hi.x, box.hi.y, box.hi.z};
  const double o[3] = {origin.x, origin.y, origin.z};
  const double d[3] = {dir.x, dir.y, dir.z};
  for (int a = 0; a < 3; ++a) {
    if (d[a] == 0.0) continue;
    double t = d[a] > 0 ? (hi[a] - o[a]) / d[a] : (lo[a] - o[a]) / d[a];
    if (t < t_far) {
      t_far = t;
      far_axis = a;
    }
  }
  RayHit hit;
  hit.t = t_far;
  hit.axis = far_axis;
  double s = d[far_axis] > 0 ? -1.0 : 1.0;
  hit.normal = {far_axis == 0 ? s : 0.0, far_axis == 1 ? s : 0.0,
                far_axis == 2 ? s : 0.0};
  return hit;
}

constexpr double kPi = 3.14159265358979323846;

// Wrap to [-pi, pi)
inline double wrap_angle(double a) {
  a = std::fmod(a + kPi, 2.0 * kPi);
  if (a < 0) a += 2.0 * kPi;
  return a - kPi;
}

}  // namespace topodepth
