#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "topodepth/errors.hpp"
#include "topodepth/geometry.hpp"
#include "topodepth/textio.hpp"

namespace topodepth {

struct Color {
  double r = 0, g = 0, b = 0;
};

struct Obstacle {
  Box3 box;
  Color color;
};

// Wall order: -x, +x, -y, +y, floor (-z), ceiling (+z).
using WallColors = std::array<Color, 6>;

struct SceneConfig {
  Box3 room_extent;
  WallColors wall_colors;
  std::vector<Obstacle> obstacles;
  Vec3 light_direction;  // any nonzero vector; normalized by build_scene
  std::vector<Vec2> loop_waypoints;  // reference camera loop through free space
};

// Axis-aligned room with axis-aligned obstacle boxes and a single
// directional light. Stands in for a modelled living room: exact analytic
// ray intersections make the renderer testable against hand geometry.
struct Scene {
  Box3 room_extent;
  WallColors wall_colors;
  std::vector<Obstacle> obstacles;
  Vec3 light_direction;  // unit

  double room_diagonal() const { return room_extent.diagonal(); }

  bool position_free(Vec3 p) const {
    if (!room_extent.strictly_contains(p)) return false;
    for (const auto& o : obstacles)
      if (o.box.contains(p)) return false;
    return true;
  }
};

inline bool color_valid(Color c) {
  auto ok = [](double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; };
  return ok(c.r) && ok(c.g) && ok(c.b);
}

inline Scene build_scene(const SceneConfig& config) {
  if (!config.room_extent.valid())
    throw InvalidScene("room extent is not a valid box");
  for (const Color& c : config.wall_colors)
    if (!color_valid(c)) throw InvalidScene("wall color component outside [0,1]");
  for (std::size_t i = 0; i < config.obstacles.size(); ++i) {
    const Obstacle& o = config.obstacles[i];
    if (!o.box.valid())
      throw InvalidScene("obstacle " + std::to_string(i) + " is not a valid box");
    if (!config.room_extent.strictly_contains(o.box))
      throw InvalidScene("obstacle " + std::to_string(i) +
                         " is not strictly inside the room");
    if (!color_valid(o.color))
      throw InvalidScene("obstacle " + std::to_string(i) +
                         " color component outside [0,1]");
  }
  double n = norm(config.light_direction);
  if (!(n > 0.0) || !std::isfinite(n))
    throw InvalidScene("light direction must be a nonzero finite vector");
  Scene s;
  s.room_extent = config.room_extent;
  s.wall_colors = config.wall_colors;
  s.obstacles = config.obstacles;
  s.light_direction = config.light_direction * (1.0 / n);
  return s;
}

// --- JSON serialization of scene configs ---

namespace detail {
inline nlohmann::json vec3_json(Vec3 v) { return nlohmann::json::array({v.x, v.y, v.z}); }
inline Vec3 vec3_from(const nlohmann::json& j, const char* what) {
  if (!j.is_array() || j.size() != 3)
    throw IoError(std::string("expected [x,y,z] for ") + what);
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}
inline nlohmann::json color_json(Color c) { return nlohmann::json::array({c.r, c.g, c.b}); }
inline Color color_from(const nlohmann::json& j, const char* what) {
  if (!j.is_array() || j.size() != 3)
    throw IoError(std::string("expected [r,g,b] for ") + what);
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}
}  // namespace detail

inline nlohmann::json scene_config_to_json(const SceneConfig& c) {
  nlohmann::json j;
  j["room"]["min"] = detail::vec3_json(c.room_extent.lo);
  j["room"]["max"] = detail::vec3_json(c.room_extent.hi);
  j["light_direction"] = detail::vec3_json(c.light_direction);
  nlohmann::json walls = nlohmann::json::array();
  for (const Color& wc : c.wall_colors) walls.push_back(detail::color_json(wc));
  j["wall_colors"] = walls;
  nlohmann::json obs = nlohmann::json::array();
  for (const Obstacle& o : c.obstacles) {
    nlohmann::json jo;
    jo["min"] = detail::vec3_json(o.box.lo);
    jo["max"] = detail::vec3_json(o.box.hi);
    jo["color"] = detail::color_json(o.color);
    obs.push_back(jo);
  }
  j["obstacles"] = obs;
  nlohmann::json wp = nlohmann::json::array();
  for (const Vec2& p : c.loop_waypoints) wp.push_back(nlohmann::json::array({p.x, p.y}));
  j["loop_waypoints"] = wp;
  return j;
}

inline SceneConfig scene_config_from_json(const nlohmann::json& j) {
  SceneConfig c;
  c.room_extent.lo = detail::vec3_from(j.at("room").at("min"), "room.min");
  c.room_extent.hi = detail::vec3_from(j.at("room").at("max"), "room.max");
  c.light_direction = detail::vec3_from(j.at("light_direction"), "light_direction");
  const auto& walls = j.at("wall_colors");
  if (!walls.is_array() || walls.size() != 6)
    throw IoError("wall_colors must have 6 entries (-x,+x,-y,+y,floor,ceiling)");
  for (int i = 0; i < 6; ++i) c.wall_colors[i] = detail::color_from(walls[i], "wall color");
  for (const auto& jo : j.at("obstacles")) {
    Obstacle o;
    o.box.lo = detail::vec3_from(jo.at("min"), "obstacle.min");
    o.box.hi = detail::vec3_from(jo.at("max"), "obstacle.max");
    o.color = detail::color_from(jo.at("color"), "obstacle.color");
    c.obstacles.push_back(o);
  }
  if (j.contains("loop_waypoints")) {
    for (const auto& jp : j.at("loop_waypoints")) {
      if (!jp.is_array() || jp.size() != 2)
        throw IoError("loop_waypoints entries must be [x,y]");
      c.loop_waypoints.push_back({jp[0].get<double>(), jp[1].get<double>()});
    }
  }
  return c;
}

inline SceneConfig load_scene_config(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("cannot parse scene file " + path + ": " + e.what());
  }
  return scene_config_from_json(j);
}

inline void save_scene_config(const SceneConfig& c, const std::string& path) {
  write_text_file(path, scene_config_to_json(c).dump(2) + "\n");
}

// Hash of the canonical JSON form; stored in manifests so a dataset can be
// matched to the scene that produced it.
inline std::uint64_t scene_config_hash(const SceneConfig& c) {
  return fnv1a64(scene_config_to_json(c).dump());
}

// Built-in living-room-style environment: a 6x5x3 m room, furniture-sized
// boxes in distinct colors, walls in distinct tints. Obstacles keep at least
// ~0.8 m clearance from the default camera loop so offset laps stay free.
inline SceneConfig default_scene_config() {
  SceneConfig c;
  c.room_extent = {{0, 0, 0}, {6, 5, 3}};
  c.light_direction = {0.35, 0.2, -0.91};
  c.wall_colors = {{
      {0.85, 0.80, 0.70},  // -x west
      {0.60, 0.75, 0.85},  // +x east
      {0.80, 0.70, 0.75},  // -y south
      {0.70, 0.80, 0.70},  // +y north
      {0.45, 0.35, 0.28},  // floor
      {0.92, 0.92, 0.90},  // ceiling
  }};
  auto add = [&](Vec3 lo, Vec3 hi, Color col) {
    c.obstacles.push_back({{lo, hi}, col});
  };
  add({1.9, 0.15, 0.02}, {4.1, 0.45, 0.85}, {0.75, 0.15, 0.15});   // sofa, south wall
  add({2.5, 2.15, 0.02}, {3.5, 2.85, 0.75}, {0.55, 0.35, 0.15});   // table, loop center
  add({5.55, 1.0, 0.02}, {5.95, 3.0, 2.2}, {0.20, 0.30, 0.80});    // shelf, east wall
  add({0.1, 4.45, 0.02}, {0.5, 4.9, 1.4}, {0.10, 0.60, 0.20});     // plant, NW corner
  add({0.1, 0.9, 0.02}, {0.5, 2.3, 1.8}, {0.80, 0.65, 0.20});      // cabinet, west wall
  add({2.2, 4.6, 0.02}, {3.8, 4.95, 1.1}, {0.15, 0.15, 0.20});     // tv stand, north wall
  add({3.75, 2.3, 0.02}, {4.05, 2.6, 0.55}, {0.60, 0.20, 0.60});   // stool, inside loop
  add({5.5, 0.2, 0.02}, {5.85, 0.55, 1.7}, {0.90, 0.50, 0.10});    // lamp, SE corner
  // rectangular reference loop through the free space, counterclockwise
  c.loop_waypoints = {{1.2, 1.2}, {4.8, 1.2}, {4.8, 3.8}, {1.2, 3.8}};
  return c;
}

}  // namespace topodepth
