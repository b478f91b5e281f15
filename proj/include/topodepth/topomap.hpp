#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "topodepth/errors.hpp"
#include "topodepth/geometry.hpp"
#include "topodepth/textio.hpp"

namespace topodepth {

// Cumulative planar arc length along a pose path. First entry is 0.
inline std::vector<double> arc_length(const std::vector<Pose>& poses) {
  if (poses.size() < 2) throw TooFewPoses("arc_length needs at least 2 poses");
  std::vector<double> cum(poses.size());
  cum[0] = 0;
  for (std::size_t i = 1; i < poses.size(); ++i) {
    Vec2 a{poses[i - 1].position.x, poses[i - 1].position.y};
    Vec2 b{poses[i].position.x, poses[i].position.y};
    cum[i] = cum[i - 1] + dist(a, b);
  }
  return cum;
}

struct TopoNode {
  int id = 0;
  Vec2 position;
  double arc_length = 0;
};

// Nodes dropped at fixed arc-length intervals along the reference route.
// Immutable once built; the node id doubles as the class label for the
// conditioning one-hot.
struct TopoMap {
  std::vector<TopoNode> nodes;
  double spacing = 1.5;

  int size() const { return static_cast<int>(nodes.size()); }
};

namespace detail {
inline Vec2 interp_at_arc(const std::vector<Pose>& poses,
                          const std::vector<double>& cum, double s) {
  // binary search for the containing segment
  std::size_t lo = 0, hi = cum.size() - 1;
  while (lo + 1 < hi) {
    std::size_t mid = (lo + hi) / 2;
    if (cum[mid] <= s)
      lo = mid;
    else
      hi = mid;
  }
  double len = cum[lo + 1] - cum[lo];
  double t = len > 0 ? (s - cum[lo]) / len : 0.0;
  if (t < 0) t = 0;
  if (t > 1) t = 1;
  Vec2 a{poses[lo].position.x, poses[lo].position.y};
  Vec2 b{poses[lo + 1].position.x, poses[lo + 1].position.y};
  return a + (b - a) * t;
}
}  // namespace detail

// Places a node every `spacing` meters of arc along the pose path,
// interpolating positions. When the path closes on itself (endpoints within
// spacing/2), a final node that lands within spacing/2 of the loop end would
// duplicate node 0 and is merged away.
inline TopoMap build_topomap(const std::vector<Pose>& poses, double spacing = 1.5) {
  if (!(spacing > 0)) throw OutOfRange("spacing must be > 0");
  std::vector<double> cum = arc_length(poses);
  double total = cum.back();
  if (total + 1e-9 < spacing)
    throw PathTooShort("path length " + fmt_f64(total) +
                       " is shorter than node spacing " + fmt_f64(spacing));

  TopoMap map;
  map.spacing = spacing;
  for (int k = 0;; ++k) {
    double s = k * spacing;
    if (s > total + 1e-9) break;
    if (s > total) s = total;
    TopoNode node;
    node.id = k;
    node.arc_length = s;
    node.position = detail::interp_at_arc(poses, cum, s);
    map.nodes.push_back(node);
  }

  Vec2 first{poses.front().position.x, poses.front().position.y};
  Vec2 last{poses.back().position.x, poses.back().position.y};
  bool closed = dist(first, last) <= spacing / 2;
  if (closed && map.nodes.size() >= 2 &&
      total - map.nodes.back().arc_length <= spacing / 2 + 1e-9) {
    map.nodes.pop_back();
  }
  if (map.nodes.size() < 2)
    throw PathTooShort("loop closure merge left fewer than 2 nodes");
  return map;
}

// Nearest node by planar Euclidean distance; ties go to the lower id.
inline int assign_node(const TopoMap& map, Vec2 position) {
  int best = 0;
  double best_d = dist(map.nodes[0].position, position);
  for (std::size_t i = 1; i < map.nodes.size(); ++i) {
    double d = dist(map.nodes[i].position, position);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(i);
    }
  }
  return best;
}

inline std::vector<double> one_hot(int node_id, int num_nodes) {
  if (node_id < 0 || node_id >= num_nodes)
    throw IndexOutOfRange("node id " + std::to_string(node_id) +
                          " outside [0, " + std::to_string(num_nodes) + ")");
  std::vector<double> v(static_cast<std::size_t>(num_nodes), 0.0);
  v[static_cast<std::size_t>(node_id)] = 1.0;
  return v;
}

// --- TopoMap file: versioned line-delimited text ---

inline void save_topomap(const TopoMap& map, const std::string& path) {
  std::string body = "TDTOPOMAP 1\n";
  body += "spacing " + fmt_f64(map.spacing) + "\n";
  body += "nodes " + std::to_string(map.nodes.size()) + "\n";
  for (const auto& n : map.nodes)
    body += std::to_string(n.id) + " " + fmt_f64(n.position.x) + " " +
            fmt_f64(n.position.y) + " " + fmt_f64(n.arc_length) + "\n";
  write_text_file(path, body);
}

inline TopoMap load_topomap(const std::string& path) {
  std::istringstream in(read_text_file(path));
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty topomap file: " + path);
  auto head = split_ws(line);
  if (head.size() != 2 || head[0] != "TDTOPOMAP")
    throw IoError("not a topomap file: " + path);
  if (head[1] != "1")
    throw VersionMismatch("topomap " + path + " has version " + head[1] +
                          ", expected 1");
  TopoMap map;
  std::size_t count = 0;
  if (!std::getline(in, line)) throw IoError("truncated topomap: " + path);
  auto sp = split_ws(line);
  if (sp.size() != 2 || sp[0] != "spacing") throw IoError("bad spacing line in " + path);
  map.spacing = parse_f64(sp[1], "spacing");
  if (!std::getline(in, line)) throw IoError("truncated topomap: " + path);
  auto nc = split_ws(line);
  if (nc.size() != 2 || nc[0] != "nodes") throw IoError("bad nodes line in " + path);
  count = static_cast<std::size_t>(parse_i64(nc[1], "node count"));
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::getline(in, line)) throw IoError("truncated topomap: " + path);
    auto t = split_ws(line);
    if (t.size() != 4) throw IoError("bad node row in " + path + ": '" + line + "'");
    TopoNode n;
    n.id = static_cast<int>(parse_i64(t[0], "node id"));
    n.position.x = parse_f64(t[1], "node x");
    n.position.y = parse_f64(t[2], "node y");
    n.arc_length = parse_f64(t[3], "node arc length");
    if (n.id != static_cast<int>(i))
      throw IoError("node ids not consecutive in " + path);
    map.nodes.push_back(n);
  }
  if (map.nodes.size() < 2) throw IoError("topomap needs at least 2 nodes: " + path);
  return map;
}

}  // namespace topodepth
