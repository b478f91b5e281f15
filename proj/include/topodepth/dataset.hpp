#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "topodepth/errors.hpp"
#include "topodepth/image.hpp"
#include "topodepth/preprocess.hpp"
#include "topodepth/raster_tensor.hpp"
#include "topodepth/render.hpp"
#include "topodepth/rng.hpp"
#include "topodepth/scene.hpp"
#include "topodepth/tensor.hpp"
#include "topodepth/textio.hpp"
#include "topodepth/topomap.hpp"
#include "topodepth/trajectory.hpp"

namespace topodepth {

struct FrameRecord {
  long frame_id = 0;
  std::string rgb_path, depth_path;  // relative to the manifest directory
  Vec3 position;
  double yaw = 0;
  double arc_length_m = 0;
  int node_id = 0;
  std::string split = "none";  // none | train | test
};

struct DatasetManifest {
  std::uint64_t scene_hash = 0;
  CameraIntrinsics intrinsics;
  std::vector<FrameRecord> frames;
  std::string root_dir;  // where the manifest was loaded from / written to

  std::vector<std::size_t> split_indices(const std::string& split) const {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < frames.size(); ++i)
      if (frames[i].split == split) idx.push_back(i);
    return idx;
  }
  int max_node_id() const {
    int mx = -1;
    for (const auto& f : frames) mx = std::max(mx, f.node_id);
    return mx;
  }
};

inline constexpr const char* kManifestName = "manifest.txt";

inline void write_manifest(const DatasetManifest& m, const std::string& path) {
  std::string body = "TDMANIFEST 1\n";
  body += "scene_hash " + std::to_string(m.scene_hash) + "\n";
  body += "intrinsics " + std::to_string(m.intrinsics.width) + " " +
          std::to_string(m.intrinsics.height) + " " +
          fmt_f64(m.intrinsics.horizontal_fov) + "\n";
  body +=
      "columns frame_id rgb_path depth_path pos_x pos_y pos_z yaw arc_length_m "
      "node_id split\n";
  for (const auto& f : m.frames) {
    body += std::to_string(f.frame_id) + " " + f.rgb_path + " " + f.depth_path +
            " " + fmt_f64(f.position.x) + " " + fmt_f64(f.position.y) + " " +
            fmt_f64(f.position.z) + " " + fmt_f64(f.yaw) + " " +
            fmt_f64(f.arc_length_m) + " " + std::to_string(f.node_id) + " " +
            f.split + "\n";
  }
  write_text_file(path, body);
}

inline DatasetManifest read_manifest(const std::string& path,
                                     bool check_files = true) {
  std::istringstream in(read_text_file(path));
  std::string line;
  auto next = [&]() {
    if (!std::getline(in, line)) throw IoError("truncated manifest: " + path);
    return split_ws(line);
  };
  auto head = next();
  if (head.size() != 2 || head[0] != "TDMANIFEST")
    throw IoError("not a manifest file: " + path);
  if (head[1] != "1")
    throw VersionMismatch("manifest " + path + " has version " + head[1] +
                          ", expected 1");
  DatasetManifest m;
  m.root_dir = std::filesystem::path(path).parent_path().string();
  if (m.root_dir.empty()) m.root_dir = ".";
  auto sh = next();
  if (sh.size() != 2 || sh[0] != "scene_hash") throw IoError("bad scene_hash line");
  {
    std::uint64_t v = 0;
    auto res = std::from_chars(sh[1].data(), sh[1].data() + sh[1].size(), v);
    if (res.ec != std::errc{}) throw IoError("bad scene hash in " + path);
    m.scene_hash = v;
  }
  auto intr = next();
  if (intr.size() != 4 || intr[0] != "intrinsics") throw IoError("bad intrinsics line");
  m.intrinsics.width = static_cast<int>(parse_i64(intr[1], "width"));
  m.intrinsics.height = static_cast<int>(parse_i64(intr[2], "height"));
  m.intrinsics.horizontal_fov = parse_f64(intr[3], "fov");
  auto cols = next();
  if (cols.empty() || cols[0] != "columns") throw IoError("bad columns line");
  while (std::getline(in, line)) {
    auto t = split_ws(line);
    if (t.empty()) continue;
    if (t.size() != 10) throw IoError("bad manifest row in " + path + ": '" + line + "'");
    FrameRecord f;
    f.frame_id = parse_i64(t[0], "frame_id");
    f.rgb_path = t[1];
    f.depth_path = t[2];
    f.position = {parse_f64(t[3], "pos_x"), parse_f64(t[4], "pos_y"),
                  parse_f64(t[5], "pos_z")};
    f.yaw = parse_f64(t[6], "yaw");
    f.arc_length_m = parse_f64(t[7], "arc_length_m");
    f.node_id = static_cast<int>(parse_i64(t[8], "node_id"));
    f.split = t[9];
    if (f.split != "none" && f.split != "train" && f.split != "test")
      throw IoError("bad split label '" + f.split + "' in " + path);
    m.frames.push_back(std::move(f));
  }
  if (check_files) {
    for (const auto& f : m.frames) {
      auto rgb = std::filesystem::path(m.root_dir) / f.rgb_path;
      auto dep = std::filesystem::path(m.root_dir) / f.depth_path;
      if (!std::filesystem::exists(rgb))
        throw IoError("manifest references missing file " + rgb.string());
      if (!std::filesystem::exists(dep))
        throw IoError("manifest references missing file " + dep.string());
    }
  }
  return m;
}

// Each pixel goes to NaN independently with probability rate; mimics the
// holes a stereo pipeline leaves so the filling stage has work to do.
inline DepthMap punch_holes(const DepthMap& depth, double rate,
                            std::uint64_t rng_seed) {
  if (!(rate >= 0.0) || !(rate < 1.0))
    throw OutOfRange("hole rate must be in [0, 1)");
  DepthMap out = depth;
  Rng rng = named_rng(rng_seed, "punch-holes");
  for (auto& v : out.depths)
    if (rng.uniform() < rate) v = std::numeric_limits<double>::quiet_NaN();
  return out;
}

struct GenerateResult {
  DatasetManifest manifest;
  TopoMap topomap;
  long skipped_poses = 0;  // poses that landed inside an obstacle
};

// Renders every trajectory pose, labels it with its nearest topological
// node, and writes rasters plus the manifest under out_dir. Poses inside an
// obstacle are skipped and counted rather than aborting the run.
inline GenerateResult generate_dataset(const Scene& scene,
                                       const TrajectoryParams& params,
                                       const CameraIntrinsics& intrinsics,
                                       const TopoMap& topomap,
                                       const std::string& out_dir,
                                       double hole_rate = 0.0) {
  intrinsics.validate();
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(out_dir) / "rgb");
  fs::create_directories(fs::path(out_dir) / "depth");

  SceneConfig cfg;
  cfg.room_extent = scene.room_extent;
  cfg.wall_colors = scene.wall_colors;
  cfg.obstacles = scene.obstacles;
  cfg.light_direction = scene.light_direction;

  GenerateResult res;
  res.topomap = topomap;
  res.manifest.scene_hash = scene_config_hash(cfg);
  res.manifest.intrinsics = intrinsics;
  res.manifest.root_dir = out_dir;

  auto samples = generate_trajectory_samples(params);
  long frame_id = 0;
  char name[32];
  for (const auto& s : samples) {
    if (!scene.position_free(s.pose.position)) {
      ++res.skipped_poses;
      continue;
    }
    FramePair frame = render_frame(scene, s.pose, intrinsics);
    if (hole_rate > 0.0)
      frame.depth = punch_holes(frame.depth, hole_rate,
                                params.rng_seed ^ static_cast<std::uint64_t>(frame_id));
    std::snprintf(name, sizeof(name), "%06ld", frame_id);
    std::string rgb_rel = std::string("rgb/") + name + ".ppm";
    std::string dep_rel = std::string("depth/") + name + ".df32";
    write_ppm(frame.rgb, (fs::path(out_dir) / rgb_rel).string());
    write_depth(frame.depth, (fs::path(out_dir) / dep_rel).string());

    FrameRecord rec;
    rec.frame_id = frame_id;
    rec.rgb_path = rgb_rel;
    rec.depth_path = dep_rel;
    rec.position = s.pose.position;
    rec.yaw = s.pose.yaw;
    rec.arc_length_m = s.arc_length;
    rec.node_id = assign_node(topomap, {s.pose.position.x, s.pose.position.y});
    res.manifest.frames.push_back(std::move(rec));
    ++frame_id;
  }
  write_manifest(res.manifest, (fs::path(out_dir) / kManifestName).string());
  return res;
}

// Stratified 90/10-style split: within each node's frame list,
// ceil(fraction * count) seeded-shuffled frames go to test, so every node
// shows up in the held-out set.
inline DatasetManifest split_dataset(const DatasetManifest& manifest,
                                     double test_fraction, std::uint64_t rng_seed) {
  if (!(test_fraction >= 0.0) || !(test_fraction < 1.0))
    throw OutOfRange("test_fraction must be in [0, 1)");
  std::map<int, std::vector<std::size_t>> by_node;
  for (std::size_t i = 0; i < manifest.frames.size(); ++i)
    by_node[manifest.frames[i].node_id].push_back(i);

  DatasetManifest out = manifest;
  for (auto& [node, idx] : by_node) {
    if (idx.size() < 2)
      throw NodeTooSmall("node " + std::to_string(node) + " has only " +
                         std::to_string(idx.size()) + " frame(s); need >= 2");
    long n_test = static_cast<long>(
        std::ceil(test_fraction * static_cast<double>(idx.size()) - 1e-9));
    if (n_test < 0) n_test = 0;
    if (n_test >= static_cast<long>(idx.size()))
      n_test = static_cast<long>(idx.size()) - 1;
    Rng rng = named_rng(rng_seed, "split-shuffle", static_cast<std::uint64_t>(node));
    std::vector<std::size_t> shuffled = idx;
    rng.shuffle(shuffled);
    for (std::size_t k = 0; k < shuffled.size(); ++k)
      out.frames[shuffled[k]].split =
          k < static_cast<std::size_t>(n_test) ? "test" : "train";
  }
  return out;
}

// --- loading frames into model-ready tensors ---

struct LoadedFrame {
  long frame_id = 0;
  int node_id = 0;
  Tensor rgb;      // {3,S,S} in [0,1]
  Tensor dep;      // {1,S,S} normalized; dense (holes filled when requested)
  DepthMap depth_raw;  // meters, as stored (holes preserved)
  double gt_mean_depth = 0;  // over valid pixels
};

struct LoadedDataset {
  std::vector<LoadedFrame> frames;
  std::vector<std::string> audit;  // every raster path this loader opened
  int num_nodes = 0;
  long filled_holes = 0;
  long clamped = 0;
};

enum class LoadMode {
  Training,    // fill holes, normalize: frames carry model-ready targets
  Evaluation,  // keep raw depth only; holes stay for the metric mask
};

// Reads exactly the rasters belonging to `split` and records every path it
// opens; training runs on the result, and the audit proves no test file was
// touched.
inline LoadedDataset load_split(const DatasetManifest& manifest,
                                const std::string& split,
                                const NormalizationSpec& spec,
                                LoadMode mode = LoadMode::Training,
                                double fill_tol = 1e-6, int fill_max_iters = 10000) {
  namespace fs = std::filesystem;
  LoadedDataset out;
  auto idx = manifest.split_indices(split);
  if (idx.empty())
    throw EmptyBatch("manifest has no frames in split '" + split +
                     "'; run the split stage first");
  for (std::size_t i : idx) {
    const FrameRecord& rec = manifest.frames[i];
    std::string rgb_path = (fs::path(manifest.root_dir) / rec.rgb_path).string();
    std::string dep_path = (fs::path(manifest.root_dir) / rec.depth_path).string();
    out.audit.push_back(rgb_path);
    out.audit.push_back(dep_path);

    LoadedFrame f;
    f.frame_id = rec.frame_id;
    f.node_id = rec.node_id;
    f.rgb = rgb_to_tensor(read_ppm(rgb_path));
    f.depth_raw = read_depth(dep_path);

    if (mode == LoadMode::Training) {
      DepthMap dense = f.depth_raw;
      std::size_t holes = dense.hole_count();
      if (holes > 0) {
        dense = fill_holes(dense, fill_tol, fill_max_iters);
        out.filled_holes += static_cast<long>(holes);
      }
      NormalizeResult norm = normalize_depth(dense, spec);
      out.clamped += norm.clamped;
      f.dep = depth_to_tensor(norm.raster);
    }

    double sum = 0;
    long n = 0;
    for (double v : f.depth_raw.depths) {
      if (!std::isnan(v) && v > 0) {
        sum += v;
        ++n;
      }
    }
    f.gt_mean_depth = n > 0 ? sum / static_cast<double>(n) : 0.0;
    out.frames.push_back(std::move(f));
  }
  out.num_nodes = manifest.max_node_id() + 1;
  return out;
}

}  // namespace topodepth
