#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>

#include "topodepth/dataset.hpp"
#include "topodepth/image.hpp"
#include "topodepth/render.hpp"
#include "topodepth/scene.hpp"
#include "topodepth/trajectory.hpp"
#include "test_util.hpp"

using namespace topodepth;

namespace {

SceneConfig bare_room(Vec3 hi) {
  SceneConfig c;
  c.room_extent = {{0, 0, 0}, hi};
  c.light_direction = {0, 0, -1};
  for (auto& w : c.wall_colors) w = {0.5, 0.5, 0.5};
  return c;
}

}  // namespace

TEST_CASE("build_scene accepts an empty room") {
  Scene s = build_scene(bare_room({5, 5, 3}));
  CHECK(s.obstacles.empty());
  CHECK(s.room_diagonal() == Catch::Approx(std::sqrt(25 + 25 + 9)));
}

TEST_CASE("build_scene rejects an obstacle protruding through a wall") {
  SceneConfig c = bare_room({5, 5, 3});
  c.obstacles.push_back({{{4.0, 1.0, 0.0}, {5.5, 2.0, 1.0}}, {0.5, 0.5, 0.5}});
  CHECK_THROWS_AS(build_scene(c), InvalidScene);
  // touching a wall exactly is also not strictly inside
  c.obstacles[0].box.hi.x = 5.0;
  CHECK_THROWS_AS(build_scene(c), InvalidScene);
}

TEST_CASE("build_scene keeps three contained boxes") {
  SceneConfig c = bare_room({5, 5, 3});
  c.obstacles.push_back({{{1, 1, 0.1}, {2, 2, 1}}, {1, 0, 0}});
  c.obstacles.push_back({{{3, 3, 0.1}, {4, 4, 2}}, {0, 1, 0}});
  c.obstacles.push_back({{{0.5, 3.5, 0.1}, {1.5, 4.5, 0.5}}, {0, 0, 1}});
  CHECK(build_scene(c).obstacles.size() == 3);
}

TEST_CASE("build_scene validates colors and light") {
  SceneConfig c = bare_room({5, 5, 3});
  c.wall_colors[2] = {1.2, 0, 0};
  CHECK_THROWS_AS(build_scene(c), InvalidScene);
  c = bare_room({5, 5, 3});
  c.light_direction = {0, 0, 0};
  CHECK_THROWS_AS(build_scene(c), InvalidScene);
  // non-unit light directions are normalized
  c.light_direction = {0, 0, -9.0};
  CHECK(norm(build_scene(c).light_direction) == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("head-on wall depth is exact") {
  // wall at x=4, camera 2 m away looking straight at it
  Scene s = build_scene(bare_room({4, 5, 3}));
  Pose pose{{2.0, 2.5, 1.5}, 0.0};
  CameraIntrinsics cam{9, 9, 1.2};  // odd raster so one ray is the optical axis
  auto frame = render_frame(s, pose, cam);
  CHECK(frame.depth.at(4, 4) == Catch::Approx(2.0).margin(1e-9));
}

TEST_CASE("oblique wall depth follows d / cos(theta)") {
  Scene s = build_scene(bare_room({4, 5, 3}));
  Pose pose{{2.0, 2.5, 1.5}, 0.0};
  CameraIntrinsics cam{9, 9, 0.9};
  auto frame = render_frame(s, pose, cam);
  double tan_half = std::tan(cam.horizontal_fov / 2);
  for (int px = 0; px < cam.width; ++px) {
    double u = (2.0 * (px + 0.5) / cam.width - 1.0) * tan_half;
    double theta = std::atan(u);
    double expect = 2.0 / std::cos(theta);
    CHECK(frame.depth.at(px, 4) == Catch::Approx(expect).margin(1e-9));
  }
}

TEST_CASE("lambert term is 1 when the normal opposes the light") {
  SceneConfig c = bare_room({4, 5, 3});
  c.wall_colors[1] = {0.3, 0.6, 0.9};  // +x wall, inward normal (-1,0,0)
  c.light_direction = {1, 0, 0};
  Scene s = build_scene(c);
  Pose pose{{2.0, 2.5, 1.5}, 0.0};
  CameraIntrinsics cam{9, 9, 0.5};
  auto f = render_frame(s, pose, cam);
  CHECK(f.rgb.at(4, 4, 0) == Catch::Approx(0.3).margin(1e-12));
  CHECK(f.rgb.at(4, 4, 1) == Catch::Approx(0.6).margin(1e-12));
  CHECK(f.rgb.at(4, 4, 2) == Catch::Approx(0.9).margin(1e-12));

  // light from behind the wall: clamped to the 0.1 floor
  c.light_direction = {-1, 0, 0};
  auto f2 = render_frame(build_scene(c), pose, cam);
  CHECK(f2.rgb.at(4, 4, 0) == Catch::Approx(0.03).margin(1e-12));
}

TEST_CASE("rendered depth maps are dense and bounded by the room diagonal") {
  Scene s = build_scene(default_scene_config());
  double diag = s.room_diagonal();
  CameraIntrinsics cam{16, 16, 1.2};
  for (double yaw : {0.0, 1.1, -2.3, 3.0}) {
    Pose pose{{1.2, 1.2, 1.2}, yaw};
    auto f = render_frame(s, pose, cam);
    CHECK(f.depth.hole_count() == 0);
    for (double d : f.depth.depths) {
      CHECK(d > 0);
      CHECK(d <= diag);
    }
    for (double v : f.rgb.pixels) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
}

TEST_CASE("widening the fov never shrinks corner depth on a flat wall") {
  // room wide and tall enough that corner rays stay on the x=4 wall
  Scene s = build_scene(bare_room({4, 12, 12}));
  Pose pose{{2.0, 6.0, 6.0}, 0.0};
  double prev = 0;
  for (double fov : {0.6, 0.9, 1.2, 1.5, 1.9, 2.2}) {
    CameraIntrinsics cam{9, 9, fov};
    auto f = render_frame(s, pose, cam);
    double corner = f.depth.at(0, 0);
    CHECK(corner >= prev);
    prev = corner;
  }
}

TEST_CASE("render_frame rejects poses inside obstacles or outside the room") {
  SceneConfig c = bare_room({5, 5, 3});
  c.obstacles.push_back({{{2, 2, 0.1}, {3, 3, 2}}, {1, 0, 0}});
  Scene s = build_scene(c);
  CameraIntrinsics cam{8, 8, 1.2};
  CHECK_THROWS_AS(render_frame(s, Pose{{2.5, 2.5, 1.0}, 0.0}, cam), PoseInsideObstacle);
  CHECK_THROWS_AS(render_frame(s, Pose{{7.0, 2.5, 1.0}, 0.0}, cam), PoseInsideObstacle);
  CHECK_NOTHROW(render_frame(s, Pose{{1.0, 1.0, 1.0}, 0.0}, cam));
}

TEST_CASE("rendering is deterministic") {
  Scene s = build_scene(default_scene_config());
  Pose pose{{1.4, 1.3, 1.2}, 0.7};
  CameraIntrinsics cam{16, 16, 1.2};
  auto a = render_frame(s, pose, cam);
  auto b = render_frame(s, pose, cam);
  CHECK(a.depth.depths == b.depth.depths);
  CHECK(a.rgb.pixels == b.rgb.pixels);
}

TEST_CASE("square loop yields perimeter / spacing poses per lap") {
  TrajectoryParams p;
  p.waypoints = {{0, 0}, {3, 0}, {3, 3}, {0, 3}};
  p.frame_spacing = 0.5;
  p.num_laps = 1;
  p.noise_std = 0;
  p.lateral_offset_step = 0;
  auto poses = generate_trajectory(p);
  REQUIRE(poses.size() == 24);

  // zero noise and offset: poses sit exactly on the loop
  CHECK(poses[0].position.x == Catch::Approx(0.0).margin(1e-12));
  CHECK(poses[1].position.x == Catch::Approx(0.5).margin(1e-12));
  CHECK(poses[1].position.y == Catch::Approx(0.0).margin(1e-12));
  CHECK(poses[6].position.x == Catch::Approx(3.0).margin(1e-12));
  CHECK(poses[6].position.y == Catch::Approx(0.0).margin(1e-12));
  CHECK(poses[7].position.y == Catch::Approx(0.5).margin(1e-12));
  // yaw follows the tangent
  CHECK(poses[1].yaw == Catch::Approx(0.0).margin(1e-12));
  CHECK(poses[7].yaw == Catch::Approx(kPi / 2).margin(1e-12));

  p.num_laps = 3;
  CHECK(generate_trajectory(p).size() == 72);
}

TEST_CASE("trajectory laps ride alternating lateral offsets") {
  TrajectoryParams p;
  p.waypoints = {{0, 0}, {3, 0}, {3, 3}, {0, 3}};
  p.frame_spacing = 0.5;
  p.num_laps = 5;
  p.noise_std = 0;
  p.lateral_offset_step = 0.25;
  auto samples = generate_trajectory_samples(p);
  REQUIRE(samples.size() == 5 * 24);
  // sample 1 of each lap sits on the south leg heading +x; left normal is +y
  double expected[5] = {0.0, 0.25, -0.25, 0.5, -0.5};
  for (int lap = 0; lap < 5; ++lap) {
    const auto& s = samples[static_cast<std::size_t>(lap * 24 + 1)];
    CHECK(s.lap == lap);
    CHECK(s.pose.position.y == Catch::Approx(expected[lap]).margin(1e-12));
    CHECK(s.pose.position.x == Catch::Approx(0.5).margin(1e-12));
  }
}

TEST_CASE("trajectories are deterministic per seed") {
  TrajectoryParams p;
  p.waypoints = {{0, 0}, {3, 0}, {3, 3}, {0, 3}};
  p.frame_spacing = 0.5;
  p.num_laps = 2;
  p.noise_std = 0.05;
  p.lateral_offset_step = 0.25;
  p.rng_seed = 77;
  auto a = generate_trajectory(p);
  auto b = generate_trajectory(p);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].position.x == b[i].position.x);
    CHECK(a[i].position.y == b[i].position.y);
    CHECK(a[i].yaw == b[i].yaw);
  }
  p.rng_seed = 78;
  auto c = generate_trajectory(p);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].position.y != c[i].position.y) any_diff = true;
  CHECK(any_diff);
}

TEST_CASE("degenerate loops are rejected") {
  TrajectoryParams p;
  p.waypoints = {{1, 1}, {1, 1}};
  CHECK_THROWS_AS(generate_trajectory(p), DegenerateLoop);
  p.waypoints = {{1, 1}};
  CHECK_THROWS_AS(generate_trajectory(p), DegenerateLoop);
}

TEST_CASE("punch_holes leaves rate-0 maps alone and hits the binomial band") {
  DepthMap d = DepthMap::zeros(100, 100);
  for (auto& v : d.depths) v = 2.0;
  DepthMap same = punch_holes(d, 0.0, 5);
  CHECK(same.depths == d.depths);

  DepthMap holed = punch_holes(d, 0.25, 5);
  std::size_t n = holed.hole_count();
  CHECK(n >= 2200);
  CHECK(n <= 2800);

  CHECK_THROWS_AS(punch_holes(d, 1.0, 5), OutOfRange);
  CHECK_NOTHROW(punch_holes(d, 0.999, 5));
  // deterministic per seed
  DepthMap again = punch_holes(d, 0.25, 5);
  CHECK(again.hole_count() == n);
}

TEST_CASE("ppm and depth files round-trip") {
  TempDir tmp("imageio");
  RgbImage im = RgbImage::zeros(8, 6);
  Rng rng(3);
  for (auto& v : im.pixels) v = rng.uniform();
  write_ppm(im, tmp.file("a.ppm"));
  RgbImage back = read_ppm(tmp.file("a.ppm"));
  REQUIRE(back.width == 8);
  REQUIRE(back.height == 6);
  for (std::size_t i = 0; i < im.pixels.size(); ++i)
    CHECK(std::abs(back.pixels[i] - im.pixels[i]) <= 0.5 / 255.0 + 1e-12);

  DepthMap d = DepthMap::zeros(5, 4);
  for (auto& v : d.depths) v = 1.0 + rng.uniform();
  d.at(2, 1) = std::numeric_limits<double>::quiet_NaN();
  write_depth(d, tmp.file("a.df32"));
  DepthMap dback = read_depth(tmp.file("a.df32"));
  REQUIRE(dback.width == 5);
  CHECK(std::isnan(dback.at(2, 1)));
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 5; ++x) {
      if (x == 2 && y == 1) continue;
      CHECK(dback.at(x, y) ==
            Catch::Approx(d.at(x, y)).margin(d.at(x, y) * 1e-6));
    }
}

TEST_CASE("generate_dataset writes one manifest row per free pose") {
  TempDir tmp("gendata");
  Scene scene = build_scene(default_scene_config());
  TrajectoryParams params;
  params.waypoints = default_scene_config().loop_waypoints;
  params.frame_spacing = 0.5;
  params.num_laps = 1;
  params.noise_std = 0;
  params.lateral_offset_step = 0;
  params.rng_seed = 9;
  CameraIntrinsics cam{16, 16, 1.2};
  auto ref = reference_trajectory(params);
  TopoMap map = build_topomap(ref, 1.5);

  auto res = generate_dataset(scene, params, cam, map, tmp.path());
  CHECK(res.skipped_poses == 0);
  auto poses = generate_trajectory(params);
  REQUIRE(res.manifest.frames.size() == poses.size());
  for (const auto& f : res.manifest.frames) {
    CHECK(f.node_id >= 0);
    CHECK(f.node_id < map.size());
    CHECK(std::filesystem::exists(std::filesystem::path(tmp.path()) / f.rgb_path));
    CHECK(std::filesystem::exists(std::filesystem::path(tmp.path()) / f.depth_path));
  }

  // byte-identical manifest on a re-run with the same seed
  std::string first = read_text_file(tmp.file("manifest.txt"));
  generate_dataset(scene, params, cam, map, tmp.path());
  CHECK(read_text_file(tmp.file("manifest.txt")) == first);

  DatasetManifest loaded = read_manifest(tmp.file("manifest.txt"));
  CHECK(loaded.frames.size() == res.manifest.frames.size());
  CHECK(loaded.scene_hash == res.manifest.scene_hash);
}
