#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <map>
#include <set>

#include "topodepth/config.hpp"
#include "topodepth/dataset.hpp"
#include "topodepth/metrics.hpp"
#include "topodepth/training.hpp"
#include "test_util.hpp"

using namespace topodepth;
namespace fs = std::filesystem;

namespace {

// Small synthetic dataset on disk: 8x8 rasters, one lap plus offsets.
struct MiniWorld {
  TempDir tmp{"pipeline"};
  DatasetManifest manifest;
  TopoMap map;
  NormalizationSpec spec;

  explicit MiniWorld(std::uint64_t seed = 5, int laps = 2) {
    SceneConfig scene_cfg = default_scene_config();
    Scene scene = build_scene(scene_cfg);
    TrajectoryParams params;
    params.waypoints = scene_cfg.loop_waypoints;
    params.frame_spacing = 0.5;
    params.num_laps = laps;
    params.noise_std = 0.03;
    params.lateral_offset_step = 0.2;
    params.rng_seed = seed;
    CameraIntrinsics cam{8, 8, 1.2};
    auto ref = reference_trajectory(params);
    map = build_topomap(ref, 1.5);
    save_topomap(map, tmp.file("topomap.txt"));
    save_scene_config(scene_cfg, tmp.file("scene.json"));
    auto gen = generate_dataset(scene, params, cam, map, tmp.path());
    manifest = split_dataset(gen.manifest, 0.15, seed);
    write_manifest(manifest, tmp.file("manifest.txt"));
    spec.max_depth = scene.room_diagonal();
  }

  RunConfig config() const {
    RunConfig cfg;
    cfg.seed = 9;
    cfg.data_dir = tmp.path();
    cfg.image_size = 8;
    cfg.base_channels = 4;
    cfg.num_scales = 2;
    cfg.latent_dim = 4;
    cfg.classifier_base_channels = 4;
    cfg.classifier_num_scales = 2;
    cfg.batch_size = 4;
    cfg.steps = 12;
    cfg.checkpoint_every = 4;
    cfg.classifier_steps = 8;
    cfg.classifier_batch_size = 4;
    cfg.kl_weight = 0.01;
    return cfg;
  }
};

int run_cli(const std::string& args, const std::string& log_path) {
  std::string cmd = std::string(TOPODEPTH_CLI_PATH) + " " + args + " > " +
                    log_path + " 2>&1";
  int rc = std::system(cmd.c_str());
  return WEXITSTATUS(rc);
}

}  // namespace

TEST_CASE("stratified split puts ceil(fraction * count) frames per node in test") {
  DatasetManifest m;
  m.intrinsics = {8, 8, 1.2};
  for (int node = 0; node < 3; ++node)
    for (int i = 0; i < 10; ++i) {
      FrameRecord f;
      f.frame_id = node * 10 + i;
      f.rgb_path = "r";
      f.depth_path = "d";
      f.node_id = node;
      m.frames.push_back(f);
    }
  DatasetManifest out = split_dataset(m, 0.1, 3);
  std::map<int, int> test_per_node;
  for (const auto& f : out.frames)
    if (f.split == "test") ++test_per_node[f.node_id];
  REQUIRE(test_per_node.size() == 3);  // every node is represented
  for (auto& [node, cnt] : test_per_node) CHECK(cnt == 1);

  DatasetManifest none = split_dataset(m, 0.0, 3);
  for (const auto& f : none.frames) CHECK(f.split == "train");

  DatasetManifest again = split_dataset(m, 0.1, 3);
  for (std::size_t i = 0; i < out.frames.size(); ++i)
    CHECK(again.frames[i].split == out.frames[i].split);

  DatasetManifest other = split_dataset(m, 0.1, 4);
  bool differs = false;
  for (std::size_t i = 0; i < out.frames.size(); ++i)
    if (other.frames[i].split != out.frames[i].split) differs = true;
  CHECK(differs);

  FrameRecord lonely;
  lonely.frame_id = 99;
  lonely.rgb_path = "r";
  lonely.depth_path = "d";
  lonely.node_id = 7;
  m.frames.push_back(lonely);
  CHECK_THROWS_AS(split_dataset(m, 0.1, 3), NodeTooSmall);
}

TEST_CASE("manifest write/read round-trip is lossless") {
  MiniWorld world;
  DatasetManifest loaded = read_manifest(world.tmp.file("manifest.txt"));
  std::string again = world.tmp.file("manifest_rt.txt");
  loaded.root_dir = world.manifest.root_dir;
  write_manifest(loaded, again);
  CHECK(read_text_file(world.tmp.file("manifest.txt")) == read_text_file(again));

  // missing referenced files are an error at load
  DatasetManifest broken = loaded;
  broken.frames[0].rgb_path = "rgb/does_not_exist.ppm";
  write_manifest(broken, world.tmp.file("broken.txt"));
  CHECK_THROWS_AS(read_manifest(world.tmp.file("broken.txt")), IoError);
}

TEST_CASE("run config: defaults, file loading, overrides, unknown keys") {
  RunConfig cfg;
  CHECK_NOTHROW(cfg.validate());

  TempDir tmp("config");
  write_text_file(tmp.file("run.cfg"),
                  "# comment\n"
                  "steps = 123\n"
                  "kl_weight = 0.25\n"
                  "kl_dedup = true\n"
                  "scene = default\n");
  config_load_file(cfg, tmp.file("run.cfg"));
  CHECK(cfg.steps == 123);
  CHECK(cfg.kl_weight == 0.25);
  CHECK(cfg.kl_dedup);

  config_set(cfg, "steps", "77");
  CHECK(cfg.steps == 77);
  CHECK_THROWS_AS(config_set(cfg, "stepz", "1"), ConfigError);
  CHECK_THROWS_AS(config_set(cfg, "steps", "abc"), ConfigError);

  write_text_file(tmp.file("bad.cfg"), "unknown_key = 5\n");
  RunConfig cfg2;
  CHECK_THROWS_AS(config_load_file(cfg2, tmp.file("bad.cfg")), ConfigError);

  // resolved dump reloads to the same dump
  std::string dump = config_dump(cfg);
  write_text_file(tmp.file("dump.cfg"), dump);
  RunConfig cfg3;
  config_load_file(cfg3, tmp.file("dump.cfg"));
  CHECK(config_dump(cfg3) == dump);
}

TEST_CASE("invalid config fails before any file is touched") {
  RunConfig cfg;
  cfg.latent_dim = 0;
  cfg.data_dir = "/nonexistent/nowhere";
  CHECK_THROWS_AS(run_cvae_training(cfg), ConfigError);
}

TEST_CASE("training reads only train-split files") {
  MiniWorld world;
  RunConfig cfg = world.config();
  auto res = run_cvae_training(cfg);
  REQUIRE(res.steps_run == cfg.steps);

  std::set<std::string> test_files;
  for (const auto& f : world.manifest.frames)
    if (f.split == "test") {
      test_files.insert((fs::path(world.tmp.path()) / f.rgb_path).string());
      test_files.insert((fs::path(world.tmp.path()) / f.depth_path).string());
    }
  REQUIRE(!test_files.empty());
  REQUIRE(!res.audit.empty());
  for (const auto& opened : res.audit) CHECK(!test_files.contains(opened));

  auto cls = run_classifier_training(cfg);
  for (const auto& opened : cls.audit) CHECK(!test_files.contains(opened));
}

TEST_CASE("resumed training walks the identical trajectory") {
  MiniWorld world;
  RunConfig full = world.config();
  full.cvae_checkpoint = world.tmp.file("full.ckpt");
  auto full_res = run_cvae_training(full);

  RunConfig half = world.config();
  half.steps = 6;
  half.cvae_checkpoint = world.tmp.file("half.ckpt");
  run_cvae_training(half);

  RunConfig resumed = world.config();
  resumed.resume_from = world.tmp.file("half.ckpt");
  resumed.cvae_checkpoint = world.tmp.file("resumed.ckpt");
  auto resumed_res = run_cvae_training(resumed);

  CHECK(resumed_res.steps_run == full_res.steps_run);
  // the resumed run must land on bit-identical parameters
  CvaeCheckpoint a = load_cvae_checkpoint(world.tmp.file("full.ckpt"));
  CvaeCheckpoint b = load_cvae_checkpoint(world.tmp.file("resumed.ckpt"));
  REQUIRE(a.model.reg.params().size() == b.model.reg.params().size());
  for (std::size_t i = 0; i < a.model.reg.params().size(); ++i)
    CHECK(a.model.reg.params()[i]->value.data == b.model.reg.params()[i]->value.data);
  // and the first resumed loss sits on the original trajectory (within 10%)
  CHECK(resumed_res.final_loss.total ==
        Catch::Approx(full_res.final_loss.total).epsilon(1e-12));
}

TEST_CASE("identical seeds give byte-identical checkpoints and reports") {
  MiniWorld world;
  RunConfig cfg = world.config();
  cfg.cvae_checkpoint = world.tmp.file("runA.ckpt");
  run_cvae_training(cfg);
  cfg.cvae_checkpoint = world.tmp.file("runB.ckpt");
  run_cvae_training(cfg);
  CHECK(read_text_file(world.tmp.file("runA.ckpt")) ==
        read_text_file(world.tmp.file("runB.ckpt")));
}

TEST_CASE("cli: usage errors exit 2 with a synopsis") {
  TempDir tmp("cli");
  CHECK(run_cli("definitely-not-a-command", tmp.file("log0.txt")) == 2);
  CHECK(run_cli("", tmp.file("log1.txt")) == 2);
  std::string log = read_text_file(tmp.file("log1.txt"));
  CHECK(log.find("Usage") != std::string::npos);
}

TEST_CASE("cli: eval on a missing checkpoint names the path and fails") {
  MiniWorld world;
  TempDir tmp("clieval");
  std::string missing = world.tmp.file("nope.ckpt");
  int rc = run_cli("eval --set data_dir=" + world.tmp.path() +
                       " --set cvae_checkpoint=" + missing,
                   tmp.file("log.txt"));
  CHECK(rc == 1);
  std::string log = read_text_file(tmp.file("log.txt"));
  CHECK(log.find("nope.ckpt") != std::string::npos);
}

TEST_CASE("cli: quickstart pipeline runs end to end") {
  TempDir data("cliq");
  TempDir logs("cliqlog");
  std::string common =
      " --set data_dir=" + data.path() +
      " --set image_size=8 --set base_channels=4 --set num_scales=2"
      " --set latent_dim=4 --set classifier_base_channels=4"
      " --set classifier_num_scales=2 --set frame_spacing=0.5"
      " --set num_laps=2 --set steps=10 --set classifier_steps=10"
      " --set batch_size=4 --set classifier_batch_size=4"
      " --set checkpoint_every=5 --set kl_weight=0.01 --seed 33";

  CHECK(run_cli("gen-data" + common, logs.file("gen.txt")) == 0);
  CHECK(fs::exists(data.file("manifest.txt")));
  CHECK(fs::exists(data.file("topomap.txt")));
  CHECK(fs::exists(data.file("scene.json")));

  CHECK(run_cli("split" + common, logs.file("split.txt")) == 0);
  CHECK(run_cli("train-cvae" + common, logs.file("cvae.txt")) == 0);
  CHECK(fs::exists(data.file("cvae.ckpt")));
  CHECK(fs::exists(data.file("cvae_train_log.tsv")));
  CHECK(run_cli("train-classifier" + common, logs.file("cls.txt")) == 0);
  CHECK(fs::exists(data.file("classifier.ckpt")));

  CHECK(run_cli("eval --split test" + common, logs.file("eval.txt")) == 0);
  CHECK(fs::exists(data.file("metrics_test.txt")));
  CHECK(fs::exists(data.file("metrics_test.json")));

  CHECK(run_cli("sample --node 3 --count 4" + common, logs.file("sample.txt")) == 0);
  int pairs = 0;
  for (auto& entry : fs::directory_iterator(data.file("samples")))
    if (entry.path().extension() == ".ppm") ++pairs;
  CHECK(pairs == 4);

  // resolved config is logged for reproducibility
  std::string gen_log = read_text_file(logs.file("gen.txt"));
  CHECK(gen_log.find("resolved config") != std::string::npos);
  CHECK(gen_log.find("seed = 33") != std::string::npos);

  // the training log carries every loss record field
  std::string head = read_text_file(data.file("cvae_train_log.tsv"));
  CHECK(head.find("l_rgb_dep") != std::string::npos);
  CHECK(head.find("kl_dep") != std::string::npos);

  // fill-holes round-trips a depth file through the cli
  DepthMap d = DepthMap::zeros(8, 8);
  for (auto& v : d.depths) v = 2.5;
  d.at(3, 3) = std::numeric_limits<double>::quiet_NaN();
  write_depth(d, data.file("holey.df32"));
  CHECK(run_cli("fill-holes " + data.file("holey.df32") + " " +
                    data.file("dense.df32"),
                logs.file("fill.txt")) == 0);
  DepthMap filled = read_depth(data.file("dense.df32"));
  CHECK(filled.hole_count() == 0);
  CHECK(filled.at(3, 3) == Catch::Approx(2.5).margin(1e-5));
}
