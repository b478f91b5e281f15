// topodepth command line: dataset generation, topological mapping, hole
// filling, splitting, training, evaluation, and per-node sampling.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "topodepth/topodepth.hpp"

namespace td = topodepth;
namespace fs = std::filesystem;

namespace {

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;  // key=value
  bool seed_set = false;
  std::uint64_t seed = 0;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "key = value config file");
  cmd->add_option("--set", args.overrides,
                  "override a config field, e.g. --set steps=500 (repeatable)")
      ->expected(-1);
  cmd->add_option("--seed", args.seed, "root random seed")
      ->each([&args](const std::string&) { args.seed_set = true; });
}

td::RunConfig resolve_config(const CommonArgs& args) {
  td::RunConfig cfg;
  if (!args.config_path.empty()) td::config_load_file(cfg, args.config_path);
  for (const auto& kv : args.overrides) {
    auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw td::ConfigError("--set expects key=value, got '" + kv + "'");
    td::config_set(cfg, std::string(td::trim(kv.substr(0, eq))),
                   std::string(td::trim(kv.substr(eq + 1))));
  }
  if (args.seed_set) cfg.seed = args.seed;
  cfg.validate();
  std::cout << "# resolved config\n" << td::config_dump(cfg) << "# end config\n";
  return cfg;
}

td::SceneConfig scene_for(const td::RunConfig& cfg) {
  if (cfg.scene == "default") return td::default_scene_config();
  return td::load_scene_config(cfg.scene);
}

td::TrajectoryParams trajectory_from(const td::RunConfig& cfg,
                                     const td::SceneConfig& scene) {
  if (scene.loop_waypoints.size() < 2)
    throw td::ConfigError("scene has no loop_waypoints to fly");
  td::TrajectoryParams params;
  params.waypoints = scene.loop_waypoints;
  params.frame_spacing = cfg.frame_spacing;
  params.lateral_offset_step = cfg.lateral_offset_step;
  params.num_laps = cfg.num_laps;
  params.noise_std = cfg.noise_std;
  params.rng_seed = cfg.seed;
  params.camera_height = cfg.camera_height;
  return params;
}

td::CameraIntrinsics intrinsics_from(const td::RunConfig& cfg) {
  td::CameraIntrinsics cam;
  cam.width = cfg.image_size;
  cam.height = cfg.image_size;
  cam.horizontal_fov = cfg.horizontal_fov;
  return cam;
}

int cmd_gen_data(const CommonArgs& args) {
  td::RunConfig cfg = resolve_config(args);
  td::SceneConfig scene_cfg = scene_for(cfg);
  td::Scene scene = td::build_scene(scene_cfg);
  td::TrajectoryParams params = trajectory_from(cfg, scene_cfg);

  fs::create_directories(cfg.data_dir);
  td::save_scene_config(scene_cfg, cfg.scene_path());
  auto ref = td::reference_trajectory(params);
  td::TopoMap map = td::build_topomap(ref, cfg.node_spacing);
  td::save_topomap(map, cfg.topomap_path());

  auto res = td::generate_dataset(scene, params, intrinsics_from(cfg), map,
                                  cfg.data_dir, cfg.hole_rate);
  std::cout << "wrote " << res.manifest.frames.size() << " frames ("
            << res.skipped_poses << " poses skipped inside obstacles), "
            << map.size() << " topological nodes, manifest at "
            << cfg.manifest_path() << "\n";
  return 0;
}

int cmd_build_topomap(const CommonArgs& args) {
  td::RunConfig cfg = resolve_config(args);
  td::SceneConfig scene_cfg = td::load_pipeline_scene(cfg);
  td::TrajectoryParams params = trajectory_from(cfg, scene_cfg);
  auto ref = td::reference_trajectory(params);
  td::TopoMap map = td::build_topomap(ref, cfg.node_spacing);
  fs::create_directories(cfg.data_dir);
  td::save_topomap(map, cfg.topomap_path());
  std::cout << "topomap with " << map.size() << " nodes (spacing "
            << map.spacing << " m) written to " << cfg.topomap_path() << "\n";
  return 0;
}

int cmd_split(const CommonArgs& args) {
  td::RunConfig cfg = resolve_config(args);
  td::DatasetManifest manifest = td::read_manifest(cfg.manifest_path());
  td::DatasetManifest out =
      td::split_dataset(manifest, cfg.test_fraction, cfg.seed);
  td::write_manifest(out, cfg.manifest_path());
  long n_train = static_cast<long>(out.split_indices("train").size());
  long n_test = static_cast<long>(out.split_indices("test").size());
  std::cout << "split " << out.frames.size() << " frames into " << n_train
            << " train / " << n_test << " test (stratified per node)\n";
  return 0;
}

int cmd_train_cvae(const CommonArgs& args) {
  td::RunConfig cfg = resolve_config(args);
  auto res = td::run_cvae_training(cfg);
  std::cout << "trained " << res.steps_run << " steps; final total loss "
            << td::fmt_f64(res.final_loss.total) << "; checkpoint at "
            << res.checkpoint_path << "\n";
  return 0;
}

int cmd_train_classifier(const CommonArgs& args) {
  td::RunConfig cfg = resolve_config(args);
  auto res = td::run_classifier_training(cfg);
  std::cout << "trained " << res.steps_run << " steps; final cross-entropy "
            << td::fmt_f64(res.final_loss) << "; checkpoint at "
            << res.checkpoint_path << "\n";
  return 0;
}

int cmd_eval(const CommonArgs& args, const std::string& split, bool oracle_node,
             bool unconditioned) {
  td::RunConfig cfg = resolve_config(args);
  td::DatasetManifest manifest = td::read_manifest(cfg.manifest_path());
  td::TopoMap map = td::load_topomap(cfg.topomap_path());
  td::SceneConfig scene = td::load_pipeline_scene(cfg);
  td::NormalizationSpec spec = td::normalization_from(cfg, scene);
  td::CvaeCheckpoint cvae = td::load_cvae_checkpoint(cfg.resolved_cvae_checkpoint());
  td::ClassifierCheckpoint cls =
      td::load_classifier_checkpoint(cfg.resolved_classifier_checkpoint());

  td::EvalOptions opts;
  opts.oracle_node = oracle_node;
  opts.constant_cond = unconditioned || cfg.unconditioned;
  td::MetricsReport report = td::evaluate_split(cvae.model, cls.model, manifest,
                                                split, map, spec, opts);
  std::cout << td::metrics_table_header() << "\n"
            << td::metrics_table_row(split, report) << "\n";
  std::string base = cfg.data_dir + "/metrics_" + split;
  td::write_text_file(base + ".txt", td::metrics_to_kv(report));
  td::write_text_file(base + ".json", td::metrics_to_json(report).dump(2) + "\n");
  std::cout << "metrics written to " << base << ".txt and " << base << ".json\n";
  return 0;
}

int cmd_sample(const CommonArgs& args, int node, int count,
               const std::string& out_dir) {
  td::RunConfig cfg = resolve_config(args);
  td::CvaeCheckpoint cvae = td::load_cvae_checkpoint(cfg.resolved_cvae_checkpoint());
  td::SceneConfig scene = td::load_pipeline_scene(cfg);
  td::NormalizationSpec spec = td::normalization_from(cfg, scene);
  std::string dir = out_dir.empty() ? cfg.data_dir + "/samples" : out_dir;
  fs::create_directories(dir);
  for (int i = 0; i < count; ++i) {
    td::Rng rng = td::named_rng(cfg.seed, "sample",
                                static_cast<std::uint64_t>(node) * 1000003u +
                                    static_cast<std::uint64_t>(i));
    auto [rgb, depth] = td::sample_node(cvae.model, node, rng, spec);
    char name[64];
    std::snprintf(name, sizeof(name), "node%03d_sample%03d", node, i);
    td::write_ppm(rgb, dir + "/" + name + ".ppm");
    td::write_depth(depth, dir + "/" + name + ".df32");
  }
  std::cout << "wrote " << count << " sampled rgb/depth pairs for node " << node
            << " under " << dir << "\n";
  return 0;
}

int cmd_fill_holes(const std::string& in_path, const std::string& out_path,
                   double tol, long max_iters) {
  td::DepthMap in = td::read_depth(in_path);
  std::size_t holes = in.hole_count();
  td::DepthMap out = td::fill_holes(in, tol, static_cast<int>(max_iters));
  td::write_depth(out, out_path);
  std::cout << "filled " << holes << " hole pixels; wrote " << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"location-conditioned monocular depth estimation pipeline"};
  app.require_subcommand(1);

  CommonArgs gen_args, topo_args, split_args, tc_args, tcls_args, eval_args,
      sample_args;

  auto* gen = app.add_subcommand("gen-data", "raycast a synthetic rgb/depth dataset");
  add_common(gen, gen_args);

  auto* topo = app.add_subcommand("build-topomap",
                                  "place topological nodes along the reference loop");
  add_common(topo, topo_args);

  std::string fill_in, fill_out;
  double fill_tol = 1e-6;
  long fill_iters = 10000;
  auto* fill = app.add_subcommand("fill-holes", "fill NaN holes in a depth file");
  fill->add_option("input", fill_in, "input depth file")->required();
  fill->add_option("output", fill_out, "output depth file")->required();
  fill->add_option("--tol", fill_tol, "convergence tolerance");
  fill->add_option("--max-iters", fill_iters, "iteration cap");

  auto* split = app.add_subcommand("split", "assign stratified train/test splits");
  add_common(split, split_args);

  auto* traincvae = app.add_subcommand("train-cvae", "train the paired cvae");
  add_common(traincvae, tc_args);
  std::string resume;
  traincvae->add_option("--resume", resume, "checkpoint to resume from");

  auto* traincls =
      app.add_subcommand("train-classifier", "train the topological pose classifier");
  add_common(traincls, tcls_args);

  auto* eval = app.add_subcommand("eval", "evaluate a trained pipeline on a split");
  add_common(eval, eval_args);
  std::string eval_split = "test";
  bool oracle_node = false, eval_uncond = false;
  eval->add_option("--split", eval_split, "train or test")
      ->check(CLI::IsMember({"train", "test"}));
  eval->add_flag("--oracle-node", oracle_node,
                 "condition on the true node instead of the classifier output");
  eval->add_flag("--unconditioned", eval_uncond,
                 "condition on a constant vector (ablation models)");

  auto* sample = app.add_subcommand("sample", "hallucinate rgb/depth pairs per node");
  add_common(sample, sample_args);
  int sample_node_id = 0, sample_count = 1;
  std::string sample_out;
  sample->add_option("--node", sample_node_id, "topological node id")->required();
  sample->add_option("--count", sample_count, "number of pairs");
  sample->add_option("--out", sample_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help() << "\n";
    return 2;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(gen_args);
    if (topo->parsed()) return cmd_build_topomap(topo_args);
    if (fill->parsed()) return cmd_fill_holes(fill_in, fill_out, fill_tol, fill_iters);
    if (split->parsed()) return cmd_split(split_args);
    if (traincvae->parsed()) {
      if (!resume.empty())
        tc_args.overrides.push_back("resume_from=" + resume);
      return cmd_train_cvae(tc_args);
    }
    if (traincls->parsed()) return cmd_train_classifier(tcls_args);
    if (eval->parsed())
      return cmd_eval(eval_args, eval_split, oracle_node, eval_uncond);
    if (sample->parsed())
      return cmd_sample(sample_args, sample_node_id, sample_count, sample_out);
  } catch (const td::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
