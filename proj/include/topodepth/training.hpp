#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "topodepth/checkpoint.hpp"
#include "topodepth/classifier.hpp"
#include "topodepth/config.hpp"
#include "topodepth/cvae.hpp"
#include "topodepth/dataset.hpp"
#include "topodepth/errors.hpp"
#include "topodepth/rng.hpp"
#include "topodepth/scene.hpp"
#include "topodepth/topomap.hpp"

namespace topodepth {

// Batch membership is a pure function of (seed, step), so an interrupted run
// resumed from a checkpoint walks the exact same trajectory as an
// uninterrupted one.
inline std::vector<std::size_t> batch_indices(std::uint64_t seed,
                                              std::string_view purpose, long step,
                                              std::size_t n, int batch_size) {
  std::vector<std::size_t> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = i;
  if (static_cast<std::size_t>(batch_size) >= n) return all;
  Rng rng = named_rng(seed, purpose, static_cast<std::uint64_t>(step));
  for (int i = 0; i < batch_size; ++i) {
    int j = i + rng.bounded(static_cast<int>(n) - i);
    std::swap(all[static_cast<std::size_t>(i)], all[static_cast<std::size_t>(j)]);
  }
  all.resize(static_cast<std::size_t>(batch_size));
  return all;
}

inline Tensor make_cond(int node_id, int num_nodes, bool unconditioned) {
  Tensor cond({num_nodes});
  if (unconditioned) {
    cond.fill(1.0 / num_nodes);
  } else {
    cond.data = one_hot(node_id, num_nodes);
  }
  return cond;
}

struct CvaeTrainResult {
  long steps_run = 0;
  LossRecord final_loss;
  std::string checkpoint_path;
  std::vector<std::string> audit;
};

// Core CVAE loop: seeded per-step batches and eps draws, metrics log line
// per step, checkpoint every checkpoint_every steps and at the end.
inline CvaeTrainResult train_cvae_loop(CvaeModel& model, nn::AdamState& opt,
                                       const LoadedDataset& train,
                                       const TrainConfig& tc, bool unconditioned,
                                       long checkpoint_every,
                                       const std::string& ckpt_path,
                                       const std::string& log_path,
                                       long start_step = 0) {
  if (train.frames.empty()) throw EmptyBatch("no training frames");
  const int num_nodes = model.cfg.num_nodes;
  for (const auto& f : train.frames)
    if (f.node_id < 0 || f.node_id >= num_nodes)
      throw IndexOutOfRange("frame " + std::to_string(f.frame_id) +
                            " labeled with node " + std::to_string(f.node_id) +
                            " outside [0, " + std::to_string(num_nodes) + ")");

  std::ofstream log;
  if (!log_path.empty()) {
    log.open(log_path, start_step > 0 ? std::ios::app : std::ios::trunc);
    if (!log) throw IoError("cannot open training log " + log_path);
    if (start_step == 0)
      log << "step\ttotal\tl_rgb_rgb\tl_dep_dep\tl_rgb_dep\tl_dep_rgb\tkl_rgb\tkl_dep\n";
  }

  CvaeTrainResult res;
  res.audit = train.audit;
  res.checkpoint_path = ckpt_path;
  for (long step = start_step + 1; step <= tc.steps; ++step) {
    auto idx = batch_indices(tc.rng_seed, "cvae-batch", step, train.frames.size(),
                             tc.batch_size);
    CvaeBatch batch;
    for (std::size_t i : idx) {
      const LoadedFrame& f = train.frames[i];
      batch.rgb.push_back(f.rgb);
      batch.dep.push_back(f.dep);
      batch.cond.push_back(make_cond(f.node_id, num_nodes, unconditioned));
    }
    Rng eps_rng = named_rng(tc.rng_seed, "cvae-eps", static_cast<std::uint64_t>(step));
    EpsDraws eps = draw_eps(eps_rng, batch.size(), model.cfg.latent_dim);
    LossRecord rec = train_step(model, opt, batch, tc.kl_weight, tc.kl_dedup,
                                tc.learning_rate, eps);
    rec.step = step;
    res.final_loss = rec;
    res.steps_run = step;
    if (log)
      log << step << '\t' << fmt_f64(rec.total) << '\t' << fmt_f64(rec.l_rgb_rgb)
          << '\t' << fmt_f64(rec.l_dep_dep) << '\t' << fmt_f64(rec.l_rgb_dep)
          << '\t' << fmt_f64(rec.l_dep_rgb) << '\t' << fmt_f64(rec.kl_rgb) << '\t'
          << fmt_f64(rec.kl_dep) << '\n';
    if (!ckpt_path.empty() &&
        (step % checkpoint_every == 0 || step == tc.steps))
      save_cvae_checkpoint(model, opt, tc, step, ckpt_path);
  }
  if (!ckpt_path.empty() && tc.steps == start_step)
    save_cvae_checkpoint(model, opt, tc, start_step, ckpt_path);
  return res;
}

inline ModelConfig model_config_from(const RunConfig& cfg, int num_nodes) {
  ModelConfig mc;
  mc.image_size = cfg.image_size;
  mc.base_channels = cfg.base_channels;
  mc.num_scales = cfg.num_scales;
  mc.latent_dim = cfg.latent_dim;
  mc.num_nodes = num_nodes;
  mc.shared_trunk = cfg.shared_trunk;
  return mc;
}

inline TrainConfig train_config_from(const RunConfig& cfg) {
  TrainConfig tc;
  tc.latent_dim = cfg.latent_dim;
  tc.kl_weight = cfg.kl_weight;
  tc.learning_rate = cfg.learning_rate;
  tc.batch_size = cfg.batch_size;
  tc.steps = cfg.steps;
  tc.rng_seed = cfg.seed;
  tc.kl_dedup = cfg.kl_dedup;
  tc.shared_trunk = cfg.shared_trunk;
  return tc;
}

// Scene json saved by gen-data inside the data dir, falling back to the
// config's scene setting.
inline SceneConfig load_pipeline_scene(const RunConfig& cfg) {
  if (std::filesystem::exists(cfg.scene_path()))
    return load_scene_config(cfg.scene_path());
  if (cfg.scene == "default") return default_scene_config();
  return load_scene_config(cfg.scene);
}

inline NormalizationSpec normalization_from(const RunConfig& cfg,
                                            const SceneConfig& scene) {
  NormalizationSpec spec;
  spec.max_depth = cfg.max_depth > 0 ? cfg.max_depth
                                     : Box3{scene.room_extent}.diagonal();
  return spec;
}

// Full train-cvae stage: load the train split (and only it), build or
// resume the model, run the loop.
inline CvaeTrainResult run_cvae_training(const RunConfig& cfg) {
  cfg.validate();
  TrainConfig tc = train_config_from(cfg);
  tc.validate();
  DatasetManifest manifest = read_manifest(cfg.manifest_path());
  TopoMap map = load_topomap(cfg.topomap_path());
  SceneConfig scene = load_pipeline_scene(cfg);
  NormalizationSpec spec = normalization_from(cfg, scene);
  LoadedDataset train = load_split(manifest, "train", spec, LoadMode::Training,
                                   cfg.fill_tol, static_cast<int>(cfg.fill_max_iters));

  std::string log_path = cfg.data_dir + "/cvae_train_log.tsv";
  if (!cfg.resume_from.empty()) {
    CvaeCheckpoint ck = load_cvae_checkpoint(cfg.resume_from);
    if (ck.model.cfg.num_nodes != map.size())
      throw ShapeMismatch("resume checkpoint was built for a different map");
    TrainConfig resumed = ck.train;
    resumed.steps = tc.steps;  // allow extending a run
    return train_cvae_loop(ck.model, ck.opt, train, resumed,
                           cfg.unconditioned, cfg.checkpoint_every,
                           cfg.resolved_cvae_checkpoint(), log_path, ck.step);
  }

  CvaeModel model = make_cvae(model_config_from(cfg, map.size()), cfg.seed);
  nn::AdamState opt(model.reg);
  return train_cvae_loop(model, opt, train, tc, cfg.unconditioned,
                         cfg.checkpoint_every, cfg.resolved_cvae_checkpoint(),
                         log_path, 0);
}

struct ClassifierTrainResult {
  long steps_run = 0;
  double final_loss = 0;
  std::string checkpoint_path;
  std::vector<std::string> audit;
};

inline ClassifierTrainResult train_classifier_loop(
    ClassifierModel& model, nn::AdamState& opt, const LoadedDataset& train,
    long steps, int batch_size, double learning_rate, std::uint64_t seed,
    long checkpoint_every, const std::string& ckpt_path,
    const std::string& log_path, long start_step = 0) {
  if (train.frames.empty()) throw EmptyBatch("no training frames");
  for (const auto& f : train.frames)
    if (f.node_id < 0 || f.node_id >= model.cfg.num_nodes)
      throw IndexOutOfRange("frame " + std::to_string(f.frame_id) +
                            " labeled with node " + std::to_string(f.node_id));

  std::ofstream log;
  if (!log_path.empty()) {
    log.open(log_path, start_step > 0 ? std::ios::app : std::ios::trunc);
    if (!log) throw IoError("cannot open training log " + log_path);
    if (start_step == 0) log << "step\tcross_entropy\n";
  }
  ClassifierTrainResult res;
  res.audit = train.audit;
  res.checkpoint_path = ckpt_path;
  for (long step = start_step + 1; step <= steps; ++step) {
    auto idx = batch_indices(seed, "cls-batch", step, train.frames.size(), batch_size);
    std::vector<Tensor> xs;
    std::vector<int> ys;
    for (std::size_t i : idx) {
      xs.push_back(train.frames[i].rgb);
      ys.push_back(train.frames[i].node_id);
    }
    double loss = classifier_train_step(model, opt, xs, ys, learning_rate);
    res.final_loss = loss;
    res.steps_run = step;
    if (log) log << step << '\t' << fmt_f64(loss) << '\n';
    if (!ckpt_path.empty() && (step % checkpoint_every == 0 || step == steps))
      save_classifier_checkpoint(model, opt, step, ckpt_path);
  }
  if (!ckpt_path.empty() && steps == start_step)
    save_classifier_checkpoint(model, opt, start_step, ckpt_path);
  return res;
}

inline ClassifierTrainResult run_classifier_training(const RunConfig& cfg) {
  cfg.validate();
  DatasetManifest manifest = read_manifest(cfg.manifest_path());
  TopoMap map = load_topomap(cfg.topomap_path());
  SceneConfig scene = load_pipeline_scene(cfg);
  NormalizationSpec spec = normalization_from(cfg, scene);
  LoadedDataset train = load_split(manifest, "train", spec, LoadMode::Training,
                                   cfg.fill_tol, static_cast<int>(cfg.fill_max_iters));

  ClassifierConfig ccfg;
  ccfg.image_size = cfg.image_size;
  ccfg.base_channels = cfg.classifier_base_channels;
  ccfg.num_scales = cfg.classifier_num_scales;
  ccfg.num_nodes = map.size();
  ClassifierModel model = make_classifier(ccfg, cfg.seed);
  nn::AdamState opt(model.reg);
  return train_classifier_loop(model, opt, train, cfg.classifier_steps,
                               cfg.classifier_batch_size,
                               cfg.classifier_learning_rate, cfg.seed,
                               cfg.checkpoint_every,
                               cfg.resolved_classifier_checkpoint(),
                               cfg.data_dir + "/classifier_train_log.tsv", 0);
}

}  // namespace topodepth
