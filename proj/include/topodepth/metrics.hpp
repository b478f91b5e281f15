#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "topodepth/classifier.hpp"
#include "topodepth/cvae.hpp"
#include "topodepth/dataset.hpp"
#include "topodepth/errors.hpp"
#include "topodepth/image.hpp"
#include "topodepth/textio.hpp"
#include "topodepth/topomap.hpp"

namespace topodepth {

struct MetricsReport {
  double mean_gt_depth = 0;  // meters
  double rmse = 0;           // meters
  double log_rmse = 0;
  double abs_rel = 0;
  double sq_rel = 0;  // meters
  double delta1 = 0, delta2 = 0, delta3 = 0;
  double topo_accuracy = 0, topo_off_by_one = 0;
  long pixel_count = 0, frame_count = 0;
  long clamped_estimates = 0;     // estimates floored at 1e-6 for ratio metrics
  std::string conditioning = "predicted";  // predicted | oracle | constant
};

// Pixel-weighted running sums over every valid pixel of a split; drained
// into a report once. Valid = ground truth is not a hole and positive.
class DepthMetricAccumulator {
 public:
  void add_pair(const DepthMap& estimated, const DepthMap& ground_truth) {
    if (estimated.width != ground_truth.width ||
        estimated.height != ground_truth.height)
      throw ShapeMismatch("depth metric rasters differ in size");
    for (std::size_t i = 0; i < ground_truth.depths.size(); ++i) {
      double g = ground_truth.depths[i];
      if (std::isnan(g) || !(g > 0)) continue;
      double e = estimated.depths[i];
      double e_floor = e;
      if (!(e_floor >= 1e-6)) {
        e_floor = 1e-6;
        ++clamped_;
      }
      double d = e - g;
      se_ += d * d;
      double ld = std::log(e_floor) - std::log(g);
      log_se_ += ld * ld;
      abs_rel_ += std::abs(d) / g;
      sq_rel_ += d * d / g;
      gt_sum_ += g;
      double ratio = std::max(g / e_floor, e_floor / g);
      if (ratio < 1.25) ++d1_;
      if (ratio < 1.25 * 1.25) ++d2_;
      if (ratio < 1.25 * 1.25 * 1.25) ++d3_;
      ++n_;
    }
  }

  long pixels() const { return n_; }

  void finalize_into(MetricsReport& r) const {
    if (n_ == 0) throw NoValidPixels("no valid ground-truth pixels to score");
    double n = static_cast<double>(n_);
    r.mean_gt_depth = gt_sum_ / n;
    r.rmse = std::sqrt(se_ / n);
    r.log_rmse = std::sqrt(log_se_ / n);
    r.abs_rel = abs_rel_ / n;
    r.sq_rel = sq_rel_ / n;
    r.delta1 = static_cast<double>(d1_) / n;
    r.delta2 = static_cast<double>(d2_) / n;
    r.delta3 = static_cast<double>(d3_) / n;
    r.pixel_count = n_;
    r.clamped_estimates = clamped_;
  }

 private:
  double se_ = 0, log_se_ = 0, abs_rel_ = 0, sq_rel_ = 0, gt_sum_ = 0;
  long d1_ = 0, d2_ = 0, d3_ = 0, n_ = 0, clamped_ = 0;
};

// Metrics for a single estimated/ground-truth pair.
inline MetricsReport depth_metrics(const DepthMap& estimated,
                                   const DepthMap& ground_truth) {
  DepthMetricAccumulator acc;
  acc.add_pair(estimated, ground_truth);
  MetricsReport r;
  acc.finalize_into(r);
  r.frame_count = 1;
  return r;
}

// Exact-match accuracy and loop-adjacent (off-by-one) accuracy. Adjacency is
// modular on the loop: ids differing by 1 mod num_nodes count as correct.
inline std::pair<double, double> topo_metrics(const std::vector<int>& predictions,
                                              const std::vector<int>& truths,
                                              int num_nodes) {
  if (predictions.size() != truths.size() || predictions.empty())
    throw LengthMismatch("topo_metrics needs equal-length non-empty id lists");
  long exact = 0, near = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    int p = predictions[i], t = truths[i];
    if (p < 0 || p >= num_nodes || t < 0 || t >= num_nodes)
      throw IndexOutOfRange("node id outside [0, " + std::to_string(num_nodes) + ")");
    int d = std::abs(p - t);
    if (d == 0) ++exact;
    if (d == 0 || d == 1 || d == num_nodes - 1) ++near;
  }
  double n = static_cast<double>(predictions.size());
  return {static_cast<double>(exact) / n, static_cast<double>(near) / n};
}

struct EvalOptions {
  bool oracle_node = false;    // condition on the true node instead of the prediction
  bool constant_cond = false;  // condition on a uniform vector (ablation models)
};

// Runs the full test-time path over one split: classify the node from RGB,
// condition the depth decoder on it, score against stored ground truth.
// Frames are visited in ascending frame id so reports are bit-stable.
inline MetricsReport evaluate_split(const CvaeModel& cvae,
                                    const ClassifierModel& classifier,
                                    const DatasetManifest& manifest,
                                    const std::string& split, const TopoMap& map,
                                    const NormalizationSpec& spec,
                                    const EvalOptions& opts = {}) {
  if (map.size() != cvae.cfg.num_nodes)
    throw ShapeMismatch("topomap has " + std::to_string(map.size()) +
                        " nodes but the model was built for " +
                        std::to_string(cvae.cfg.num_nodes));
  LoadedDataset data = load_split(manifest, split, spec, LoadMode::Evaluation);

  DepthMetricAccumulator acc;
  std::vector<int> preds, truths;
  const int n_nodes = cvae.cfg.num_nodes;
  Tensor constant_cond({n_nodes});
  constant_cond.fill(1.0 / n_nodes);

  for (const LoadedFrame& f : data.frames) {
    try {
      int pred = predict_node(classifier, f.rgb);
      preds.push_back(pred);
      truths.push_back(f.node_id);
      Tensor cond({n_nodes});
      if (opts.constant_cond) {
        cond = constant_cond;
      } else {
        int node = opts.oracle_node ? f.node_id : pred;
        cond.data = one_hot(node, n_nodes);
      }
      auto [mean, logvar] = cvae_encode(cvae, Domain::Rgb, f.rgb);
      (void)logvar;
      Tensor raster = cvae_decode(cvae, Domain::Dep, mean, cond);
      DepthMap est = denormalize_depth(tensor_to_depth_raster(raster), spec);
      acc.add_pair(est, f.depth_raw);
    } catch (const Error& e) {
      throw Error("frame " + std::to_string(f.frame_id) + ": " + e.what());
    }
  }

  MetricsReport r;
  acc.finalize_into(r);
  r.frame_count = static_cast<long>(data.frames.size());
  auto [accu, offby] = topo_metrics(preds, truths, n_nodes);
  r.topo_accuracy = accu;
  r.topo_off_by_one = offby;
  r.conditioning = opts.constant_cond ? "constant" : (opts.oracle_node ? "oracle" : "predicted");
  return r;
}

// --- serialization ---

inline std::string metrics_to_kv(const MetricsReport& r) {
  std::string s;
  s += "mean_gt_depth " + fmt_f64(r.mean_gt_depth) + "\n";
  s += "rmse " + fmt_f64(r.rmse) + "\n";
  s += "log_rmse " + fmt_f64(r.log_rmse) + "\n";
  s += "abs_rel " + fmt_f64(r.abs_rel) + "\n";
  s += "sq_rel " + fmt_f64(r.sq_rel) + "\n";
  s += "delta1 " + fmt_f64(r.delta1) + "\n";
  s += "delta2 " + fmt_f64(r.delta2) + "\n";
  s += "delta3 " + fmt_f64(r.delta3) + "\n";
  s += "topo_accuracy " + fmt_f64(r.topo_accuracy) + "\n";
  s += "topo_off_by_one " + fmt_f64(r.topo_off_by_one) + "\n";
  s += "pixel_count " + std::to_string(r.pixel_count) + "\n";
  s += "frame_count " + std::to_string(r.frame_count) + "\n";
  s += "clamped_estimates " + std::to_string(r.clamped_estimates) + "\n";
  s += "conditioning " + r.conditioning + "\n";
  return s;
}

inline nlohmann::json metrics_to_json(const MetricsReport& r) {
  nlohmann::json j;
  j["mean_gt_depth"] = r.mean_gt_depth;
  j["rmse"] = r.rmse;
  j["log_rmse"] = r.log_rmse;
  j["abs_rel"] = r.abs_rel;
  j["sq_rel"] = r.sq_rel;
  j["delta1"] = r.delta1;
  j["delta2"] = r.delta2;
  j["delta3"] = r.delta3;
  j["topo_accuracy"] = r.topo_accuracy;
  j["topo_off_by_one"] = r.topo_off_by_one;
  j["pixel_count"] = r.pixel_count;
  j["frame_count"] = r.frame_count;
  j["clamped_estimates"] = r.clamped_estimates;
  j["conditioning"] = r.conditioning;
  return j;
}

// One row shaped like the usual depth-metrics tables.
inline std::string metrics_table_row(const std::string& label,
                                     const MetricsReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "%-12s %9.3f %9.4f %9.4f %9.4f %9.4f %8.4f %8.4f %8.4f %8.4f %8.4f",
                label.c_str(), r.mean_gt_depth, r.rmse, r.log_rmse, r.abs_rel,
                r.sq_rel, r.delta1, r.delta2, r.delta3, r.topo_accuracy,
                r.topo_off_by_one);
  return buf;
}

inline std::string metrics_table_header() {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "%-12s %9s %9s %9s %9s %9s %8s %8s %8s %8s %8s", "split",
                "meandep", "rmse", "logrmse", "absrel", "sqrel", "d<1.25",
                "d<1.25^2", "d<1.25^3", "topoacc", "offby1");
  return buf;
}

}  // namespace topodepth
