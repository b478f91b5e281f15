#pragma once

#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "topodepth/classifier.hpp"
#include "topodepth/cvae.hpp"
#include "topodepth/errors.hpp"
#include "topodepth/nn.hpp"
#include "topodepth/textio.hpp"

namespace topodepth {

// Versioned container of named flat f64 arrays with shape metadata. Text
// header (kind, key/value meta, array directory, payload checksum) followed
// by the raw array bytes in directory order. Shared by the CVAE and the
// classifier, distinguished by the kind tag.
inline constexpr int kCheckpointVersion = 1;

struct CheckpointData {
  std::string kind;
  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<std::pair<std::string, Tensor>> arrays;

  const std::string& meta_at(const std::string& key) const {
    for (const auto& [k, v] : meta)
      if (k == key) return v;
    throw IoError("checkpoint missing meta key '" + key + "'");
  }
  bool has_meta(const std::string& key) const {
    for (const auto& [k, v] : meta)
      if (k == key) return true;
    return false;
  }
  const Tensor& array_at(const std::string& name) const {
    for (const auto& [n, t] : arrays)
      if (n == name) return t;
    throw IoError("checkpoint missing array '" + name + "'");
  }
};

inline void write_checkpoint(const CheckpointData& ck, const std::string& path) {
  std::string payload;
  for (const auto& [name, t] : ck.arrays) {
    std::size_t off = payload.size();
    payload.resize(off + t.data.size() * sizeof(double));
    std::memcpy(payload.data() + off, t.data.data(), t.data.size() * sizeof(double));
  }
  std::uint64_t checksum = fnv1a64_bytes(payload.data(), payload.size());

  std::string head;
  head += "TDCKPT " + std::to_string(kCheckpointVersion) + "\n";
  head += "kind " + ck.kind + "\n";
  head += "meta " + std::to_string(ck.meta.size()) + "\n";
  for (const auto& [k, v] : ck.meta) head += k + " " + v + "\n";
  head += "arrays " + std::to_string(ck.arrays.size()) + "\n";
  for (const auto& [name, t] : ck.arrays) {
    head += name + " " + std::to_string(t.shape.size());
    for (int d : t.shape) head += " " + std::to_string(d);
    head += "\n";
  }
  head += "payload " + std::to_string(payload.size()) + " " +
          std::to_string(checksum) + "\n";
  head += "DATA\n";

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path);
  out << head;
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) throw IoError("short write to checkpoint " + path);
}

inline CheckpointData read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path);
  std::string line;
  auto next_line = [&]() {
    if (!std::getline(in, line)) throw IoError("truncated checkpoint header: " + path);
    return split_ws(line);
  };

  auto magic = next_line();
  if (magic.size() != 2 || magic[0] != "TDCKPT")
    throw IoError("not a checkpoint file: " + path);
  if (magic[1] != std::to_string(kCheckpointVersion))
    throw VersionMismatch("checkpoint " + path + " has format version " + magic[1] +
                          "; this build reads version " +
                          std::to_string(kCheckpointVersion));

  CheckpointData ck;
  auto kind = next_line();
  if (kind.size() != 2 || kind[0] != "kind") throw IoError("bad kind line in " + path);
  ck.kind = kind[1];

  auto metah = next_line();
  if (metah.size() != 2 || metah[0] != "meta") throw IoError("bad meta line in " + path);
  long n_meta = parse_i64(metah[1], "meta count");
  for (long i = 0; i < n_meta; ++i) {
    if (!std::getline(in, line)) throw IoError("truncated checkpoint meta: " + path);
    auto sp = line.find(' ');
    if (sp == std::string::npos) throw IoError("bad meta entry in " + path);
    ck.meta.emplace_back(line.substr(0, sp), std::string(trim(line.substr(sp + 1))));
  }

  auto arrh = next_line();
  if (arrh.size() != 2 || arrh[0] != "arrays")
    throw IoError("bad arrays line in " + path);
  long n_arrays = parse_i64(arrh[1], "array count");
  std::vector<std::pair<std::string, std::vector<int>>> dir;
  for (long i = 0; i < n_arrays; ++i) {
    auto t = next_line();
    if (t.size() < 2) throw IoError("bad array directory entry in " + path);
    int ndim = static_cast<int>(parse_i64(t[1], "ndim"));
    if (static_cast<int>(t.size()) != 2 + ndim)
      throw IoError("bad array directory entry in " + path);
    std::vector<int> shape;
    for (int d = 0; d < ndim; ++d)
      shape.push_back(static_cast<int>(parse_i64(t[2 + static_cast<std::size_t>(d)], "dim")));
    dir.emplace_back(t[0], shape);
  }

  auto pay = next_line();
  if (pay.size() != 3 || pay[0] != "payload")
    throw IoError("bad payload line in " + path);
  std::size_t payload_size = static_cast<std::size_t>(parse_i64(pay[1], "payload size"));
  std::uint64_t want_checksum = 0;
  {
    auto res = std::from_chars(pay[2].data(), pay[2].data() + pay[2].size(),
                               want_checksum);
    if (res.ec != std::errc{} || res.ptr != pay[2].data() + pay[2].size())
      throw IoError("bad checksum in " + path);
  }

  auto data = next_line();
  if (data.size() != 1 || data[0] != "DATA") throw IoError("missing DATA marker in " + path);

  std::string payload(payload_size, '\0');
  in.read(payload.data(), static_cast<std::streamsize>(payload_size));
  if (in.gcount() != static_cast<std::streamsize>(payload_size))
    throw ChecksumMismatch("checkpoint payload truncated: " + path);
  std::uint64_t got = fnv1a64_bytes(payload.data(), payload.size());
  if (got != want_checksum)
    throw ChecksumMismatch("checkpoint payload corrupted: " + path);

  std::size_t off = 0;
  for (auto& [name, shape] : dir) {
    Tensor t(shape);
    std::size_t bytes = t.data.size() * sizeof(double);
    if (off + bytes > payload.size())
      throw ChecksumMismatch("checkpoint directory exceeds payload: " + path);
    std::memcpy(t.data.data(), payload.data() + off, bytes);
    off += bytes;
    ck.arrays.emplace_back(name, std::move(t));
  }
  if (off != payload.size())
    throw ChecksumMismatch("checkpoint payload has trailing bytes: " + path);
  return ck;
}

// --- CVAE checkpoints ---

namespace detail {
inline void put_params(CheckpointData& ck, const nn::ParamRegistry& reg,
                       const nn::AdamState& opt) {
  for (const auto& p : reg.params()) ck.arrays.emplace_back(p->name, p->value);
  for (std::size_t i = 0; i < reg.params().size(); ++i)
    ck.arrays.emplace_back("adam.m." + reg.params()[i]->name, opt.m[i]);
  for (std::size_t i = 0; i < reg.params().size(); ++i)
    ck.arrays.emplace_back("adam.v." + reg.params()[i]->name, opt.v[i]);
}

inline void take_params(const CheckpointData& ck, nn::ParamRegistry& reg,
                        nn::AdamState& opt) {
  for (const auto& p : reg.params()) {
    const Tensor& t = ck.array_at(p->name);
    if (t.shape != p->value.shape)
      throw ShapeMismatch("checkpoint array " + p->name + " has the wrong shape");
    p->value = t;
  }
  for (std::size_t i = 0; i < reg.params().size(); ++i) {
    opt.m[i] = ck.array_at("adam.m." + reg.params()[i]->name);
    opt.v[i] = ck.array_at("adam.v." + reg.params()[i]->name);
  }
}
}  // namespace detail

struct CvaeCheckpoint {
  CvaeModel model;
  nn::AdamState opt;
  TrainConfig train;
  long step = 0;

  CvaeCheckpoint(CvaeModel m, nn::AdamState o) : model(std::move(m)), opt(std::move(o)) {}
};

inline void save_cvae_checkpoint(const CvaeModel& m, const nn::AdamState& opt,
                                 const TrainConfig& train, long step,
                                 const std::string& path) {
  CheckpointData ck;
  ck.kind = "cvae";
  auto& meta = ck.meta;
  meta.emplace_back("image_size", std::to_string(m.cfg.image_size));
  meta.emplace_back("rgb_channels", std::to_string(m.cfg.rgb_channels));
  meta.emplace_back("depth_channels", std::to_string(m.cfg.depth_channels));
  meta.emplace_back("base_channels", std::to_string(m.cfg.base_channels));
  meta.emplace_back("num_scales", std::to_string(m.cfg.num_scales));
  meta.emplace_back("latent_dim", std::to_string(m.cfg.latent_dim));
  meta.emplace_back("num_nodes", std::to_string(m.cfg.num_nodes));
  meta.emplace_back("shared_trunk", m.cfg.shared_trunk ? "1" : "0");
  meta.emplace_back("lrelu_slope", fmt_f64(m.cfg.lrelu_slope));
  meta.emplace_back("kl_weight", fmt_f64(train.kl_weight));
  meta.emplace_back("learning_rate", fmt_f64(train.learning_rate));
  meta.emplace_back("batch_size", std::to_string(train.batch_size));
  meta.emplace_back("steps", std::to_string(train.steps));
  meta.emplace_back("rng_seed", std::to_string(train.rng_seed));
  meta.emplace_back("kl_dedup", train.kl_dedup ? "1" : "0");
  meta.emplace_back("step", std::to_string(step));
  meta.emplace_back("adam_t", std::to_string(opt.t));
  detail::put_params(ck, m.reg, opt);
  write_checkpoint(ck, path);
}

inline CvaeCheckpoint load_cvae_checkpoint(const std::string& path) {
  CheckpointData ck = read_checkpoint(path);
  if (ck.kind != "cvae")
    throw IoError("checkpoint " + path + " holds a '" + ck.kind + "' model, not a cvae");
  ModelConfig cfg;
  cfg.image_size = static_cast<int>(parse_i64(ck.meta_at("image_size"), "image_size"));
  cfg.rgb_channels = static_cast<int>(parse_i64(ck.meta_at("rgb_channels"), "rgb_channels"));
  cfg.depth_channels =
      static_cast<int>(parse_i64(ck.meta_at("depth_channels"), "depth_channels"));
  cfg.base_channels =
      static_cast<int>(parse_i64(ck.meta_at("base_channels"), "base_channels"));
  cfg.num_scales = static_cast<int>(parse_i64(ck.meta_at("num_scales"), "num_scales"));
  cfg.latent_dim = static_cast<int>(parse_i64(ck.meta_at("latent_dim"), "latent_dim"));
  cfg.num_nodes = static_cast<int>(parse_i64(ck.meta_at("num_nodes"), "num_nodes"));
  cfg.shared_trunk = ck.meta_at("shared_trunk") == "1";
  cfg.lrelu_slope = parse_f64(ck.meta_at("lrelu_slope"), "lrelu_slope");

  CvaeModel model = make_cvae(cfg, 0);
  nn::AdamState opt(model.reg);
  detail::take_params(ck, model.reg, opt);
  opt.t = parse_i64(ck.meta_at("adam_t"), "adam_t");

  CvaeCheckpoint out(std::move(model), std::move(opt));
  out.train.latent_dim = cfg.latent_dim;
  out.train.kl_weight = parse_f64(ck.meta_at("kl_weight"), "kl_weight");
  out.train.learning_rate = parse_f64(ck.meta_at("learning_rate"), "learning_rate");
  out.train.batch_size = static_cast<int>(parse_i64(ck.meta_at("batch_size"), "batch_size"));
  out.train.steps = parse_i64(ck.meta_at("steps"), "steps");
  out.train.rng_seed = static_cast<std::uint64_t>(parse_i64(ck.meta_at("rng_seed"), "rng_seed"));
  out.train.kl_dedup = ck.meta_at("kl_dedup") == "1";
  out.train.shared_trunk = cfg.shared_trunk;
  out.step = parse_i64(ck.meta_at("step"), "step");
  return out;
}

// --- classifier checkpoints ---

struct ClassifierCheckpoint {
  ClassifierModel model;
  nn::AdamState opt;
  long step = 0;

  ClassifierCheckpoint(ClassifierModel m, nn::AdamState o)
      : model(std::move(m)), opt(std::move(o)) {}
};

inline void save_classifier_checkpoint(const ClassifierModel& m,
                                       const nn::AdamState& opt, long step,
                                       const std::string& path) {
  CheckpointData ck;
  ck.kind = "classifier";
  ck.meta.emplace_back("image_size", std::to_string(m.cfg.image_size));
  ck.meta.emplace_back("in_channels", std::to_string(m.cfg.in_channels));
  ck.meta.emplace_back("base_channels", std::to_string(m.cfg.base_channels));
  ck.meta.emplace_back("num_scales", std::to_string(m.cfg.num_scales));
  ck.meta.emplace_back("num_nodes", std::to_string(m.cfg.num_nodes));
  ck.meta.emplace_back("lrelu_slope", fmt_f64(m.cfg.lrelu_slope));
  ck.meta.emplace_back("step", std::to_string(step));
  ck.meta.emplace_back("adam_t", std::to_string(opt.t));
  detail::put_params(ck, m.reg, opt);
  write_checkpoint(ck, path);
}

inline ClassifierCheckpoint load_classifier_checkpoint(const std::string& path) {
  CheckpointData ck = read_checkpoint(path);
  if (ck.kind != "classifier")
    throw IoError("checkpoint " + path + " holds a '" + ck.kind +
                  "' model, not a classifier");
  ClassifierConfig cfg;
  cfg.image_size = static_cast<int>(parse_i64(ck.meta_at("image_size"), "image_size"));
  cfg.in_channels = static_cast<int>(parse_i64(ck.meta_at("in_channels"), "in_channels"));
  cfg.base_channels =
      static_cast<int>(parse_i64(ck.meta_at("base_channels"), "base_channels"));
  cfg.num_scales = static_cast<int>(parse_i64(ck.meta_at("num_scales"), "num_scales"));
  cfg.num_nodes = static_cast<int>(parse_i64(ck.meta_at("num_nodes"), "num_nodes"));
  cfg.lrelu_slope = parse_f64(ck.meta_at("lrelu_slope"), "lrelu_slope");
  ClassifierModel model = make_classifier(cfg, 0);
  nn::AdamState opt(model.reg);
  detail::take_params(ck, model.reg, opt);
  opt.t = parse_i64(ck.meta_at("adam_t"), "adam_t");
  ClassifierCheckpoint out(std::move(model), std::move(opt));
  out.step = parse_i64(ck.meta_at("step"), "step");
  return out;
}

}  // namespace topodepth
