#pragma once

#include <cstdint>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "topodepth/errors.hpp"
#include "topodepth/textio.hpp"

namespace topodepth {

// Flat key=value run configuration. Every field has a default, can come
// from a config file, and can be overridden per-run from the command line;
// unknown keys are hard errors so typos cannot silently fall back to
// defaults.
struct RunConfig {
  std::uint64_t seed = 1;

  // model
  int image_size = 32;
  int latent_dim = 32;
  int base_channels = 8;
  int num_scales = 3;
  bool shared_trunk = false;
  bool unconditioned = false;

  // cvae training
  double kl_weight = 1.0;
  bool kl_dedup = false;
  double learning_rate = 1e-3;
  int batch_size = 16;
  long steps = 2000;
  long checkpoint_every = 500;

  // classifier training
  int classifier_base_channels = 8;
  int classifier_num_scales = 3;
  double classifier_learning_rate = 1e-3;
  int classifier_batch_size = 32;
  long classifier_steps = 1200;

  // world + data generation
  std::string scene = "default";  // "default" or a scene json path
  double node_spacing = 1.5;
  double frame_spacing = 0.25;
  double lateral_offset_step = 0.25;
  int num_laps = 6;
  double noise_std = 0.05;
  double camera_height = 1.2;
  double horizontal_fov = 1.2;  // radians
  double hole_rate = 0.0;

  // preprocing + eval
  double max_depth = 0;  // 0 = use the room diagonal of the scene
  double test_fraction = 0.1;
  double fill_tol = 1e-6;
  long fill_max_iters = 10000;

  // paths
  std::string data_dir = "data";
  std::string cvae_checkpoint;        // default <data_dir>/cvae.ckpt
  std::string classifier_checkpoint;  // default <data_dir>/classifier.ckpt
  std::string resume_from;

  std::string resolved_cvae_checkpoint() const {
    return cvae_checkpoint.empty() ? data_dir + "/cvae.ckpt" : cvae_checkpoint;
  }
  std::string resolved_classifier_checkpoint() const {
    return classifier_checkpoint.empty() ? data_dir + "/classifier.ckpt"
                                         : classifier_checkpoint;
  }
  std::string manifest_path() const { return data_dir + "/manifest.txt"; }
  std::string topomap_path() const { return data_dir + "/topomap.txt"; }
  std::string scene_path() const { return data_dir + "/scene.json"; }

  void validate() const {
    if (image_size < 8) throw ConfigError("image_size must be >= 8");
    if (latent_dim < 1) throw ConfigError("latent_dim must be >= 1");
    if (base_channels < 1) throw ConfigError("base_channels must be >= 1");
    if (num_scales < 1) throw ConfigError("num_scales must be >= 1");
    if (kl_weight < 0) throw ConfigError("kl_weight must be >= 0");
    if (!(learning_rate > 0)) throw ConfigError("learning_rate must be > 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (steps < 0) throw ConfigError("steps must be >= 0");
    if (checkpoint_every < 1) throw ConfigError("checkpoint_every must be >= 1");
    if (classifier_batch_size < 1) throw ConfigError("classifier_batch_size must be >= 1");
    if (classifier_steps < 0) throw ConfigError("classifier_steps must be >= 0");
    if (!(classifier_learning_rate > 0))
      throw ConfigError("classifier_learning_rate must be > 0");
    if (!(node_spacing > 0)) throw ConfigError("node_spacing must be > 0");
    if (!(frame_spacing > 0)) throw ConfigError("frame_spacing must be > 0");
    if (num_laps < 1) throw ConfigError("num_laps must be >= 1");
    if (noise_std < 0) throw ConfigError("noise_std must be >= 0");
    if (!(horizontal_fov > 0) || !(horizontal_fov < 3.14159))
      throw ConfigError("horizontal_fov must be in (0, pi)");
    if (!(hole_rate >= 0) || !(hole_rate < 1))
      throw ConfigError("hole_rate must be in [0, 1)");
    if (max_depth < 0) throw ConfigError("max_depth must be >= 0 (0 = auto)");
    if (!(test_fraction >= 0) || !(test_fraction < 1))
      throw ConfigError("test_fraction must be in [0, 1)");
    if (!(fill_tol > 0)) throw ConfigError("fill_tol must be > 0");
    if (fill_max_iters < 1) throw ConfigError("fill_max_iters must be >= 1");
    if (data_dir.empty()) throw ConfigError("data_dir must not be empty");
  }
};

namespace detail {

using ConfigFieldPtr =
    std::variant<std::uint64_t RunConfig::*, int RunConfig::*, long RunConfig::*,
                 double RunConfig::*, bool RunConfig::*, std::string RunConfig::*>;

struct ConfigField {
  const char* name;
  ConfigFieldPtr ptr;
};

inline const std::vector<ConfigField>& config_fields() {
  static const std::vector<ConfigField> fields = {
      {"seed", &RunConfig::seed},
      {"image_size", &RunConfig::image_size},
      {"latent_dim", &RunConfig::latent_dim},
      {"base_channels", &RunConfig::base_channels},
      {"num_scales", &RunConfig::num_scales},
      {"shared_trunk", &RunConfig::shared_trunk},
      {"unconditioned", &RunConfig::unconditioned},
      {"kl_weight", &RunConfig::kl_weight},
      {"kl_dedup", &RunConfig::kl_dedup},
      {"learning_rate", &RunConfig::learning_rate},
      {"batch_size", &RunConfig::batch_size},
      {"steps", &RunConfig::steps},
      {"checkpoint_every", &RunConfig::checkpoint_every},
      {"classifier_base_channels", &RunConfig::classifier_base_channels},
      {"classifier_num_scales", &RunConfig::classifier_num_scales},
      {"classifier_learning_rate", &RunConfig::classifier_learning_rate},
      {"classifier_batch_size", &RunConfig::classifier_batch_size},
      {"classifier_steps", &RunConfig::classifier_steps},
      {"scene", &RunConfig::scene},
      {"node_spacing", &RunConfig::node_spacing},
      {"frame_spacing", &RunConfig::frame_spacing},
      {"lateral_offset_step", &RunConfig::lateral_offset_step},
      {"num_laps", &RunConfig::num_laps},
      {"noise_std", &RunConfig::noise_std},
      {"camera_height", &RunConfig::camera_height},
      {"horizontal_fov", &RunConfig::horizontal_fov},
      {"hole_rate", &RunConfig::hole_rate},
      {"max_depth", &RunConfig::max_depth},
      {"test_fraction", &RunConfig::test_fraction},
      {"fill_tol", &RunConfig::fill_tol},
      {"fill_max_iters", &RunConfig::fill_max_iters},
      {"data_dir", &RunConfig::data_dir},
      {"cvae_checkpoint", &RunConfig::cvae_checkpoint},
      {"classifier_checkpoint", &RunConfig::classifier_checkpoint},
      {"resume_from", &RunConfig::resume_from},
  };
  return fields;
}

inline bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw ConfigError("bad boolean for " + key + ": '" + v + "'");
}

}  // namespace detail

inline void config_set(RunConfig& cfg, const std::string& key,
                       const std::string& value) {
  for (const auto& f : detail::config_fields()) {
    if (key != f.name) continue;
    try {
      std::visit(
          [&](auto ptr) {
            auto& field = cfg.*ptr;
            using T = std::decay_t<decltype(field)>;
            if constexpr (std::is_same_v<T, std::string>) {
              field = value;
            } else if constexpr (std::is_same_v<T, bool>) {
              field = detail::parse_bool(value, key);
            } else if constexpr (std::is_same_v<T, double>) {
              field = parse_f64(value, key);
            } else if constexpr (std::is_same_v<T, std::uint64_t>) {
              std::uint64_t v = 0;
              auto res =
                  std::from_chars(value.data(), value.data() + value.size(), v);
              if (res.ec != std::errc{} || res.ptr != value.data() + value.size())
                throw ConfigError("bad unsigned integer for " + key + ": '" +
                                  value + "'");
              field = v;
            } else {
              field = static_cast<T>(parse_i64(value, key));
            }
          },
          f.ptr);
    } catch (const ConfigError&) {
      throw;
    } catch (const Error&) {
      throw ConfigError("bad value for " + key + ": '" + value + "'");
    }
    return;
  }
  throw ConfigError("unknown config key '" + key + "'");
}

// `key = value` lines; '#' starts a comment; blank lines ignored.
inline void config_load_file(RunConfig& cfg, const std::string& path) {
  std::istringstream in(read_text_file(path));
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto body = trim(line);
    if (body.empty()) continue;
    auto eq = body.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(lineno) +
                        ": expected 'key = value'");
    std::string key(trim(body.substr(0, eq)));
    std::string value(trim(body.substr(eq + 1)));
    config_set(cfg, key, value);
  }
}

// Fully resolved config, suitable for logging and for reloading.
inline std::string config_dump(const RunConfig& cfg) {
  std::string s;
  for (const auto& f : detail::config_fields()) {
    std::visit(
        [&](auto ptr) {
          const auto& field = cfg.*ptr;
          using T = std::decay_t<decltype(field)>;
          s += f.name;
          s += " = ";
          if constexpr (std::is_same_v<T, std::string>) {
            s += field;
          } else if constexpr (std::is_same_v<T, bool>) {
            s += field ? "true" : "false";
          } else if constexpr (std::is_same_v<T, double>) {
            s += fmt_f64(field);
          } else {
            s += std::to_string(field);
          }
          s += "\n";
        },
        f.ptr);
  }
  return s;
}

}  // namespace topodepth
