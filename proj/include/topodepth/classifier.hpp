#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "topodepth/errors.hpp"
#include "topodepth/nn.hpp"
#include "topodepth/rng.hpp"
#include "topodepth/tensor.hpp"

namespace topodepth {

// Small from-scratch conv net mapping an RGB raster to one logit per
// topological node.
struct ClassifierConfig {
  int image_size = 32;
  int in_channels = 3;
  int base_channels = 8;
  int num_scales = 3;
  int num_nodes = 0;
  double lrelu_slope = 0.2;

  int feat_dim() const {
    int ch = base_channels << (num_scales - 1);
    int hw = image_size >> num_scales;
    return ch * hw * hw;
  }
  void validate() const {
    if (num_nodes < 1) throw ConfigError("classifier needs num_nodes >= 1");
    if (image_size % (1 << num_scales) != 0)
      throw ConfigError("image_size must be divisible by 2^num_scales");
    if ((image_size >> num_scales) < 1)
      throw ConfigError("too many scales for this image size");
  }
};

struct ClassifierModel {
  ClassifierConfig cfg;
  nn::ParamRegistry reg;
  std::vector<nn::Conv2d> convs;
  std::vector<nn::InstanceNorm> norms;
  nn::Dense head;

  ClassifierModel() = default;
  ClassifierModel(ClassifierModel&&) = default;
  ClassifierModel& operator=(ClassifierModel&&) = default;
};

inline ClassifierModel make_classifier(const ClassifierConfig& cfg,
                                       std::uint64_t seed) {
  cfg.validate();
  ClassifierModel m;
  m.cfg = cfg;
  int ch = cfg.in_channels;
  for (int s = 0; s < cfg.num_scales; ++s) {
    int out = cfg.base_channels << s;
    m.convs.push_back(
        nn::make_conv2d(m.reg, "cls.conv" + std::to_string(s), ch, out, 3, 2, 1));
    m.norms.push_back(nn::make_instnorm(m.reg, "cls.norm" + std::to_string(s), out));
    ch = out;
  }
  m.head = nn::make_dense(m.reg, "cls.head", cfg.feat_dim(), cfg.num_nodes);
  Rng rng = named_rng(seed, "classifier-init");
  for (const auto& p : m.reg.params()) {
    if (!p->name.ends_with(".W")) continue;
    const auto& s = p->value.shape;
    double fan_in = s.size() == 4 ? static_cast<double>(s[1]) * s[2] * s[3]
                                  : static_cast<double>(s[1]);
    bool head = p->name == "cls.head.W";
    nn::fill_normal(p->value, rng, head ? std::sqrt(1.0 / fan_in)
                                        : std::sqrt(2.0 / fan_in));
  }
  return m;
}

struct ClassifierCache {
  Tensor input;
  std::vector<Tensor> conv_out, norm_out, block_out;
  std::vector<nn::InstNormCache> norm_caches;
  Tensor flat;
};

inline Tensor classify_logits(const ClassifierModel& m, const Tensor& x,
                              ClassifierCache* cache_out = nullptr) {
  require_shape(x, {m.cfg.in_channels, m.cfg.image_size, m.cfg.image_size},
                "classifier raster");
  ClassifierCache local;
  ClassifierCache& cache = cache_out ? *cache_out : local;
  cache.input = x;
  cache.conv_out.clear();
  cache.norm_out.clear();
  cache.block_out.clear();
  cache.norm_caches.assign(m.convs.size(), {});
  const Tensor* cur = &x;
  for (std::size_t s = 0; s < m.convs.size(); ++s) {
    cache.conv_out.push_back(conv2d_forward(m.convs[s], *cur));
    cache.norm_out.push_back(
        instnorm_forward(m.norms[s], cache.conv_out[s], cache.norm_caches[s]));
    cache.block_out.push_back(nn::lrelu_forward(cache.norm_out[s], m.cfg.lrelu_slope));
    cur = &cache.block_out[s];
  }
  Tensor flat({static_cast<int>(cur->data.size())});
  flat.data = cur->data;
  cache.flat = flat;
  Tensor logits = dense_forward(m.head, flat);
  if (!logits.all_finite()) throw NonFiniteLoss("classifier produced non-finite logits");
  return logits;
}

inline std::vector<double> softmax(const Tensor& logits) {
  double mx = logits.data[0];
  for (double v : logits.data) mx = std::max(mx, v);
  std::vector<double> p(logits.data.size());
  double z = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::exp(logits.data[i] - mx);
    z += p[i];
  }
  for (auto& v : p) v /= z;
  return p;
}

// argmax with ties toward the lower index, matching node assignment
inline int argmax_node(const Tensor& logits) {
  int best = 0;
  for (std::size_t i = 1; i < logits.data.size(); ++i)
    if (logits.data[i] > logits.data[best]) best = static_cast<int>(i);
  return best;
}

inline int predict_node(const ClassifierModel& m, const Tensor& x) {
  return argmax_node(classify_logits(m, x));
}

// Mean cross-entropy over the batch; fills grads with d(loss)/d(params)
// when non-null.
inline double classifier_loss(const ClassifierModel& m,
                              const std::vector<Tensor>& xs,
                              const std::vector<int>& labels,
                              nn::GradBuffer* grads = nullptr) {
  if (xs.empty()) throw EmptyBatch("classifier_loss needs samples");
  if (xs.size() != labels.size())
    throw LengthMismatch("classifier_loss: inputs vs labels");
  for (int y : labels)
    if (y < 0 || y >= m.cfg.num_nodes)
      throw IndexOutOfRange("label " + std::to_string(y) + " outside [0, " +
                            std::to_string(m.cfg.num_nodes) + ")");
  if (grads) grads->zero();
  const double inv_b = 1.0 / static_cast<double>(xs.size());
  double loss = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    ClassifierCache cache;
    Tensor logits = classify_logits(m, xs[i], &cache);
    std::vector<double> p = softmax(logits);
    double py = p[static_cast<std::size_t>(labels[i])];
    loss -= inv_b * std::log(std::max(py, 1e-300));
    if (!grads) continue;
    Tensor dlogits({m.cfg.num_nodes});
    for (int c = 0; c < m.cfg.num_nodes; ++c)
      dlogits.data[static_cast<std::size_t>(c)] =
          inv_b * (p[static_cast<std::size_t>(c)] - (c == labels[i] ? 1.0 : 0.0));
    Tensor dflat = dense_backward(m.head, cache.flat, dlogits, *grads);
    Tensor d({m.convs.back().out_ch, m.cfg.image_size >> m.cfg.num_scales,
              m.cfg.image_size >> m.cfg.num_scales});
    d.data = dflat.data;
    for (std::size_t s = m.convs.size(); s-- > 0;) {
      Tensor dn = nn::lrelu_backward(cache.norm_out[s], d, m.cfg.lrelu_slope);
      Tensor dc = instnorm_backward(m.norms[s], cache.norm_caches[s], dn, *grads);
      const Tensor& in = s == 0 ? cache.input : cache.block_out[s - 1];
      d = conv2d_backward(m.convs[s], in, dc, *grads);
    }
  }
  return loss;
}

inline double classifier_train_step(ClassifierModel& m, nn::AdamState& opt,
                                    const std::vector<Tensor>& xs,
                                    const std::vector<int>& labels,
                                    double learning_rate) {
  nn::GradBuffer grads(m.reg);
  double loss = classifier_loss(m, xs, labels, &grads);
  if (!std::isfinite(loss))
    throw NonFiniteLoss("classifier loss diverged at step " + std::to_string(opt.t + 1));
  nn::AdamConfig acfg;
  acfg.lr = learning_rate;
  adam_step(m.reg, opt, grads, acfg);
  return loss;
}

}  // namespace topodepth
