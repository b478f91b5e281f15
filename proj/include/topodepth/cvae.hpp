#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "topodepth/errors.hpp"
#include "topodepth/image.hpp"
#include "topodepth/nn.hpp"
#include "topodepth/preprocess.hpp"
#include "topodepth/raster_tensor.hpp"
#include "topodepth/rng.hpp"
#include "topodepth/tensor.hpp"
#include "topodepth/topomap.hpp"

namespace topodepth {

enum class Domain { Rgb, Dep };

// Paired VAE: two conv encoders into one Gaussian latent, two deconv
// decoders out of it. The decoder input is the latent sample with the
// node conditioning vector appended, so its width is latent_dim + num_nodes.
struct ModelConfig {
  int image_size = 32;
  int rgb_channels = 3;
  int depth_channels = 1;
  int base_channels = 8;  // doubled per downsampling scale
  int num_scales = 3;     // stride-2 conv blocks per encoder
  int latent_dim = 32;
  int num_nodes = 0;
  bool shared_trunk = false;  // tie the deepest encoder block across domains
  double lrelu_slope = 0.2;

  int feat_channels() const { return base_channels << (num_scales - 1); }
  int feat_hw() const { return image_size >> num_scales; }
  int feat_dim() const { return feat_channels() * feat_hw() * feat_hw(); }
  int cond_dim() const { return num_nodes; }
  int decoder_in() const { return latent_dim + num_nodes; }

  void validate() const {
    if (latent_dim < 1) throw ConfigError("latent_dim must be >= 1");
    if (num_nodes < 1) throw ConfigError("num_nodes must be >= 1");
    if (num_scales < 1) throw ConfigError("num_scales must be >= 1");
    if (base_channels < 1) throw ConfigError("base_channels must be >= 1");
    if (image_size % (1 << num_scales) != 0)
      throw ConfigError("image_size must be divisible by 2^num_scales");
    if (feat_hw() < 2)
      throw ConfigError("bottleneck collapses below 2x2; reduce num_scales");
  }
};

// --- encoder ---

struct Encoder {
  std::vector<nn::Conv2d> convs;
  std::vector<nn::InstanceNorm> norms;
  nn::ResBlock res;
  nn::Dense head_mean, head_logvar;
  int in_ch = 0;
  double slope = 0.2;
};

struct EncoderCache {
  Tensor input;
  std::vector<Tensor> conv_out;   // pre-norm
  std::vector<nn::InstNormCache> norm_caches;
  std::vector<Tensor> norm_out;   // pre-activation
  std::vector<Tensor> block_out;  // post-activation
  nn::ResBlockCache res;
  Tensor flat;                    // res output reshaped to a vector
};

namespace detail {

inline Encoder make_encoder(nn::ParamRegistry& reg, const std::string& prefix,
                            const ModelConfig& cfg, int in_ch,
                            const nn::ResBlock* shared_res) {
  Encoder e;
  e.in_ch = in_ch;
  e.slope = cfg.lrelu_slope;
  int ch = in_ch;
  for (int s = 0; s < cfg.num_scales; ++s) {
    int out = cfg.base_channels << s;
    e.convs.push_back(
        nn::make_conv2d(reg, prefix + ".conv" + std::to_string(s), ch, out, 3, 2, 1));
    e.norms.push_back(
        nn::make_instnorm(reg, prefix + ".norm" + std::to_string(s), out));
    ch = out;
  }
  e.res = shared_res ? *shared_res
                     : nn::make_resblock(reg, prefix + ".res", ch, cfg.lrelu_slope);
  e.head_mean = nn::make_dense(reg, prefix + ".mean", cfg.feat_dim(), cfg.latent_dim);
  e.head_logvar =
      nn::make_dense(reg, prefix + ".logvar", cfg.feat_dim(), cfg.latent_dim);
  return e;
}

inline Tensor flatten(const Tensor& t) {
  Tensor out({static_cast<int>(t.data.size())});
  out.data = t.data;
  return out;
}

inline Tensor unflatten(const Tensor& t, std::vector<int> shape) {
  Tensor out(std::move(shape));
  out.data = t.data;
  return out;
}

}  // namespace detail

inline void encoder_forward(const Encoder& e, const Tensor& x, EncoderCache& cache,
                            Tensor& mean, Tensor& logvar) {
  cache.input = x;
  cache.conv_out.clear();
  cache.norm_caches.assign(e.convs.size(), {});
  cache.norm_out.clear();
  cache.block_out.clear();
  const Tensor* cur = &x;
  for (std::size_t s = 0; s < e.convs.size(); ++s) {
    cache.conv_out.push_back(conv2d_forward(e.convs[s], *cur));
    cache.norm_out.push_back(
        instnorm_forward(e.norms[s], cache.conv_out[s], cache.norm_caches[s]));
    cache.block_out.push_back(nn::lrelu_forward(cache.norm_out[s], e.slope));
    cur = &cache.block_out[s];
  }
  Tensor feat = nn::resblock_forward(e.res, *cur, cache.res);
  cache.flat = detail::flatten(feat);
  mean = dense_forward(e.head_mean, cache.flat);
  logvar = dense_forward(e.head_logvar, cache.flat);
}

inline void encoder_backward(const Encoder& e, const EncoderCache& cache,
                             const Tensor& dmean, const Tensor& dlogvar,
                             nn::GradBuffer& gb) {
  Tensor dflat_m = dense_backward(e.head_mean, cache.flat, dmean, gb);
  Tensor dflat_v = dense_backward(e.head_logvar, cache.flat, dlogvar, gb);
  for (std::size_t i = 0; i < dflat_m.data.size(); ++i)
    dflat_m.data[i] += dflat_v.data[i];
  Tensor dfeat = detail::unflatten(dflat_m, cache.res.sum.shape);
  Tensor d = nn::resblock_backward(e.res, cache.res, dfeat, gb);
  for (std::size_t s = e.convs.size(); s-- > 0;) {
    Tensor dn = nn::lrelu_backward(cache.norm_out[s], d, e.slope);
    Tensor dc = instnorm_backward(e.norms[s], cache.norm_caches[s], dn, gb);
    const Tensor& in = s == 0 ? cache.input : cache.block_out[s - 1];
    d = conv2d_backward(e.convs[s], in, dc, gb);
  }
}

// --- decoder ---

struct Decoder {
  nn::Dense fc;
  std::vector<nn::Deconv2d> deconvs;
  std::vector<nn::InstanceNorm> norms;  // all but the last deconv
  int out_ch = 0;
  int feat_ch = 0, feat_hw = 0;
  double slope = 0.2;
};

struct DecoderCache {
  Tensor zc, fc_out, feat;        // feat = lrelu(fc_out) reshaped
  std::vector<Tensor> deconv_out;
  std::vector<nn::InstNormCache> norm_caches;
  std::vector<Tensor> norm_out;
  std::vector<Tensor> act_out;
  Tensor output;                  // sigmoid of the last deconv
};

namespace detail {

inline Decoder make_decoder(nn::ParamRegistry& reg, const std::string& prefix,
                            const ModelConfig& cfg, int out_ch) {
  Decoder d;
  d.out_ch = out_ch;
  d.feat_ch = cfg.feat_channels();
  d.feat_hw = cfg.feat_hw();
  d.slope = cfg.lrelu_slope;
  d.fc = nn::make_dense(reg, prefix + ".fc", cfg.decoder_in(), cfg.feat_dim());
  int ch = d.feat_ch;
  for (int s = cfg.num_scales - 1; s >= 0; --s) {
    int out = s > 0 ? (cfg.base_channels << (s - 1)) : out_ch;
    d.deconvs.push_back(nn::make_deconv2d(
        reg, prefix + ".deconv" + std::to_string(cfg.num_scales - 1 - s), ch, out, 4,
        2, 1));
    if (s > 0)
      d.norms.push_back(nn::make_instnorm(
          reg, prefix + ".dnorm" + std::to_string(cfg.num_scales - 1 - s), out));
    ch = out;
  }
  return d;
}

}  // namespace detail

inline Tensor decoder_forward(const Decoder& d, const Tensor& zc,
                              DecoderCache& cache) {
  require_shape(zc, {d.fc.in_dim}, "decoder input");
  cache.zc = zc;
  cache.fc_out = dense_forward(d.fc, zc);
  Tensor act = nn::lrelu_forward(cache.fc_out, d.slope);
  cache.feat = detail::unflatten(act, {d.feat_ch, d.feat_hw, d.feat_hw});
  cache.deconv_out.clear();
  cache.norm_caches.assign(d.norms.size(), {});
  cache.norm_out.clear();
  cache.act_out.clear();
  const Tensor* cur = &cache.feat;
  for (std::size_t s = 0; s < d.deconvs.size(); ++s) {
    cache.deconv_out.push_back(deconv2d_forward(d.deconvs[s], *cur));
    if (s + 1 < d.deconvs.size()) {
      cache.norm_out.push_back(
          instnorm_forward(d.norms[s], cache.deconv_out[s], cache.norm_caches[s]));
      cache.act_out.push_back(nn::lrelu_forward(cache.norm_out[s], d.slope));
      cur = &cache.act_out[s];
    }
  }
  cache.output = nn::sigmoid_forward(cache.deconv_out.back());
  return cache.output;
}

inline Tensor decoder_backward(const Decoder& d, const DecoderCache& cache,
                               const Tensor& dout, nn::GradBuffer& gb) {
  Tensor dy = nn::sigmoid_backward(cache.output, dout);
  for (std::size_t s = d.deconvs.size(); s-- > 0;) {
    const Tensor& in = s == 0 ? cache.feat : cache.act_out[s - 1];
    Tensor din = deconv2d_backward(d.deconvs[s], in, dy, gb);
    if (s == 0) {
      dy = std::move(din);
      break;
    }
    Tensor dn = nn::lrelu_backward(cache.norm_out[s - 1], din, d.slope);
    dy = instnorm_backward(d.norms[s - 1], cache.norm_caches[s - 1], dn, gb);
  }
  Tensor dact = detail::flatten(dy);
  Tensor dfc = nn::lrelu_backward(cache.fc_out, dact, d.slope);
  return dense_backward(d.fc, cache.zc, dfc, gb);
}

// --- model ---

struct CvaeModel {
  ModelConfig cfg;
  nn::ParamRegistry reg;
  Encoder enc_rgb, enc_dep;
  Decoder dec_rgb, dec_dep;

  // Parameters live behind shared pointers, so a copy would alias them;
  // move-only keeps ownership unambiguous.
  CvaeModel() = default;
  CvaeModel(CvaeModel&&) = default;
  CvaeModel& operator=(CvaeModel&&) = default;
};

inline CvaeModel make_cvae(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  CvaeModel m;
  m.cfg = cfg;
  m.enc_rgb =
      detail::make_encoder(m.reg, "enc_rgb", cfg, cfg.rgb_channels, nullptr);
  m.enc_dep = detail::make_encoder(m.reg, "enc_dep", cfg, cfg.depth_channels,
                                   cfg.shared_trunk ? &m.enc_rgb.res : nullptr);
  m.dec_rgb = detail::make_decoder(m.reg, "dec_rgb", cfg, cfg.rgb_channels);
  m.dec_dep = detail::make_decoder(m.reg, "dec_dep", cfg, cfg.depth_channels);

  Rng rng = named_rng(seed, "weight-init");
  for (const auto& p : m.reg.params()) {
    const std::string& n = p->name;
    if (n.ends_with(".b") || n.ends_with(".beta")) continue;  // stay zero
    if (n.ends_with(".gamma")) continue;                      // stays one
    if (n.ends_with(".W")) {
      const auto& s = p->value.shape;
      double fan_in;
      if (s.size() == 4)
        fan_in = (n.find("deconv") != std::string::npos)
                     ? static_cast<double>(s[0]) * s[2] * s[3]
                     : static_cast<double>(s[1]) * s[2] * s[3];
      else
        fan_in = static_cast<double>(s[1]);
      bool head = n.find(".mean.") != std::string::npos ||
                  n.find(".logvar.") != std::string::npos;
      double std = head ? std::sqrt(1.0 / fan_in) : std::sqrt(2.0 / fan_in);
      nn::fill_normal(p->value, rng, std);
    }
  }
  return m;
}

// --- core math ops ---

inline double kl_term(const Tensor& mean, const Tensor& logvar) {
  if (!mean.same_shape(logvar)) throw ShapeMismatch("kl_term: mean vs logvar");
  double acc = 0;
  for (std::size_t i = 0; i < mean.data.size(); ++i) {
    double mu = mean.data[i], lv = logvar.data[i];
    acc += std::exp(lv) + mu * mu - 1.0 - lv;
  }
  return 0.5 * acc;
}

inline double recon_loss(const Tensor& x, const Tensor& x_hat) {
  if (!x.same_shape(x_hat)) throw ShapeMismatch("recon_loss: shapes differ");
  double acc = 0;
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    double d = x_hat.data[i] - x.data[i];
    acc += d * d;
  }
  return acc / static_cast<double>(x.data.size());
}

// z = mean + exp(0.5*logvar) .* eps
inline Tensor sample_latent(const Tensor& mean, const Tensor& logvar,
                            const Tensor& eps) {
  if (!mean.same_shape(logvar) || !mean.same_shape(eps))
    throw ShapeMismatch("sample_latent: shapes differ");
  Tensor z(mean.shape);
  for (std::size_t i = 0; i < z.data.size(); ++i)
    z.data[i] = mean.data[i] + std::exp(0.5 * logvar.data[i]) * eps.data[i];
  return z;
}

inline std::pair<Tensor, Tensor> cvae_encode(const CvaeModel& m, Domain domain,
                                             const Tensor& x) {
  const Encoder& e = domain == Domain::Rgb ? m.enc_rgb : m.enc_dep;
  int ch = domain == Domain::Rgb ? m.cfg.rgb_channels : m.cfg.depth_channels;
  require_shape(x, {ch, m.cfg.image_size, m.cfg.image_size}, "encoder raster");
  EncoderCache cache;
  Tensor mean, logvar;
  encoder_forward(e, x, cache, mean, logvar);
  return {mean, logvar};
}

inline Tensor concat_latent(const Tensor& z, const Tensor& cond) {
  Tensor zc({static_cast<int>(z.data.size() + cond.data.size())});
  std::copy(z.data.begin(), z.data.end(), zc.data.begin());
  std::copy(cond.data.begin(), cond.data.end(),
            zc.data.begin() + static_cast<std::ptrdiff_t>(z.data.size()));
  return zc;
}

inline Tensor cvae_decode(const CvaeModel& m, Domain domain, const Tensor& z,
                          const Tensor& cond) {
  require_shape(z, {m.cfg.latent_dim}, "latent");
  require_shape(cond, {m.cfg.cond_dim()}, "conditioning vector");
  const Decoder& d = domain == Domain::Rgb ? m.dec_rgb : m.dec_dep;
  DecoderCache cache;
  return decoder_forward(d, concat_latent(z, cond), cache);
}

// --- joint loss over a paired batch ---

struct LossRecord {
  double l_rgb_rgb = 0, l_dep_dep = 0, l_rgb_dep = 0, l_dep_rgb = 0;
  double kl_rgb = 0, kl_dep = 0;
  double total = 0;
  long step = 0;
  bool kl_dedup = false;
};

struct CvaeBatch {
  std::vector<Tensor> rgb;   // each {rgb_channels, S, S}, values in [0,1]
  std::vector<Tensor> dep;   // each {depth_channels, S, S}
  std::vector<Tensor> cond;  // each {num_nodes}: one-hot, or constant if unconditioned

  std::size_t size() const { return rgb.size(); }
};

struct EpsDraws {
  std::vector<Tensor> rgb, dep;  // one {latent_dim} draw per sample per domain
};

inline EpsDraws draw_eps(Rng& rng, std::size_t batch, int latent_dim) {
  EpsDraws e;
  for (std::size_t i = 0; i < batch; ++i) {
    Tensor r({latent_dim}), d({latent_dim});
    for (auto& v : r.data) v = rng.normal();
    for (auto& v : d.data) v = rng.normal();
    e.rgb.push_back(std::move(r));
    e.dep.push_back(std::move(d));
  }
  return e;
}

inline EpsDraws zero_eps(std::size_t batch, int latent_dim) {
  EpsDraws e;
  e.rgb.assign(batch, Tensor({latent_dim}));
  e.dep.assign(batch, Tensor({latent_dim}));
  return e;
}

// Four-way VAE objective. Each domain is encoded once per sample (one eps
// draw per encoder) and the shared code is decoded through both decoders:
//   l_rgb_rgb = mse(x_rgb, G_rgb(z_rgb)) + beta*KL_rgb
//   l_dep_dep = mse(x_dep, G_dep(z_dep)) + beta*KL_dep
//   l_rgb_dep = mse(x_dep, G_dep(z_rgb)) + beta*KL_rgb
//   l_dep_rgb = mse(x_rgb, G_rgb(z_dep)) + beta*KL_dep
// total = sum of the four, which counts each encoder's KL twice. With
// kl_dedup the cross-domain terms drop their KL copy so each KL appears
// once; the record's total stays the sum of its four terms either way.
// When grads is non-null it is overwritten with d(total)/d(params).
inline LossRecord cvae_loss(const CvaeModel& m, const CvaeBatch& batch, double beta,
                            bool kl_dedup, const EpsDraws& eps,
                            nn::GradBuffer* grads = nullptr) {
  const std::size_t B = batch.size();
  if (B == 0) throw EmptyBatch("cvae_loss needs a non-empty batch");
  if (batch.dep.size() != B || batch.cond.size() != B || eps.rgb.size() != B ||
      eps.dep.size() != B)
    throw LengthMismatch("cvae_loss: batch fields not aligned");
  if (grads) grads->zero();

  LossRecord rec;
  rec.kl_dedup = kl_dedup;
  const double inv_b = 1.0 / static_cast<double>(B);
  const double kl_count = kl_dedup ? 1.0 : 2.0;

  for (std::size_t i = 0; i < B; ++i) {
    EncoderCache cache_er, cache_ed;
    Tensor mu_r, lv_r, mu_d, lv_d;
    require_shape(batch.rgb[i], {m.cfg.rgb_channels, m.cfg.image_size, m.cfg.image_size},
                  "rgb raster");
    require_shape(batch.dep[i],
                  {m.cfg.depth_channels, m.cfg.image_size, m.cfg.image_size},
                  "depth raster");
    require_shape(batch.cond[i], {m.cfg.cond_dim()}, "conditioning vector");
    encoder_forward(m.enc_rgb, batch.rgb[i], cache_er, mu_r, lv_r);
    encoder_forward(m.enc_dep, batch.dep[i], cache_ed, mu_d, lv_d);
    Tensor z_r = sample_latent(mu_r, lv_r, eps.rgb[i]);
    Tensor z_d = sample_latent(mu_d, lv_d, eps.dep[i]);
    Tensor zc_r = concat_latent(z_r, batch.cond[i]);
    Tensor zc_d = concat_latent(z_d, batch.cond[i]);

    DecoderCache c_rr, c_dd, c_rd, c_dr;
    Tensor y_rr = decoder_forward(m.dec_rgb, zc_r, c_rr);
    Tensor y_dd = decoder_forward(m.dec_dep, zc_d, c_dd);
    Tensor y_rd = decoder_forward(m.dec_dep, zc_r, c_rd);
    Tensor y_dr = decoder_forward(m.dec_rgb, zc_d, c_dr);

    double r_rr = recon_loss(batch.rgb[i], y_rr);
    double r_dd = recon_loss(batch.dep[i], y_dd);
    double r_rd = recon_loss(batch.dep[i], y_rd);
    double r_dr = recon_loss(batch.rgb[i], y_dr);
    double kl_r = kl_term(mu_r, lv_r);
    double kl_d = kl_term(mu_d, lv_d);

    rec.kl_rgb += inv_b * kl_r;
    rec.kl_dep += inv_b * kl_d;
    rec.l_rgb_rgb += inv_b * (r_rr + beta * kl_r);
    rec.l_dep_dep += inv_b * (r_dd + beta * kl_d);
    rec.l_rgb_dep += inv_b * (r_rd + (kl_dedup ? 0.0 : beta * kl_r));
    rec.l_dep_rgb += inv_b * (r_dr + (kl_dedup ? 0.0 : beta * kl_d));

    if (!grads) continue;

    auto mse_grad = [inv_b](const Tensor& x, const Tensor& y) {
      Tensor d(y.shape);
      double s = 2.0 * inv_b / static_cast<double>(x.data.size());
      for (std::size_t j = 0; j < y.data.size(); ++j)
        d.data[j] = s * (y.data[j] - x.data[j]);
      return d;
    };
    Tensor dzc_rr = decoder_backward(m.dec_rgb, c_rr, mse_grad(batch.rgb[i], y_rr), *grads);
    Tensor dzc_dd = decoder_backward(m.dec_dep, c_dd, mse_grad(batch.dep[i], y_dd), *grads);
    Tensor dzc_rd = decoder_backward(m.dec_dep, c_rd, mse_grad(batch.dep[i], y_rd), *grads);
    Tensor dzc_dr = decoder_backward(m.dec_rgb, c_dr, mse_grad(batch.rgb[i], y_dr), *grads);

    const int D = m.cfg.latent_dim;
    Tensor dmu_r({D}), dlv_r({D}), dmu_d({D}), dlv_d({D});
    for (int j = 0; j < D; ++j) {
      double dz_r = dzc_rr.data[static_cast<std::size_t>(j)] +
                    dzc_rd.data[static_cast<std::size_t>(j)];
      double dz_d = dzc_dd.data[static_cast<std::size_t>(j)] +
                    dzc_dr.data[static_cast<std::size_t>(j)];
      dmu_r.data[static_cast<std::size_t>(j)] = dz_r;
      dmu_d.data[static_cast<std::size_t>(j)] = dz_d;
      dlv_r.data[static_cast<std::size_t>(j)] =
          dz_r * eps.rgb[i].data[static_cast<std::size_t>(j)] * 0.5 *
          std::exp(0.5 * lv_r.data[static_cast<std::size_t>(j)]);
      dlv_d.data[static_cast<std::size_t>(j)] =
          dz_d * eps.dep[i].data[static_cast<std::size_t>(j)] * 0.5 *
          std::exp(0.5 * lv_d.data[static_cast<std::size_t>(j)]);
    }
    double kl_scale = beta * kl_count * inv_b;
    for (int j = 0; j < D; ++j) {
      dmu_r.data[static_cast<std::size_t>(j)] +=
          kl_scale * mu_r.data[static_cast<std::size_t>(j)];
      dlv_r.data[static_cast<std::size_t>(j)] +=
          kl_scale * 0.5 * (std::exp(lv_r.data[static_cast<std::size_t>(j)]) - 1.0);
      dmu_d.data[static_cast<std::size_t>(j)] +=
          kl_scale * mu_d.data[static_cast<std::size_t>(j)];
      dlv_d.data[static_cast<std::size_t>(j)] +=
          kl_scale * 0.5 * (std::exp(lv_d.data[static_cast<std::size_t>(j)]) - 1.0);
    }
    encoder_backward(m.enc_rgb, cache_er, dmu_r, dlv_r, *grads);
    encoder_backward(m.enc_dep, cache_ed, dmu_d, dlv_d, *grads);
  }
  rec.total = rec.l_rgb_rgb + rec.l_dep_dep + rec.l_rgb_dep + rec.l_dep_rgb;
  return rec;
}

// The plain autoencoder objective the four VAE losses collapse to at beta=0:
// straight-line composition of encode, reparameterize, decode, and the four
// reconstruction MSEs. Kept as an independent path for the equivalence gate.
inline double plain_autoencoder_loss(const CvaeModel& m, const CvaeBatch& batch,
                                     const EpsDraws& eps) {
  if (batch.size() == 0) throw EmptyBatch("autoencoder loss needs samples");
  double total = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    auto [mu_r, lv_r] = cvae_encode(m, Domain::Rgb, batch.rgb[i]);
    auto [mu_d, lv_d] = cvae_encode(m, Domain::Dep, batch.dep[i]);
    Tensor z_r = sample_latent(mu_r, lv_r, eps.rgb[i]);
    Tensor z_d = sample_latent(mu_d, lv_d, eps.dep[i]);
    total += recon_loss(batch.rgb[i], cvae_decode(m, Domain::Rgb, z_r, batch.cond[i]));
    total += recon_loss(batch.dep[i], cvae_decode(m, Domain::Dep, z_d, batch.cond[i]));
    total += recon_loss(batch.dep[i], cvae_decode(m, Domain::Dep, z_r, batch.cond[i]));
    total += recon_loss(batch.rgb[i], cvae_decode(m, Domain::Rgb, z_d, batch.cond[i]));
  }
  return total / static_cast<double>(batch.size());
}

// --- training step ---

struct TrainConfig {
  int latent_dim = 32;
  double kl_weight = 1.0;
  double learning_rate = 1e-3;
  int batch_size = 16;
  long steps = 2000;
  std::uint64_t rng_seed = 0;
  bool kl_dedup = false;
  bool shared_trunk = false;

  void validate() const {
    if (latent_dim < 1) throw ConfigError("latent_dim must be >= 1");
    if (kl_weight < 0) throw ConfigError("kl_weight must be >= 0");
    if (!(learning_rate > 0)) throw ConfigError("learning_rate must be > 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (steps < 0) throw ConfigError("steps must be >= 0");
  }
};

// One Adam step on the joint objective. learning_rate may be zero here (the
// zero-step contract); TrainConfig::validate applies to full runs.
inline LossRecord train_step(CvaeModel& m, nn::AdamState& opt, const CvaeBatch& batch,
                             double beta, bool kl_dedup, double learning_rate,
                             const EpsDraws& eps) {
  nn::GradBuffer grads(m.reg);
  LossRecord rec = cvae_loss(m, batch, beta, kl_dedup, eps, &grads);
  if (!std::isfinite(rec.total))
    throw NonFiniteLoss("loss diverged at adam step " + std::to_string(opt.t + 1));
  nn::AdamConfig acfg;
  acfg.lr = learning_rate;
  adam_step(m.reg, opt, grads, acfg);
  return rec;
}

// --- test-time paths ---

// Test-time inference: RGB through its encoder, posterior mean as the
// latent (eps = 0), depth decoder conditioned on the node.
inline DepthMap infer_depth_with_cond(const CvaeModel& m, const RgbImage& rgb,
                                      const Tensor& cond,
                                      const NormalizationSpec& spec) {
  auto [mean, logvar] = cvae_encode(m, Domain::Rgb, rgb_to_tensor(rgb));
  (void)logvar;
  Tensor raster = cvae_decode(m, Domain::Dep, mean, cond);
  return denormalize_depth(tensor_to_depth_raster(raster), spec);
}

inline DepthMap infer_depth(const CvaeModel& m, const RgbImage& rgb, int node_id,
                            const NormalizationSpec& spec) {
  auto oh = one_hot(node_id, m.cfg.num_nodes);
  Tensor cond({m.cfg.num_nodes});
  cond.data = oh;
  return infer_depth_with_cond(m, rgb, cond, spec);
}

// Hallucinates an (RGB, depth) pair for a node from a prior draw.
inline std::pair<RgbImage, DepthMap> sample_node(const CvaeModel& m, int node_id,
                                                 Rng& rng,
                                                 const NormalizationSpec& spec) {
  auto oh = one_hot(node_id, m.cfg.num_nodes);
  Tensor cond({m.cfg.num_nodes});
  cond.data = oh;
  Tensor z({m.cfg.latent_dim});
  for (auto& v : z.data) v = rng.normal();
  Tensor rgb = cvae_decode(m, Domain::Rgb, z, cond);
  Tensor dep = cvae_decode(m, Domain::Dep, z, cond);
  return {tensor_to_rgb(rgb),
          denormalize_depth(tensor_to_depth_raster(dep), spec)};
}

}  // namespace topodepth
