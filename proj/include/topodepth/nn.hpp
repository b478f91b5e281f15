#pragma once

// Hand-rolled CPU kernels with analytic backward passes (no autograd graph).
// Every primitive here is gradient-checked against central finite
// differences in the test suite.

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "topodepth/rng.hpp"
#include "topodepth/tensor.hpp"

namespace topodepth::nn {

struct ParamTensor {
  std::string name;
  Tensor value;
  int index = -1;  // slot in the registry and in every GradBuffer
};
using ParamPtr = std::shared_ptr<ParamTensor>;

// Owns the canonical ordering of all learnable arrays in a model. Tied
// layers simply reuse a ParamPtr; their gradients accumulate into one slot.
class ParamRegistry {
 public:
  ParamPtr create(std::string name, std::vector<int> shape) {
    auto p = std::make_shared<ParamTensor>();
    p->name = std::move(name);
    p->value = Tensor(std::move(shape));
    p->index = static_cast<int>(params_.size());
    params_.push_back(p);
    return p;
  }

  const std::vector<ParamPtr>& params() const { return params_; }

  std::int64_t total_size() const {
    std::int64_t n = 0;
    for (const auto& p : params_) n += p->value.numel();
    return n;
  }

  bool all_finite() const {
    for (const auto& p : params_)
      if (!p->value.all_finite()) return false;
    return true;
  }

 private:
  std::vector<ParamPtr> params_;
};

struct GradBuffer {
  std::vector<Tensor> g;

  explicit GradBuffer(const ParamRegistry& reg) {
    g.reserve(reg.params().size());
    for (const auto& p : reg.params()) g.emplace_back(p->value.shape);
  }

  Tensor& operator[](const ParamPtr& p) { return g[static_cast<std::size_t>(p->index)]; }

  void zero() {
    for (auto& t : g) t.fill(0.0);
  }
  void add(const GradBuffer& o) {
    for (std::size_t i = 0; i < g.size(); ++i)
      for (std::size_t j = 0; j < g[i].data.size(); ++j) g[i].data[j] += o.g[i].data[j];
  }
  void scale(double s) {
    for (auto& t : g)
      for (double& v : t.data) v *= s;
  }
};

inline void fill_normal(Tensor& t, Rng& rng, double std) {
  for (double& v : t.data) v = std * rng.normal();
}

// Set by tests around a forward pass to measure how far pre-activations sit
// from the leaky-rectifier kink; finite differencing needs a margin there.
inline thread_local double* g_kink_margin = nullptr;

inline void note_kink_margin(const Tensor& x) {
  if (!g_kink_margin) return;
  for (double v : x.data) {
    double a = std::abs(v);
    if (a < *g_kink_margin) *g_kink_margin = a;
  }
}

// --- elementwise activations ---

inline Tensor lrelu_forward(const Tensor& x, double slope) {
  note_kink_margin(x);
  Tensor y(x.shape);
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    double v = x.data[i];
    y.data[i] = v > 0 ? v : slope * v;
  }
  return y;
}

inline Tensor lrelu_backward(const Tensor& x, const Tensor& dy, double slope) {
  Tensor dx(x.shape);
  for (std::size_t i = 0; i < x.data.size(); ++i)
    dx.data[i] = dy.data[i] * (x.data[i] > 0 ? 1.0 : slope);
  return dx;
}

inline Tensor sigmoid_forward(const Tensor& x) {
  Tensor y(x.shape);
  for (std::size_t i = 0; i < x.data.size(); ++i)
    y.data[i] = 1.0 / (1.0 + std::exp(-x.data[i]));
  return y;
}

// takes the forward output, not the input
inline Tensor sigmoid_backward(const Tensor& y, const Tensor& dy) {
  Tensor dx(y.shape);
  for (std::size_t i = 0; i < y.data.size(); ++i)
    dx.data[i] = dy.data[i] * y.data[i] * (1.0 - y.data[i]);
  return dx;
}

// --- dense ---

struct Dense {
  ParamPtr W;  // [out, in]
  ParamPtr b;  // [out]
  int in_dim = 0, out_dim = 0;
};

inline Dense make_dense(ParamRegistry& reg, const std::string& name, int in_dim,
                        int out_dim) {
  Dense d;
  d.in_dim = in_dim;
  d.out_dim = out_dim;
  d.W = reg.create(name + ".W", {out_dim, in_dim});
  d.b = reg.create(name + ".b", {out_dim});
  return d;
}

inline Tensor dense_forward(const Dense& d, const Tensor& x) {
  require_shape(x, {d.in_dim}, "dense input");
  Tensor y({d.out_dim});
  const double* wp = d.W->value.ptr();
  for (int o = 0; o < d.out_dim; ++o) {
    const double* wr = wp + static_cast<std::size_t>(o) * d.in_dim;
    double acc = d.b->value.data[static_cast<std::size_t>(o)];
    for (int i = 0; i < d.in_dim; ++i) acc += wr[i] * x.data[static_cast<std::size_t>(i)];
    y.data[static_cast<std::size_t>(o)] = acc;
  }
  return y;
}

inline Tensor dense_backward(const Dense& d, const Tensor& x, const Tensor& dy,
                             GradBuffer& gb) {
  Tensor dx({d.in_dim});
  const double* wp = d.W->value.ptr();
  double* dWp = gb[d.W].ptr();
  double* dbp = gb[d.b].ptr();
  for (int o = 0; o < d.out_dim; ++o) {
    double g = dy.data[static_cast<std::size_t>(o)];
    dbp[o] += g;
    const double* wr = wp + static_cast<std::size_t>(o) * d.in_dim;
    double* dWr = dWp + static_cast<std::size_t>(o) * d.in_dim;
    for (int i = 0; i < d.in_dim; ++i) {
      dWr[i] += g * x.data[static_cast<std::size_t>(i)];
      dx.data[static_cast<std::size_t>(i)] += g * wr[i];
    }
  }
  return dx;
}

// --- convolution, CHW layout ---

namespace detail {
// output index range [o_min, o_max) such that 0 <= o*S - P + k < limit
inline void conv_range(int P, int S, int k, int limit, int out_limit, int& o_min,
                       int& o_max) {
  int lo = P - k;
  o_min = lo > 0 ? (lo + S - 1) / S : 0;
  int hi = limit - 1 + P - k;
  o_max = hi >= 0 ? std::min(out_limit, hi / S + 1) : 0;
  if (o_min > o_max) o_min = o_max;
}
}  // namespace detail

struct Conv2d {
  ParamPtr W;  // [out_ch, in_ch, k, k]
  ParamPtr b;  // [out_ch]
  int in_ch = 0, out_ch = 0, k = 3, stride = 1, pad = 1;

  int out_size(int in) const { return (in + 2 * pad - k) / stride + 1; }
};

inline Conv2d make_conv2d(ParamRegistry& reg, const std::string& name, int in_ch,
                          int out_ch, int k, int stride, int pad) {
  Conv2d c;
  c.in_ch = in_ch;
  c.out_ch = out_ch;
  c.k = k;
  c.stride = stride;
  c.pad = pad;
  c.W = reg.create(name + ".W", {out_ch, in_ch, k, k});
  c.b = reg.create(name + ".b", {out_ch});
  return c;
}

inline Tensor conv2d_forward(const Conv2d& c, const Tensor& x) {
  if (x.shape.size() != 3 || x.shape[0] != c.in_ch)
    throw ShapeMismatch("conv2d input must be [in_ch,H,W]");
  const int H = x.shape[1], W = x.shape[2];
  const int HO = c.out_size(H), WO = c.out_size(W);
  Tensor y({c.out_ch, HO, WO});
  const double* wp = c.W->value.ptr();
  const double* xp = x.ptr();
  double* yp = y.ptr();
  for (int oc = 0; oc < c.out_ch; ++oc) {
    double bias = c.b->value.data[static_cast<std::size_t>(oc)];
    double* yc = yp + static_cast<std::size_t>(oc) * HO * WO;
    for (int i = 0; i < HO * WO; ++i) yc[i] = bias;
    for (int ic = 0; ic < c.in_ch; ++ic) {
      const double* xc = xp + static_cast<std::size_t>(ic) * H * W;
      const double* wk = wp + (static_cast<std::size_t>(oc) * c.in_ch + ic) * c.k * c.k;
      for (int ky = 0; ky < c.k; ++ky) {
        int oy0, oy1;
        detail::conv_range(c.pad, c.stride, ky, H, HO, oy0, oy1);
        for (int kx = 0; kx < c.k; ++kx) {
          int ox0, ox1;
          detail::conv_range(c.pad, c.stride, kx, W, WO, ox0, ox1);
          double w = wk[ky * c.k + kx];
          for (int oy = oy0; oy < oy1; ++oy) {
            int iy = oy * c.stride - c.pad + ky;
            const double* xr = xc + static_cast<std::size_t>(iy) * W - c.pad + kx;
            double* yr = yc + static_cast<std::size_t>(oy) * WO;
            for (int ox = ox0; ox < ox1; ++ox)
              yr[ox] += w * xr[static_cast<std::size_t>(ox) * c.stride];
          }
        }
      }
    }
  }
  return y;
}

// Accumulates dW/db into gb and returns dx.
inline Tensor conv2d_backward(const Conv2d& c, const Tensor& x, const Tensor& dy,
                              GradBuffer& gb) {
  const int H = x.shape[1], W = x.shape[2];
  const int HO = c.out_size(H), WO = c.out_size(W);
  require_shape(dy, {c.out_ch, HO, WO}, "conv2d dy");
  Tensor dx({c.in_ch, H, W});
  const double* wp = c.W->value.ptr();
  const double* xp = x.ptr();
  const double* dyp = dy.ptr();
  double* dxp = dx.ptr();
  double* dWp = gb[c.W].ptr();
  double* dbp = gb[c.b].ptr();
  for (int oc = 0; oc < c.out_ch; ++oc) {
    const double* dyc = dyp + static_cast<std::size_t>(oc) * HO * WO;
    double acc_b = 0;
    for (int i = 0; i < HO * WO; ++i) acc_b += dyc[i];
    dbp[oc] += acc_b;
    for (int ic = 0; ic < c.in_ch; ++ic) {
      const double* xc = xp + static_cast<std::size_t>(ic) * H * W;
      double* dxc = dxp + static_cast<std::size_t>(ic) * H * W;
      const std::size_t wbase = (static_cast<std::size_t>(oc) * c.in_ch + ic) * c.k * c.k;
      for (int ky = 0; ky < c.k; ++ky) {
        int oy0, oy1;
        detail::conv_range(c.pad, c.stride, ky, H, HO, oy0, oy1);
        for (int kx = 0; kx < c.k; ++kx) {
          int ox0, ox1;
          detail::conv_range(c.pad, c.stride, kx, W, WO, ox0, ox1);
          double w = wp[wbase + static_cast<std::size_t>(ky) * c.k + kx];
          double acc_w = 0;
          for (int oy = oy0; oy < oy1; ++oy) {
            int iy = oy * c.stride - c.pad + ky;
            const double* xr = xc + static_cast<std::size_t>(iy) * W - c.pad + kx;
            double* dxr = dxc + static_cast<std::size_t>(iy) * W - c.pad + kx;
            const double* dyr = dyc + static_cast<std::size_t>(oy) * WO;
            for (int ox = ox0; ox < ox1; ++ox) {
              double g = dyr[ox];
              acc_w += g * xr[static_cast<std::size_t>(ox) * c.stride];
              dxr[static_cast<std::size_t>(ox) * c.stride] += g * w;
            }
          }
          dWp[wbase + static_cast<std::size_t>(ky) * c.k + kx] += acc_w;
        }
      }
    }
  }
  return dx;
}

// --- transposed convolution ---

struct Deconv2d {
  ParamPtr W;  // [in_ch, out_ch, k, k]
  ParamPtr b;  // [out_ch]
  int in_ch = 0, out_ch = 0, k = 4, stride = 2, pad = 1;

  int out_size(int in) const { return (in - 1) * stride - 2 * pad + k; }
};

inline Deconv2d make_deconv2d(ParamRegistry& reg, const std::string& name,
                              int in_ch, int out_ch, int k, int stride, int pad) {
  Deconv2d c;
  c.in_ch = in_ch;
  c.out_ch = out_ch;
  c.k = k;
  c.stride = stride;
  c.pad = pad;
  c.W = reg.create(name + ".W", {in_ch, out_ch, k, k});
  c.b = reg.create(name + ".b", {out_ch});
  return c;
}

inline Tensor deconv2d_forward(const Deconv2d& c, const Tensor& x) {
  if (x.shape.size() != 3 || x.shape[0] != c.in_ch)
    throw ShapeMismatch("deconv2d input must be [in_ch,H,W]");
  const int H = x.shape[1], W = x.shape[2];
  const int HO = c.out_size(H), WO = c.out_size(W);
  Tensor y({c.out_ch, HO, WO});
  double* yp = y.ptr();
  for (int oc = 0; oc < c.out_ch; ++oc) {
    double bias = c.b->value.data[static_cast<std::size_t>(oc)];
    double* yc = yp + static_cast<std::size_t>(oc) * HO * WO;
    for (int i = 0; i < HO * WO; ++i) yc[i] = bias;
  }
  const double* wp = c.W->value.ptr();
  const double* xp = x.ptr();
  for (int ic = 0; ic < c.in_ch; ++ic) {
    const double* xc = xp + static_cast<std::size_t>(ic) * H * W;
    for (int oc = 0; oc < c.out_ch; ++oc) {
      double* yc = yp + static_cast<std::size_t>(oc) * HO * WO;
      const std::size_t wbase = (static_cast<std::size_t>(ic) * c.out_ch + oc) * c.k * c.k;
      for (int ky = 0; ky < c.k; ++ky) {
        int iy0, iy1;
        detail::conv_range(c.pad, c.stride, ky, HO, H, iy0, iy1);
        for (int kx = 0; kx < c.k; ++kx) {
          int ix0, ix1;
          detail::conv_range(c.pad, c.stride, kx, WO, W, ix0, ix1);
          double w = wp[wbase + static_cast<std::size_t>(ky) * c.k + kx];
          for (int iy = iy0; iy < iy1; ++iy) {
            int oy = iy * c.stride - c.pad + ky;
            const double* xr = xc + static_cast<std::size_t>(iy) * W;
            double* yr = yc + static_cast<std::size_t>(oy) * WO - c.pad + kx;
            for (int ix = ix0; ix < ix1; ++ix)
              yr[static_cast<std::size_t>(ix) * c.stride] += w * xr[ix];
          }
        }
      }
    }
  }
  return y;
}

inline Tensor deconv2d_backward(const Deconv2d& c, const Tensor& x, const Tensor& dy,
                                GradBuffer& gb) {
  const int H = x.shape[1], W = x.shape[2];
  const int HO = c.out_size(H), WO = c.out_size(W);
  require_shape(dy, {c.out_ch, HO, WO}, "deconv2d dy");
  Tensor dx({c.in_ch, H, W});
  const double* wp = c.W->value.ptr();
  const double* xp = x.ptr();
  const double* dyp = dy.ptr();
  double* dxp = dx.ptr();
  double* dWp = gb[c.W].ptr();
  double* dbp = gb[c.b].ptr();
  for (int oc = 0; oc < c.out_ch; ++oc) {
    const double* dyc = dyp + static_cast<std::size_t>(oc) * HO * WO;
    double acc_b = 0;
    for (int i = 0; i < HO * WO; ++i) acc_b += dyc[i];
    dbp[oc] += acc_b;
  }
  for (int ic = 0; ic < c.in_ch; ++ic) {
    const double* xc = xp + static_cast<std::size_t>(ic) * H * W;
    double* dxc = dxp + static_cast<std::size_t>(ic) * H * W;
    for (int oc = 0; oc < c.out_ch; ++oc) {
      const double* dyc = dyp + static_cast<std::size_t>(oc) * HO * WO;
      const std::size_t wbase = (static_cast<std::size_t>(ic) * c.out_ch + oc) * c.k * c.k;
      for (int ky = 0; ky < c.k; ++ky) {
        int iy0, iy1;
        detail::conv_range(c.pad, c.stride, ky, HO, H, iy0, iy1);
        for (int kx = 0; kx < c.k; ++kx) {
          int ix0, ix1;
          detail::conv_range(c.pad, c.stride, kx, WO, W, ix0, ix1);
          double w = wp[wbase + static_cast<std::size_t>(ky) * c.k + kx];
          double acc_w = 0;
          for (int iy = iy0; iy < iy1; ++iy) {
            int oy = iy * c.stride - c.pad + ky;
            const double* xr = xc + static_cast<std::size_t>(iy) * W;
            double* dxr = dxc + static_cast<std::size_t>(iy) * W;
            const double* dyr = dyc + static_cast<std::size_t>(oy) * WO - c.pad + kx;
            for (int ix = ix0; ix < ix1; ++ix) {
              double g = dyr[static_cast<std::size_t>(ix) * c.stride];
              acc_w += g * xr[ix];
              dxr[ix] += g * w;
            }
          }
          dWp[wbase + static_cast<std::size_t>(ky) * c.k + kx] += acc_w;
        }
      }
    }
  }
  return dx;
}

// --- instance normalization ---

struct InstanceNorm {
  ParamPtr gamma, beta;  // [ch]
  int ch = 0;
  double eps = 1e-5;
};

inline InstanceNorm make_instnorm(ParamRegistry& reg, const std::string& name,
                                  int ch) {
  InstanceNorm n;
  n.ch = ch;
  n.gamma = reg.create(name + ".gamma", {ch});
  n.beta = reg.create(name + ".beta", {ch});
  n.gamma->value.fill(1.0);
  return n;
}

struct InstNormCache {
  Tensor xhat;
  std::vector<double> invstd;
};

inline Tensor instnorm_forward(const InstanceNorm& n, const Tensor& x,
                               InstNormCache& cache) {
  if (x.shape.size() != 3 || x.shape[0] != n.ch)
    throw ShapeMismatch("instance norm input must be [ch,H,W]");
  const int m = x.shape[1] * x.shape[2];
  Tensor y(x.shape);
  cache.xhat = Tensor(x.shape);
  cache.invstd.assign(static_cast<std::size_t>(n.ch), 0.0);
  for (int c = 0; c < n.ch; ++c) {
    const double* xc = x.ptr() + static_cast<std::size_t>(c) * m;
    double* yc = y.ptr() + static_cast<std::size_t>(c) * m;
    double* hc = cache.xhat.ptr() + static_cast<std::size_t>(c) * m;
    double mu = 0;
    for (int i = 0; i < m; ++i) mu += xc[i];
    mu /= m;
    double var = 0;
    for (int i = 0; i < m; ++i) {
      double d = xc[i] - mu;
      var += d * d;
    }
    var /= m;
    double invstd = 1.0 / std::sqrt(var + n.eps);
    cache.invstd[static_cast<std::size_t>(c)] = invstd;
    double g = n.gamma->value.data[static_cast<std::size_t>(c)];
    double b = n.beta->value.data[static_cast<std::size_t>(c)];
    for (int i = 0; i < m; ++i) {
      double xh = (xc[i] - mu) * invstd;
      hc[i] = xh;
      yc[i] = g * xh + b;
    }
  }
  return y;
}

inline Tensor instnorm_backward(const InstanceNorm& n, const InstNormCache& cache,
                                const Tensor& dy, GradBuffer& gb) {
  const int m = dy.shape[1] * dy.shape[2];
  Tensor dx(dy.shape);
  double* dgp = gb[n.gamma].ptr();
  double* dbp = gb[n.beta].ptr();
  for (int c = 0; c < n.ch; ++c) {
    const double* dyc = dy.ptr() + static_cast<std::size_t>(c) * m;
    const double* hc = cache.xhat.ptr() + static_cast<std::size_t>(c) * m;
    double* dxc = dx.ptr() + static_cast<std::size_t>(c) * m;
    double g = n.gamma->value.data[static_cast<std::size_t>(c)];
    double invstd = cache.invstd[static_cast<std::size_t>(c)];
    double s1 = 0, s2 = 0, dg = 0, db = 0;
    for (int i = 0; i < m; ++i) {
      double dxh = dyc[i] * g;
      s1 += dxh;
      s2 += dxh * hc[i];
      dg += dyc[i] * hc[i];
      db += dyc[i];
    }
    dgp[c] += dg;
    dbp[c] += db;
    double inv_m = 1.0 / m;
    for (int i = 0; i < m; ++i) {
      double dxh = dyc[i] * g;
      dxc[i] = invstd * (dxh - s1 * inv_m - hc[i] * s2 * inv_m);
    }
  }
  return dx;
}

// --- residual block: x + IN(conv(lrelu(IN(conv(x))))), lrelu on the sum ---

struct ResBlock {
  Conv2d c1, c2;
  InstanceNorm n1, n2;
  double slope = 0.2;
};

inline ResBlock make_resblock(ParamRegistry& reg, const std::string& name, int ch,
                              double slope) {
  ResBlock r;
  r.c1 = make_conv2d(reg, name + ".conv1", ch, ch, 3, 1, 1);
  r.c2 = make_conv2d(reg, name + ".conv2", ch, ch, 3, 1, 1);
  r.n1 = make_instnorm(reg, name + ".norm1", ch);
  r.n2 = make_instnorm(reg, name + ".norm2", ch);
  r.slope = slope;
  return r;
}

struct ResBlockCache {
  Tensor x, c1_out, n1_out, h, c2_out, sum;
  InstNormCache i1, i2;
};

inline Tensor resblock_forward(const ResBlock& r, const Tensor& x,
                               ResBlockCache& cache) {
  cache.x = x;
  cache.c1_out = conv2d_forward(r.c1, x);
  cache.n1_out = instnorm_forward(r.n1, cache.c1_out, cache.i1);
  cache.h = lrelu_forward(cache.n1_out, r.slope);
  cache.c2_out = conv2d_forward(r.c2, cache.h);
  Tensor f = instnorm_forward(r.n2, cache.c2_out, cache.i2);
  cache.sum = Tensor(x.shape);
  for (std::size_t i = 0; i < x.data.size(); ++i)
    cache.sum.data[i] = x.data[i] + f.data[i];
  return lrelu_forward(cache.sum, r.slope);
}

inline Tensor resblock_backward(const ResBlock& r, const ResBlockCache& cache,
                                const Tensor& dy, GradBuffer& gb) {
  Tensor dsum = lrelu_backward(cache.sum, dy, r.slope);
  Tensor dc2 = instnorm_backward(r.n2, cache.i2, dsum, gb);
  Tensor dh = conv2d_backward(r.c2, cache.h, dc2, gb);
  Tensor dn1 = lrelu_backward(cache.n1_out, dh, r.slope);
  Tensor dc1 = instnorm_backward(r.n1, cache.i1, dn1, gb);
  Tensor dx = conv2d_backward(r.c1, cache.x, dc1, gb);
  for (std::size_t i = 0; i < dx.data.size(); ++i) dx.data[i] += dsum.data[i];
  return dx;
}

// --- Adam ---

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<Tensor> m, v;
  long t = 0;

  explicit AdamState(const ParamRegistry& reg) {
    for (const auto& p : reg.params()) {
      m.emplace_back(p->value.shape);
      v.emplace_back(p->value.shape);
    }
  }
};

inline void adam_step(const ParamRegistry& reg, AdamState& state,
                      const GradBuffer& grads, const AdamConfig& cfg) {
  state.t += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < reg.params().size(); ++i) {
    Tensor& p = reg.params()[i]->value;
    Tensor& m = state.m[i];
    Tensor& v = state.v[i];
    const Tensor& g = grads.g[i];
    for (std::size_t j = 0; j < p.data.size(); ++j) {
      double gr = g.data[j];
      m.data[j] = cfg.beta1 * m.data[j] + (1.0 - cfg.beta1) * gr;
      v.data[j] = cfg.beta2 * v.data[j] + (1.0 - cfg.beta2) * gr * gr;
      double mhat = m.data[j] / bc1;
      double vhat = v.data[j] / bc2;
      p.data[j] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

}  // namespace topodepth::nn
