#pragma once

// Central finite-difference gradient checking against the analytic backward
// passes. Lives in test code only; the implementation path never sees it.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "topodepth/nn.hpp"

struct GradCheckReport {
  double max_rel = 0;
  std::string worst_param;
  long checked = 0;
};

// rel error with a guarded denominator: |fd - g| / max(floor, |fd|, |g|).
// The floor turns the check into an absolute one for near-zero gradients,
// where central differences bottom out at ~1e-11 of cancellation noise.
inline double rel_err(double fd, double g, double floor_ = 1e-4) {
  return std::abs(fd - g) / std::max({floor_, std::abs(fd), std::abs(g)});
}

// Perturbs every element of every registered parameter.
inline GradCheckReport check_param_grads(
    topodepth::nn::ParamRegistry& reg, const topodepth::nn::GradBuffer& analytic,
    const std::function<double()>& loss, double h = 1e-5) {
  GradCheckReport rep;
  for (const auto& p : reg.params()) {
    for (std::size_t i = 0; i < p->value.data.size(); ++i) {
      double saved = p->value.data[i];
      p->value.data[i] = saved + h;
      double lp = loss();
      p->value.data[i] = saved - h;
      double lm = loss();
      p->value.data[i] = saved;
      double fd = (lp - lm) / (2.0 * h);
      double g = analytic.g[static_cast<std::size_t>(p->index)].data[i];
      double r = rel_err(fd, g);
      ++rep.checked;
      if (r > rep.max_rel) {
        rep.max_rel = r;
        rep.worst_param = p->name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return rep;
}

// Same treatment for an input tensor and its analytic dx.
inline GradCheckReport check_input_grads(topodepth::Tensor& x,
                                         const topodepth::Tensor& dx,
                                         const std::function<double()>& loss,
                                         double h = 1e-5) {
  GradCheckReport rep;
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    double saved = x.data[i];
    x.data[i] = saved + h;
    double lp = loss();
    x.data[i] = saved - h;
    double lm = loss();
    x.data[i] = saved;
    double fd = (lp - lm) / (2.0 * h);
    double r = rel_err(fd, dx.data[i]);
    ++rep.checked;
    if (r > rep.max_rel) {
      rep.max_rel = r;
      rep.worst_param = "x[" + std::to_string(i) + "]";
    }
  }
  return rep;
}
