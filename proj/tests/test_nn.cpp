#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "topodepth/nn.hpp"
#include "topodepth/rng.hpp"
#include "grad_check.hpp"

using namespace topodepth;

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.data) v = scale * (2.0 * rng.uniform() - 1.0);
  return t;
}

double weighted_sum(const Tensor& y, const Tensor& coeff) {
  double acc = 0;
  for (std::size_t i = 0; i < y.data.size(); ++i) acc += y.data[i] * coeff.data[i];
  return acc;
}

}  // namespace

TEST_CASE("conv2d stride-2 gradients match finite differences") {
  nn::ParamRegistry reg;
  auto conv = nn::make_conv2d(reg, "c", 3, 4, 3, 2, 1);
  Rng rng(101);
  nn::fill_normal(conv.W->value, rng, 0.4);
  nn::fill_normal(conv.b->value, rng, 0.2);
  Tensor x = random_tensor({3, 5, 7}, rng);
  Tensor y0 = conv2d_forward(conv, x);
  REQUIRE(y0.shape == std::vector<int>{4, 3, 4});
  Tensor coeff = random_tensor(y0.shape, rng);

  auto loss = [&] { return weighted_sum(conv2d_forward(conv, x), coeff); };
  nn::GradBuffer gb(reg);
  Tensor dx = conv2d_backward(conv, x, coeff, gb);
  auto rep = check_param_grads(reg, gb, loss);
  INFO(rep.worst_param);
  CHECK(rep.max_rel < 1e-5);
  auto repx = check_input_grads(x, dx, loss);
  INFO(repx.worst_param);
  CHECK(repx.max_rel < 1e-5);
}

TEST_CASE("conv2d stride-1 gradients match finite differences") {
  nn::ParamRegistry reg;
  auto conv = nn::make_conv2d(reg, "c", 2, 3, 3, 1, 1);
  Rng rng(102);
  nn::fill_normal(conv.W->value, rng, 0.4);
  nn::fill_normal(conv.b->value, rng, 0.2);
  Tensor x = random_tensor({2, 4, 6}, rng);
  Tensor y0 = conv2d_forward(conv, x);
  REQUIRE(y0.shape == std::vector<int>{3, 4, 6});
  Tensor coeff = random_tensor(y0.shape, rng);

  auto loss = [&] { return weighted_sum(conv2d_forward(conv, x), coeff); };
  nn::GradBuffer gb(reg);
  Tensor dx = conv2d_backward(conv, x, coeff, gb);
  CHECK(check_param_grads(reg, gb, loss).max_rel < 1e-5);
  CHECK(check_input_grads(x, dx, loss).max_rel < 1e-5);
}

TEST_CASE("deconv2d k4 s2 gradients match finite differences") {
  nn::ParamRegistry reg;
  auto dc = nn::make_deconv2d(reg, "d", 3, 2, 4, 2, 1);
  Rng rng(103);
  nn::fill_normal(dc.W->value, rng, 0.4);
  nn::fill_normal(dc.b->value, rng, 0.2);
  Tensor x = random_tensor({3, 3, 4}, rng);
  Tensor y0 = deconv2d_forward(dc, x);
  REQUIRE(y0.shape == std::vector<int>{2, 6, 8});
  Tensor coeff = random_tensor(y0.shape, rng);

  auto loss = [&] { return weighted_sum(deconv2d_forward(dc, x), coeff); };
  nn::GradBuffer gb(reg);
  Tensor dx = deconv2d_backward(dc, x, coeff, gb);
  CHECK(check_param_grads(reg, gb, loss).max_rel < 1e-5);
  CHECK(check_input_grads(x, dx, loss).max_rel < 1e-5);
}

TEST_CASE("deconv2d k3 s1 gradients match finite differences") {
  nn::ParamRegistry reg;
  auto dc = nn::make_deconv2d(reg, "d", 2, 2, 3, 1, 1);
  Rng rng(104);
  nn::fill_normal(dc.W->value, rng, 0.4);
  nn::fill_normal(dc.b->value, rng, 0.2);
  Tensor x = random_tensor({2, 5, 4}, rng);
  Tensor y0 = deconv2d_forward(dc, x);
  REQUIRE(y0.shape == std::vector<int>{2, 5, 4});
  Tensor coeff = random_tensor(y0.shape, rng);

  auto loss = [&] { return weighted_sum(deconv2d_forward(dc, x), coeff); };
  nn::GradBuffer gb(reg);
  Tensor dx = deconv2d_backward(dc, x, coeff, gb);
  CHECK(check_param_grads(reg, gb, loss).max_rel < 1e-5);
  CHECK(check_input_grads(x, dx, loss).max_rel < 1e-5);
}

TEST_CASE("dense gradients match finite differences") {
  nn::ParamRegistry reg;
  auto d = nn::make_dense(reg, "fc", 7, 5);
  Rng rng(105);
  nn::fill_normal(d.W->value, rng, 0.5);
  nn::fill_normal(d.b->value, rng, 0.2);
  Tensor x = random_tensor({7}, rng);
  Tensor coeff = random_tensor({5}, rng);

  auto loss = [&] { return weighted_sum(dense_forward(d, x), coeff); };
  nn::GradBuffer gb(reg);
  Tensor dx = dense_backward(d, x, coeff, gb);
  CHECK(check_param_grads(reg, gb, loss).max_rel < 1e-5);
  CHECK(check_input_grads(x, dx, loss).max_rel < 1e-5);
}

TEST_CASE("instance norm gradients match finite differences") {
  nn::ParamRegistry reg;
  auto n = nn::make_instnorm(reg, "in", 3);
  Rng rng(106);
  nn::fill_normal(n.gamma->value, rng, 0.3);
  for (auto& v : n.gamma->value.data) v += 1.0;
  nn::fill_normal(n.beta->value, rng, 0.3);
  Tensor x = random_tensor({3, 4, 5}, rng);
  Tensor coeff = random_tensor({3, 4, 5}, rng);

  auto loss = [&] {
    nn::InstNormCache cache;
    return weighted_sum(instnorm_forward(n, x, cache), coeff);
  };
  nn::InstNormCache cache;
  instnorm_forward(n, x, cache);
  nn::GradBuffer gb(reg);
  Tensor dx = instnorm_backward(n, cache, coeff, gb);
  CHECK(check_param_grads(reg, gb, loss).max_rel < 1e-5);
  CHECK(check_input_grads(x, dx, loss).max_rel < 1e-5);
}

TEST_CASE("instance norm normalizes each channel") {
  nn::ParamRegistry reg;
  auto n = nn::make_instnorm(reg, "in", 2);
  Rng rng(107);
  Tensor x = random_tensor({2, 6, 6}, rng, 3.0);
  nn::InstNormCache cache;
  Tensor y = instnorm_forward(n, x, cache);
  for (int c = 0; c < 2; ++c) {
    double mu = 0, var = 0;
    for (int i = 0; i < 36; ++i) mu += y.data[static_cast<std::size_t>(c * 36 + i)];
    mu /= 36;
    for (int i = 0; i < 36; ++i) {
      double d = y.data[static_cast<std::size_t>(c * 36 + i)] - mu;
      var += d * d;
    }
    var /= 36;
    CHECK(mu == Catch::Approx(0.0).margin(1e-12));
    CHECK(var == Catch::Approx(1.0).margin(1e-3));  // eps shrinks it slightly
  }
}

TEST_CASE("leaky relu and sigmoid behave and differentiate") {
  Tensor x({4});
  x.data = {-2.0, -0.5, 0.5, 2.0};
  Tensor y = nn::lrelu_forward(x, 0.2);
  CHECK(y.data == std::vector<double>{-0.4, -0.1, 0.5, 2.0});
  Tensor dy({4});
  dy.fill(1.0);
  Tensor dx = nn::lrelu_backward(x, dy, 0.2);
  CHECK(dx.data == std::vector<double>{0.2, 0.2, 1.0, 1.0});

  Tensor s = nn::sigmoid_forward(x);
  CHECK(s.data[2] == Catch::Approx(1.0 / (1.0 + std::exp(-0.5))).margin(1e-15));
  Tensor ds = nn::sigmoid_backward(s, dy);
  for (std::size_t i = 0; i < 4; ++i)
    CHECK(ds.data[i] == Catch::Approx(s.data[i] * (1 - s.data[i])).margin(1e-15));
  for (double v : s.data) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
}

TEST_CASE("residual block gradients match finite differences") {
  nn::ParamRegistry reg;
  auto res = nn::make_resblock(reg, "res", 3, 0.2);
  Rng rng(108);
  nn::fill_normal(res.c1.W->value, rng, 0.4);
  nn::fill_normal(res.c2.W->value, rng, 0.4);
  nn::fill_normal(res.c1.b->value, rng, 0.1);
  nn::fill_normal(res.c2.b->value, rng, 0.1);
  Tensor x = random_tensor({3, 4, 4}, rng);
  Tensor coeff = random_tensor({3, 4, 4}, rng);

  // keep pre-activations clear of the rectifier kink for differencing
  double margin = 1e18;
  nn::g_kink_margin = &margin;
  {
    nn::ResBlockCache cache;
    resblock_forward(res, x, cache);
  }
  nn::g_kink_margin = nullptr;
  REQUIRE(margin > 1e-3);

  auto loss = [&] {
    nn::ResBlockCache cache;
    return weighted_sum(resblock_forward(res, x, cache), coeff);
  };
  nn::ResBlockCache cache;
  resblock_forward(res, x, cache);
  nn::GradBuffer gb(reg);
  Tensor dx = resblock_backward(res, cache, coeff, gb);
  CHECK(check_param_grads(reg, gb, loss).max_rel < 1e-5);
  CHECK(check_input_grads(x, dx, loss).max_rel < 1e-5);
}

TEST_CASE("adam with zero learning rate leaves parameters bit-identical") {
  nn::ParamRegistry reg;
  auto d = nn::make_dense(reg, "fc", 3, 2);
  Rng rng(109);
  nn::fill_normal(d.W->value, rng, 0.5);
  std::vector<double> before = d.W->value.data;
  nn::AdamState st(reg);
  nn::GradBuffer gb(reg);
  for (auto& t : gb.g)
    for (auto& v : t.data) v = rng.normal();
  nn::AdamConfig cfg;
  cfg.lr = 0.0;
  adam_step(reg, st, gb, cfg);
  CHECK(d.W->value.data == before);
  CHECK(st.t == 1);
}

TEST_CASE("one adam step matches the hand-computed update") {
  nn::ParamRegistry reg;
  auto d = nn::make_dense(reg, "fc", 1, 1);
  d.W->value.data[0] = 0.5;
  nn::AdamState st(reg);
  nn::GradBuffer gb(reg);
  gb.g[0].data[0] = 0.3;  // dW
  nn::AdamConfig cfg;  // lr 1e-3, betas 0.9/0.999, eps 1e-8
  adam_step(reg, st, gb, cfg);
  // t=1: mhat = g, vhat = g^2, step = lr * g / (|g| + eps)
  double expect = 0.5 - 1e-3 * 0.3 / (std::sqrt(0.3 * 0.3) + 1e-8);
  CHECK(d.W->value.data[0] == Catch::Approx(expect).margin(1e-15));
}

TEST_CASE("adam converges on a quadratic") {
  nn::ParamRegistry reg;
  auto p = reg.create("p", {2});
  p->value.data = {3.0, -2.0};
  nn::AdamState st(reg);
  nn::AdamConfig cfg;
  cfg.lr = 0.05;
  for (int i = 0; i < 2000; ++i) {
    nn::GradBuffer gb(reg);
    gb.g[0].data[0] = 2.0 * (p->value.data[0] - 1.0);
    gb.g[0].data[1] = 2.0 * (p->value.data[1] + 0.5);
    adam_step(reg, st, gb, cfg);
  }
  CHECK(p->value.data[0] == Catch::Approx(1.0).margin(1e-4));
  CHECK(p->value.data[1] == Catch::Approx(-0.5).margin(1e-4));
}
