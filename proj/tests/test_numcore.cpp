#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gazeworld/ops.hpp"
#include "gazeworld/optim.hpp"
#include "gazeworld/rng.hpp"

using namespace gazeworld;

namespace {

Tensor<double> random_tensor(Rng& rng, Shape shape, bool requires_grad = true,
                             double scale = 1.0) {
  std::vector<double> data(shape_size(shape));
  for (auto& v : data) v = rng.normal(0.0, scale);
  auto t = Tensor<double>::from(std::move(shape), std::move(data));
  t.set_requires_grad(requires_grad);
  return t;
}

// Finite-difference check of an op's gradients through a random linear
// functional of its output (so the output grad is a generic vector).
void op_grad_check(const std::function<Tensor<double>(const std::vector<Tensor<double>>&)>& op,
                   std::vector<Tensor<double>> inputs, double tol = 1e-6) {
  Rng rng(99);
  Tensor<double> probe;
  auto f = [&]() {
    auto out = op(inputs);
    if (!probe.defined()) probe = random_tensor(rng, out.shape(), false);
    return ops::sum_all(ops::mul(out, probe));
  };
  const auto report = grad_check(f, inputs);
  CHECK(report.max_rel_err < tol);
}

}  // namespace

TEST_CASE("tensor basics") {
  auto t = Tensor<double>::from({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(t.rows() == 2);
  CHECK(t.cols() == 3);
  CHECK(t.size() == 6);
  CHECK_THROWS_AS(t.item(), std::invalid_argument);
  CHECK(Tensor<double>::scalar(4.5).item() == 4.5);
  CHECK_THROWS_AS(Tensor<double>::from({2, 2}, {1.0}), std::invalid_argument);
}

TEST_CASE("backward on sum gives ones") {
  auto x = Tensor<double>::from({3}, {1, 2, 3});
  x.set_requires_grad(true);
  ops::sum_all(x).backward();
  CHECK(x.grad()[0] == 1.0);
  CHECK(x.grad()[1] == 1.0);
  CHECK(x.grad()[2] == 1.0);
}

TEST_CASE("gradient accumulation is additive; zero_grad resets") {
  auto x = Tensor<double>::from({2}, {1, 2});
  x.set_requires_grad(true);
  auto loss = ops::mean_all(ops::mul(x, x));
  loss.backward();
  const double g0 = x.grad()[0];
  loss.backward();
  CHECK(x.grad()[0] == doctest::Approx(2 * g0));
  x.zero_grad();
  CHECK_FALSE(x.has_grad());
}

TEST_CASE("stop-gradient blocks propagation entirely") {
  auto x = Tensor<double>::from({3}, {1, 2, 3});
  x.set_requires_grad(true);
  auto y = ops::mul(x.detach(), x.detach());
  auto z = ops::add(ops::sum_all(y), ops::scale(ops::sum_all(x), 0.0));
  z.backward();
  for (double g : x.grad()) CHECK(g == 0.0);
}

TEST_CASE("no-grad guard suppresses graph recording") {
  auto x = Tensor<double>::from({2}, {1, 2});
  x.set_requires_grad(true);
  Tensor<double> y;
  {
    autograd::NoGradGuard guard;
    y = ops::sum_all(x);
  }
  CHECK_FALSE(y.requires_grad());
}

TEST_CASE("layer_norm of a constant row is zero") {
  auto x = Tensor<double>::from({1, 4}, {3, 3, 3, 3});
  auto y = ops::layer_norm(x, 1e-5);
  for (double v : y.data()) CHECK(v == doctest::Approx(0.0));
}

TEST_CASE("softmax of [0,0] is [0.5,0.5]") {
  auto y = ops::softmax_rows(Tensor<double>::from({1, 2}, {0, 0}));
  CHECK(y.data()[0] == doctest::Approx(0.5));
  CHECK(y.data()[1] == doctest::Approx(0.5));
}

TEST_CASE("causal softmax zeroes masked entries exactly") {
  Rng rng(3);
  auto x = random_tensor(rng, {4, 4}, false);
  auto y = ops::softmax_causal(x);
  for (std::size_t i = 0; i < 4; ++i) {
    double row_sum = 0.0;
    for (std::size_t j = 0; j < 4; ++j) {
      if (j > i) CHECK(y.data()[i * 4 + j] == 0.0);
      row_sum += y.data()[i * 4 + j];
    }
    CHECK(row_sum == doctest::Approx(1.0));
  }
}

TEST_CASE("gelu fixed points") {
  auto y = ops::gelu(Tensor<double>::from({3}, {0.0, 10.0, -10.0}));
  CHECK(y.data()[0] == 0.0);
  CHECK(y.data()[1] == doctest::Approx(10.0));
  CHECK(y.data()[2] == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("smooth_l1 branch values") {
  auto p0 = Tensor<double>::from({2}, {1, 2});
  CHECK(ops::smooth_l1(p0, p0, 1.0).item() == 0.0);
  auto a = Tensor<double>::from({1}, {0.5});
  auto z = Tensor<double>::from({1}, {0.0});
  CHECK(ops::smooth_l1(a, z, 1.0).item() == doctest::Approx(0.125));
  auto b = Tensor<double>::from({1}, {3.0});
  CHECK(ops::smooth_l1(b, z, 1.0).item() == doctest::Approx(2.5));
  CHECK_THROWS_AS(ops::smooth_l1(a, Tensor<double>::from({2}, {0, 0}), 1.0),
                  std::invalid_argument);
}

TEST_CASE("composite smooth_l1(Wx, c) matches finite differences") {
  Rng rng(11);
  auto w = random_tensor(rng, {4, 4});
  auto x = random_tensor(rng, {1, 4});
  auto c = random_tensor(rng, {1, 4}, false);
  auto f = [&] { return ops::smooth_l1(ops::matmul(x, w), c, 1.0); };
  const auto report = grad_check(f, {w, x});
  CHECK(report.max_rel_err < 1e-4);
}

TEST_CASE("per-op gradients match central finite differences") {
  Rng rng(5);

  SUBCASE("add/sub/mul/scale") {
    auto a = random_tensor(rng, {3, 4});
    auto b = random_tensor(rng, {3, 4});
    op_grad_check([](const auto& in) { return ops::add(in[0], in[1]); }, {a, b});
    op_grad_check([](const auto& in) { return ops::sub(in[0], in[1]); }, {a, b});
    op_grad_check([](const auto& in) { return ops::mul(in[0], in[1]); }, {a, b});
    op_grad_check([](const auto& in) { return ops::scale(in[0], 1.7); }, {a});
  }
  SUBCASE("matmul/transpose") {
    auto a = random_tensor(rng, {3, 4});
    auto b = random_tensor(rng, {4, 2});
    op_grad_check([](const auto& in) { return ops::matmul(in[0], in[1]); }, {a, b});
    op_grad_check([](const auto& in) { return ops::transpose(in[0]); }, {a});
  }
  SUBCASE("row ops") {
    auto x = random_tensor(rng, {3, 4});
    auto v = random_tensor(rng, {1, 4});
    op_grad_check([](const auto& in) { return ops::add_rowvec(in[0], in[1]); }, {x, v});
    op_grad_check([](const auto& in) { return ops::mul_rowvec(in[0], in[1]); }, {x, v});
    op_grad_check([](const auto& in) { return ops::mean_rows(in[0]); }, {x});
    op_grad_check(
        [](const auto& in) { return ops::gather_rows(in[0], {2, 0, 2}); }, {x});
    op_grad_check([](const auto& in) { return ops::slice_cols(in[0], 1, 3); }, {x});
    op_grad_check(
        [](const auto& in) {
          return ops::concat_cols(std::vector<Tensor<double>>{in[0], in[1]});
        },
        {random_tensor(rng, {3, 2}), random_tensor(rng, {3, 3})});
    op_grad_check(
        [](const auto& in) {
          return ops::stack_rows(std::vector<Tensor<double>>{in[0], in[1], in[0]});
        },
        {random_tensor(rng, {1, 4}), random_tensor(rng, {1, 4})});
  }
  SUBCASE("normalization and activations") {
    auto x = random_tensor(rng, {3, 6});
    op_grad_check([](const auto& in) { return ops::layer_norm(in[0], 1e-5); }, {x}, 2e-6);
    op_grad_check([](const auto& in) { return ops::softmax_rows(in[0]); }, {x}, 2e-6);
    auto sq = random_tensor(rng, {4, 4});
    op_grad_check([](const auto& in) { return ops::softmax_causal(in[0]); }, {sq}, 2e-6);
    op_grad_check([](const auto& in) { return ops::gelu(in[0]); }, {x});
    auto g = random_tensor(rng, {1, 6});
    auto bvec = random_tensor(rng, {1, 6});
    op_grad_check(
        [](const auto& in) { return ops::layer_norm_affine(in[0], in[1], in[2], 1e-5); },
        {x, g, bvec}, 2e-6);
  }
  SUBCASE("losses") {
    auto p = random_tensor(rng, {3, 4});
    auto t = random_tensor(rng, {3, 4}, false);
    auto f1 = [&] { return ops::smooth_l1(p, t, 1.0); };
    CHECK(grad_check(f1, {p}).max_rel_err < 1e-4);
    auto logits = random_tensor(rng, {3, 5});
    auto f2 = [&] { return ops::cross_entropy_logits(logits, {1, 4, 0}); };
    CHECK(grad_check(f2, {logits}).max_rel_err < 1e-4);
    auto bl = random_tensor(rng, {4});
    auto f3 = [&] { return ops::bce_logits(bl, std::vector<double>{1, 0, 1, 0}); };
    CHECK(grad_check(f3, {bl}).max_rel_err < 1e-4);
    auto f4 = [&] { return ops::l1_loss(p, t); };
    CHECK(grad_check(f4, {p}).max_rel_err < 1e-4);
  }
}

TEST_CASE("cross entropy of uniform logits is ln(n)") {
  auto logits = Tensor<double>::zeros({2, 16});
  auto loss = ops::cross_entropy_logits(logits, {3, 9});
  CHECK(loss.item() == doctest::Approx(std::log(16.0)).epsilon(1e-12));
}

TEST_CASE("grad_check on a quadratic") {
  auto x = Tensor<double>::from({1}, {3.0});
  x.set_requires_grad(true);
  auto f = [&] { return ops::mul(x, x); };
  const auto report = grad_check(f, {x});
  CHECK(report.max_rel_err < 1e-8);
  x.zero_grad();
  f().backward();
  CHECK(x.grad()[0] == doctest::Approx(6.0));
}

TEST_CASE("adamw update rules") {
  SUBCASE("zero grad, zero decay: parameters unchanged") {
    auto p = Tensor<double>::from({3}, {1, -2, 3});
    p.set_requires_grad(true);
    AdamWConfig<double> cfg;
    cfg.weight_decay = 0.0;
    AdamW<double> opt(cfg, {p});
    opt.zero_grad();
    opt.step();
    CHECK(p.data()[0] == 1.0);
    CHECK(p.data()[1] == -2.0);
    CHECK(p.data()[2] == 3.0);
  }
  SUBCASE("single step with unit gradient moves by about -lr") {
    auto p = Tensor<double>::from({1}, {0.0});
    p.set_requires_grad(true);
    AdamWConfig<double> cfg;
    cfg.learning_rate = 0.1;
    cfg.weight_decay = 0.0;
    AdamW<double> opt(cfg, {p});
    opt.zero_grad();
    p.grad_mut()[0] = 1.0;
    opt.step();
    CHECK(p.data()[0] == doctest::Approx(-0.1).epsilon(1e-6));
  }
  SUBCASE("decay-only path multiplies by 1 - lr*wd") {
    auto p = Tensor<double>::from({1}, {2.0});
    p.set_requires_grad(true);
    AdamWConfig<double> cfg;
    cfg.learning_rate = 0.1;
    cfg.weight_decay = 0.04;
    AdamW<double> opt(cfg, {p});
    opt.zero_grad();
    opt.step();
    CHECK(p.data()[0] == doctest::Approx(2.0 * (1.0 - 0.1 * 0.04)).epsilon(1e-12));
  }
  SUBCASE("missing gradient is an error") {
    auto p = Tensor<double>::from({1}, {0.0});
    p.set_requires_grad(true);
    AdamW<double> opt(AdamWConfig<double>{}, {p});
    CHECK_THROWS_AS(opt.step(), std::runtime_error);
  }
}

TEST_CASE("ema_update endpoint and midpoint behavior") {
  auto make = [](double v) {
    auto t = Tensor<double>::from({2}, {v, v});
    return t;
  };
  auto target = make(2.0);
  auto online = make(1.0);
  std::vector<Tensor<double>> tv{target}, ov{online};

  ema_update(tv, ov, 1.0);
  CHECK(target.data()[0] == 2.0);
  ema_update(tv, ov, 0.0);
  CHECK(target.data()[0] == 1.0);

  auto t2 = make(2.0);
  std::vector<Tensor<double>> tv2{t2};
  ema_update(tv2, ov, 0.998);
  CHECK(t2.data()[0] == doctest::Approx(1.998).epsilon(1e-12));

  auto bad = Tensor<double>::from({3}, {0, 0, 0});
  std::vector<Tensor<double>> tb{bad};
  CHECK_THROWS_AS(ema_update(tb, ov, 0.5), std::invalid_argument);
}

TEST_CASE("ema_schedule endpoints, midpoint, monotonicity") {
  CHECK(ema_schedule(0, 100) == 0.998);
  CHECK(ema_schedule(100, 100) == 1.0);
  CHECK(ema_schedule(50, 100) == doctest::Approx(0.999).epsilon(1e-12));
  double prev = 0.0;
  for (int t = 0; t <= 200; ++t) {
    const double tau = ema_schedule(t, 200);
    CHECK(tau >= prev);
    CHECK(tau >= 0.998);
    CHECK(tau <= 1.0);
    prev = tau;
  }
  CHECK_THROWS_AS(ema_schedule(5, 4), std::invalid_argument);
  CHECK(ema_schedule(0, 0) == 1.0);
}
