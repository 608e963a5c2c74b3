#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <functional>
#include <vector>

#include "sorl/autodiff.hpp"
#include "sorl/rng.hpp"

using namespace sorl;

namespace {

Tensor randn(std::vector<int> shape, uint64_t seed) {
  Tensor t(std::move(shape));
  Rng r(seed);
  r.fill_normal(t);
  return t;
}

// Central finite differences of a scalar-valued builder w.r.t. one tracked
// input, compared against the tape gradient of the same build.
void fd_check(const Tensor& x0, const std::function<ad::NodeId(ad::Graph&, ad::NodeId)>& build,
              double tol, double step = 1e-5) {
  ad::Graph g;
  const ad::NodeId x = g.input(x0);
  g.backward(build(g, x));
  const Tensor grad = g.grad_of(x);

  Tensor xp = x0;
  double worst = 0.0;
  for (int64_t i = 0; i < x0.size(); ++i) {
    ad::Graph gp;
    xp.data[i] = x0.data[i] + step;
    const double up = gp.value(build(gp, gp.input(xp))).item();
    ad::Graph gm;
    xp.data[i] = x0.data[i] - step;
    const double um = gm.value(build(gm, gm.input(xp))).item();
    xp.data[i] = x0.data[i];
    const double fd = (up - um) / (2.0 * step);
    worst = std::max(worst, std::fabs(fd - grad.data[i]) / (std::fabs(fd) + 1.0));
  }
  CHECK(worst < tol);
}

}  // namespace

TEST_CASE("sum backward is all ones, mean is 1/n") {
  ad::Graph g;
  const Tensor x0 = randn({3, 4}, 1);
  const ad::NodeId x = g.input(x0);
  g.backward(g.sum(x));
  for (double v : g.grad_of(x).data) CHECK(v == 1.0);

  ad::Graph g2;
  const ad::NodeId x2 = g2.input(x0);
  g2.backward(g2.mean(x2));
  for (double v : g2.grad_of(x2).data) CHECK(v == doctest::Approx(1.0 / 12).epsilon(1e-15));
}

TEST_CASE("stop_grad blocks the gradient path") {
  ad::Graph g;
  const Tensor x0 = randn({2, 2}, 2);
  const ad::NodeId x = g.input(x0);
  // y = x * stopgrad(x): gradient should be exactly stopgrad(x) = x, not 2x.
  g.backward(g.sum(g.mul(x, g.stop_grad(x))));
  const Tensor& gx = g.grad_of(x);
  for (int64_t i = 0; i < x0.size(); ++i) CHECK(gx.data[i] == x0.data[i]);
}

TEST_CASE("every op passes a finite-difference check") {
  const Tensor a = randn({3, 5}, 10);
  const Tensor w = randn({5, 4}, 11);
  const Tensor b1 = randn({3, 5}, 12);

  fd_check(a, [&](ad::Graph& g, ad::NodeId x) { return g.sum(g.matmul(x, g.constant(w))); }, 1e-7);
  fd_check(w, [&](ad::Graph& g, ad::NodeId x) { return g.sum_sq(g.matmul(g.constant(a), x)); }, 1e-6);
  fd_check(a, [&](ad::Graph& g, ad::NodeId x) {
    return g.sum(g.add_bias(x, g.constant(randn({5}, 13))));
  }, 1e-8);
  fd_check(randn({5}, 14), [&](ad::Graph& g, ad::NodeId x) {
    return g.sum_sq(g.add_bias(g.constant(a), x));
  }, 1e-6);
  fd_check(a, [&](ad::Graph& g, ad::NodeId x) { return g.sum(g.gelu(x)); }, 1e-6);
  fd_check(a, [&](ad::Graph& g, ad::NodeId x) { return g.mean(g.add(x, g.constant(b1))); }, 1e-8);
  fd_check(a, [&](ad::Graph& g, ad::NodeId x) { return g.mean(g.sub(g.constant(b1), x)); }, 1e-8);
  fd_check(a, [&](ad::Graph& g, ad::NodeId x) { return g.sum(g.mul(x, g.constant(b1))); }, 1e-7);
  fd_check(a, [&](ad::Graph& g, ad::NodeId x) {
    return g.sum(g.divide(g.constant(b1), g.add_const(g.mul(x, x), 1.0)));
  }, 1e-6);
  fd_check(a, [&](ad::Graph& g, ad::NodeId x) { return g.sum(g.scale(x, -2.5)); }, 1e-8);
  fd_check(a, [&](ad::Graph& g, ad::NodeId x) { return g.sum(g.minimum(x, g.constant(b1))); }, 1e-6);
  fd_check(a, [&](ad::Graph& g, ad::NodeId x) { return g.sum(g.absval(x)); }, 1e-6);
  fd_check(a, [&](ad::Graph& g, ad::NodeId x) { return g.sum_sq(x); }, 1e-7);
  fd_check(randn({4, 6}, 15), [&](ad::Graph& g, ad::NodeId x) {
    return g.sum_sq(g.layer_norm(x, g.constant(randn({6}, 16)), g.constant(randn({6}, 17)), 1e-6));
  }, 1e-5);
  fd_check(randn({6}, 18), [&](ad::Graph& g, ad::NodeId x) {  // layer-norm gain
    return g.sum_sq(g.layer_norm(g.constant(randn({4, 6}, 19)), x, g.constant(randn({6}, 20)), 1e-6));
  }, 1e-5);
  fd_check(a, [&](ad::Graph& g, ad::NodeId x) {
    std::vector<ad::NodeId> parts{x, g.constant(b1), x};
    return g.sum_sq(g.concat_cols(parts));
  }, 1e-6);
}

TEST_CASE("matmul backward drives both operands at once") {
  // exercises the transposed gemm paths with rectangular shapes
  const Tensor x0 = randn({7, 3}, 30);
  const Tensor w0 = randn({3, 9}, 31);
  ad::Graph g;
  const ad::NodeId x = g.input(x0), w = g.input(w0);
  g.backward(g.sum_sq(g.matmul(x, w)));
  const Tensor gx = g.grad_of(x), gw = g.grad_of(w);

  // dX = 2 (XW) W^T, dW = 2 X^T (XW), written out by hand
  std::vector<double> xw(7 * 9, 0.0);
  for (int i = 0; i < 7; ++i)
    for (int p = 0; p < 3; ++p)
      for (int j = 0; j < 9; ++j) xw[i * 9 + j] += x0.at(i, p) * w0.at(p, j);
  for (int i = 0; i < 7; ++i)
    for (int p = 0; p < 3; ++p) {
      double s = 0.0;
      for (int j = 0; j < 9; ++j) s += 2.0 * xw[i * 9 + j] * w0.at(p, j);
      CHECK(gx.at(i, p) == doctest::Approx(s).epsilon(1e-12));
    }
  for (int p = 0; p < 3; ++p)
    for (int j = 0; j < 9; ++j) {
      double s = 0.0;
      for (int i = 0; i < 7; ++i) s += 2.0 * x0.at(i, p) * xw[i * 9 + j];
      CHECK(gw.at(p, j) == doctest::Approx(s).epsilon(1e-12));
    }
}

TEST_CASE("minimum ties route the gradient to the first input") {
  ad::Graph g;
  const Tensor t = Tensor::full({2, 2}, 1.25);
  const ad::NodeId a = g.input(t), b = g.input(t);
  g.backward(g.sum(g.minimum(a, b)));
  for (double v : g.grad_of(a).data) CHECK(v == 1.0);
  for (double v : g.grad_of(b).data) CHECK(v == 0.0);
}

TEST_CASE("backward is single use until reset") {
  ad::Graph g;
  const ad::NodeId x = g.input(Tensor::full({2}, 3.0));
  const ad::NodeId loss = g.sum(x);
  g.backward(loss);
  CHECK_THROWS_AS(g.backward(loss), std::logic_error);
  g.reset();
  const ad::NodeId x2 = g.input(Tensor::full({2}, 3.0));
  g.backward(g.sum(x2));  // fine again after reset
  CHECK(g.grad_of(x2).data[0] == 1.0);
}

TEST_CASE("backward requires a scalar loss") {
  ad::Graph g;
  const ad::NodeId x = g.input(randn({2, 3}, 40));
  CHECK_THROWS_AS(g.backward(x), std::logic_error);
}

TEST_CASE("reset reuses the graph without leaking state") {
  ad::Graph g;
  std::vector<double> first;
  for (int it = 0; it < 3; ++it) {
    g.reset();
    const ad::NodeId x = g.input(randn({8, 8}, 50));
    const ad::NodeId y = g.gelu(g.matmul(x, g.constant(randn({8, 8}, 51))));
    g.backward(g.mean(g.sum_sq(y)));
    const auto& gx = g.grad_of(x).data;
    if (it == 0) first = gx;
    else CHECK(gx == first);  // identical rebuild gives identical grads
  }
}

TEST_CASE("param leaves accumulate into external buffers and set the ready flag") {
  const Tensor w0 = randn({3, 3}, 60);
  Tensor grad({3, 3});
  bool ready = false;
  ad::Graph g;
  const ad::NodeId w = g.param(&w0, &grad, &ready);
  const ad::NodeId x = g.constant(randn({2, 3}, 61));
  g.backward(g.sum(g.matmul(x, w)));
  CHECK(ready);
  // run a second build into the same buffer: gradients must accumulate
  const Tensor snap = grad;
  g.reset();
  const ad::NodeId w2 = g.param(&w0, &grad, &ready);
  g.backward(g.sum(g.matmul(g.constant(randn({2, 3}, 61)), w2)));
  for (int64_t i = 0; i < grad.size(); ++i)
    CHECK(grad.data[i] == doctest::Approx(2.0 * snap.data[i]).epsilon(1e-14));
}

TEST_CASE("constant_view aliases caller storage") {
  Tensor t = Tensor::full({2, 2}, 1.0);
  ad::Graph g;
  const ad::NodeId c = g.constant_view(&t);
  t.data[0] = 7.0;  // graph must see the caller's mutation
  CHECK(g.value(c).data[0] == 7.0);
}

TEST_CASE("grad_of throws when no gradient was computed") {
  ad::Graph g;
  const ad::NodeId c = g.constant(Tensor::full({2}, 1.0));
  const ad::NodeId x = g.input(Tensor::full({2}, 2.0));
  g.backward(g.sum(g.mul(x, c)));
  CHECK_THROWS(g.grad_of(c));  // constants carry no grad
}
