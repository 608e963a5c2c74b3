#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>

#include "sorl/kernels.hpp"
#include "sorl/rng.hpp"
#include "sorl/tensor.hpp"

// Times the hot kernels on every available backend so the runtime-dispatch
// gain is visible on the actual training shapes.

namespace {

using namespace sorl;

double time_seconds(int reps, const std::function<void()>& fn) {
  fn();  // warm up
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) fn();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double>(t1 - t0).count() / reps;
}

using GemmFn = void (*)(const double*, const double*, double*, int, int, int, bool);

void bench_gemm(const char* tag, GemmFn fn, int m, int k, int n, int ar, int ac, int br,
                int bc) {
  Tensor a({ar, ac}), b({br, bc}), c({m, n});
  Rng rng(1);
  rng.fill_normal(a);
  rng.fill_normal(b);
  const int reps = std::max(1, static_cast<int>(2e8 / (2.0 * m * k * n)));
  const double sec =
      time_seconds(reps, [&] { fn(a.data.data(), b.data.data(), c.data.data(), m, k, n, false); });
  std::printf("  gemm_%s %4dx%3dx%3d  %8.1f MFLOP/s\n", tag, m, k, n, 2.0 * m * k * n / sec / 1e6);
}

void bench_gelu(const kernels::Backend& be, int n) {
  Tensor x({n}), y({n}), dgelu({n});
  Rng rng(2);
  rng.fill_normal(x);
  double sec = time_seconds(
      200, [&] { be.gelu_forward(x.data.data(), y.data.data(), dgelu.data.data(), n); });
  std::printf("  gelu_forward %7d  %8.1f Melem/s\n", n, n / sec / 1e6);
  sec = time_seconds(200, [&] { be.gelu_cdf(x.data.data(), y.data.data(), n); });
  std::printf("  gelu_cdf     %7d  %8.1f Melem/s\n", n, n / sec / 1e6);
}

void bench_adam(const kernels::Backend& be, int n) {
  Tensor p({n}), g({n}), m({n}), v({n});
  Rng rng(3);
  rng.fill_normal(p);
  rng.fill_normal(g);
  const double sec = time_seconds(200, [&] {
    be.adam_update(p.data.data(), g.data.data(), m.data.data(), v.data.data(), n, 1e-4, 0.9,
                   0.999, 1e-8, 1.0, 1.0);
  });
  std::printf("  adam %7d          %8.1f Melem/s\n", n, n / sec / 1e6);
}

}  // namespace

int main() {
  for (const kernels::Backend* be : kernels::available()) {
    std::printf("backend %s\n", be->name);
    bench_gemm("nn", be->gemm_nn, 256, 70, 64, 256, 70, 70, 64);
    bench_gemm("nn", be->gemm_nn, 256, 64, 64, 256, 64, 64, 64);
    bench_gemm("nn", be->gemm_nn, 256, 64, 2, 256, 64, 64, 2);
    bench_gemm("tn", be->gemm_tn, 70, 256, 64, 256, 70, 256, 64);
    bench_gemm("tn", be->gemm_tn, 64, 256, 2, 256, 64, 256, 2);
    bench_gemm("nt", be->gemm_nt, 256, 64, 70, 256, 64, 70, 64);
    bench_gemm("nt", be->gemm_nt, 256, 2, 64, 256, 2, 64, 2);
    bench_gelu(*be, 256 * 64);
    bench_adam(*be, 256 * 64);
  }
  std::printf("active: %s\n", kernels::active().name);
  return 0;
}
