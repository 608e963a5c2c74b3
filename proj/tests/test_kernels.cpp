#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstring>
#include <vector>

#include "sorl/kernels.hpp"
#include "sorl/rng.hpp"

using namespace sorl;

namespace {

std::vector<double> randn(int64_t n, uint64_t seed) {
  std::vector<double> v(n);
  Rng r(seed);
  for (auto& x : v) x = r.normal();
  return v;
}

// Same summation order can't be assumed across backends, so gemm outputs are
// compared with an error scaled by the accumulation length.
double scaled_gemm_err(const std::vector<double>& ref, const std::vector<double>& got, int k) {
  double worst = 0.0;
  for (size_t i = 0; i < ref.size(); ++i) {
    const double e = std::fabs(ref[i] - got[i]) / (std::fabs(ref[i]) + std::sqrt(double(k)) + 1.0);
    worst = std::max(worst, e);
  }
  return worst;
}

// Plain triple loop, the semantic definition of gemm_nn.
void gemm_ref(const std::vector<double>& a, const std::vector<double>& b, std::vector<double>& c,
              int m, int k, int n, bool acc) {
  if (!acc) c.assign(size_t(m) * n, 0.0);
  for (int i = 0; i < m; ++i)
    for (int p = 0; p < k; ++p)
      for (int j = 0; j < n; ++j) c[size_t(i) * n + j] += a[size_t(i) * k + p] * b[size_t(p) * n + j];
}

}  // namespace

TEST_CASE("gemm_nn hand-checked 2x2") {
  const std::vector<double> a{1, 2, 3, 4}, b{5, 6, 7, 8};
  for (const auto* bk : kernels::available()) {
    std::vector<double> c(4, 0.0);
    bk->gemm_nn(a.data(), b.data(), c.data(), 2, 2, 2, false);
    CHECK(c == std::vector<double>{19, 22, 43, 50});
    bk->gemm_nn(a.data(), b.data(), c.data(), 2, 2, 2, true);
    CHECK(c == std::vector<double>{38, 44, 86, 100});
  }
}

TEST_CASE("gemm_tn and gemm_nt match transpose-composed gemm_nn") {
  const int shapes[][3] = {{1, 1, 1},   {2, 3, 2},  {5, 7, 3},   {4, 1, 9},  {1, 8, 1},
                           {17, 5, 33}, {8, 64, 8}, {3, 256, 2}, {64, 2, 70}};
  for (const auto* bk : kernels::available()) {
    for (const auto& s : shapes) {
      const int m = s[0], k = s[1], n = s[2];
      const auto at = randn(size_t(k) * m, 11 * m + k);  // A stored (k, m)
      const auto bt = randn(size_t(n) * k, 13 * n + k);  // B stored (n, k)
      std::vector<double> a(size_t(m) * k), b(size_t(k) * n);
      for (int i = 0; i < m; ++i)
        for (int p = 0; p < k; ++p) a[size_t(i) * k + p] = at[size_t(p) * m + i];
      for (int p = 0; p < k; ++p)
        for (int j = 0; j < n; ++j) b[size_t(p) * n + j] = bt[size_t(j) * k + p];
      for (bool acc : {false, true}) {
        const double fill = acc ? 0.5 : 0.0;
        std::vector<double> ref(size_t(m) * n, fill), got_tn(size_t(m) * n, 0.5),
            got_nt(size_t(m) * n, 0.5);
        gemm_ref(a, b, ref, m, k, n, acc);
        bk->gemm_tn(at.data(), b.data(), got_tn.data(), m, k, n, acc);
        bk->gemm_nt(a.data(), bt.data(), got_nt.data(), m, k, n, acc);
        CHECK(scaled_gemm_err(ref, got_tn, k) < 1e-12);
        CHECK(scaled_gemm_err(ref, got_nt, k) < 1e-12);
      }
    }
  }
}

TEST_CASE("backends agree on gemm_nn across shapes") {
  const auto& sc = kernels::scalar_backend();
  const int dims[] = {1, 2, 3, 5, 8, 17, 33, 64};
  for (const auto* bk : kernels::available()) {
    for (int m : dims)
      for (int k : {1, 2, 7, 70, 256})
        for (int n : {1, 2, 8, 64}) {
          const auto a = randn(size_t(m) * k, m + 3 * k + n);
          const auto b = randn(size_t(k) * n, m + k + 7 * n);
          std::vector<double> c0(size_t(m) * n, 1.0), c1(size_t(m) * n, 1.0);
          sc.gemm_nn(a.data(), b.data(), c0.data(), m, k, n, true);
          bk->gemm_nn(a.data(), b.data(), c1.data(), m, k, n, true);
          REQUIRE(scaled_gemm_err(c0, c1, k) < 1e-12);
        }
  }
}

TEST_CASE("gemm with k=0 zeroes or preserves the output") {
  for (const auto* bk : kernels::available()) {
    std::vector<double> c{3, 3, 3, 3};
    bk->gemm_nn(nullptr, nullptr, c.data(), 2, 0, 2, true);
    CHECK(c == std::vector<double>{3, 3, 3, 3});
    bk->gemm_nn(nullptr, nullptr, c.data(), 2, 0, 2, false);
    CHECK(c == std::vector<double>{0, 0, 0, 0});
    bk->gemm_nn(nullptr, nullptr, c.data(), 0, 3, 0, false);  // empty output: just no crash
  }
}

TEST_CASE("gelu trio is bitwise identical across backends") {
  // The header promises bitwise equality for the gelu kernels, so this test
  // compares raw bytes, not tolerances. Inputs cover both polynomial
  // branches, the branch seam, zeros, denormals, huge values and non-finite.
  std::vector<double> x;
  for (double v = -12.0; v <= 12.0; v += 0.0037) x.push_back(v);
  const double edge[] = {0.0,    -0.0,   2.0,   -2.0,  std::nextafter(2.0, 3.0),
                         std::nextafter(2.0, 0.0), 8.75, -8.75, 1e3,  -1e3,
                         5e-324, -5e-324, 1e-300, -1e-300,
                         std::numeric_limits<double>::infinity(),
                         -std::numeric_limits<double>::infinity(),
                         std::numeric_limits<double>::quiet_NaN()};
  x.insert(x.end(), std::begin(edge), std::end(edge));
  auto xr = randn(4096, 99);
  x.insert(x.end(), xr.begin(), xr.end());
  const int64_t n = int64_t(x.size());

  const auto& sc = kernels::scalar_backend();
  std::vector<double> y0(n), d0(n), y1(n), d1(n), c0(n), c1(n);
  sc.gelu_forward(x.data(), y0.data(), d0.data(), n);
  sc.gelu_cdf(x.data(), c0.data(), n);
  CHECK(std::memcmp(y0.data(), c0.data(), n * sizeof(double)) == 0);

  std::vector<double> dy = randn(n, 7), dx0(n, 0.125), dx1(n, 0.125);
  sc.gelu_backward(d0.data(), dy.data(), dx0.data(), n);

  for (const auto* bk : kernels::available()) {
    bk->gelu_forward(x.data(), y1.data(), d1.data(), n);
    bk->gelu_cdf(x.data(), c1.data(), n);
    CHECK(std::memcmp(y0.data(), y1.data(), n * sizeof(double)) == 0);
    CHECK(std::memcmp(d0.data(), d1.data(), n * sizeof(double)) == 0);
    CHECK(std::memcmp(c0.data(), c1.data(), n * sizeof(double)) == 0);
    std::fill(dx1.begin(), dx1.end(), 0.125);
    bk->gelu_backward(d1.data(), dy.data(), dx1.data(), n);
    CHECK(std::memcmp(dx0.data(), dx1.data(), n * sizeof(double)) == 0);
  }
}

TEST_CASE("gelu matches x*Phi(x) against a long-double reference") {
  std::vector<double> x;
  for (double v = -9.0; v <= 9.0; v += 0.0011) x.push_back(v);
  const int64_t n = int64_t(x.size());
  std::vector<double> y(n), d(n);
  kernels::active().gelu_forward(x.data(), y.data(), d.data(), n);
  const long double inv_sqrt2 = 0.70710678118654752440L;
  const long double inv_sqrt2pi = 0.39894228040143267794L;
  double worst_y = 0.0, worst_d = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    const long double phi = 0.5L * erfcl(-(long double)x[i] * inv_sqrt2);
    const long double pdf = inv_sqrt2pi * expl(-0.5L * (long double)x[i] * (long double)x[i]);
    worst_y = std::max(worst_y, (double)fabsl((long double)y[i] - (long double)x[i] * phi));
    worst_d = std::max(worst_d, (double)fabsl((long double)d[i] - (phi + (long double)x[i] * pdf)));
  }
  CHECK(worst_y < 5e-15);
  CHECK(worst_d < 5e-15);
}

TEST_CASE("exp_vec and erf_vec track the standard library") {
  std::vector<double> x;
  for (double v = -700.0; v <= 700.0; v += 0.737) x.push_back(v);
  for (double v = -8.0; v <= 8.0; v += 0.0113) x.push_back(v);
  const int64_t n = int64_t(x.size());
  std::vector<double> ye(n), yr(n);
  for (const auto* bk : kernels::available()) {
    bk->exp_vec(x.data(), ye.data(), n);
    bk->erf_vec(x.data(), yr.data(), n);
    double worst_exp = 0.0, worst_erf = 0.0;
    for (int64_t i = 0; i < n; ++i) {
      const double re = std::exp(x[i]);
      if (re > 0.0 && std::isfinite(re)) worst_exp = std::max(worst_exp, std::fabs(ye[i] - re) / re);
      worst_erf = std::max(worst_erf, std::fabs(yr[i] - std::erf(x[i])));
    }
    CHECK(worst_exp < 2e-15);
    CHECK(worst_erf < 1e-15);
    // saturation edges
    const double ed[] = {-746.0, -800.0, 710.0, 800.0};
    double eo[4];
    bk->exp_vec(ed, eo, 4);
    CHECK(eo[0] == 0.0);
    CHECK(eo[1] == 0.0);
    CHECK(std::isinf(eo[2]));
    CHECK(std::isinf(eo[3]));
  }
}

TEST_CASE("adam first step matches the closed form") {
  const double lr = 1e-3, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  const std::vector<double> g{1.0, -2.0, 0.5, -1e-3};
  for (const auto* bk : kernels::available()) {
    std::vector<double> p(4, 1.5), m(4, 0.0), v(4, 0.0);
    bk->adam_update(p.data(), g.data(), m.data(), v.data(), 4, lr, b1, b2, eps,
                    1.0 / (1.0 - b1), 1.0 / (1.0 - b2));
    for (int i = 0; i < 4; ++i) {
      const double mh = (1.0 - b1) * g[i] / (1.0 - b1);  // == g[i]
      const double vh = (1.0 - b2) * g[i] * g[i] / (1.0 - b2);
      const double want = 1.5 - lr * mh / (std::sqrt(vh) + eps);
      CHECK(p[i] == doctest::Approx(want).epsilon(1e-14));
      CHECK(m[i] == doctest::Approx((1.0 - b1) * g[i]).epsilon(1e-14));
      CHECK(v[i] == doctest::Approx((1.0 - b2) * g[i] * g[i]).epsilon(1e-14));
    }
  }
}

TEST_CASE("elementwise and reduction kernels agree across backends") {
  const int64_t n = 1537;  // odd length exercises the vector tails
  const auto a = randn(n, 21), b = randn(n, 22);
  const auto& sc = kernels::scalar_backend();
  for (const auto* bk : kernels::available()) {
    std::vector<double> r0(n), r1(n);
    sc.add(a.data(), b.data(), r0.data(), n);
    bk->add(a.data(), b.data(), r1.data(), n);
    for (int64_t i = 0; i < n; ++i) REQUIRE(r1[i] == doctest::Approx(r0[i]).epsilon(1e-15));
    sc.mul(a.data(), b.data(), r0.data(), n);
    bk->mul(a.data(), b.data(), r1.data(), n);
    for (int64_t i = 0; i < n; ++i) REQUIRE(r1[i] == doctest::Approx(r0[i]).epsilon(1e-15));
    r0 = b; r1 = b;
    sc.axpy(0.37, a.data(), r0.data(), n);
    bk->axpy(0.37, a.data(), r1.data(), n);
    for (int64_t i = 0; i < n; ++i) REQUIRE(r1[i] == doctest::Approx(r0[i]).epsilon(1e-14));
    CHECK(bk->sum(a.data(), n) == doctest::Approx(sc.sum(a.data(), n)).epsilon(1e-12));
    CHECK(bk->sum_sq(a.data(), n) == doctest::Approx(sc.sum_sq(a.data(), n)).epsilon(1e-12));
    CHECK(bk->sum_abs(a.data(), n) == doctest::Approx(sc.sum_abs(a.data(), n)).epsilon(1e-12));
    CHECK(bk->dot(a.data(), b.data(), n) == doctest::Approx(sc.dot(a.data(), b.data(), n)).epsilon(1e-12));
  }
}

TEST_CASE("row-vector add and column-sum kernels") {
  // tiny hand oracle plus cross-backend agreement on a bigger block
  const std::vector<double> v{10, 20, 30};
  for (const auto* bk : kernels::available()) {
    std::vector<double> y{1, 2, 3, 4, 5, 6};
    bk->add_row_vec(y.data(), v.data(), 2, 3);
    CHECK(y == std::vector<double>{11, 22, 33, 14, 25, 36});
    std::vector<double> s{1, 1, 1};
    bk->col_sum_acc(y.data(), s.data(), 2, 3);
    CHECK(s == std::vector<double>{1 + 11 + 14, 1 + 22 + 25, 1 + 33 + 36});
  }
  const auto blk = randn(257 * 19, 5);
  const auto row = randn(19, 6);
  const auto& sc = kernels::scalar_backend();
  for (const auto* bk : kernels::available()) {
    auto y0 = blk, y1 = blk;
    sc.add_row_vec(y0.data(), row.data(), 257, 19);
    bk->add_row_vec(y1.data(), row.data(), 257, 19);
    CHECK(y0 == y1);
    std::vector<double> s0(19, 0.5), s1(19, 0.5);
    sc.col_sum_acc(y0.data(), s0.data(), 257, 19);
    bk->col_sum_acc(y1.data(), s1.data(), 257, 19);
    for (int i = 0; i < 19; ++i) CHECK(s1[i] == doctest::Approx(s0[i]).epsilon(1e-12));
  }
}

TEST_CASE("layernorm kernels agree across backends") {
  const int rows = 65, cols = 33;
  const auto x = randn(size_t(rows) * cols, 31);
  const auto gain = randn(cols, 32), shift = randn(cols, 33), dy = randn(size_t(rows) * cols, 34);
  const auto& sc = kernels::scalar_backend();
  std::vector<double> y0(x.size()), m0(rows), r0(rows), y1(x.size()), m1(rows), r1(rows);
  sc.layernorm_forward(x.data(), gain.data(), shift.data(), y0.data(), m0.data(), r0.data(), rows, cols, 1e-6);
  for (const auto* bk : kernels::available()) {
    bk->layernorm_forward(x.data(), gain.data(), shift.data(), y1.data(), m1.data(), r1.data(), rows, cols, 1e-6);
    for (size_t i = 0; i < y0.size(); ++i) REQUIRE(y1[i] == doctest::Approx(y0[i]).epsilon(1e-11));
    std::vector<double> dx0(x.size(), 0.0), dg0(cols, 0.0), ds0(cols, 0.0);
    std::vector<double> dx1(x.size(), 0.0), dg1(cols, 0.0), ds1(cols, 0.0);
    sc.layernorm_backward(x.data(), m0.data(), r0.data(), gain.data(), dy.data(), dx0.data(), dg0.data(), ds0.data(), rows, cols);
    bk->layernorm_backward(x.data(), m1.data(), r1.data(), gain.data(), dy.data(), dx1.data(), dg1.data(), ds1.data(), rows, cols);
    for (size_t i = 0; i < dx0.size(); ++i) REQUIRE(dx1[i] == doctest::Approx(dx0[i]).epsilon(1e-10));
    for (int i = 0; i < cols; ++i) {
      REQUIRE(dg1[i] == doctest::Approx(dg0[i]).epsilon(1e-10));
      REQUIRE(ds1[i] == doctest::Approx(ds0[i]).epsilon(1e-10));
    }
  }
}

TEST_CASE("force selects backends and rejects unknown names") {
  const auto avail = kernels::available();
  REQUIRE(!avail.empty());
  CHECK(std::string(avail.front()->name) == "scalar");
  for (const auto* bk : avail) {
    kernels::force(bk->name);
    CHECK(std::string(kernels::active().name) == bk->name);
  }
  CHECK_THROWS_AS(kernels::force("mmx"), std::invalid_argument);
  kernels::force("auto");
  if (kernels::avx2_backend()) CHECK(std::string(kernels::active().name) == "avx2");
  else CHECK(std::string(kernels::active().name) == "scalar");
}
