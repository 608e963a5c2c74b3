#include <cmath>

#include "kernels_phi.hpp"
#include "sorl/kernels.hpp"

// Scalar reference backend. Every kernel here is the plainest correct loop;
// the AVX2 backend is tested against these.

namespace sorl::kernels {
namespace {

void s_gemm_nn(const double* a, const double* b, double* c, int m, int k, int n, bool acc) {
  for (int i = 0; i < m; ++i) {
    double* crow = c + static_cast<size_t>(i) * n;
    if (!acc)
      for (int j = 0; j < n; ++j) crow[j] = 0.0;
    const double* arow = a + static_cast<size_t>(i) * k;
    for (int p = 0; p < k; ++p) {
      const double av = arow[p];
      const double* brow = b + static_cast<size_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void s_gemm_tn(const double* a, const double* b, double* c, int m, int k, int n, bool acc) {
  if (!acc)
    for (int64_t i = 0; i < static_cast<int64_t>(m) * n; ++i) c[i] = 0.0;
  for (int p = 0; p < k; ++p) {
    const double* ap = a + static_cast<size_t>(p) * m;
    const double* bp = b + static_cast<size_t>(p) * n;
    for (int i = 0; i < m; ++i) {
      const double av = ap[i];
      double* crow = c + static_cast<size_t>(i) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * bp[j];
    }
  }
}

void s_gemm_nt(const double* a, const double* b, double* c, int m, int k, int n, bool acc) {
  for (int i = 0; i < m; ++i) {
    const double* ai = a + static_cast<size_t>(i) * k;
    double* crow = c + static_cast<size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const double* bj = b + static_cast<size_t>(j) * k;
      double s = acc ? crow[j] : 0.0;
      for (int p = 0; p < k; ++p) s += ai[p] * bj[p];
      crow[j] = s;
    }
  }
}

void s_add_row_vec(double* y, const double* v, int rows, int cols) {
  for (int r = 0; r < rows; ++r) {
    double* yr = y + static_cast<size_t>(r) * cols;
    for (int c = 0; c < cols; ++c) yr[c] += v[c];
  }
}

void s_col_sum_acc(const double* y, double* v, int rows, int cols) {
  for (int r = 0; r < rows; ++r) {
    const double* yr = y + static_cast<size_t>(r) * cols;
    for (int c = 0; c < cols; ++c) v[c] += yr[c];
  }
}

void s_gelu_forward(const double* x, double* y, double* dgelu, int64_t n) {
  for (int64_t i = 0; i < n; ++i) {
    double c, p;
    detail::phi_pdf(x[i], c, p);
    y[i] = x[i] * c;
    dgelu[i] = std::fma(x[i], p, c);
  }
}

void s_gelu_cdf(const double* x, double* y, int64_t n) {
  for (int64_t i = 0; i < n; ++i) y[i] = x[i] * detail::phi_cdf(x[i]);
}

void s_gelu_backward(const double* dgelu, const double* dy, double* dx, int64_t n) {
  for (int64_t i = 0; i < n; ++i) dx[i] += dy[i] * dgelu[i];
}

void s_layernorm_forward(const double* x, const double* gain, const double* shift,
                         double* y, double* mean, double* rstd, int rows, int cols, double eps) {
  for (int r = 0; r < rows; ++r) {
    const double* xr = x + static_cast<size_t>(r) * cols;
    double* yr = y + static_cast<size_t>(r) * cols;
    double mu = 0.0;
    for (int c = 0; c < cols; ++c) mu += xr[c];
    mu /= cols;
    double var = 0.0;
    for (int c = 0; c < cols; ++c) {
      const double d = xr[c] - mu;
      var += d * d;
    }
    var /= cols;
    const double rs = 1.0 / std::sqrt(var + eps);
    mean[r] = mu;
    rstd[r] = rs;
    for (int c = 0; c < cols; ++c) yr[c] = (xr[c] - mu) * rs * gain[c] + shift[c];
  }
}

void s_layernorm_backward(const double* x, const double* mean, const double* rstd,
                          const double* gain, const double* dy, double* dx,
                          double* dgain, double* dshift, int rows, int cols) {
  for (int r = 0; r < rows; ++r) {
    const double* xr = x + static_cast<size_t>(r) * cols;
    const double* dyr = dy + static_cast<size_t>(r) * cols;
    double* dxr = dx + static_cast<size_t>(r) * cols;
    const double mu = mean[r], rs = rstd[r];
    double m1 = 0.0, m2 = 0.0;  // mean(dxhat), mean(dxhat * xhat)
    for (int c = 0; c < cols; ++c) {
      const double xhat = (xr[c] - mu) * rs;
      const double dxhat = dyr[c] * gain[c];
      m1 += dxhat;
      m2 += dxhat * xhat;
      dgain[c] += dyr[c] * xhat;
      dshift[c] += dyr[c];
    }
    m1 /= cols;
    m2 /= cols;
    for (int c = 0; c < cols; ++c) {
      const double xhat = (xr[c] - mu) * rs;
      const double dxhat = dyr[c] * gain[c];
      dxr[c] += rs * (dxhat - m1 - xhat * m2);
    }
  }
}

void s_add(const double* a, const double* b, double* out, int64_t n) {
  for (int64_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}
void s_sub(const double* a, const double* b, double* out, int64_t n) {
  for (int64_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}
void s_mul(const double* a, const double* b, double* out, int64_t n) {
  for (int64_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}
void s_axpy(double alpha, const double* x, double* y, int64_t n) {
  for (int64_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}
void s_scale(const double* x, double alpha, double* out, int64_t n) {
  for (int64_t i = 0; i < n; ++i) out[i] = alpha * x[i];
}

double s_sum(const double* x, int64_t n) {
  double s = 0.0;
  for (int64_t i = 0; i < n; ++i) s += x[i];
  return s;
}
double s_sum_sq(const double* x, int64_t n) {
  double s = 0.0;
  for (int64_t i = 0; i < n; ++i) s += x[i] * x[i];
  return s;
}
double s_sum_abs(const double* x, int64_t n) {
  double s = 0.0;
  for (int64_t i = 0; i < n; ++i) s += std::fabs(x[i]);
  return s;
}
double s_dot(const double* a, const double* b, int64_t n) {
  double s = 0.0;
  for (int64_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void s_adam_update(double* p, const double* g, double* m, double* v, int64_t n,
                   double lr, double beta1, double beta2, double eps, double c1, double c2) {
  for (int64_t i = 0; i < n; ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
    const double mhat = m[i] * c1;
    const double vhat = v[i] * c2;
    p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

void s_exp_vec(const double* x, double* y, int64_t n) {
  for (int64_t i = 0; i < n; ++i) y[i] = std::exp(x[i]);
}
void s_erf_vec(const double* x, double* y, int64_t n) {
  for (int64_t i = 0; i < n; ++i) y[i] = std::erf(x[i]);
}

}  // namespace

const Backend& scalar_backend() {
  static const Backend b{
      "scalar",
      s_gemm_nn,
      s_gemm_tn,
      s_gemm_nt,
      s_add_row_vec,
      s_col_sum_acc,
      s_gelu_forward,
      s_gelu_cdf,
      s_gelu_backward,
      s_layernorm_forward,
      s_layernorm_backward,
      s_add,
      s_sub,
      s_mul,
      s_axpy,
      s_scale,
      s_sum,
      s_sum_sq,
      s_sum_abs,
      s_dot,
      s_adam_update,
      s_exp_vec,
      s_erf_vec,
  };
  return b;
}

}  // namespace sorl::kernels
