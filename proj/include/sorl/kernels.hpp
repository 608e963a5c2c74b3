#pragma once

#include <cstdint>
#include <vector>

namespace sorl::kernels {

// Hot numeric kernels behind a runtime-selected backend. Two backends ship:
// a plain scalar reference and an AVX2+FMA variant. They are equivalence-
// tested against each other; the scalar one is the semantic definition.
//
// Conventions: matrices are dense row-major. Backward-pass kernels
// accumulate (+=) into their gradient outputs, forward kernels overwrite.
struct Backend {
  const char* name;

  // C[M x N] = A[M x K] * B[K x N]; accumulates into C when acc is true.
  void (*gemm_nn)(const double* a, const double* b, double* c, int m, int k, int n, bool acc);
  // transposed variants for the matmul backward (save the explicit transpose):
  // gemm_tn: C(m,n) (+)= A^T B with A stored (k,m); gemm_nt: C(m,n) (+)= A B^T
  // with B stored (n,k).
  void (*gemm_tn)(const double* a, const double* b, double* c, int m, int k, int n, bool acc);
  void (*gemm_nt)(const double* a, const double* b, double* c, int m, int k, int n, bool acc);

  void (*add_row_vec)(double* y, const double* v, int rows, int cols);   // y[r][:] += v
  void (*col_sum_acc)(const double* y, double* v, int rows, int cols);   // v += column sums of y

  // GELU in the erf form: y = x * Phi(x) with Phi the standard-normal CDF.
  // gelu_forward (tape) also writes the pointwise derivative
  // dgelu = Phi(x) + x * pdf(x), so backward is a pure dx += dy * dgelu.
  // gelu_cdf computes y alone for no-tape forwards; it yields bitwise the
  // same y. Both backends evaluate the same polynomial algorithm
  // (src/kernels_phi.hpp) and agree bitwise.
  void (*gelu_forward)(const double* x, double* y, double* dgelu, int64_t n);
  void (*gelu_cdf)(const double* x, double* y, int64_t n);
  void (*gelu_backward)(const double* dgelu, const double* dy, double* dx, int64_t n);

  void (*layernorm_forward)(const double* x, const double* gain, const double* shift,
                            double* y, double* mean, double* rstd, int rows, int cols, double eps);
  void (*layernorm_backward)(const double* x, const double* mean, const double* rstd,
                             const double* gain, const double* dy, double* dx,
                             double* dgain, double* dshift, int rows, int cols);

  void (*add)(const double* a, const double* b, double* out, int64_t n);
  void (*sub)(const double* a, const double* b, double* out, int64_t n);
  void (*mul)(const double* a, const double* b, double* out, int64_t n);
  void (*axpy)(double alpha, const double* x, double* y, int64_t n);     // y += alpha * x
  void (*scale)(const double* x, double alpha, double* out, int64_t n);  // out = alpha * x

  double (*sum)(const double* x, int64_t n);
  double (*sum_sq)(const double* x, int64_t n);
  double (*sum_abs)(const double* x, int64_t n);
  double (*dot)(const double* a, const double* b, int64_t n);

  // Fused Adam update; c1 = 1/(1-beta1^t), c2 = 1/(1-beta2^t).
  void (*adam_update)(double* p, const double* g, double* m, double* v, int64_t n,
                      double lr, double beta1, double beta2, double eps, double c1, double c2);

  void (*exp_vec)(const double* x, double* y, int64_t n);
  void (*erf_vec)(const double* x, double* y, int64_t n);
};

const Backend& scalar_backend();
const Backend* avx2_backend();  // nullptr when unsupported by compiler or cpu

// Active backend: best available unless forced. force("scalar"),
// force("avx2"), force("auto"); throws on unknown or unavailable names.
const Backend& active();
void force(const char* name);

std::vector<const Backend*> available();

}  // namespace sorl::kernels
