#pragma once

#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace sorl {

// Dense row-major real64 tensor. Rank is 1 or 2 in practice; everything in
// the training stack is a matrix (batch x dim), a vector, or a scalar held
// as shape {1}.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)) { data.assign(numel(shape), 0.0); }
  Tensor(std::vector<int> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
    if (static_cast<int64_t>(data.size()) != numel(shape))
      throw std::invalid_argument("tensor: data size does not match shape");
  }

  static int64_t numel(const std::vector<int>& s) {
    int64_t n = 1;
    for (int d : s) {
      if (d < 0) throw std::invalid_argument("tensor: negative dimension");
      n *= d;
    }
    return n;
  }

  static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }
  static Tensor full(std::vector<int> s, double v) {
    Tensor t(std::move(s));
    for (auto& x : t.data) x = v;
    return t;
  }
  static Tensor scalar(double v) { return Tensor({1}, {v}); }

  int64_t size() const { return static_cast<int64_t>(data.size()); }
  int rank() const { return static_cast<int>(shape.size()); }
  int rows() const { return rank() == 2 ? shape[0] : (rank() == 1 ? shape[0] : 1); }
  int cols() const { return rank() == 2 ? shape[1] : 1; }

  double* ptr() { return data.data(); }
  const double* ptr() const { return data.data(); }

  double& at(int r, int c) { return data[static_cast<size_t>(r) * shape[1] + c]; }
  double at(int r, int c) const { return data[static_cast<size_t>(r) * shape[1] + c]; }
  double& operator[](int64_t i) { return data[i]; }
  double operator[](int64_t i) const { return data[i]; }

  // Reshape in place, reusing the buffer (grows/shrinks as needed).
  void reshape_to(const std::vector<int>& s) {
    shape = s;
    data.resize(numel(s));
  }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
  bool all_finite() const;
  double item() const {
    if (size() != 1) throw std::logic_error("tensor: item() on non-scalar");
    return data[0];
  }
};

std::string shape_str(const std::vector<int>& s);

// Round-trippable decimal formatting (%.17g) shared by every emitted file
// format, so determinism is byte-level.
std::string fmt_g17(double v);

// Throws if t contains NaN or Inf; `what` names the offending value in the message.
void require_finite(const Tensor& t, const char* what);

}  // namespace sorl
