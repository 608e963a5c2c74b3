#include "sorl/tensor.hpp"

#include <cmath>
#include <cstdio>

namespace sorl {

bool Tensor::all_finite() const {
  for (double v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

std::string fmt_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string shape_str(const std::vector<int>& s) {
  std::string out = "(";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(s[i]);
  }
  return out + ")";
}

void require_finite(const Tensor& t, const char* what) {
  if (!t.all_finite())
    throw std::runtime_error(std::string("non-finite values in ") + what);
}

}  // namespace sorl
