#include "sorl/kernels.hpp"

#include <stdexcept>
#include <string>

namespace sorl::kernels {
namespace {

bool cpu_has_avx2_fma() {
#if defined(__x86_64__) || defined(_M_X64)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const Backend* best_backend() {
  const Backend* a = avx2_backend();
  if (a != nullptr && cpu_has_avx2_fma()) return a;
  return &scalar_backend();
}

const Backend*& active_slot() {
  static const Backend* slot = best_backend();
  return slot;
}

}  // namespace

const Backend& active() { return *active_slot(); }

void force(const char* name) {
  const std::string n(name);
  if (n == "auto") {
    active_slot() = best_backend();
  } else if (n == "scalar") {
    active_slot() = &scalar_backend();
  } else if (n == "avx2") {
    const Backend* a = avx2_backend();
    if (a == nullptr || !cpu_has_avx2_fma())
      throw std::runtime_error("kernels: avx2 backend unavailable on this machine");
    active_slot() = a;
  } else {
    throw std::invalid_argument("kernels: unknown backend '" + n + "'");
  }
}

std::vector<const Backend*> available() {
  std::vector<const Backend*> out{&scalar_backend()};
  const Backend* a = avx2_backend();
  if (a != nullptr && cpu_has_avx2_fma()) out.push_back(a);
  return out;
}

}  // namespace sorl::kernels
