#pragma once

#include <cmath>
#include <cstdint>

#include "sorl/tensor.hpp"

namespace sorl {

// Counter-based deterministic RNG. A stream is (key, pos); draws hash the
// pair, so a stream can be forked into independent substreams by mixing a
// tag into the key. This gives two properties the trainer and the
// inference-scaling code rely on:
//   - draws are a pure function of (seed, fork path, position), so skipping
//     a consumer never shifts anyone else's stream;
//   - candidate i of a best-of-N draw is identical for every N >= i+1.
// Normal variates use Box-Muller on two fresh uniforms (no cached spare).
class Rng {
 public:
  explicit Rng(uint64_t key = 0) : key_(key) {}

  static uint64_t mix(uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  uint64_t next_u64() { return mix(key_ + 0x632be59bd9b4e019ull * ++pos_); }

  // Uniform on [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform on {0, 1, ..., n-1} via 128-bit multiply (no modulo bias worth
  // caring about at these ranges, and fully deterministic).
  int64_t below(int64_t n) {
    return static_cast<int64_t>((static_cast<unsigned __int128>(next_u64()) *
                                 static_cast<unsigned __int128>(n)) >> 64);
  }

  double normal() {
    double u1 = uniform(), u2 = uniform();
    // Guard the log; uniform() can return exactly 0.
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
  }

  // Standard normal truncated to [-2, 2] by redraw, then scaled.
  double truncated_normal(double stddev) {
    double z = normal();
    while (z < -2.0 || z > 2.0) z = normal();
    return z * stddev;
  }

  void fill_normal(Tensor& t) {
    for (auto& x : t.data) x = normal();
  }

  Rng fork(uint64_t tag) const { return Rng(mix(key_ ^ mix(tag + 0x8e2f9d4c6a1b3e57ull))); }
  Rng fork(uint64_t a, uint64_t b) const { return fork(a).fork(b); }
  Rng fork(uint64_t a, uint64_t b, uint64_t c) const { return fork(a).fork(b).fork(c); }

 private:
  uint64_t key_ = 0;
  uint64_t pos_ = 0;
};

// Fork tags used across the trainer and evaluator. Kept in one place so the
// stream layout is part of the artifact's contract with itself.
namespace stream {
inline constexpr uint64_t kInit = 1;
inline constexpr uint64_t kStep = 2;
inline constexpr uint64_t kBatch = 3;
inline constexpr uint64_t kCriticM = 4;
inline constexpr uint64_t kCriticNoise = 5;
inline constexpr uint64_t kActorM = 6;
inline constexpr uint64_t kActorNoise = 7;
inline constexpr uint64_t kFm = 8;
inline constexpr uint64_t kSc = 9;
inline constexpr uint64_t kEval = 10;
inline constexpr uint64_t kEnv = 11;
inline constexpr uint64_t kCandidate = 12;
inline constexpr uint64_t kData = 13;
}  // namespace stream

}  // namespace sorl
