#pragma once

#include <vector>

#include "sorl/tensor.hpp"

namespace sorl {

// Optimal assignment between two equal-size empirical distributions under
// squared Euclidean cost: row i of P pairs with row perm[i] of Q.
struct OTPlan {
  std::vector<int> perm;
  double total_sq_cost = 0.0;
};

// Exact minimum-cost assignment (shortest-augmenting-path Hungarian, cubic
// time). Throws on shape mismatch, non-finite entries, or n > 512.
OTPlan ot_plan(const Tensor& p, const Tensor& q);

// Empirical 2-Wasserstein distance sqrt(min_sigma sum ||p_i - q_sigma(i)||^2 / n).
// The arguments are lexicographically oriented before solving, so the result
// is bitwise symmetric in (p, q).
double w2_exact(const Tensor& p, const Tensor& q);

}  // namespace sorl
