#include "sorl/otw2.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace sorl {

namespace {

constexpr int kMaxExact = 512;

void check_pair(const Tensor& p, const Tensor& q) {
  if (p.rows() < 1 || q.rows() < 1) throw std::invalid_argument("w2: empty sample set");
  if (p.rows() != q.rows()) throw std::invalid_argument("w2: sample count mismatch");
  if (p.cols() != q.cols()) throw std::invalid_argument("w2: dimension mismatch");
  if (p.rows() > kMaxExact)
    throw std::invalid_argument("w2: more than 512 samples; exact assignment refused");
  require_finite(p, "w2 samples");
  require_finite(q, "w2 samples");
}

// Shortest-augmenting-path assignment with potentials. p_col[j] is the row
// matched to column j (1-indexed; 0 = free).
std::vector<int> solve_assignment(const std::vector<double>& cost, int n) {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> p_col(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (int i = 1; i <= n; ++i) {
    p_col[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = p_col[j0];
      int j1 = -1;
      double delta = inf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[static_cast<size_t>(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p_col[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p_col[j0] != 0);
    do {
      const int j1 = way[j0];
      p_col[j0] = p_col[j1];
      j0 = j1;
    } while (j0);
  }
  return p_col;
}

OTPlan plan_oriented(const Tensor& p, const Tensor& q) {
  const int n = p.rows(), d = p.cols();
  std::vector<double> cost(static_cast<size_t>(n) * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int k = 0; k < d; ++k) {
        const double diff = p.data[static_cast<size_t>(i) * d + k] - q.data[static_cast<size_t>(j) * d + k];
        s += diff * diff;
      }
      cost[static_cast<size_t>(i) * n + j] = s;
    }
  const std::vector<int> p_col = solve_assignment(cost, n);
  OTPlan plan;
  plan.perm.assign(n, -1);
  for (int j = 1; j <= n; ++j) plan.perm[p_col[j] - 1] = j - 1;
  for (int i = 0; i < n; ++i)
    plan.total_sq_cost += cost[static_cast<size_t>(i) * n + plan.perm[i]];
  return plan;
}

}  // namespace

OTPlan ot_plan(const Tensor& p, const Tensor& q) {
  check_pair(p, q);
  return plan_oriented(p, q);
}

double w2_exact(const Tensor& p, const Tensor& q) {
  check_pair(p, q);
  // Canonical orientation: solve with the lexicographically smaller matrix as
  // rows, so both argument orders run the identical float computation.
  const bool swap =
      std::lexicographical_compare(q.data.begin(), q.data.end(), p.data.begin(), p.data.end());
  const Tensor& a = swap ? q : p;
  const Tensor& b = swap ? p : q;
  const OTPlan plan = plan_oriented(a, b);
  return std::sqrt(plan.total_sq_cost / a.rows());
}

}  // namespace sorl
