#pragma once

#include <vector>

#include "sorl/autodiff.hpp"
#include "sorl/nn.hpp"
#include "sorl/rng.hpp"
#include "sorl/tensor.hpp"

namespace sorl {

constexpr bool is_power_of_two(int m) { return m >= 1 && (m & (m - 1)) == 0; }

// Velocity network s(a_t, t, h | x). Row layout fed to the net is
// [a_t | x | t | h]; obs_dim may be zero for unconditional generative use.
struct ShortcutPolicy {
  nn::Mlp net;
  int action_dim = 0;
  int obs_dim = 0;
  int m_disc = 0;  // total discretization steps, power of two

  static ShortcutPolicy make(int action_dim, int obs_dim, int m_disc,
                             const std::vector<int>& hidden, Rng& rng);
};

// One (t, h) draw for the self-consistency branch: h = d/M with d uniform
// over {1, 2, 4, ..., M/2}, t uniform over multiples of h with t + 2h <= 1.
struct StepPair {
  double t = 0.0;
  double h = 0.0;
};

// Throws for M < 2 (no pair satisfies t + 2h <= 1 with h <= 1/2 twice).
StepPair sample_step_pair(int m_disc, Rng& rng);

// Rowwise (1-t)*a0 + t*a1; t holds one entry per row.
Tensor interpolate(const Tensor& a0, const Tensor& a1, const Tensor& t);

// Elementwise clamp to [-bound, bound]. Environment boundary only; losses
// always see unclipped actions.
Tensor clip_action(const Tensor& a, double bound);

// [a_t | x | t | h] rows; t and h hold one entry per row.
Tensor pack_velocity_input(const ShortcutPolicy& p, const Tensor& a_t, const Tensor& x,
                           const Tensor& t, const Tensor& h);

// No-tape velocity evaluation (targets, sampling, evaluation).
void predict_velocity(const ShortcutPolicy& p, const Tensor& a_t, const Tensor& x,
                      const Tensor& t, const Tensor& h, Tensor& out, nn::Mlp::Workspace& ws);

// Tape velocity evaluation; a_t enters as a node so gradients can flow
// through sampled actions, x/t/h enter as constants. train=false freezes
// the parameters (target-network evaluation inside a larger graph).
ad::NodeId predict_velocity_node(ad::Graph& g, ShortcutPolicy& p, ad::NodeId a_t,
                                 const Tensor& x, const Tensor& t, const Tensor& h, bool train);

// Forward Euler from the given noise: m equal steps of size 1/m. Throws
// unless m is a power of two with 1 <= m <= M_disc.
Tensor euler_sample_from(const ShortcutPolicy& p, const Tensor& x, int m, const Tensor& a0,
                         nn::Mlp::Workspace& ws);

// Same, drawing a0 ~ N(0, I) from rng.
Tensor euler_sample(const ShortcutPolicy& p, const Tensor& x, int m, Rng& rng,
                    nn::Mlp::Workspace& ws);

// Tape Euler chain from fixed noise: the result is differentiable w.r.t.
// policy parameters through every step (backpropagation through time).
ad::NodeId euler_sample_node(ad::Graph& g, ShortcutPolicy& p, const Tensor& x, int m,
                             const Tensor& a0, bool train);

// Flow-matching loss at fixed draws: mean over rows of
// ||s(a_t, t, query_h | x) - (a1 - a0)||^2 with a_t = interpolate(a0, a1, t).
ad::NodeId flow_matching_loss_at(ad::Graph& g, ShortcutPolicy& p, const Tensor& x,
                                 const Tensor& a1, const Tensor& a0, const Tensor& t,
                                 double query_h);

// Same with a0 ~ N(0, I) and t ~ Unif(0,1) drawn per row from rng.
ad::NodeId flow_matching_loss(ad::Graph& g, ShortcutPolicy& p, const Tensor& x,
                              const Tensor& a1, double query_h, Rng& rng);

// Self-consistency loss at fixed draws. Targets come from the frozen
// target policy without a tape (that evaluation is the stop-gradient):
//   s_t     = s_tgt(a_t, t, h | x)
//   s_next  = s_tgt(a_t + h*s_t, t+h, h | x)
//   loss    = mean over rows of ||s(a_t, t, 2h | x) - (s_t + s_next)/2||^2
ad::NodeId self_consistency_loss_at(ad::Graph& g, ShortcutPolicy& p,
                                    const ShortcutPolicy& target, const Tensor& x,
                                    const Tensor& a1, const Tensor& a0, const Tensor& t,
                                    const Tensor& h, nn::Mlp::Workspace& ws);

// Same with a0 ~ N(0, I) and (t, h) ~ sample_step_pair drawn per row.
ad::NodeId self_consistency_loss(ad::Graph& g, ShortcutPolicy& p, const ShortcutPolicy& target,
                                 const Tensor& x, const Tensor& a1, Rng& rng,
                                 nn::Mlp::Workspace& ws);

}  // namespace sorl
