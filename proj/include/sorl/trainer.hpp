#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "sorl/env.hpp"
#include "sorl/shortcut.hpp"

namespace sorl {

struct TrainConfig {
  double alpha_q = 10.0;  // per-task coefficient; tuned per environment
  double alpha_bc = 10.0;
  double alpha_sc = 10.0;
  double gamma = 0.99;
  double tau = 0.005;  // 0 freezes all target networks
  int m_disc = 8;
  int m_btt = 8;
  int batch_size = 256;
  int64_t grad_steps = 20000;
  double lr = 1e-4;
  double grad_clip = 1.0;
  bool clipped_double_q = false;  // min (instead of mean) over target heads in the TD target
  bool normalized_q_loss = true;  // -mean(Q)/stopgrad(mean(|Q|)+1e-6) vs raw -mean(Q)
  bool fm_double_query = false;   // flow-matching query step 2/M_disc instead of 1/M_disc
  uint64_t seed = 0;
  std::vector<int> policy_hidden{64, 64};
  std::vector<int> critic_hidden{64, 64};
};

void validate(const TrainConfig& cfg);  // throws on illegal combinations

// Critic step-count input: log2(m)/log2(M_disc). Dataset actions are coded
// as finest-grain, 1.0.
double step_code(int m, int m_disc);
inline constexpr double kDatasetStepCode = 1.0;

// m uniform over {1, 2, 4, ..., M_BTT}.
int sample_btt_steps(int m_btt, Rng& rng);

// Two Q heads + their Polyak targets. Hidden layers carry layer norm. The
// actor loss and the best-of-N verifier always read the mean of the two
// online heads; only the TD target optionally takes the min.
struct Critic {
  nn::Mlp q1, q2, t1, t2;
  int obs_dim = 0, action_dim = 0;

  static Critic make(int obs_dim, int action_dim, const std::vector<int>& hidden, Rng& rng);
};

Tensor pack_critic_input(const Critic& c, const Tensor& x, const Tensor& a, const Tensor& code);

// Mean of the two online heads; out is [batch, 1].
void critic_value(const Critic& c, const Tensor& x, const Tensor& a, const Tensor& code,
                  Tensor& out, nn::Mlp::Workspace& ws);

// Target-head aggregate for the TD target: mean, or min when clipped.
void critic_target_value(const Critic& c, const Tensor& x, const Tensor& a, const Tensor& code,
                         bool clipped, Tensor& out, nn::Mlp::Workspace& ws);

struct SorlState {
  ShortcutPolicy policy, policy_target;
  Critic critic;
  int64_t step = 0;
};

SorlState make_sorl_state(int obs_dim, int action_dim, const TrainConfig& cfg);

struct Batch {
  Tensor x, a1, r, x_next, done;
  int rows() const { return x.rank() == 2 ? x.shape[0] : 0; }
};

Batch sample_batch(const Dataset& d, int batch_size, Rng& rng);

struct LossBreakdown {
  double q_loss = 0.0;
  double fm_loss = 0.0;
  double sc_loss = 0.0;
  double critic_loss = 0.0;
  double q_mean_abs = 0.0;
};

// Actor Q term: per-row m ~ Unif{powers of two <= M_BTT}, action sampled by
// the taped Euler chain (gradients reach the policy through every step),
// scored by the mean of the two online heads with frozen critic weights.
// Normalized form: -mean(Q) / stopgrad(mean(|Q|) + 1e-6).
ad::NodeId q_loss_node(ad::Graph& g, SorlState& s, const Tensor& x, const TrainConfig& cfg,
                       Rng& m_rng, Rng& noise_rng, double* q_mean_abs);

// Bellman loss: y = r + gamma*(1-done)*target_aggregate(x', a', code(m))
// with a' sampled from the frozen policy (no tape); the loss averages the
// squared residual over rows and both online heads.
ad::NodeId critic_loss_node(ad::Graph& g, SorlState& s, const Batch& b, const TrainConfig& cfg,
                            Rng& m_rng, Rng& noise_rng);

struct ActorLossParts {
  ad::NodeId total{-1}, q{-1}, fm{-1}, sc{-1};
  bool has_q = false, has_fm = false, has_sc = false;
};

// alpha_q * Q + alpha_bc * FM + alpha_sc * SC. Terms with a zero
// coefficient are skipped (their breakdown entry reads 0); SC is skipped
// when M_disc == 1, where no step pair exists.
ActorLossParts actor_loss_node(ad::Graph& g, SorlState& s, const Batch& b, const TrainConfig& cfg,
                               Rng& step_rng, double* q_mean_abs);

// target <- (1-tau)*target + tau*online, elementwise over matching entries.
void polyak_update(const nn::ParamStore& online, nn::ParamStore& target, double tau);

// One full iteration at the state's current step index: sample batch,
// critic update (loss, clip, Adam), actor update (loss, clip, Adam), then
// Polyak on the critic targets and the policy target. Deterministic given
// (state, config); throws on non-finite losses.
LossBreakdown train_step(SorlState& s, const Dataset& d, const TrainConfig& cfg);

struct TrainHooks {
  int64_t log_every = 100;   // metrics cadence (0 = off)
  int64_t eval_every = 1000; // eval cadence (0 = off); also fires at step 0
  std::function<void(int64_t step, const LossBreakdown&)> on_metrics;
  std::function<void(int64_t step, const SorlState&)> on_eval;
};

struct TrainResult {
  SorlState state;
  std::vector<std::pair<int64_t, LossBreakdown>> metrics;  // rows at the log cadence
};

TrainResult train(const Dataset& d, const TrainConfig& cfg, const TrainHooks& hooks = {});

}  // namespace sorl
