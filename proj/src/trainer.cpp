#include "sorl/trainer.hpp"

#include <cmath>
#include <stdexcept>

#include "sorl/kernels.hpp"

namespace sorl {

namespace {

thread_local nn::Mlp::Workspace tl_ws;

Tensor gather_rows(const Tensor& src, const std::vector<int>& idx) {
  const int C = src.cols();
  Tensor out({static_cast<int>(idx.size()), C});
  for (size_t r = 0; r < idx.size(); ++r)
    for (int c = 0; c < C; ++c) out.data[r * C + c] = src.data[static_cast<size_t>(idx[r]) * C + c];
  return out;
}

int log2i(int m) {
  int k = 0;
  while ((1 << k) < m) ++k;
  return k;
}

// Rows bucketed by their drawn step count; noise is drawn for the whole
// batch first so a row's noise does not depend on the grouping.
struct MGroups {
  std::vector<int> m;                   // distinct budgets, ascending
  std::vector<std::vector<int>> rows;   // row indices per budget
};

MGroups draw_m_groups(int batch, int m_btt, Rng& m_rng) {
  std::vector<int> draw(batch);
  for (int r = 0; r < batch; ++r) draw[r] = sample_btt_steps(m_btt, m_rng);
  MGroups g;
  for (int k = 0; (1 << k) <= m_btt; ++k) {
    std::vector<int> rows;
    for (int r = 0; r < batch; ++r)
      if (draw[r] == (1 << k)) rows.push_back(r);
    if (!rows.empty()) {
      g.m.push_back(1 << k);
      g.rows.push_back(std::move(rows));
    }
  }
  return g;
}

double clip_pair(nn::ParamStore& a, nn::ParamStore& b, double max_norm) {
  const auto& k = kernels::active();
  double ss = 0.0;
  for (const auto* ps : {&a, &b})
    for (const auto& e : ps->entries) ss += k.sum_sq(e.grad.ptr(), e.grad.size());
  const double norm = std::sqrt(ss);
  if (norm <= max_norm || norm == 0.0) return 1.0;
  const double factor = max_norm / norm;
  for (auto* ps : {&a, &b})
    for (auto& e : ps->entries) k.scale(e.grad.ptr(), factor, e.grad.ptr(), e.grad.size());
  return factor;
}

}  // namespace

void validate(const TrainConfig& cfg) {
  if (!is_power_of_two(cfg.m_disc) || !is_power_of_two(cfg.m_btt))
    throw std::invalid_argument("train config: M_disc and M_BTT must be powers of two");
  if (cfg.m_btt > cfg.m_disc)
    throw std::invalid_argument("train config: M_BTT must not exceed M_disc");
  if (cfg.batch_size < 1) throw std::invalid_argument("train config: batch_size must be positive");
  if (cfg.grad_steps < 0) throw std::invalid_argument("train config: grad_steps must be >= 0");
  if (!(cfg.gamma > 0.0 && cfg.gamma < 1.0))
    throw std::invalid_argument("train config: gamma must lie in (0, 1)");
  if (!(cfg.tau >= 0.0 && cfg.tau <= 1.0))
    throw std::invalid_argument("train config: tau must lie in [0, 1]");
  if (!(cfg.lr > 0.0)) throw std::invalid_argument("train config: lr must be positive");
  if (!(cfg.grad_clip > 0.0)) throw std::invalid_argument("train config: grad_clip must be positive");
  if (cfg.alpha_q < 0.0 || cfg.alpha_bc < 0.0 || cfg.alpha_sc < 0.0)
    throw std::invalid_argument("train config: loss coefficients must be >= 0");
}

double step_code(int m, int m_disc) {
  if (!is_power_of_two(m) || m > m_disc)
    throw std::invalid_argument("step code: m must be a power of two <= M_disc");
  if (m_disc == 1) return 1.0;
  return static_cast<double>(log2i(m)) / static_cast<double>(log2i(m_disc));
}

int sample_btt_steps(int m_btt, Rng& rng) {
  if (!is_power_of_two(m_btt))
    throw std::invalid_argument("sample_btt_steps: M_BTT must be a power of two");
  return 1 << rng.below(log2i(m_btt) + 1);
}

Critic Critic::make(int obs_dim, int action_dim, const std::vector<int>& hidden, Rng& rng) {
  if (obs_dim < 1 || action_dim < 1)
    throw std::invalid_argument("critic: obs_dim and action_dim must be positive");
  Critic c;
  c.obs_dim = obs_dim;
  c.action_dim = action_dim;
  const nn::MlpSpec spec{obs_dim + action_dim + 1, 1, hidden, true};
  c.q1 = nn::Mlp::make(spec, rng);
  c.q2 = nn::Mlp::make(spec, rng);
  c.t1 = c.q1;
  c.t2 = c.q2;
  return c;
}

Tensor pack_critic_input(const Critic& c, const Tensor& x, const Tensor& a, const Tensor& code) {
  const int B = x.rows(), O = c.obs_dim, A = c.action_dim;
  if (a.rows() != B || a.cols() != A || x.cols() != O || code.size() != B)
    throw std::invalid_argument("critic input: shape mismatch");
  Tensor in({B, O + A + 1});
  for (int r = 0; r < B; ++r) {
    double* row = in.ptr() + static_cast<size_t>(r) * (O + A + 1);
    for (int i = 0; i < O; ++i) row[i] = x.data[r * O + i];
    for (int i = 0; i < A; ++i) row[O + i] = a.data[r * A + i];
    row[O + A] = code.data[r];
  }
  return in;
}

void critic_value(const Critic& c, const Tensor& x, const Tensor& a, const Tensor& code,
                  Tensor& out, nn::Mlp::Workspace& ws) {
  const Tensor in = pack_critic_input(c, x, a, code);
  Tensor v1, v2;
  c.q1.forward_nograd(in, v1, ws);
  c.q2.forward_nograd(in, v2, ws);
  out.reshape_to({x.rows(), 1});
  for (int64_t i = 0; i < out.size(); ++i) out.data[i] = 0.5 * (v1.data[i] + v2.data[i]);
}

void critic_target_value(const Critic& c, const Tensor& x, const Tensor& a, const Tensor& code,
                         bool clipped, Tensor& out, nn::Mlp::Workspace& ws) {
  const Tensor in = pack_critic_input(c, x, a, code);
  Tensor v1, v2;
  c.t1.forward_nograd(in, v1, ws);
  c.t2.forward_nograd(in, v2, ws);
  out.reshape_to({x.rows(), 1});
  for (int64_t i = 0; i < out.size(); ++i)
    out.data[i] = clipped ? std::min(v1.data[i], v2.data[i]) : 0.5 * (v1.data[i] + v2.data[i]);
}

SorlState make_sorl_state(int obs_dim, int action_dim, const TrainConfig& cfg) {
  validate(cfg);
  const Rng init = Rng(cfg.seed).fork(stream::kInit);
  SorlState s;
  Rng pr = init.fork(1);
  s.policy = ShortcutPolicy::make(action_dim, obs_dim, cfg.m_disc, cfg.policy_hidden, pr);
  s.policy_target = s.policy;
  Rng cr = init.fork(2);
  s.critic = Critic::make(obs_dim, action_dim, cfg.critic_hidden, cr);
  return s;
}

Batch sample_batch(const Dataset& d, int batch_size, Rng& rng) {
  const int64_t n = d.size();
  if (n < 1) throw std::invalid_argument("sample_batch: empty dataset");
  std::vector<int> idx(batch_size);
  for (int r = 0; r < batch_size; ++r) idx[r] = static_cast<int>(rng.below(n));
  Batch b;
  b.x = gather_rows(d.x, idx);
  b.a1 = gather_rows(d.a, idx);
  b.r = gather_rows(d.r, idx);
  b.x_next = gather_rows(d.x_next, idx);
  b.done = gather_rows(d.done, idx);
  return b;
}

ad::NodeId q_loss_node(ad::Graph& g, SorlState& s, const Tensor& x, const TrainConfig& cfg,
                       Rng& m_rng, Rng& noise_rng, double* q_mean_abs) {
  const int B = x.rows(), A = s.policy.action_dim, O = s.policy.obs_dim;
  const MGroups groups = draw_m_groups(B, cfg.m_btt, m_rng);
  Tensor noise({B, A});
  noise_rng.fill_normal(noise);

  ad::NodeId sum_q = -1, sum_abs = -1;
  for (size_t gi = 0; gi < groups.m.size(); ++gi) {
    const int m = groups.m[gi];
    const Tensor xg = gather_rows(x, groups.rows[gi]);
    const Tensor a0 = gather_rows(noise, groups.rows[gi]);
    const ad::NodeId a = euler_sample_node(g, s.policy, xg, m, a0, true);
    const Tensor code = Tensor::full({xg.rows(), 1}, step_code(m, cfg.m_disc));
    std::vector<ad::NodeId> parts;
    if (O > 0) parts.push_back(g.constant(xg));
    parts.push_back(a);
    parts.push_back(g.constant(code));
    const ad::NodeId in = g.concat_cols(parts);
    // Frozen critic weights: gradients reach the action input, never the heads.
    const ad::NodeId q1 = s.critic.q1.forward(g, in, false);
    const ad::NodeId q2 = s.critic.q2.forward(g, in, false);
    const ad::NodeId qbar = g.scale(g.add(q1, q2), 0.5);
    const ad::NodeId part_sum = g.sum(qbar);
    const ad::NodeId part_abs = g.sum(g.absval(qbar));
    sum_q = sum_q < 0 ? part_sum : g.add(sum_q, part_sum);
    sum_abs = sum_abs < 0 ? part_abs : g.add(sum_abs, part_abs);
  }
  const ad::NodeId mean_q = g.scale(sum_q, 1.0 / B);
  const ad::NodeId mean_abs = g.scale(sum_abs, 1.0 / B);
  if (q_mean_abs) *q_mean_abs = g.value(mean_abs).data[0];
  if (!cfg.normalized_q_loss) return g.scale(mean_q, -1.0);
  const ad::NodeId denom = g.stop_grad(g.add_const(mean_abs, 1e-6));
  return g.scale(g.divide(mean_q, denom), -1.0);
}

ad::NodeId critic_loss_node(ad::Graph& g, SorlState& s, const Batch& b, const TrainConfig& cfg,
                            Rng& m_rng, Rng& noise_rng) {
  const int B = b.rows(), A = s.policy.action_dim;
  if (B < 1) throw std::invalid_argument("critic loss: empty batch");
  const MGroups groups = draw_m_groups(B, cfg.m_btt, m_rng);
  Tensor noise({B, A});
  noise_rng.fill_normal(noise);

  // Bootstrapped targets from the frozen policy and target heads (no tape).
  Tensor qhat({B, 1});
  Tensor qg;
  for (size_t gi = 0; gi < groups.m.size(); ++gi) {
    const int m = groups.m[gi];
    const Tensor xg = gather_rows(b.x_next, groups.rows[gi]);
    const Tensor a0 = gather_rows(noise, groups.rows[gi]);
    const Tensor ag = euler_sample_from(s.policy, xg, m, a0, tl_ws);
    const Tensor code = Tensor::full({xg.rows(), 1}, step_code(m, cfg.m_disc));
    critic_target_value(s.critic, xg, ag, code, cfg.clipped_double_q, qg, tl_ws);
    for (size_t r = 0; r < groups.rows[gi].size(); ++r) qhat.data[groups.rows[gi][r]] = qg.data[r];
  }
  Tensor y({B, 1});
  for (int r = 0; r < B; ++r)
    y.data[r] = b.r.data[r] + cfg.gamma * (1.0 - b.done.data[r]) * qhat.data[r];
  require_finite(y, "TD target");

  const Tensor ones = Tensor::full({B, 1}, kDatasetStepCode);
  const ad::NodeId in = g.constant(pack_critic_input(s.critic, b.x, b.a1, ones));
  const ad::NodeId q1 = s.critic.q1.forward(g, in, true);
  const ad::NodeId q2 = s.critic.q2.forward(g, in, true);
  const ad::NodeId yc = g.constant(std::move(y));
  const ad::NodeId sq = g.add(g.sum_sq(g.sub(q1, yc)), g.sum_sq(g.sub(q2, yc)));
  return g.scale(sq, 1.0 / (2.0 * B));
}

ActorLossParts actor_loss_node(ad::Graph& g, SorlState& s, const Batch& b, const TrainConfig& cfg,
                               Rng& step_rng, double* q_mean_abs) {
  ActorLossParts parts;
  if (cfg.alpha_q > 0.0) {
    Rng m_rng = step_rng.fork(stream::kActorM);
    Rng noise_rng = step_rng.fork(stream::kActorNoise);
    parts.q = q_loss_node(g, s, b.x, cfg, m_rng, noise_rng, q_mean_abs);
    parts.has_q = true;
  }
  if (cfg.alpha_bc > 0.0) {
    Rng fm_rng = step_rng.fork(stream::kFm);
    const double query_h = (cfg.fm_double_query ? 2.0 : 1.0) / cfg.m_disc;
    parts.fm = flow_matching_loss(g, s.policy, b.x, b.a1, query_h, fm_rng);
    parts.has_fm = true;
  }
  if (cfg.alpha_sc > 0.0 && cfg.m_disc >= 2) {
    Rng sc_rng = step_rng.fork(stream::kSc);
    parts.sc = self_consistency_loss(g, s.policy, s.policy_target, b.x, b.a1, sc_rng, tl_ws);
    parts.has_sc = true;
  }
  ad::NodeId total = -1;
  auto accumulate = [&](ad::NodeId term, double w) {
    const ad::NodeId scaled = g.scale(term, w);
    total = total < 0 ? scaled : g.add(total, scaled);
  };
  if (parts.has_q) accumulate(parts.q, cfg.alpha_q);
  if (parts.has_fm) accumulate(parts.fm, cfg.alpha_bc);
  if (parts.has_sc) accumulate(parts.sc, cfg.alpha_sc);
  parts.total = total;
  return parts;
}

void polyak_update(const nn::ParamStore& online, nn::ParamStore& target, double tau) {
  if (!(tau >= 0.0 && tau <= 1.0))
    throw std::invalid_argument("polyak: tau must lie in [0, 1]");
  if (online.entries.size() != target.entries.size())
    throw std::invalid_argument("polyak: entry count mismatch");
  for (size_t i = 0; i < online.entries.size(); ++i) {
    const Tensor& o = online.entries[i].value;
    Tensor& t = target.entries[i].value;
    if (!o.same_shape(t)) throw std::invalid_argument("polyak: shape mismatch");
    for (int64_t j = 0; j < o.size(); ++j) t.data[j] = (1.0 - tau) * t.data[j] + tau * o.data[j];
  }
}

LossBreakdown train_step(SorlState& s, const Dataset& d, const TrainConfig& cfg) {
  validate(cfg);
  thread_local ad::Graph g;
  const Rng step_rng = Rng(cfg.seed).fork(stream::kStep).fork(static_cast<uint64_t>(s.step));
  Rng batch_rng = step_rng.fork(stream::kBatch);
  const Batch b = sample_batch(d, cfg.batch_size, batch_rng);
  LossBreakdown bd;

  // Critic first, then actor, then targets.
  g.reset();
  {
    Rng m_rng = step_rng.fork(stream::kCriticM);
    Rng noise_rng = step_rng.fork(stream::kCriticNoise);
    const ad::NodeId loss = critic_loss_node(g, s, b, cfg, m_rng, noise_rng);
    bd.critic_loss = g.value(loss).data[0];
    g.backward(loss);
    clip_pair(s.critic.q1.params, s.critic.q2.params, cfg.grad_clip);
    nn::adam_step(s.critic.q1.params, cfg.lr);
    nn::adam_step(s.critic.q2.params, cfg.lr);
  }

  g.reset();
  {
    Rng actor_rng = step_rng;
    const ActorLossParts parts = actor_loss_node(g, s, b, cfg, actor_rng, &bd.q_mean_abs);
    if (parts.total >= 0) {
      if (parts.has_q) bd.q_loss = g.value(parts.q).data[0];
      if (parts.has_fm) bd.fm_loss = g.value(parts.fm).data[0];
      if (parts.has_sc) bd.sc_loss = g.value(parts.sc).data[0];
      g.backward(parts.total);
      nn::clip_global_norm(s.policy.net.params, cfg.grad_clip);
      nn::adam_step(s.policy.net.params, cfg.lr);
    }
  }

  polyak_update(s.critic.q1.params, s.critic.t1.params, cfg.tau);
  polyak_update(s.critic.q2.params, s.critic.t2.params, cfg.tau);
  polyak_update(s.policy.net.params, s.policy_target.net.params, cfg.tau);
  s.step += 1;

  for (const double v : {bd.q_loss, bd.fm_loss, bd.sc_loss, bd.critic_loss, bd.q_mean_abs})
    if (!std::isfinite(v))
      throw std::runtime_error("train step " + std::to_string(s.step) +
                               ": non-finite loss (critic=" + std::to_string(bd.critic_loss) +
                               " q=" + std::to_string(bd.q_loss) + " fm=" + std::to_string(bd.fm_loss) +
                               " sc=" + std::to_string(bd.sc_loss) + ")");
  return bd;
}

TrainResult train(const Dataset& d, const TrainConfig& cfg, const TrainHooks& hooks) {
  validate(cfg);
  if (d.size() < 1) throw std::invalid_argument("train: empty dataset");
  TrainResult res{make_sorl_state(d.spec.obs_dim, d.spec.action_dim, cfg), {}};
  if (hooks.on_eval && hooks.eval_every > 0) hooks.on_eval(0, res.state);
  for (int64_t i = 1; i <= cfg.grad_steps; ++i) {
    const LossBreakdown bd = train_step(res.state, d, cfg);
    if (hooks.log_every > 0 && i % hooks.log_every == 0) {
      res.metrics.emplace_back(i, bd);
      if (hooks.on_metrics) hooks.on_metrics(i, bd);
    }
    if (hooks.on_eval && hooks.eval_every > 0 && i % hooks.eval_every == 0)
      hooks.on_eval(i, res.state);
  }
  return res;
}

}  // namespace sorl
