#include "sorl/infer.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace sorl {

void validate_inference(const InferenceConfig& cfg, int m_disc) {
  if (!is_power_of_two(cfg.m_inf) || cfg.m_inf > m_disc)
    throw std::invalid_argument("inference: M_inf must be a power of two in [1, M_disc]");
  if (cfg.n < 1) throw std::invalid_argument("inference: N must be >= 1");
  if (cfg.episodes < 1) throw std::invalid_argument("inference: episodes must be >= 1");
}

Tensor best_of_n(const ShortcutPolicy& policy, const Critic& critic, const Tensor& x,
                 int m_inf, int n, const Rng& cand_rng, nn::Mlp::Workspace& ws,
                 double* best_q, int* best_idx) {
  if (x.rows() != 1) throw std::invalid_argument("best_of_n: expects a single observation row");
  if (n < 1) throw std::invalid_argument("best_of_n: N must be >= 1");
  const int A = policy.action_dim, O = policy.obs_dim;

  Tensor a0({n, A});
  for (int i = 0; i < n; ++i) {
    Rng r = cand_rng.fork(static_cast<uint64_t>(i));
    for (int j = 0; j < A; ++j) a0.data[static_cast<size_t>(i) * A + j] = r.normal();
  }
  Tensor xrep({n, O});
  for (int i = 0; i < n; ++i)
    std::memcpy(xrep.ptr() + static_cast<size_t>(i) * O, x.ptr(), sizeof(double) * O);

  const Tensor acts = euler_sample_from(policy, xrep, m_inf, a0, ws);
  auto take_row = [&](int i) {
    Tensor out({1, A});
    std::memcpy(out.ptr(), acts.ptr() + static_cast<size_t>(i) * A, sizeof(double) * A);
    return out;
  };
  if (n == 1 && !best_q && !best_idx) return take_row(0);

  const Tensor code = Tensor::full({n, 1}, step_code(m_inf, policy.m_disc));
  Tensor q;
  critic_value(critic, xrep, acts, code, q, ws);
  int bi = 0;
  for (int i = 1; i < n; ++i)
    if (q.data[i] > q.data[bi]) bi = i;
  if (best_q) *best_q = q.data[bi];
  if (best_idx) *best_idx = bi;
  return take_row(bi);
}

EvalSummary evaluate(const ShortcutPolicy& policy, const Critic& critic, const EnvSpec& spec,
                     const InferenceConfig& cfg) {
  validate_inference(cfg, policy.m_disc);
  if (spec.obs_dim != policy.obs_dim || spec.action_dim != policy.action_dim)
    throw std::invalid_argument("evaluate: model dimensions do not match environment " + spec.name);
  const bool bandit = spec.name == "bandit2goal";

  nn::Mlp::Workspace ws;
  const Rng root(cfg.seed);
  EvalSummary s;
  s.episodes = cfg.episodes;
  s.records.resize(cfg.episodes);
  for (int ep = 0; ep < cfg.episodes; ++ep) {
    Rng env_rng = root.fork(stream::kEval, stream::kEnv, static_cast<uint64_t>(ep));
    Tensor x = env_reset(spec, env_rng);
    EpisodeRecord rec;
    for (int t = 0; t < spec.horizon; ++t) {
      const Rng cand =
          root.fork(stream::kEval, stream::kCandidate).fork(static_cast<uint64_t>(ep), static_cast<uint64_t>(t));
      const Tensor a =
          clip_action(best_of_n(policy, critic, x, cfg.m_inf, cfg.n, cand, ws), spec.action_bound);
      const StepResult sr = env_step(spec, x, a);
      rec.ret += sr.r;
      rec.steps += 1;
      if (bandit) {
        if (sr.done) rec.success = sr.r;
      } else if (sr.r > 0.0) {
        rec.success = 1.0;
      }
      x = sr.x_next;
      if (sr.done) break;
    }
    s.records[ep] = rec;
  }

  double sum = 0.0, sum_succ = 0.0;
  for (const auto& r : s.records) {
    sum += r.ret;
    sum_succ += r.success;
  }
  s.mean_return = sum / cfg.episodes;
  s.success_rate = sum_succ / cfg.episodes;
  if (cfg.episodes > 1) {
    double ss = 0.0;
    for (const auto& r : s.records) ss += (r.ret - s.mean_return) * (r.ret - s.mean_return);
    s.stderr_return = std::sqrt(ss / (cfg.episodes - 1)) / std::sqrt(double(cfg.episodes));
  }
  return s;
}

std::vector<SweepRow> scaling_sweep(const ShortcutPolicy& policy, const Critic& critic,
                                    const EnvSpec& spec, const std::vector<int>& m_inf_list,
                                    const std::vector<int>& n_list, int episodes, uint64_t seed) {
  if (m_inf_list.empty() || n_list.empty())
    throw std::invalid_argument("sweep: empty grid axis");
  for (const int m : m_inf_list)
    validate_inference({m, 1, episodes > 0 ? episodes : 1, seed}, policy.m_disc);
  for (const int n : n_list)
    if (n < 1) throw std::invalid_argument("sweep: N must be >= 1");
  if (episodes < 1) throw std::invalid_argument("sweep: episodes must be >= 1");

  std::vector<SweepRow> rows;
  for (const int m : m_inf_list)
    for (const int n : n_list) {
      const EvalSummary s = evaluate(policy, critic, spec, {m, n, episodes, seed});
      rows.push_back({m, n, s.mean_return, s.success_rate, s.stderr_return, episodes});
    }
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "m_inf,n,mean_return,success_rate,stderr,episodes\n";
  for (const auto& r : rows) {
    out += std::to_string(r.m_inf) + "," + std::to_string(r.n) + "," + fmt_g17(r.mean_return) +
           "," + fmt_g17(r.success_rate) + "," + fmt_g17(r.stderr_return) + "," +
           std::to_string(r.episodes) + "\n";
  }
  return out;
}

void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << sweep_csv(rows);
  if (!f) throw std::runtime_error("write failed: " + path);
}

}  // namespace sorl
