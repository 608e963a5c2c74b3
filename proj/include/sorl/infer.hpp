#pragma once

#include <string>
#include <vector>

#include "sorl/env.hpp"
#include "sorl/trainer.hpp"

namespace sorl {

// Inference-time scaling knobs: step budget (sequential axis) and candidate
// count for Q-verified best-of-N (parallel axis).
struct InferenceConfig {
  int m_inf = 4;
  int n = 1;
  int episodes = 50;
  uint64_t seed = 0;
};

// m_inf must be a power of two in [1, m_disc]; n and episodes >= 1.
void validate_inference(const InferenceConfig& cfg, int m_disc);

// Draws n candidate actions (candidate i's noise comes from cand_rng.fork(i),
// so the set for n=k is a prefix of the set for n=k+1), scores each with the
// online-critic mean at the budget's step code, and returns the argmax row;
// ties break toward the lowest index. n=1 skips scoring unless a score output
// is requested. x is a single observation row.
Tensor best_of_n(const ShortcutPolicy& policy, const Critic& critic, const Tensor& x,
                 int m_inf, int n, const Rng& cand_rng, nn::Mlp::Workspace& ws,
                 double* best_q = nullptr, int* best_idx = nullptr);

struct EpisodeRecord {
  double ret = 0.0;
  double success = 0.0;  // reach2goal: goal reached (0/1); bandit2goal: terminal reward
  int steps = 0;
};

struct EvalSummary {
  double mean_return = 0.0;
  double success_rate = 0.0;
  double stderr_return = 0.0;  // sample std of returns / sqrt(episodes)
  int episodes = 0;
  std::vector<EpisodeRecord> records;
};

// Rolls out `episodes` episodes acting with best_of_n at every decision.
// Deterministic given the seed; the RNG streams are disjoint from training
// and do not depend on m_inf or n.
EvalSummary evaluate(const ShortcutPolicy& policy, const Critic& critic, const EnvSpec& spec,
                     const InferenceConfig& cfg);

struct SweepRow {
  int m_inf = 0;
  int n = 0;
  double mean_return = 0.0;
  double success_rate = 0.0;
  double stderr_return = 0.0;
  int episodes = 0;
};

// Evaluates the full grid, one row per (m_inf, n) cell, same seed per cell.
// Every budget is validated before any episode runs.
std::vector<SweepRow> scaling_sweep(const ShortcutPolicy& policy, const Critic& critic,
                                    const EnvSpec& spec, const std::vector<int>& m_inf_list,
                                    const std::vector<int>& n_list, int episodes, uint64_t seed);

std::string sweep_csv(const std::vector<SweepRow>& rows);
void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows);

}  // namespace sorl
