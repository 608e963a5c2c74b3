#pragma once

#include <string>
#include <vector>

#include "sorl/rng.hpp"
#include "sorl/tensor.hpp"

namespace sorl {

// Desk-scale environment description. Both environments are fully
// determined by name; the numeric fields are filled by make_env so the
// reward/dynamics code reads its constants from here.
struct EnvSpec {
  std::string name;
  int obs_dim = 0;
  int action_dim = 0;
  double action_bound = 0.0;
  int horizon = 1;
  double gamma = 0.99;
  std::vector<double> goal;    // rewarded goal (bandit g1 / reach g*)
  std::vector<double> goal2;   // second mode (bandit g2 / reach decoy)
  double reward_sigma = 0.0;   // bandit kernel width
  double goal_radius = 0.0;    // reach success threshold
};

// Known names: bandit2goal, reach2goal. Throws listing the valid names.
EnvSpec make_env(const std::string& name);
const std::vector<std::string>& env_names();

Tensor env_reset(const EnvSpec& spec, Rng& rng);  // [1, obs_dim]

struct StepResult {
  Tensor x_next;  // [1, obs_dim]
  double r = 0.0;
  bool done = false;
};

// Pure dynamics. Throws if any |a_i| exceeds the action bound.
StepResult env_step(const EnvSpec& spec, const Tensor& x, const Tensor& a);

// Scripted data-generating policy. mode selects the target (0 = rewarded
// goal, 1 = second mode); the reach2goal generator fixes mode per episode.
Tensor behavior_action(const EnvSpec& spec, const Tensor& x, int mode, Rng& rng);

// Transitions in column blocks: x [n,O], a [n,A], r [n,1], x_next [n,O],
// done [n,1]. Observation stats are carried but never applied implicitly.
struct Dataset {
  EnvSpec spec;
  Tensor x, a, r, x_next, done;
  std::vector<double> obs_mean, obs_std;

  int64_t size() const { return x.rank() == 2 ? x.shape[0] : 0; }
};

Dataset generate_dataset(const EnvSpec& spec, int64_t n_transitions, Rng& rng);

void compute_obs_stats(Dataset& d);

// Plain-text format: one header line
//   # sorl-dataset v1 obs_dim=<o> action_dim=<a> env=<name>
// then one transition per line, comma-separated full-precision decimals in
// the order x..., a..., r, x_next..., done. Round-trips bit-exactly.
void save_dataset(const Dataset& d, const std::string& path);
Dataset load_dataset(const std::string& path);

}  // namespace sorl
