#pragma once

#include <string>

#include "sorl/trainer.hpp"

namespace sorl {

// Text dump of all six networks: a [meta] section carrying the dimensions,
// then [policy], [policy_target], [critic_q1], [critic_q2],
// [critic_q1_target], [critic_q2_target]. Each parameter is a
//   tensor <name> <dim> <dim>...
// line followed by its values in full-precision decimals. Optimizer state
// is deliberately not persisted: a loaded model evaluates and fine-tunes
// from fresh Adam moments.
void save_model(const SorlState& s, const TrainConfig& cfg, const std::string& path);

struct LoadedModel {
  SorlState state;
  int obs_dim = 0;
  int action_dim = 0;
  int m_disc = 0;
};

// Rebuilds the networks from the recorded dimensions, then fills in the
// values; section names, tensor names, and shapes are all validated.
LoadedModel load_model(const std::string& path);

}  // namespace sorl
