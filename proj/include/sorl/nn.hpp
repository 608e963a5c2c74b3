#pragma once

#include <deque>
#include <string>
#include <vector>

#include "sorl/autodiff.hpp"
#include "sorl/rng.hpp"
#include "sorl/tensor.hpp"

namespace sorl::nn {

// MLP shape. Hidden layers are linear -> (layer norm ->) GELU; the output
// layer is purely linear. An empty hidden list degenerates to a single
// linear map, which the tests use for closed-form cases.
struct MlpSpec {
  int input_dim = 0;
  int output_dim = 0;
  std::vector<int> hidden;
  bool layer_norm = false;

  bool operator==(const MlpSpec&) const = default;
};

void validate(const MlpSpec& spec);  // throws on non-positive dimensions

inline constexpr double kLayerNormEps = 1e-5;
inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;

// Named parameter tensors plus Adam state. Entry order is registration
// order and is part of the determinism and serialization contract.
struct ParamStore {
  struct Entry {
    std::string name;
    Tensor value, grad, m, v;
  };
  std::vector<Entry> entries;
  int64_t adam_steps = 0;
  bool grads_ready = false;

  size_t add(std::string name, std::vector<int> shape);
  Entry& at(size_t i) { return entries.at(i); }
  const Entry& at(size_t i) const { return entries.at(i); }
  size_t index_of(const std::string& name) const;  // throws if absent
  int64_t param_count() const;
  void zero_grads();
  void copy_values_from(const ParamStore& other);  // shapes must match
};

// Tape leaf for a parameter entry (gradient accumulates into the store).
ad::NodeId param_node(ad::Graph& g, ParamStore& ps, size_t idx);

// An MLP = spec + params. Targets are made by copying the whole struct.
struct Mlp {
  MlpSpec spec;
  ParamStore params;

  static Mlp make(const MlpSpec& spec, Rng& rng);  // trunc-normal 1/sqrt(fan_in), zero biases

  // Tape forward. train=true threads parameters in as differentiable
  // leaves; train=false treats them as constants (target networks, and the
  // critic inside the actor loss, where gradients must reach the inputs but
  // never the weights).
  ad::NodeId forward(ad::Graph& g, ad::NodeId input, bool train);

  struct Workspace {
    std::deque<Tensor> bufs;  // deque: references stay valid as the pool grows
    Tensor& buf(size_t i, const std::vector<int>& shape);
  };
  // No-tape forward for sampling, target computation, and evaluation.
  void forward_nograd(const Tensor& input, Tensor& out, Workspace& ws) const;
};

// Bias-corrected Adam over every entry; consumes and clears gradients.
// Throws if no backward() has populated gradients since the last step.
void adam_step(ParamStore& ps, double lr, double beta1 = kAdamBeta1,
               double beta2 = kAdamBeta2, double eps = kAdamEps);

// Scales all gradients by max_norm/|g| when the global L2 norm exceeds
// max_norm; returns the factor applied (1.0 when within bounds).
double clip_global_norm(ParamStore& ps, double max_norm);

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::string worst_param;
  int64_t checked = 0;
  bool pass = false;
};

// Analytic vs central finite-difference gradients (step 1e-5) for a random
// MLP + squared-error loss built from `seed`.
GradCheckReport grad_check(const MlpSpec& spec, uint64_t seed, double tolerance);

}  // namespace sorl::nn
