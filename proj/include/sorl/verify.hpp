#pragma once

#include <functional>
#include <string>
#include <vector>

#include "sorl/otw2.hpp"
#include "sorl/shortcut.hpp"
#include "sorl/trainer.hpp"

namespace sorl {

// (z [n,d], t) -> velocity rows [n,d]
using VelocityFn = std::function<Tensor(const Tensor&, double)>;
// (z [n,d], t, t') -> exact flow positions at t' [n,d]
using FlowFn = std::function<Tensor(const Tensor&, double, double)>;
// (z [n,d], t, h) -> one sampler jump to t+h [n,d]
using StepFn = std::function<Tensor(const Tensor&, double, double)>;

// Synthetic generative target with known structure. drift is the exact
// marginal velocity of the noise-to-data interpolation; it may be empty for
// problems used only as sample sources.
struct GenProblem {
  int dim = 0;
  std::function<Tensor(int, Rng&)> sample_data;
  VelocityFn drift;
};

// Dirac target at a1: drift (a1 - z)/(1 - t).
GenProblem point_problem(const std::vector<double>& a1);

// Equal-covariance Gaussian mixture sigma^2 I at the given means; exact
// drift via posterior responsibilities over mixture components. Empty
// weights = uniform.
GenProblem mixture_problem(const std::vector<std::vector<double>>& means, double sigma,
                           const std::vector<double>& weights = {});

// Single Gaussian N(mu, sigma^2 I) with the closed-form interpolation flow
// map F(z, t, t') = t' mu + sqrt(V(t')/V(t)) (z - t mu), V(t) = (1-t)^2 + t^2 sigma^2.
struct GaussianProblem {
  GenProblem gen;
  FlowFn flow;
};
GaussianProblem gaussian_problem(const std::vector<double>& mu, double sigma);

// Max over the t grid {0, 1/M, ..., (M-1)/M} of the Monte-Carlo estimate of
// E||s(z_t, t, 1/M) - v_t(z_t)||^2, z_t from the interpolation law. Returns
// the squared quantity; reports quote its square root. Unconditional
// policies only (obs_dim 0).
double estimate_fm_error(const ShortcutPolicy& policy, const GenProblem& prob, int n_samples,
                         Rng& rng);

// Max over the legal step grid (h = d/M, d a power of two < M, t a multiple
// of h with t + 2h <= 1) of the Monte-Carlo estimate of
// E||s(z_t,t,h)/2 + s(z',t,h)/2 - s(z_t,t,2h)||^2 with z' = z_t + h s(z_t,t,h).
// Returns the squared quantity.
double estimate_consistency_error(const ShortcutPolicy& policy, const GenProblem& prob,
                                  int n_samples, Rng& rng);

// Multi-step sampler drift bound: run 1/h jumps of `step` from t=0 to 1 and
// compare against the exact flow. eps is the per-step error budget in the
// root-mean-square sense (single-step RMSE <= h * eps); l the flow's
// Lipschitz constant. The bound carries 1e-12 of float slack.
struct Lemma3Row {
  double h = 0.0;
  double eps = 0.0;
  double measured_rmse = 0.0;
  double bound = 0.0;
  bool satisfied = false;
};
Lemma3Row check_lemma3(const StepFn& step, const FlowFn& flow, const Tensor& z0, double h,
                       double l, double eps);

// Canned instance: exact flow of dz/dt = -z with an injected per-step
// perturbation of exact norm h*eps in a seeded pseudo-random direction.
Lemma3Row lemma3_contraction_case(double h, double eps, int n, int dim, uint64_t seed);

// Single minimum-step bound on the Gaussian problem: the velocity is the
// exact drift plus a perturbation of RMS magnitude delta, so the
// flow-matching error is measurable exactly. All constants on the right side
// are estimated from the same sample set.
struct Lemma1Report {
  double h0 = 0.0;
  double lhs = 0.0;      // single-step RMSE vs exact flow
  double rhs = 0.0;      // h0 (L_v e^{L_v h0} h0 (M_v + 1) + eps_FM)
  double eps_fm = 0.0;   // measured, sqrt sense
  double l_v = 0.0;
  double m_v = 0.0;
  bool satisfied = false;
};
Lemma1Report check_lemma1(const GaussianProblem& gp, double h0, double delta, int n, Rng& rng);

// Per-step-size comparison of measured W2 against the explicit-h bound
// (1/L)((1+Lh)^{1/h}-1) e^{Lh/2} (e L_v (M_v+1)/M + eps_FM + eps_SC log2(Mh)).
// The satisfied flag is diagnostic: Lipschitz constants of learned networks
// are below-estimates, so rows are reported, not asserted.
struct BoundRow {
  double h = 0.0;
  double w2 = 0.0;
  double eps_fm = 0.0;  // sqrt sense
  double eps_sc = 0.0;  // sqrt sense
  double l_est = 0.0;
  double bound = 0.0;
  bool satisfied = false;
};
struct BoundReport {
  std::vector<BoundRow> rows;
  double eps_fm = 0.0;
  double eps_sc = 0.0;
  double l_est = 0.0;   // Lipschitz of the learned velocity in z
  double l_v = 0.0;     // Lipschitz of the exact drift
  double m_v = 0.0;     // sqrt(max_t E||v_t||^2)
  int m_disc = 0;
};
BoundReport theorem1_report(const ShortcutPolicy& policy, const GenProblem& prob, int n_w2,
                            int n_mc, Rng& rng);

// CSV rows h,w2,eps_fm,eps_sc,l_est,bound,satisfied.
std::string bound_report_csv(const BoundReport& r);

// W2 between two independent n-sample draws of the same distribution: the
// resolution floor below which measured distances are sampling noise.
double self_distance(const GenProblem& prob, int n, Rng& rng);

// Exhaustive-permutation W2 reference for tiny instances (n <= 7).
double w2_brute_force(const Tensor& p, const Tensor& q);

// Finite-difference check of backpropagation through the full m-step Euler
// chain on a small random policy (loss = mean of sampled actions). Returns
// the max relative error over all policy parameters.
double euler_btt_grad_check(int m, int m_disc, uint64_t seed);

// Flow-matching + self-consistency training on fresh problem samples (no
// critic, unconditional): the generative half of the trainer in isolation.
struct GenTrainConfig {
  int m_disc = 8;
  int batch_size = 256;
  int64_t grad_steps = 20000;
  double lr = 1e-4;
  double grad_clip = 1.0;
  double alpha_sc = 1.0;  // flow-matching coefficient is fixed at 1
  double tau = 0.005;
  bool fm_double_query = false;
  std::vector<int> hidden = {64, 64};
  uint64_t seed = 0;
  std::function<void(int64_t, double, double)> on_log;  // (step, fm, sc)
  int64_t log_every = 1000;
};
ShortcutPolicy train_generative(const GenProblem& prob, const GenTrainConfig& cfg);

}  // namespace sorl
