#include "sorl/shortcut.hpp"

#include <cmath>
#include <stdexcept>

#include "sorl/kernels.hpp"

namespace sorl {

namespace {

int log2i(int m) {
  int k = 0;
  while ((1 << k) < m) ++k;
  return k;
}

void check_budget(const ShortcutPolicy& p, int m) {
  if (!is_power_of_two(m) || m > p.m_disc)
    throw std::invalid_argument("euler sample: step budget must be a power of two in [1, " +
                                std::to_string(p.m_disc) + "], got " + std::to_string(m));
}

// t/h columns arrive as {B} or {B,1}; only the entry count matters.
void check_rows(const Tensor& t, int batch, const char* what) {
  if (t.size() != batch) throw std::invalid_argument(std::string(what) + ": one entry per row required");
}

}  // namespace

ShortcutPolicy ShortcutPolicy::make(int action_dim, int obs_dim, int m_disc,
                                    const std::vector<int>& hidden, Rng& rng) {
  if (action_dim < 1) throw std::invalid_argument("shortcut policy: action_dim must be positive");
  if (obs_dim < 0) throw std::invalid_argument("shortcut policy: obs_dim must be non-negative");
  if (!is_power_of_two(m_disc))
    throw std::invalid_argument("shortcut policy: M_disc must be a power of two");
  ShortcutPolicy p;
  p.action_dim = action_dim;
  p.obs_dim = obs_dim;
  p.m_disc = m_disc;
  p.net = nn::Mlp::make({action_dim + obs_dim + 2, action_dim, hidden, false}, rng);
  return p;
}

StepPair sample_step_pair(int m_disc, Rng& rng) {
  if (m_disc < 2 || !is_power_of_two(m_disc))
    throw std::invalid_argument("step pair: needs M_disc a power of two >= 2");
  const int kmax = log2i(m_disc);  // d in {2^0 .. 2^(kmax-1)}, so h = d/M <= 1/2
  const int d = 1 << rng.below(kmax);
  const double h = static_cast<double>(d) / m_disc;
  // multiples of h with t + 2h <= 1: t in {0, h, ..., 1 - 2h}
  const int64_t slots = m_disc / d - 1;
  const double t = static_cast<double>(rng.below(slots)) * h;
  return {t, h};
}

Tensor interpolate(const Tensor& a0, const Tensor& a1, const Tensor& t) {
  if (!a0.same_shape(a1)) throw std::invalid_argument("interpolate: endpoint shape mismatch");
  const int batch = a0.rows(), dim = a0.cols();
  check_rows(t, batch, "interpolate t");
  Tensor out(a0.shape);
  for (int r = 0; r < batch; ++r) {
    const double tr = t.data[r];
    for (int c = 0; c < dim; ++c)
      out.data[r * dim + c] = (1.0 - tr) * a0.data[r * dim + c] + tr * a1.data[r * dim + c];
  }
  return out;
}

Tensor clip_action(const Tensor& a, double bound) {
  if (bound <= 0.0) throw std::invalid_argument("clip_action: bound must be positive");
  Tensor out = a;
  for (auto& v : out.data) v = v < -bound ? -bound : (v > bound ? bound : v);
  return out;
}

Tensor pack_velocity_input(const ShortcutPolicy& p, const Tensor& a_t, const Tensor& x,
                           const Tensor& t, const Tensor& h) {
  const int batch = a_t.rows();
  const int A = p.action_dim, O = p.obs_dim;
  if (a_t.cols() != A) throw std::invalid_argument("velocity input: action width mismatch");
  if (O > 0 && (x.rows() != batch || x.cols() != O))
    throw std::invalid_argument("velocity input: observation shape mismatch");
  check_rows(t, batch, "velocity input t");
  check_rows(h, batch, "velocity input h");
  Tensor in({batch, A + O + 2});
  for (int r = 0; r < batch; ++r) {
    double* row = in.ptr() + static_cast<size_t>(r) * (A + O + 2);
    for (int c = 0; c < A; ++c) row[c] = a_t.data[r * A + c];
    for (int c = 0; c < O; ++c) row[A + c] = x.data[r * O + c];
    row[A + O] = t.data[r];
    row[A + O + 1] = h.data[r];
  }
  return in;
}

void predict_velocity(const ShortcutPolicy& p, const Tensor& a_t, const Tensor& x,
                      const Tensor& t, const Tensor& h, Tensor& out, nn::Mlp::Workspace& ws) {
  p.net.forward_nograd(pack_velocity_input(p, a_t, x, t, h), out, ws);
  require_finite(out, "predicted velocity");
}

ad::NodeId predict_velocity_node(ad::Graph& g, ShortcutPolicy& p, ad::NodeId a_t,
                                 const Tensor& x, const Tensor& t, const Tensor& h, bool train) {
  const int batch = g.value(a_t).rows();
  check_rows(t, batch, "velocity input t");
  check_rows(h, batch, "velocity input h");
  Tensor tc({batch, 1}, t.data), hc({batch, 1}, h.data);
  std::vector<ad::NodeId> parts{a_t};
  if (p.obs_dim > 0) parts.push_back(g.constant(x));
  parts.push_back(g.constant(std::move(tc)));
  parts.push_back(g.constant(std::move(hc)));
  return p.net.forward(g, g.concat_cols(parts), train);
}

Tensor euler_sample_from(const ShortcutPolicy& p, const Tensor& x, int m, const Tensor& a0,
                         nn::Mlp::Workspace& ws) {
  check_budget(p, m);
  const int batch = a0.rows();
  const double h = 1.0 / m;
  Tensor a = a0;
  Tensor tcol({batch, 1}), hcol = Tensor::full({batch, 1}, h);
  Tensor vel;
  const auto& k = kernels::active();
  for (int n = 0; n < m; ++n) {
    for (auto& v : tcol.data) v = n * h;
    predict_velocity(p, a, x, tcol, hcol, vel, ws);
    k.axpy(h, vel.ptr(), a.ptr(), a.size());
  }
  return a;
}

Tensor euler_sample(const ShortcutPolicy& p, const Tensor& x, int m, Rng& rng,
                    nn::Mlp::Workspace& ws) {
  Tensor a0({x.rows(), p.action_dim});
  rng.fill_normal(a0);
  return euler_sample_from(p, x, m, a0, ws);
}

ad::NodeId euler_sample_node(ad::Graph& g, ShortcutPolicy& p, const Tensor& x, int m,
                             const Tensor& a0, bool train) {
  check_budget(p, m);
  const int batch = a0.rows();
  const double h = 1.0 / m;
  ad::NodeId a = g.constant(a0);
  for (int n = 0; n < m; ++n) {
    const Tensor tcol = Tensor::full({batch, 1}, n * h);
    const Tensor hcol = Tensor::full({batch, 1}, h);
    const ad::NodeId vel = predict_velocity_node(g, p, a, x, tcol, hcol, train);
    a = g.add(a, g.scale(vel, h));
  }
  return a;
}

ad::NodeId flow_matching_loss_at(ad::Graph& g, ShortcutPolicy& p, const Tensor& x,
                                 const Tensor& a1, const Tensor& a0, const Tensor& t,
                                 double query_h) {
  const int batch = a1.rows();
  if (batch < 1) throw std::invalid_argument("flow matching loss: empty batch");
  const Tensor a_t = interpolate(a0, a1, t);
  const Tensor hcol = Tensor::full({batch, 1}, query_h);
  Tensor target(a1.shape);
  for (int64_t i = 0; i < target.size(); ++i) target.data[i] = a1.data[i] - a0.data[i];
  const ad::NodeId pred = predict_velocity_node(g, p, g.constant(a_t), x, t, hcol, true);
  return g.scale(g.sum_sq(g.sub(pred, g.constant(std::move(target)))), 1.0 / batch);
}

ad::NodeId flow_matching_loss(ad::Graph& g, ShortcutPolicy& p, const Tensor& x,
                              const Tensor& a1, double query_h, Rng& rng) {
  const int batch = a1.rows();
  if (batch < 1) throw std::invalid_argument("flow matching loss: empty batch");
  Tensor a0({batch, p.action_dim});
  rng.fill_normal(a0);
  Tensor t({batch, 1});
  for (auto& v : t.data) v = rng.uniform();
  return flow_matching_loss_at(g, p, x, a1, a0, t, query_h);
}

ad::NodeId self_consistency_loss_at(ad::Graph& g, ShortcutPolicy& p,
                                    const ShortcutPolicy& target, const Tensor& x,
                                    const Tensor& a1, const Tensor& a0, const Tensor& t,
                                    const Tensor& h, nn::Mlp::Workspace& ws) {
  const int batch = a1.rows();
  if (batch < 1) throw std::invalid_argument("self consistency loss: empty batch");
  if (target.m_disc < 2)
    throw std::invalid_argument("self consistency loss: needs M_disc >= 2");
  const int A = p.action_dim;
  const Tensor a_t = interpolate(a0, a1, t);

  // Frozen-target recursion, no tape: this evaluation is the stop-gradient.
  Tensor s_t, s_next;
  predict_velocity(target, a_t, x, t, h, s_t, ws);
  Tensor a_next(a_t.shape), t_next({batch, 1});
  for (int r = 0; r < batch; ++r) {
    t_next.data[r] = t.data[r] + h.data[r];
    for (int c = 0; c < A; ++c)
      a_next.data[r * A + c] = a_t.data[r * A + c] + h.data[r] * s_t.data[r * A + c];
  }
  predict_velocity(target, a_next, x, t_next, h, s_next, ws);
  Tensor s_target(s_t.shape);
  for (int64_t i = 0; i < s_target.size(); ++i)
    s_target.data[i] = 0.5 * (s_t.data[i] + s_next.data[i]);

  Tensor h2({batch, 1});
  for (int r = 0; r < batch; ++r) h2.data[r] = 2.0 * h.data[r];
  const ad::NodeId pred = predict_velocity_node(g, p, g.constant(a_t), x, t, h2, true);
  return g.scale(g.sum_sq(g.sub(pred, g.constant(std::move(s_target)))), 1.0 / batch);
}

ad::NodeId self_consistency_loss(ad::Graph& g, ShortcutPolicy& p, const ShortcutPolicy& target,
                                 const Tensor& x, const Tensor& a1, Rng& rng,
                                 nn::Mlp::Workspace& ws) {
  const int batch = a1.rows();
  if (batch < 1) throw std::invalid_argument("self consistency loss: empty batch");
  Tensor a0({batch, p.action_dim});
  rng.fill_normal(a0);
  Tensor t({batch, 1}), h({batch, 1});
  for (int r = 0; r < batch; ++r) {
    const StepPair pair = sample_step_pair(target.m_disc, rng);
    t.data[r] = pair.t;
    h.data[r] = pair.h;
  }
  return self_consistency_loss_at(g, p, target, x, a1, a0, t, h, ws);
}

}  // namespace sorl
