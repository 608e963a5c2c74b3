#include "sorl/nn.hpp"

#include <cmath>
#include <stdexcept>

#include "sorl/kernels.hpp"

namespace sorl::nn {

void validate(const MlpSpec& spec) {
  if (spec.input_dim < 1 || spec.output_dim < 1)
    throw std::invalid_argument("mlp spec: input/output dims must be positive");
  for (int h : spec.hidden)
    if (h < 1) throw std::invalid_argument("mlp spec: hidden widths must be positive");
}

size_t ParamStore::add(std::string name, std::vector<int> shape) {
  Entry e;
  e.name = std::move(name);
  e.value = Tensor(shape);
  e.grad = Tensor(shape);
  e.m = Tensor(shape);
  e.v = Tensor(std::move(shape));
  entries.push_back(std::move(e));
  return entries.size() - 1;
}

size_t ParamStore::index_of(const std::string& name) const {
  for (size_t i = 0; i < entries.size(); ++i)
    if (entries[i].name == name) return i;
  throw std::out_of_range("param store: no entry named '" + name + "'");
}

int64_t ParamStore::param_count() const {
  int64_t n = 0;
  for (const auto& e : entries) n += e.value.size();
  return n;
}

void ParamStore::zero_grads() {
  for (auto& e : entries) std::fill(e.grad.data.begin(), e.grad.data.end(), 0.0);
  grads_ready = false;
}

void ParamStore::copy_values_from(const ParamStore& other) {
  if (entries.size() != other.entries.size())
    throw std::invalid_argument("param store: entry count mismatch");
  for (size_t i = 0; i < entries.size(); ++i) {
    if (!entries[i].value.same_shape(other.entries[i].value))
      throw std::invalid_argument("param store: shape mismatch at " + entries[i].name);
    entries[i].value.data = other.entries[i].value.data;
  }
}

ad::NodeId param_node(ad::Graph& g, ParamStore& ps, size_t idx) {
  auto& e = ps.at(idx);
  return g.param(&e.value, &e.grad, &ps.grads_ready);
}

Mlp Mlp::make(const MlpSpec& spec, Rng& rng) {
  validate(spec);
  Mlp mlp;
  mlp.spec = spec;
  int in = spec.input_dim;
  for (size_t l = 0; l < spec.hidden.size(); ++l) {
    const int out = spec.hidden[l];
    const size_t wi = mlp.params.add("W" + std::to_string(l), {in, out});
    mlp.params.add("b" + std::to_string(l), {out});
    if (spec.layer_norm) {
      const size_t gi = mlp.params.add("ln_gain" + std::to_string(l), {out});
      mlp.params.add("ln_shift" + std::to_string(l), {out});
      for (auto& v : mlp.params.at(gi).value.data) v = 1.0;
    }
    const double std = 1.0 / std::sqrt(static_cast<double>(in));
    for (auto& v : mlp.params.at(wi).value.data) v = rng.truncated_normal(std);
    in = out;
  }
  const size_t wi = mlp.params.add("Wout", {in, spec.output_dim});
  mlp.params.add("bout", {spec.output_dim});
  const double std = 1.0 / std::sqrt(static_cast<double>(in));
  for (auto& v : mlp.params.at(wi).value.data) v = rng.truncated_normal(std);
  return mlp;
}

ad::NodeId Mlp::forward(ad::Graph& g, ad::NodeId input, bool train) {
  auto leaf = [&](size_t idx) {
    return train ? param_node(g, params, idx) : g.constant_view(&params.at(idx).value);
  };
  size_t pi = 0;
  ad::NodeId x = input;
  for (size_t l = 0; l < spec.hidden.size(); ++l) {
    x = g.add_bias(g.matmul(x, leaf(pi)), leaf(pi + 1));
    pi += 2;
    if (spec.layer_norm) {
      x = g.layer_norm(x, leaf(pi), leaf(pi + 1), kLayerNormEps);
      pi += 2;
    }
    x = g.gelu(x);
  }
  return g.add_bias(g.matmul(x, leaf(pi)), leaf(pi + 1));
}

Tensor& Mlp::Workspace::buf(size_t i, const std::vector<int>& shape) {
  if (bufs.size() <= i) bufs.resize(i + 1);
  bufs[i].reshape_to(shape);
  return bufs[i];
}

void Mlp::forward_nograd(const Tensor& input, Tensor& out, Workspace& ws) const {
  const auto& k = kernels::active();
  const int rows = input.shape[0];
  const Tensor* x = &input;
  size_t pi = 0, bi = 0;
  for (size_t l = 0; l < spec.hidden.size(); ++l) {
    const Tensor& w = params.at(pi).value;
    const Tensor& b = params.at(pi + 1).value;
    pi += 2;
    Tensor& y = ws.buf(bi++, {rows, w.shape[1]});
    k.gemm_nn(x->ptr(), w.ptr(), y.ptr(), rows, w.shape[0], w.shape[1], false);
    k.add_row_vec(y.ptr(), b.ptr(), rows, w.shape[1]);
    if (spec.layer_norm) {
      const Tensor& gain = params.at(pi).value;
      const Tensor& shift = params.at(pi + 1).value;
      pi += 2;
      Tensor& z = ws.buf(bi++, y.shape);
      Tensor& mean = ws.buf(bi++, {rows});
      Tensor& rstd = ws.buf(bi++, {rows});
      k.layernorm_forward(y.ptr(), gain.ptr(), shift.ptr(), z.ptr(), mean.ptr(), rstd.ptr(),
                          rows, y.shape[1], kLayerNormEps);
      Tensor& a = ws.buf(bi++, z.shape);
      k.gelu_cdf(z.ptr(), a.ptr(), z.size());
      x = &a;
    } else {
      Tensor& a = ws.buf(bi++, y.shape);
      k.gelu_cdf(y.ptr(), a.ptr(), y.size());
      x = &a;
    }
  }
  const Tensor& w = params.at(pi).value;
  const Tensor& b = params.at(pi + 1).value;
  out.reshape_to({rows, w.shape[1]});
  k.gemm_nn(x->ptr(), w.ptr(), out.ptr(), rows, w.shape[0], w.shape[1], false);
  k.add_row_vec(out.ptr(), b.ptr(), rows, w.shape[1]);
}

void adam_step(ParamStore& ps, double lr, double beta1, double beta2, double eps) {
  if (!ps.grads_ready)
    throw std::logic_error("adam_step: no gradients accumulated since last step");
  ps.adam_steps += 1;
  const double c1 = 1.0 / (1.0 - std::pow(beta1, static_cast<double>(ps.adam_steps)));
  const double c2 = 1.0 / (1.0 - std::pow(beta2, static_cast<double>(ps.adam_steps)));
  const auto& k = kernels::active();
  for (auto& e : ps.entries)
    k.adam_update(e.value.ptr(), e.grad.ptr(), e.m.ptr(), e.v.ptr(), e.value.size(), lr,
                  beta1, beta2, eps, c1, c2);
  ps.zero_grads();
}

double clip_global_norm(ParamStore& ps, double max_norm) {
  if (!ps.grads_ready)
    throw std::logic_error("clip_global_norm: no gradients accumulated");
  if (max_norm <= 0.0) throw std::invalid_argument("clip_global_norm: max_norm must be positive");
  const auto& k = kernels::active();
  double ss = 0.0;
  for (const auto& e : ps.entries) ss += k.sum_sq(e.grad.ptr(), e.grad.size());
  const double norm = std::sqrt(ss);
  if (norm <= max_norm || norm == 0.0) return 1.0;
  const double factor = max_norm / norm;
  for (auto& e : ps.entries) {
    Tensor& g = e.grad;
    k.scale(g.ptr(), factor, g.ptr(), g.size());
  }
  return factor;
}

GradCheckReport grad_check(const MlpSpec& spec, uint64_t seed, double tolerance) {
  validate(spec);
  Rng rng = Rng(seed).fork(stream::kInit);
  Mlp mlp = Mlp::make(spec, rng);

  const int batch = 4;
  Tensor input({batch, spec.input_dim});
  Tensor target({batch, spec.output_dim});
  Rng data_rng = Rng(seed).fork(stream::kData);
  data_rng.fill_normal(input);
  data_rng.fill_normal(target);

  auto loss_value = [&]() {
    Mlp::Workspace ws;
    Tensor out;
    mlp.forward_nograd(input, out, ws);
    double s = 0.0;
    for (int64_t i = 0; i < out.size(); ++i) {
      const double d = out.data[i] - target.data[i];
      s += d * d;
    }
    return s / batch;
  };

  mlp.params.zero_grads();
  {
    ad::Graph g;
    const ad::NodeId pred = mlp.forward(g, g.constant(input), true);
    const ad::NodeId loss = g.scale(g.sum_sq(g.sub(pred, g.constant(target))), 1.0 / batch);
    g.backward(loss);
  }

  GradCheckReport report;
  const double step = 1e-5;
  for (auto& e : mlp.params.entries) {
    for (int64_t i = 0; i < e.value.size(); ++i) {
      const double saved = e.value.data[i];
      e.value.data[i] = saved + step;
      const double up = loss_value();
      e.value.data[i] = saved - step;
      const double down = loss_value();
      e.value.data[i] = saved;
      const double fd = (up - down) / (2.0 * step);
      const double an = e.grad.data[i];
      const double rel = std::fabs(an - fd) / std::max(std::fabs(an) + std::fabs(fd), 1e-8);
      ++report.checked;
      if (rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst_param = e.name + "[" + std::to_string(i) + "]";
      }
    }
  }
  mlp.params.zero_grads();
  report.pass = report.max_rel_err < tolerance;
  return report;
}

}  // namespace sorl::nn
