#include "sorl/verify.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "sorl/nn.hpp"

namespace sorl {

namespace {

thread_local nn::Mlp::Workspace tl_ws;

constexpr double kE = 2.718281828459045235;

double mean_row_sq(const Tensor& a, const Tensor& b) {
  double acc = 0.0;
  for (int64_t i = 0; i < a.size(); ++i) {
    const double e = a.data[i] - b.data[i];
    acc += e * e;
  }
  return acc / a.rows();
}

double mean_row_sq(const Tensor& a) {
  double acc = 0.0;
  for (const double v : a.data) acc += v * v;
  return acc / a.rows();
}

void check_unconditional(const ShortcutPolicy& p, const GenProblem& prob) {
  if (p.obs_dim != 0)
    throw std::invalid_argument("verify: unconditional policy required (obs_dim 0)");
  if (p.action_dim != prob.dim)
    throw std::invalid_argument("verify: policy dimension does not match problem");
}

// Interpolation-law draw z_t = (1-t) z0 + t a1 for one fixed t.
Tensor draw_zt(const GenProblem& prob, double t, int n, Rng& rng) {
  const Tensor a1 = prob.sample_data(n, rng);
  Tensor z0({n, prob.dim});
  rng.fill_normal(z0);
  return interpolate(z0, a1, Tensor::full({n, 1}, t));
}

// Max difference quotient ||f(z_a) - f(z_b)|| / ||z_a - z_b|| over
// consecutive row pairs of z with f's values precomputed in v.
double pair_quotients(const Tensor& z, const Tensor& v) {
  const int d = z.cols();
  double worst = 0.0;
  for (int r = 0; r + 1 < z.rows(); r += 2) {
    double num = 0.0, den = 0.0;
    for (int k = 0; k < d; ++k) {
      const double dv = v.data[static_cast<size_t>(r) * d + k] - v.data[static_cast<size_t>(r + 1) * d + k];
      const double dz = z.data[static_cast<size_t>(r) * d + k] - z.data[static_cast<size_t>(r + 1) * d + k];
      num += dv * dv;
      den += dz * dz;
    }
    if (den > 1e-18) worst = std::max(worst, std::sqrt(num / den));
  }
  return worst;
}

struct DriftConstants {
  double l_s = 0.0;  // learned velocity Lipschitz in z (below-estimate)
  double l_v = 0.0;  // exact drift Lipschitz in z (below-estimate)
  double m_v = 0.0;  // sqrt(max_t E||v_t||^2)
};

DriftConstants estimate_constants(const ShortcutPolicy& policy, const GenProblem& prob, int n,
                                  Rng& rng) {
  const int M = policy.m_disc;
  const Tensor x({n, 0});
  DriftConstants c;
  Tensor s;
  for (int dstep = 1; dstep <= M; dstep <<= 1) {
    const double h = static_cast<double>(dstep) / M;
    for (int i = 0; (i + 1) * dstep <= M; ++i) {
      const double t = i * h;
      const Tensor zt = draw_zt(prob, t, n, rng);
      predict_velocity(policy, zt, x, Tensor::full({n, 1}, t), Tensor::full({n, 1}, h), s, tl_ws);
      c.l_s = std::max(c.l_s, pair_quotients(zt, s));
    }
  }
  if (prob.drift) {
    for (int i = 0; i < M; ++i) {
      const double t = static_cast<double>(i) / M;
      const Tensor zt = draw_zt(prob, t, n, rng);
      const Tensor v = prob.drift(zt, t);
      c.l_v = std::max(c.l_v, pair_quotients(zt, v));
      c.m_v = std::max(c.m_v, std::sqrt(mean_row_sq(v)));
    }
  }
  return c;
}

}  // namespace

GenProblem point_problem(const std::vector<double>& a1) {
  const int d = static_cast<int>(a1.size());
  if (d < 1) throw std::invalid_argument("point problem: empty target");
  GenProblem p;
  p.dim = d;
  p.sample_data = [d, a1](int n, Rng&) {
    Tensor out({n, d});
    for (int r = 0; r < n; ++r)
      for (int k = 0; k < d; ++k) out.data[static_cast<size_t>(r) * d + k] = a1[k];
    return out;
  };
  p.drift = [d, a1](const Tensor& z, double t) {
    if (t >= 1.0) throw std::invalid_argument("point drift: t must be < 1");
    Tensor v({z.rows(), d});
    for (int64_t i = 0; i < z.size(); ++i) v.data[i] = (a1[i % d] - z.data[i]) / (1.0 - t);
    return v;
  };
  return p;
}

GenProblem mixture_problem(const std::vector<std::vector<double>>& means, double sigma,
                           const std::vector<double>& weights) {
  if (means.empty()) throw std::invalid_argument("mixture: no components");
  const int d = static_cast<int>(means[0].size());
  for (const auto& m : means)
    if (static_cast<int>(m.size()) != d) throw std::invalid_argument("mixture: ragged means");
  if (!(sigma > 0.0)) throw std::invalid_argument("mixture: sigma must be positive");
  std::vector<double> w = weights.empty() ? std::vector<double>(means.size(), 1.0) : weights;
  if (w.size() != means.size()) throw std::invalid_argument("mixture: weight count mismatch");
  double wsum = 0.0;
  for (const double v : w) {
    if (!(v > 0.0)) throw std::invalid_argument("mixture: weights must be positive");
    wsum += v;
  }
  for (double& v : w) v /= wsum;

  GenProblem p;
  p.dim = d;
  p.sample_data = [means, sigma, w, d](int n, Rng& rng) {
    Tensor out({n, d});
    for (int r = 0; r < n; ++r) {
      const double u = rng.uniform();
      size_t k = 0;
      double acc = 0.0;
      for (; k + 1 < w.size(); ++k) {
        acc += w[k];
        if (u < acc) break;
      }
      for (int j = 0; j < d; ++j)
        out.data[static_cast<size_t>(r) * d + j] = means[k][j] + sigma * rng.normal();
    }
    return out;
  };
  // Marginal drift of the interpolation z_t = (1-t) z0 + t a1: with
  // component k active, z_t ~ N(t mu_k, V(t) I), V(t) = (1-t)^2 + t^2 s^2,
  // and the conditional-expectation velocity is mu_k + c(t)(z - t mu_k) with
  // c(t) = (t s^2 - (1-t)) / V(t); mix with posterior responsibilities.
  p.drift = [means, sigma, w, d](const Tensor& z, double t) {
    const double V = (1.0 - t) * (1.0 - t) + t * t * sigma * sigma;
    const double c = (t * sigma * sigma - (1.0 - t)) / V;
    const int K = static_cast<int>(means.size());
    Tensor v({z.rows(), d});
    std::vector<double> logr(K);
    for (int r = 0; r < z.rows(); ++r) {
      const double* zr = z.ptr() + static_cast<size_t>(r) * d;
      double best = -1e300;
      for (int k = 0; k < K; ++k) {
        double sq = 0.0;
        for (int j = 0; j < d; ++j) {
          const double e = zr[j] - t * means[k][j];
          sq += e * e;
        }
        logr[k] = std::log(w[k]) - sq / (2.0 * V);
        best = std::max(best, logr[k]);
      }
      double norm = 0.0;
      for (int k = 0; k < K; ++k) {
        logr[k] = std::exp(logr[k] - best);
        norm += logr[k];
      }
      double* vr = v.ptr() + static_cast<size_t>(r) * d;
      for (int j = 0; j < d; ++j) vr[j] = 0.0;
      for (int k = 0; k < K; ++k) {
        const double rk = logr[k] / norm;
        for (int j = 0; j < d; ++j)
          vr[j] += rk * (means[k][j] + c * (zr[j] - t * means[k][j]));
      }
    }
    return v;
  };
  return p;
}

GaussianProblem gaussian_problem(const std::vector<double>& mu, double sigma) {
  GaussianProblem gp;
  gp.gen = mixture_problem({mu}, sigma);
  const int d = static_cast<int>(mu.size());
  gp.flow = [mu, sigma, d](const Tensor& z, double t, double tp) {
    const double Vt = (1.0 - t) * (1.0 - t) + t * t * sigma * sigma;
    const double Vp = (1.0 - tp) * (1.0 - tp) + tp * tp * sigma * sigma;
    const double scale = std::sqrt(Vp / Vt);
    Tensor out({z.rows(), d});
    for (int r = 0; r < z.rows(); ++r)
      for (int j = 0; j < d; ++j)
        out.data[static_cast<size_t>(r) * d + j] =
            tp * mu[j] + scale * (z.data[static_cast<size_t>(r) * d + j] - t * mu[j]);
    return out;
  };
  return gp;
}

double estimate_fm_error(const ShortcutPolicy& policy, const GenProblem& prob, int n_samples,
                         Rng& rng) {
  check_unconditional(policy, prob);
  if (!prob.drift) throw std::invalid_argument("fm error: problem has no drift");
  if (n_samples < 1) throw std::invalid_argument("fm error: n_samples must be >= 1");
  const int M = policy.m_disc;
  const Tensor x({n_samples, 0});
  const Tensor hcol = Tensor::full({n_samples, 1}, 1.0 / M);
  double worst = 0.0;
  Tensor s;
  for (int i = 0; i < M; ++i) {
    const double t = static_cast<double>(i) / M;
    const Tensor zt = draw_zt(prob, t, n_samples, rng);
    predict_velocity(policy, zt, x, Tensor::full({n_samples, 1}, t), hcol, s, tl_ws);
    const Tensor v = prob.drift(zt, t);
    worst = std::max(worst, mean_row_sq(s, v));
  }
  return worst;
}

double estimate_consistency_error(const ShortcutPolicy& policy, const GenProblem& prob,
                                  int n_samples, Rng& rng) {
  check_unconditional(policy, prob);
  if (n_samples < 1) throw std::invalid_argument("consistency error: n_samples must be >= 1");
  const int M = policy.m_disc;
  if (M < 2) return 0.0;  // no legal (t, h) pair
  const Tensor x({n_samples, 0});
  double worst = 0.0;
  Tensor s1, s2, st;
  for (int dstep = 1; 2 * dstep <= M; dstep <<= 1) {
    const double h = static_cast<double>(dstep) / M;
    for (int i = 0; (i + 2) * dstep <= M; ++i) {
      const double t = i * h;
      const Tensor zt = draw_zt(prob, t, n_samples, rng);
      const Tensor tcol = Tensor::full({n_samples, 1}, t);
      const Tensor hcol = Tensor::full({n_samples, 1}, h);
      predict_velocity(policy, zt, x, tcol, hcol, s1, tl_ws);
      Tensor zp = zt;
      for (int64_t j = 0; j < zp.size(); ++j) zp.data[j] += h * s1.data[j];
      predict_velocity(policy, zp, x, tcol, hcol, s2, tl_ws);
      predict_velocity(policy, zt, x, tcol, Tensor::full({n_samples, 1}, 2.0 * h), st, tl_ws);
      double acc = 0.0;
      for (int64_t j = 0; j < s1.size(); ++j) {
        const double e = 0.5 * s1.data[j] + 0.5 * s2.data[j] - st.data[j];
        acc += e * e;
      }
      worst = std::max(worst, acc / n_samples);
    }
  }
  return worst;
}

Lemma3Row check_lemma3(const StepFn& step, const FlowFn& flow, const Tensor& z0, double h,
                       double l, double eps) {
  if (!(l > 0.0)) throw std::invalid_argument("lemma3: L must be positive");
  const int m = static_cast<int>(std::llround(1.0 / h));
  if (m < 1 || std::fabs(m * h - 1.0) > 1e-12)
    throw std::invalid_argument("lemma3: 1/h must be a positive integer");
  Tensor z = z0;
  for (int k = 0; k < m; ++k) z = step(z, k * h, h);
  const Tensor zstar = flow(z0, 0.0, 1.0);
  Lemma3Row row;
  row.h = h;
  row.eps = eps;
  row.measured_rmse = std::sqrt(mean_row_sq(z, zstar));
  // 1e-12 of slack absorbs float roundoff; it binds only in the eps = 0 case
  // where the true error is identically zero.
  row.bound = (std::pow(1.0 + l * h, 1.0 / h) - 1.0) * eps / l + 1e-12;
  row.satisfied = row.measured_rmse <= row.bound;
  return row;
}

Lemma3Row lemma3_contraction_case(double h, double eps, int n, int dim, uint64_t seed) {
  Rng rng(seed);
  Tensor z0({n, dim});
  rng.fill_normal(z0);
  const FlowFn flow = [](const Tensor& z, double t, double tp) {
    const double s = std::exp(-(tp - t));
    Tensor out = z;
    for (double& v : out.data) v *= s;
    return out;
  };
  // Exact step plus a perturbation of exact row norm h*eps; direction keyed
  // by the step index so the closure stays pure.
  const StepFn step = [flow, eps, seed](const Tensor& z, double t, double h2) {
    Tensor out = flow(z, t, t + h2);
    if (eps <= 0.0) return out;
    const auto k = static_cast<uint64_t>(std::llround(t / h2));
    Rng r = Rng(seed).fork(stream::kData).fork(k);
    const int d = z.cols();
    Tensor dir({z.rows(), d});
    r.fill_normal(dir);
    for (int row = 0; row < z.rows(); ++row) {
      double* dr = dir.ptr() + static_cast<size_t>(row) * d;
      double norm = 0.0;
      for (int j = 0; j < d; ++j) norm += dr[j] * dr[j];
      norm = std::sqrt(norm);
      if (norm < 1e-12) {
        dr[0] = 1.0;
        norm = 1.0;
      }
      const double scale = h2 * eps / norm;
      double* orow = out.ptr() + static_cast<size_t>(row) * d;
      for (int j = 0; j < d; ++j) orow[j] += scale * dr[j];
    }
    return out;
  };
  return check_lemma3(step, flow, z0, h, 1.0, eps);
}

Lemma1Report check_lemma1(const GaussianProblem& gp, double h0, double delta, int n, Rng& rng) {
  if (!(h0 > 0.0 && h0 < 1.0)) throw std::invalid_argument("lemma1: h0 must lie in (0, 1)");
  const int d = gp.gen.dim;
  Tensor z0({n, d});
  rng.fill_normal(z0);
  const Tensor v0 = gp.gen.drift(z0, 0.0);
  Tensor s = v0;
  if (delta > 0.0) {
    Tensor gn({n, d});
    rng.fill_normal(gn);
    const double scale = delta / std::sqrt(static_cast<double>(d));
    for (int64_t i = 0; i < s.size(); ++i) s.data[i] += scale * gn.data[i];
  }
  Lemma1Report rep;
  rep.h0 = h0;
  rep.eps_fm = std::sqrt(mean_row_sq(s, v0));

  Tensor zhat = z0;
  for (int64_t i = 0; i < zhat.size(); ++i) zhat.data[i] += h0 * s.data[i];
  rep.lhs = std::sqrt(mean_row_sq(zhat, gp.flow(z0, 0.0, h0)));

  // Constants measured along the exact flow paths of the same sample set.
  const int G = 8;
  for (int j = 0; j <= G; ++j) {
    const double t = h0 * j / G;
    const Tensor zt = gp.flow(z0, 0.0, t);
    const Tensor vt = gp.gen.drift(zt, t);
    rep.m_v = std::max(rep.m_v, std::sqrt(mean_row_sq(vt)));
    rep.l_v = std::max(rep.l_v, pair_quotients(zt, vt));
    if (j > 0) {
      const Tensor vfix = gp.gen.drift(z0, t);  // same points, different time
      const int cols = z0.cols();
      for (int r = 0; r < n; ++r) {
        double num = 0.0;
        for (int k = 0; k < cols; ++k) {
          const double e =
              vfix.data[static_cast<size_t>(r) * cols + k] - v0.data[static_cast<size_t>(r) * cols + k];
          num += e * e;
        }
        rep.l_v = std::max(rep.l_v, std::sqrt(num) / t);
      }
    }
  }
  rep.rhs = h0 * (rep.l_v * std::exp(rep.l_v * h0) * h0 * (rep.m_v + 1.0) + rep.eps_fm);
  rep.satisfied = rep.lhs <= rep.rhs;
  return rep;
}

BoundReport theorem1_report(const ShortcutPolicy& policy, const GenProblem& prob, int n_w2,
                            int n_mc, Rng& rng) {
  check_unconditional(policy, prob);
  if (!prob.drift) throw std::invalid_argument("theorem report: problem has no drift");
  const int M = policy.m_disc;
  BoundReport rep;
  rep.m_disc = M;
  rep.eps_fm = std::sqrt(estimate_fm_error(policy, prob, n_mc, rng));
  rep.eps_sc = std::sqrt(estimate_consistency_error(policy, prob, n_mc, rng));
  const DriftConstants dc = estimate_constants(policy, prob, n_mc, rng);
  rep.l_est = dc.l_s;
  rep.l_v = dc.l_v;
  rep.m_v = dc.m_v;

  for (int m = M; m >= 1; m >>= 1) {
    const double h = 1.0 / m;
    Rng cell = rng.fork(stream::kEval, static_cast<uint64_t>(m));
    Tensor z0({n_w2, prob.dim});
    cell.fill_normal(z0);
    const Tensor phat = euler_sample_from(policy, Tensor({n_w2, 0}), m, z0, tl_ws);
    const Tensor pstar = prob.sample_data(n_w2, cell);
    BoundRow row;
    row.h = h;
    row.w2 = w2_exact(phat, pstar);
    row.eps_fm = rep.eps_fm;
    row.eps_sc = rep.eps_sc;
    row.l_est = rep.l_est;
    const double L = rep.l_est;
    const double prefix =
        L < 1e-12 ? 1.0 : (std::pow(1.0 + L * h, 1.0 / h) - 1.0) / L;
    row.bound = prefix * std::exp(0.5 * L * h) *
                (kE * rep.l_v / M * (rep.m_v + 1.0) + rep.eps_fm +
                 rep.eps_sc * std::log2(M * h));
    row.satisfied = row.w2 <= row.bound;
    rep.rows.push_back(row);
  }
  return rep;
}

std::string bound_report_csv(const BoundReport& r) {
  std::string out = "h,w2,eps_fm,eps_sc,l_est,bound,satisfied\n";
  for (const auto& row : r.rows) {
    out += fmt_g17(row.h) + "," + fmt_g17(row.w2) + "," + fmt_g17(row.eps_fm) + "," +
           fmt_g17(row.eps_sc) + "," + fmt_g17(row.l_est) + "," + fmt_g17(row.bound) + "," +
           (row.satisfied ? "1" : "0") + "\n";
  }
  return out;
}

double self_distance(const GenProblem& prob, int n, Rng& rng) {
  const Tensor a = prob.sample_data(n, rng);
  const Tensor b = prob.sample_data(n, rng);
  return w2_exact(a, b);
}

double w2_brute_force(const Tensor& p, const Tensor& q) {
  const int n = p.rows(), d = p.cols();
  if (q.rows() != n || q.cols() != d) throw std::invalid_argument("w2 brute force: shape mismatch");
  if (n > 7) throw std::invalid_argument("w2 brute force: n must be <= 7");
  std::vector<int> perm(n);
  for (int i = 0; i < n; ++i) perm[i] = i;
  double best = 1e300;
  do {
    double cost = 0.0;
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < d; ++k) {
        const double e =
            p.data[static_cast<size_t>(i) * d + k] - q.data[static_cast<size_t>(perm[i]) * d + k];
        cost += e * e;
      }
    best = std::min(best, cost);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return std::sqrt(best / n);
}

double euler_btt_grad_check(int m, int m_disc, uint64_t seed) {
  Rng rng(seed);
  ShortcutPolicy p = ShortcutPolicy::make(2, 2, m_disc, {8}, rng);
  Tensor x({4, 2}), a0({4, 2});
  rng.fill_normal(x);
  rng.fill_normal(a0);

  ad::Graph g;
  const ad::NodeId loss = g.mean(euler_sample_node(g, p, x, m, a0, true));
  g.backward(loss);
  std::vector<Tensor> an;
  for (const auto& e : p.net.params.entries) an.push_back(e.grad);

  nn::Mlp::Workspace ws;
  const auto eval = [&]() {
    const Tensor act = euler_sample_from(p, x, m, a0, ws);
    double s = 0.0;
    for (const double v : act.data) s += v;
    return s / act.size();
  };
  const double fd_h = 1e-5;
  double worst = 0.0;
  for (size_t ei = 0; ei < p.net.params.entries.size(); ++ei) {
    auto& e = p.net.params.entries[ei];
    for (int64_t j = 0; j < e.value.size(); ++j) {
      const double keep = e.value.data[j];
      e.value.data[j] = keep + fd_h;
      const double up = eval();
      e.value.data[j] = keep - fd_h;
      const double dn = eval();
      e.value.data[j] = keep;
      const double fd = (up - dn) / (2.0 * fd_h);
      const double a = an[ei].data[j];
      worst = std::max(worst, std::fabs(a - fd) / std::max(std::fabs(a) + std::fabs(fd), 1e-8));
    }
  }
  return worst;
}

ShortcutPolicy train_generative(const GenProblem& prob, const GenTrainConfig& cfg) {
  if (!is_power_of_two(cfg.m_disc))
    throw std::invalid_argument("generative train: M_disc must be a power of two");
  if (cfg.batch_size < 1) throw std::invalid_argument("generative train: batch_size must be >= 1");
  if (cfg.grad_steps < 0) throw std::invalid_argument("generative train: grad_steps must be >= 0");
  if (!(cfg.lr > 0.0) || !(cfg.grad_clip > 0.0) || cfg.alpha_sc < 0.0 ||
      !(cfg.tau >= 0.0 && cfg.tau <= 1.0))
    throw std::invalid_argument("generative train: bad optimizer settings");

  Rng init = Rng(cfg.seed).fork(stream::kInit);
  ShortcutPolicy policy = ShortcutPolicy::make(prob.dim, 0, cfg.m_disc, cfg.hidden, init);
  ShortcutPolicy target = policy;
  ad::Graph g;
  const Tensor x0({cfg.batch_size, 0});
  const double query_h = (cfg.fm_double_query ? 2.0 : 1.0) / cfg.m_disc;
  for (int64_t step = 1; step <= cfg.grad_steps; ++step) {
    const Rng srng = Rng(cfg.seed).fork(stream::kStep, static_cast<uint64_t>(step - 1));
    Rng data_rng = srng.fork(stream::kData);
    const Tensor a1 = prob.sample_data(cfg.batch_size, data_rng);
    g.reset();
    Rng fm_rng = srng.fork(stream::kFm);
    ad::NodeId total = flow_matching_loss(g, policy, x0, a1, query_h, fm_rng);
    const double fm_val = g.value(total).data[0];
    double sc_val = 0.0;
    if (cfg.alpha_sc > 0.0 && cfg.m_disc >= 2) {
      Rng sc_rng = srng.fork(stream::kSc);
      const ad::NodeId sc = self_consistency_loss(g, policy, target, x0, a1, sc_rng, tl_ws);
      sc_val = g.value(sc).data[0];
      total = g.add(total, g.scale(sc, cfg.alpha_sc));
    }
    g.backward(total);
    nn::clip_global_norm(policy.net.params, cfg.grad_clip);
    nn::adam_step(policy.net.params, cfg.lr);
    polyak_update(policy.net.params, target.net.params, cfg.tau);
    if (!std::isfinite(fm_val) || !std::isfinite(sc_val))
      throw std::runtime_error("generative train step " + std::to_string(step) +
                               ": non-finite loss");
    if (cfg.on_log && cfg.log_every > 0 && step % cfg.log_every == 0)
      cfg.on_log(step, fm_val, sc_val);
  }
  return policy;
}

}  // namespace sorl
