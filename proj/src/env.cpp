#include "sorl/env.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace sorl {

namespace {

constexpr const char* kHeaderPrefix = "# sorl-dataset v1 ";

double sq_dist(const double* a, const double* b, int n) {
  double s = 0.0;
  for (int i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

std::string fmt_full(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

const std::vector<std::string>& env_names() {
  static const std::vector<std::string> names{"bandit2goal", "reach2goal"};
  return names;
}

EnvSpec make_env(const std::string& name) {
  EnvSpec s;
  s.name = name;
  if (name == "bandit2goal") {
    s.obs_dim = 2;
    s.action_dim = 2;
    s.action_bound = 1.0;
    s.horizon = 1;
    s.goal = {0.6, 0.6};
    s.goal2 = {-0.6, -0.6};
    s.reward_sigma = 0.15;
  } else if (name == "reach2goal") {
    s.obs_dim = 2;
    s.action_dim = 2;
    s.action_bound = 0.2;
    s.horizon = 50;
    s.goal = {0.7, 0.7};
    s.goal2 = {-0.7, -0.7};
    s.goal_radius = 0.1;
  } else {
    std::string msg = "unknown environment '" + name + "'; valid:";
    for (const auto& n : env_names()) msg += " " + n;
    throw std::invalid_argument(msg);
  }
  return s;
}

Tensor env_reset(const EnvSpec& spec, Rng& rng) {
  Tensor x({1, spec.obs_dim});
  if (spec.name == "reach2goal")
    for (auto& v : x.data) v = rng.uniform() * 0.2 - 0.1;
  return x;  // bandit observation is always the origin
}

StepResult env_step(const EnvSpec& spec, const Tensor& x, const Tensor& a) {
  if (a.size() != spec.action_dim) throw std::invalid_argument("env step: bad action width");
  for (const double v : a.data)
    if (!(std::fabs(v) <= spec.action_bound))
      throw std::invalid_argument("env step: action outside [-" + fmt_full(spec.action_bound) +
                                  ", " + fmt_full(spec.action_bound) + "]");
  StepResult out;
  if (spec.name == "bandit2goal") {
    const double s2 = 2.0 * spec.reward_sigma * spec.reward_sigma;
    out.r = std::exp(-sq_dist(a.ptr(), spec.goal.data(), 2) / s2) +
            0.5 * std::exp(-sq_dist(a.ptr(), spec.goal2.data(), 2) / s2);
    out.x_next = Tensor({1, spec.obs_dim});
    out.done = true;
    return out;
  }
  // reach2goal point mass
  out.x_next = Tensor({1, spec.obs_dim});
  for (int i = 0; i < spec.obs_dim; ++i) {
    double v = x.data[i] + a.data[i];
    out.x_next.data[i] = v < -1.0 ? -1.0 : (v > 1.0 ? 1.0 : v);
  }
  const bool hit = sq_dist(out.x_next.ptr(), spec.goal.data(), 2) < spec.goal_radius * spec.goal_radius;
  out.r = hit ? 1.0 : 0.0;
  out.done = hit;
  return out;
}

Tensor behavior_action(const EnvSpec& spec, const Tensor& x, int mode, Rng& rng) {
  Tensor a({1, spec.action_dim});
  if (spec.name == "bandit2goal") {
    const auto& g = mode == 0 ? spec.goal : spec.goal2;
    for (int i = 0; i < 2; ++i) a.data[i] = g[i] + 0.2 * rng.normal();
  } else {
    const auto& g = mode == 0 ? spec.goal : spec.goal2;
    double d[2] = {g[0] - x.data[0], g[1] - x.data[1]};
    const double norm = std::sqrt(d[0] * d[0] + d[1] * d[1]);
    for (int i = 0; i < 2; ++i) {
      const double head = norm > 0.0 ? 0.15 * d[i] / norm : 0.0;
      a.data[i] = head + 0.05 * rng.normal();
    }
  }
  const double b = spec.action_bound;
  for (auto& v : a.data) v = v < -b ? -b : (v > b ? b : v);
  return a;
}

Dataset generate_dataset(const EnvSpec& spec, int64_t n_transitions, Rng& rng) {
  if (n_transitions < 1) throw std::invalid_argument("generate_dataset: need at least one transition");
  Dataset d;
  d.spec = spec;
  const int O = spec.obs_dim, A = spec.action_dim;
  d.x = Tensor({static_cast<int>(n_transitions), O});
  d.a = Tensor({static_cast<int>(n_transitions), A});
  d.r = Tensor({static_cast<int>(n_transitions), 1});
  d.x_next = Tensor({static_cast<int>(n_transitions), O});
  d.done = Tensor({static_cast<int>(n_transitions), 1});

  int64_t row = 0;
  while (row < n_transitions) {
    Tensor x = env_reset(spec, rng);
    const int mode = static_cast<int>(rng.below(2));
    for (int t = 0; t < spec.horizon && row < n_transitions; ++t) {
      const Tensor a = behavior_action(spec, x, mode, rng);
      const StepResult sr = env_step(spec, x, a);
      std::memcpy(d.x.ptr() + row * O, x.ptr(), O * sizeof(double));
      std::memcpy(d.a.ptr() + row * A, a.ptr(), A * sizeof(double));
      d.r.data[row] = sr.r;
      std::memcpy(d.x_next.ptr() + row * O, sr.x_next.ptr(), O * sizeof(double));
      d.done.data[row] = sr.done ? 1.0 : 0.0;
      ++row;
      if (sr.done) break;
      x = sr.x_next;
    }
  }
  compute_obs_stats(d);
  return d;
}

void compute_obs_stats(Dataset& d) {
  const int O = d.spec.obs_dim;
  const int64_t n = d.size();
  d.obs_mean.assign(O, 0.0);
  d.obs_std.assign(O, 0.0);
  if (n == 0) return;
  for (int64_t r = 0; r < n; ++r)
    for (int i = 0; i < O; ++i) d.obs_mean[i] += d.x.data[r * O + i];
  for (int i = 0; i < O; ++i) d.obs_mean[i] /= static_cast<double>(n);
  for (int64_t r = 0; r < n; ++r)
    for (int i = 0; i < O; ++i) {
      const double c = d.x.data[r * O + i] - d.obs_mean[i];
      d.obs_std[i] += c * c;
    }
  for (int i = 0; i < O; ++i) d.obs_std[i] = std::sqrt(d.obs_std[i] / static_cast<double>(n));
}

void save_dataset(const Dataset& d, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("save_dataset: cannot open '" + path + "'");
  const int O = d.spec.obs_dim, A = d.spec.action_dim;
  f << kHeaderPrefix << "obs_dim=" << O << " action_dim=" << A << " env=" << d.spec.name << "\n";
  for (int64_t r = 0; r < d.size(); ++r) {
    std::string line;
    for (int i = 0; i < O; ++i) line += fmt_full(d.x.data[r * O + i]) + ",";
    for (int i = 0; i < A; ++i) line += fmt_full(d.a.data[r * A + i]) + ",";
    line += fmt_full(d.r.data[r]) + ",";
    for (int i = 0; i < O; ++i) line += fmt_full(d.x_next.data[r * O + i]) + ",";
    line += fmt_full(d.done.data[r]);
    f << line << "\n";
  }
  if (!f) throw std::runtime_error("save_dataset: write failed for '" + path + "'");
}

Dataset load_dataset(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("load_dataset: cannot open '" + path + "'");
  std::string header;
  std::getline(f, header);
  if (header.rfind(kHeaderPrefix, 0) != 0)
    throw std::runtime_error("load_dataset: bad header in '" + path + "'");
  int o = -1, a = -1;
  char envname[64] = {0};
  if (std::sscanf(header.c_str() + std::strlen(kHeaderPrefix), "obs_dim=%d action_dim=%d env=%63s",
                  &o, &a, envname) != 3)
    throw std::runtime_error("load_dataset: malformed header fields");
  const EnvSpec spec = make_env(envname);
  if (spec.obs_dim != o || spec.action_dim != a)
    throw std::runtime_error("load_dataset: header dims do not match environment '" +
                             std::string(envname) + "'");

  const int cols = 2 * o + a + 2;
  std::vector<double> vals;
  std::string line;
  int64_t rows = 0;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const char* p = line.c_str();
    int got = 0;
    while (true) {
      char* end = nullptr;
      const double v = std::strtod(p, &end);
      if (end == p)
        throw std::runtime_error("load_dataset: unparseable number on line " + std::to_string(rows + 2));
      vals.push_back(v);
      ++got;
      p = end;
      if (*p == ',') {
        ++p;
      } else if (*p == '\0' || *p == '\r') {
        break;
      } else {
        throw std::runtime_error("load_dataset: unexpected character on line " + std::to_string(rows + 2));
      }
    }
    if (got != cols)
      throw std::runtime_error("load_dataset: expected " + std::to_string(cols) + " columns, got " +
                               std::to_string(got) + " on line " + std::to_string(rows + 2));
    ++rows;
  }
  if (rows == 0) throw std::runtime_error("load_dataset: no transitions in '" + path + "'");

  Dataset d;
  d.spec = spec;
  d.x = Tensor({static_cast<int>(rows), o});
  d.a = Tensor({static_cast<int>(rows), a});
  d.r = Tensor({static_cast<int>(rows), 1});
  d.x_next = Tensor({static_cast<int>(rows), o});
  d.done = Tensor({static_cast<int>(rows), 1});
  const double* src = vals.data();
  for (int64_t row = 0; row < rows; ++row) {
    std::memcpy(d.x.ptr() + row * o, src, o * sizeof(double));
    src += o;
    std::memcpy(d.a.ptr() + row * a, src, a * sizeof(double));
    src += a;
    d.r.data[row] = *src++;
    std::memcpy(d.x_next.ptr() + row * o, src, o * sizeof(double));
    src += o;
    d.done.data[row] = *src++;
  }
  compute_obs_stats(d);
  return d;
}

}  // namespace sorl
