#include "sorl/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace sorl {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& v, const char* type) {
  throw std::invalid_argument("config key " + key + ": cannot parse value '" + v + "' as " + type);
}

int64_t parse_i64(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const long long r = std::strtoll(v.c_str(), &end, 10);
  if (end == v.c_str() || *end != '\0') bad_value(key, v, "integer");
  return r;
}

int parse_int(const std::string& key, const std::string& v) {
  return static_cast<int>(parse_i64(key, v));
}

uint64_t parse_u64(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const unsigned long long r = std::strtoull(v.c_str(), &end, 10);
  if (end == v.c_str() || *end != '\0') bad_value(key, v, "integer");
  return r;
}

double parse_double(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const double r = std::strtod(v.c_str(), &end);
  if (end == v.c_str() || *end != '\0') bad_value(key, v, "number");
  return r;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad_value(key, v, "bool");
}

std::vector<int> parse_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  if (trim(v).empty()) return out;  // empty list = no hidden layers
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) bad_value(key, v, "comma-separated integers");
    out.push_back(parse_int(key, item));
  }
  return out;
}

std::string join_ints(const std::vector<int>& v) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(v[i]);
  }
  return out;
}

}  // namespace

ConfigMap ConfigMap::parse(const std::string& text) {
  ConfigMap m;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": expected `key = value`, got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key.empty())
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": empty key");
    if (m.kv.count(key))
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": duplicate key '" +
                                  key + "'");
    m.kv[key] = val;
  }
  return m;
}

ConfigMap ConfigMap::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open config: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse(ss.str());
}

std::string ConfigMap::emit() const {
  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

void ConfigMap::save(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << emit();
  if (!f) throw std::runtime_error("write failed: " + path);
}

const std::string& ConfigMap::get(const std::string& k) const {
  const auto it = kv.find(k);
  if (it == kv.end()) throw std::invalid_argument("missing config key: " + k);
  return it->second;
}

RunConfig run_config_from(const ConfigMap& m) {
  RunConfig c;
  for (const auto& [k, v] : m.kv) {
    if (k == "env") c.env = v;
    else if (k == "dataset") c.dataset = v;
    else if (k == "out_dir") c.out_dir = v;
    else if (k == "seed") c.train.seed = parse_u64(k, v);
    else if (k == "grad_steps") c.train.grad_steps = parse_i64(k, v);
    else if (k == "batch_size") c.train.batch_size = parse_int(k, v);
    else if (k == "lr") c.train.lr = parse_double(k, v);
    else if (k == "tau") c.train.tau = parse_double(k, v);
    else if (k == "gamma") c.train.gamma = parse_double(k, v);
    else if (k == "grad_clip") c.train.grad_clip = parse_double(k, v);
    else if (k == "alpha_q") c.train.alpha_q = parse_double(k, v);
    else if (k == "alpha_bc") c.train.alpha_bc = parse_double(k, v);
    else if (k == "alpha_sc") c.train.alpha_sc = parse_double(k, v);
    else if (k == "m_disc") c.train.m_disc = parse_int(k, v);
    else if (k == "m_btt") c.train.m_btt = parse_int(k, v);
    else if (k == "clipped_double_q") c.train.clipped_double_q = parse_bool(k, v);
    else if (k == "normalized_q_loss") c.train.normalized_q_loss = parse_bool(k, v);
    else if (k == "fm_double_query") c.train.fm_double_query = parse_bool(k, v);
    else if (k == "policy_hidden") c.train.policy_hidden = parse_int_list(k, v);
    else if (k == "critic_hidden") c.train.critic_hidden = parse_int_list(k, v);
    else if (k == "log_every") c.log_every = parse_i64(k, v);
    else if (k == "eval_every") c.eval_every = parse_i64(k, v);
    else if (k == "m_inf") c.m_inf = parse_int(k, v);
    else if (k == "n_candidates") c.n_candidates = parse_int(k, v);
    else if (k == "eval_episodes") c.eval_episodes = parse_int(k, v);
    else throw std::invalid_argument("unknown config key: " + k);
  }
  return c;
}

ConfigMap to_config_map(const RunConfig& c) {
  ConfigMap m;
  auto& kv = m.kv;
  kv["env"] = c.env;
  kv["dataset"] = c.dataset;
  kv["out_dir"] = c.out_dir;
  kv["seed"] = std::to_string(c.train.seed);
  kv["grad_steps"] = std::to_string(c.train.grad_steps);
  kv["batch_size"] = std::to_string(c.train.batch_size);
  kv["lr"] = fmt_g17(c.train.lr);
  kv["tau"] = fmt_g17(c.train.tau);
  kv["gamma"] = fmt_g17(c.train.gamma);
  kv["grad_clip"] = fmt_g17(c.train.grad_clip);
  kv["alpha_q"] = fmt_g17(c.train.alpha_q);
  kv["alpha_bc"] = fmt_g17(c.train.alpha_bc);
  kv["alpha_sc"] = fmt_g17(c.train.alpha_sc);
  kv["m_disc"] = std::to_string(c.train.m_disc);
  kv["m_btt"] = std::to_string(c.train.m_btt);
  kv["clipped_double_q"] = c.train.clipped_double_q ? "true" : "false";
  kv["normalized_q_loss"] = c.train.normalized_q_loss ? "true" : "false";
  kv["fm_double_query"] = c.train.fm_double_query ? "true" : "false";
  kv["policy_hidden"] = join_ints(c.train.policy_hidden);
  kv["critic_hidden"] = join_ints(c.train.critic_hidden);
  kv["log_every"] = std::to_string(c.log_every);
  kv["eval_every"] = std::to_string(c.eval_every);
  kv["m_inf"] = std::to_string(c.m_inf);
  kv["n_candidates"] = std::to_string(c.n_candidates);
  kv["eval_episodes"] = std::to_string(c.eval_episodes);
  return m;
}

RunConfig load_run_config(const std::string& path) {
  return run_config_from(ConfigMap::load(path));
}

void save_run_config(const RunConfig& c, const std::string& path) {
  to_config_map(c).save(path);
}

}  // namespace sorl
