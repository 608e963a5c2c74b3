#include "sorl/model_io.hpp"

#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace sorl {

namespace {

std::string join_ints(const std::vector<int>& v) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(v[i]);
  }
  return out;
}

void emit_store(std::ostream& os, const std::string& section, const nn::ParamStore& ps) {
  os << "[" << section << "]\n";
  for (const auto& e : ps.entries) {
    os << "tensor " << e.name;
    for (const int d : e.value.shape) os << " " << d;
    os << "\n";
    for (int64_t i = 0; i < e.value.size(); ++i) {
      os << fmt_g17(e.value.data[i]);
      os << ((i % 8 == 7 || i + 1 == e.value.size()) ? "\n" : " ");
    }
  }
}

struct Reader {
  std::istream& is;
  std::string line;
  int lineno = 0;
  bool pending = false;  // line holds an unconsumed lookahead

  bool next() {
    if (pending) {
      pending = false;
      return true;
    }
    while (std::getline(is, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) return true;
    }
    return false;
  }
  void push_back() { pending = true; }
  [[noreturn]] void fail(const std::string& what) const {
    throw std::runtime_error("model file line " + std::to_string(lineno) + ": " + what);
  }
};

void expect_section(Reader& r, const std::string& name) {
  if (!r.next()) r.fail("expected section [" + name + "], got end of file");
  if (r.line != "[" + name + "]") r.fail("expected section [" + name + "], got '" + r.line + "'");
}

// Key = value lines until the next section header.
std::map<std::string, std::string> read_meta(Reader& r) {
  std::map<std::string, std::string> kv;
  while (r.next()) {
    if (!r.line.empty() && r.line[0] == '[') {
      r.push_back();
      break;
    }
    const size_t eq = r.line.find('=');
    if (eq == std::string::npos) r.fail("expected `key = value` in [meta]");
    auto trim = [](std::string s) {
      const size_t a = s.find_first_not_of(" \t");
      const size_t b = s.find_last_not_of(" \t");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    kv[trim(r.line.substr(0, eq))] = trim(r.line.substr(eq + 1));
  }
  return kv;
}

void read_store(Reader& r, const std::string& section, nn::ParamStore& ps) {
  expect_section(r, section);
  for (auto& e : ps.entries) {
    if (!r.next()) r.fail("expected tensor " + e.name + " in [" + section + "]");
    std::stringstream hs(r.line);
    std::string word, name;
    hs >> word >> name;
    if (word != "tensor" || name != e.name)
      r.fail("expected 'tensor " + e.name + "' in [" + section + "], got '" + r.line + "'");
    std::vector<int> dims;
    int d;
    while (hs >> d) dims.push_back(d);
    if (dims != e.value.shape)
      r.fail("tensor " + e.name + " in [" + section + "]: shape " + shape_str(dims) +
             " does not match expected " + shape_str(e.value.shape));
    int64_t got = 0;
    while (got < e.value.size()) {
      if (!r.next()) r.fail("unexpected end of file inside tensor " + e.name);
      const char* p = r.line.c_str();
      char* end = nullptr;
      while (true) {
        const double v = std::strtod(p, &end);
        if (end == p) break;
        if (got >= e.value.size()) r.fail("too many values in tensor " + e.name);
        e.value.data[got++] = v;
        p = end;
      }
      while (*p == ' ' || *p == '\t') ++p;
      if (*p != '\0') r.fail(std::string("unexpected characters: '") + p + "'");
    }
  }
}

int meta_int(const std::map<std::string, std::string>& kv, const std::string& key) {
  const auto it = kv.find(key);
  if (it == kv.end()) throw std::runtime_error("model file: [meta] missing " + key);
  return std::atoi(it->second.c_str());
}

std::vector<int> meta_int_list(const std::map<std::string, std::string>& kv,
                               const std::string& key) {
  const auto it = kv.find(key);
  if (it == kv.end()) throw std::runtime_error("model file: [meta] missing " + key);
  std::vector<int> out;
  std::stringstream ss(it->second);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::atoi(item.c_str()));
  }
  return out;
}

}  // namespace

void save_model(const SorlState& s, const TrainConfig& cfg, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << "[meta]\n";
  f << "obs_dim = " << s.policy.obs_dim << "\n";
  f << "action_dim = " << s.policy.action_dim << "\n";
  f << "m_disc = " << s.policy.m_disc << "\n";
  f << "policy_hidden = " << join_ints(cfg.policy_hidden) << "\n";
  f << "critic_hidden = " << join_ints(cfg.critic_hidden) << "\n";
  f << "step = " << s.step << "\n";
  emit_store(f, "policy", s.policy.net.params);
  emit_store(f, "policy_target", s.policy_target.net.params);
  emit_store(f, "critic_q1", s.critic.q1.params);
  emit_store(f, "critic_q2", s.critic.q2.params);
  emit_store(f, "critic_q1_target", s.critic.t1.params);
  emit_store(f, "critic_q2_target", s.critic.t2.params);
  if (!f) throw std::runtime_error("write failed: " + path);
}

LoadedModel load_model(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open model: " + path);
  Reader r{f, {}, 0, {}};
  expect_section(r, "meta");
  const auto kv = read_meta(r);

  LoadedModel out;
  out.obs_dim = meta_int(kv, "obs_dim");
  out.action_dim = meta_int(kv, "action_dim");
  out.m_disc = meta_int(kv, "m_disc");
  const std::vector<int> ph = meta_int_list(kv, "policy_hidden");
  const std::vector<int> ch = meta_int_list(kv, "critic_hidden");

  Rng dummy(0);
  out.state.policy = ShortcutPolicy::make(out.action_dim, out.obs_dim, out.m_disc, ph, dummy);
  out.state.policy_target = out.state.policy;
  out.state.critic = Critic::make(out.obs_dim, out.action_dim, ch, dummy);
  if (kv.count("step")) out.state.step = std::atoll(kv.at("step").c_str());

  read_store(r, "policy", out.state.policy.net.params);
  read_store(r, "policy_target", out.state.policy_target.net.params);
  read_store(r, "critic_q1", out.state.critic.q1.params);
  read_store(r, "critic_q2", out.state.critic.q2.params);
  read_store(r, "critic_q1_target", out.state.critic.t1.params);
  read_store(r, "critic_q2_target", out.state.critic.t2.params);
  return out;
}

}  // namespace sorl
