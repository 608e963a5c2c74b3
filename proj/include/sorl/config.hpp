#pragma once

#include <map>
#include <string>

#include "sorl/trainer.hpp"

namespace sorl {

// Flat `key = value` text, '#' starts a comment, blank lines ignored.
// Emission is sorted by key; round-tripping preserves the key set and every
// value exactly (doubles print in full precision).
struct ConfigMap {
  std::map<std::string, std::string> kv;

  static ConfigMap parse(const std::string& text);  // names offending line on error
  static ConfigMap load(const std::string& path);
  std::string emit() const;
  void save(const std::string& path) const;
  bool has(const std::string& k) const { return kv.count(k) != 0; }
  const std::string& get(const std::string& k) const;  // throws if missing
};

// Trainer settings plus run plumbing: everything a training run reads.
struct RunConfig {
  TrainConfig train;
  std::string env = "reach2goal";
  std::string dataset;        // transitions file consumed at launch
  std::string out_dir = ".";  // metrics.csv and model.txt land here
  int64_t log_every = 100;
  int64_t eval_every = 1000;
  int m_inf = 4;
  int n_candidates = 1;
  int eval_episodes = 50;
};

// Unknown keys and unparseable values throw, naming the offender. Missing
// keys keep their defaults.
RunConfig run_config_from(const ConfigMap& m);
ConfigMap to_config_map(const RunConfig& c);

RunConfig load_run_config(const std::string& path);
void save_run_config(const RunConfig& c, const std::string& path);

}  // namespace sorl
