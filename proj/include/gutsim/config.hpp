// Copyright 2026 The gutsim Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================

#ifndef GUTSIM_CONFIG_HPP
#define GUTSIM_CONFIG_HPP

#include "gutsim/algorithms.hpp"
#include "gutsim/common.hpp"
#include "gutsim/harness.hpp"
#include "gutsim/models.hpp"
#include "gutsim/topology.hpp"

#include <nlohmann/json.hpp>

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace gutsim {

/// Bad key, bad value, or missing key. Maps to exit code 1.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string subcommand;

  TopologyKind topology_kind = TopologyKind::ring;
  std::size_t topology_n = 16;
  std::size_t grid_rows = 0;  // 0: most-square factorisation
  std::size_t grid_cols = 0;

  double partition_alpha = 0.1;
  std::uint64_t partition_seed = 1;
  std::size_t partition_min_per_agent = 1;

  ProblemKind problem_kind = ProblemKind::quadratic;
  std::size_t problem_d = 10;
  double problem_zeta = 1.0;
  double problem_sigma = 0.0;
  double problem_L = 1.0;
  std::uint64_t problem_seed = 1;
  std::size_t problem_classes = 10;
  std::size_t problem_samples = 4000;
  std::size_t problem_test_samples = 2000;
  std::size_t problem_hidden = 16;
  double problem_separation = 1.0;

  AlgorithmKind algorithm_kind = AlgorithmKind::GUT;
  double algorithm_eta = 0.1;
  double algorithm_mu = 0.9;
  double algorithm_beta = 0.9;
  bool algorithm_nesterov = false;
  bool algorithm_decay = true;

  ConsensusMethod consensus_method = ConsensusMethod::gut;
  std::size_t consensus_d = 32;
  std::uint64_t consensus_seed = 1;

  double equivalence_tol = 1e-8;

  std::uint64_t run_rounds = 100;
  std::size_t run_batch = 32;
  std::vector<std::uint64_t> run_seeds{1};
  std::uint64_t run_eval_every = 0;
  std::size_t run_threads = 1;
  std::string run_output_dir = "./out";

  friend bool operator==(const RunConfig&, const RunConfig&) = default;

  AlgorithmSpec algorithm() const {
    AlgorithmSpec s;
    s.kind = algorithm_kind;
    s.eta = StepSchedule::constant(algorithm_eta);
    s.mu = algorithm_mu;
    s.beta = algorithm_beta;
    s.nesterov = algorithm_nesterov;
    return s;
  }

  SyntheticProblemSpec problem() const {
    SyntheticProblemSpec p;
    p.kind = problem_kind;
    p.d = problem_d;
    p.n_agents = topology_n;
    p.zeta = problem_zeta;
    p.sigma = problem_sigma;
    p.L = problem_L;
    p.seed = problem_seed;
    p.classes = problem_classes;
    p.samples = problem_samples;
    p.test_samples = problem_test_samples;
    p.hidden = problem_hidden;
    p.separation = problem_separation;
    p.alpha = partition_alpha;
    p.partition_seed = partition_seed;
    p.min_per_agent = partition_min_per_agent;
    return p;
  }

  std::optional<Grid> grid() const {
    if (grid_rows == 0 && grid_cols == 0) return std::nullopt;
    return Grid{grid_rows, grid_cols};
  }

  TrainingOptions training() const {
    TrainingOptions o;
    o.rounds = run_rounds;
    o.batch = run_batch;
    o.seeds = run_seeds;
    o.eval_every = run_eval_every;
    o.threads = run_threads;
    o.step_decay = algorithm_decay;
    return o;
  }
};

inline const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names{"topology", "partition", "consensus",
                                              "train", "equivalence", "validate"};
  return names;
}

namespace config_detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (v.empty() || ec != std::errc() || ptr != end) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

inline std::size_t to_size(const std::string& key, const std::string& v) {
  return static_cast<std::size_t>(to_u64(key, v));
}

inline double to_double(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const double out = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size() || !std::isfinite(out)) {
    throw ConfigError(key + ": expected a finite number, got '" + v + "'");
  }
  return out;
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

inline std::vector<std::uint64_t> to_seeds(const std::string& key, const std::string& v) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_u64(key, trim(item)));
  if (out.empty()) throw ConfigError(key + ": expected a comma-separated seed list");
  return out;
}

inline std::string seeds_string(const std::vector<std::uint64_t>& seeds) {
  std::string out;
  for (auto s : seeds) {
    if (!out.empty()) out += ',';
    out += std::to_string(s);
  }
  return out;
}

template <class Fn>
auto wrap_enum(const std::string& key, Fn&& fn) {
  try {
    return fn();
  } catch (const InvalidArgument& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

struct KeyDef {
  std::string key;
  std::string help;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define GUTSIM_NUM_KEY(name, field, conv, help)                                           \
  KeyDef {                                                                                \
    name, help, [](RunConfig& c, const std::string& v) { c.field = conv(name, v); },     \
        [](const RunConfig& c) { return format_value(c.field); }                          \
  }

inline std::string format_value(double v) { return format_double(v); }
inline std::string format_value(std::uint64_t v) { return std::to_string(v); }
inline std::string format_value(bool v) { return v ? "true" : "false"; }

inline const std::vector<KeyDef>& key_table() {
  static const std::vector<KeyDef> table{
      {"topology.kind", "ring | dyck | torus",
       [](RunConfig& c, const std::string& v) {
         c.topology_kind = wrap_enum("topology.kind", [&] { return parse_topology_kind(v); });
       },
       [](const RunConfig& c) { return std::string(to_string(c.topology_kind)); }},
      GUTSIM_NUM_KEY("topology.n", topology_n, to_size, "number of agents"),
      GUTSIM_NUM_KEY("topology.rows", grid_rows, to_size, "torus rows (0: automatic)"),
      GUTSIM_NUM_KEY("topology.cols", grid_cols, to_size, "torus columns (0: automatic)"),
      GUTSIM_NUM_KEY("partition.alpha", partition_alpha, to_double, "Dirichlet concentration"),
      GUTSIM_NUM_KEY("partition.seed", partition_seed, to_u64, "partition seed"),
      GUTSIM_NUM_KEY("partition.min_per_agent", partition_min_per_agent, to_size,
                     "minimum samples per agent"),
      {"problem.kind", "quadratic | softmax | mlp",
       [](RunConfig& c, const std::string& v) {
         c.problem_kind = wrap_enum("problem.kind", [&] { return parse_problem_kind(v); });
       },
       [](const RunConfig& c) { return std::string(to_string(c.problem_kind)); }},
      GUTSIM_NUM_KEY("problem.d", problem_d, to_size, "quadratic dimension / feature count"),
      GUTSIM_NUM_KEY("problem.zeta", problem_zeta, to_double, "quadratic heterogeneity"),
      GUTSIM_NUM_KEY("problem.sigma", problem_sigma, to_double, "quadratic gradient noise"),
      GUTSIM_NUM_KEY("problem.L", problem_L, to_double, "quadratic smoothness"),
      GUTSIM_NUM_KEY("problem.seed", problem_seed, to_u64, "data seed"),
      GUTSIM_NUM_KEY("problem.classes", problem_classes, to_size, "mixture classes"),
      GUTSIM_NUM_KEY("problem.samples", problem_samples, to_size, "training samples"),
      GUTSIM_NUM_KEY("problem.test_samples", problem_test_samples, to_size, "test samples"),
      GUTSIM_NUM_KEY("problem.hidden", problem_hidden, to_size, "MLP hidden units"),
      GUTSIM_NUM_KEY("problem.separation", problem_separation, to_double, "class mean scale"),
      {"algorithm.kind", "DSGD, GUT, QG-GUTm, ... (see README)",
       [](RunConfig& c, const std::string& v) {
         c.algorithm_kind = wrap_enum("algorithm.kind", [&] { return parse_algorithm_kind(v); });
       },
       [](const RunConfig& c) { return std::string(to_string(c.algorithm_kind)); }},
      GUTSIM_NUM_KEY("algorithm.eta", algorithm_eta, to_double, "base step size"),
      GUTSIM_NUM_KEY("algorithm.mu", algorithm_mu, to_double, "tracking scale"),
      GUTSIM_NUM_KEY("algorithm.beta", algorithm_beta, to_double, "momentum"),
      GUTSIM_NUM_KEY("algorithm.nesterov", algorithm_nesterov, to_bool, "Nesterov variant"),
      GUTSIM_NUM_KEY("algorithm.decay", algorithm_decay, to_bool, "10x decay at 50%/75%"),
      {"consensus.method", "gossip | gut | qg-gossip | qg-gutm",
       [](RunConfig& c, const std::string& v) {
         c.consensus_method = wrap_enum("consensus.method", [&] { return parse_consensus_method(v); });
       },
       [](const RunConfig& c) { return std::string(to_string(c.consensus_method)); }},
      GUTSIM_NUM_KEY("consensus.d", consensus_d, to_size, "consensus dimension"),
      GUTSIM_NUM_KEY("consensus.seed", consensus_seed, to_u64, "X0 seed"),
      GUTSIM_NUM_KEY("equivalence.tol", equivalence_tol, to_double, "max relative deviation"),
      GUTSIM_NUM_KEY("run.rounds", run_rounds, to_u64, "rounds T"),
      GUTSIM_NUM_KEY("run.batch", run_batch, to_size, "mini-batch per agent"),
      {"run.seeds", "comma-separated seeds",
       [](RunConfig& c, const std::string& v) { c.run_seeds = to_seeds("run.seeds", v); },
       [](const RunConfig& c) { return seeds_string(c.run_seeds); }},
      GUTSIM_NUM_KEY("run.eval_every", run_eval_every, to_u64, "metric interval (0: final only)"),
      GUTSIM_NUM_KEY("run.threads", run_threads, to_size, "worker threads"),
      {"run.output_dir", "output directory",
       [](RunConfig& c, const std::string& v) {
         if (v.empty()) throw ConfigError("run.output_dir: must not be empty");
         c.run_output_dir = v;
       },
       [](const RunConfig& c) { return c.run_output_dir; }},
  };
  return table;
}

#undef GUTSIM_NUM_KEY

inline const KeyDef* find_key(std::string_view key) {
  for (const auto& k : key_table()) {
    if (k.key == key) return &k;
  }
  return nullptr;
}

/// Defaults that differ from RunConfig's member initialisers.
inline std::map<std::string, std::string> subcommand_defaults(const std::string& sub) {
  if (sub == "consensus") return {{"topology.n", "64"}, {"run.rounds", "2000"}};
  if (sub == "equivalence") {
    return {{"topology.n", "8"},         {"problem.kind", "quadratic"}, {"problem.zeta", "1"},
            {"problem.sigma", "0.1"},    {"algorithm.kind", "GUT"},     {"algorithm.eta", "0.05"},
            {"algorithm.mu", "0.9"},     {"run.rounds", "100"},         {"algorithm.decay", "false"}};
  }
  return {};
}

inline std::vector<std::string> required_keys(const std::string& sub) {
  if (sub == "topology") return {"topology.kind", "topology.n"};
  if (sub == "partition") return {"partition.alpha"};
  if (sub == "consensus") return {"consensus.method"};
  if (sub == "train") return {"algorithm.kind"};
  if (sub == "validate") return {"algorithm.mu"};
  return {};
}

}  // namespace config_detail

inline std::string valid_keys_list() {
  std::string out;
  for (const auto& k : config_detail::key_table()) out += "  " + k.key + "  (" + k.help + ")\n";
  return out;
}

/// Parses "key=value" lines; '#' starts a comment line. Later lines win.
inline std::vector<std::pair<std::string, std::string>> parse_key_values(std::istream& in,
                                                                         const std::string& origin) {
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto text = config_detail::trim(line);
    if (text.empty() || text.front() == '#') continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key=value");
    }
    out.emplace_back(config_detail::trim(text.substr(0, eq)), config_detail::trim(text.substr(eq + 1)));
  }
  return out;
}

/// Resolves a config: member defaults, then subcommand defaults, then the
/// file entries, then flag overrides (flags win). Unknown keys and missing
/// required keys raise ConfigError.
inline RunConfig resolve_config(const std::string& subcommand,
                                const std::vector<std::pair<std::string, std::string>>& file_entries,
                                const std::vector<std::pair<std::string, std::string>>& flag_entries) {
  const auto& subs = subcommands();
  if (std::find(subs.begin(), subs.end(), subcommand) == subs.end()) {
    throw ConfigError("unknown subcommand '" + subcommand + "'");
  }
  RunConfig cfg;
  cfg.subcommand = subcommand;
  std::set<std::string> given;
  auto apply = [&](const std::string& key, const std::string& value, bool user) {
    const auto* def = config_detail::find_key(key);
    if (!def) throw ConfigError("unknown key '" + key + "'; valid keys are:\n" + valid_keys_list());
    def->set(cfg, value);
    if (user) given.insert(key);
  };
  for (const auto& [k, v] : config_detail::subcommand_defaults(subcommand)) apply(k, v, false);
  for (const auto& [k, v] : file_entries) apply(k, v, true);
  for (const auto& [k, v] : flag_entries) apply(k, v, true);
  for (const auto& key : config_detail::required_keys(subcommand)) {
    if (!given.count(key)) throw ConfigError("missing required key '" + key + "' for " + subcommand);
  }
  return cfg;
}

/// Every key with its resolved value, as strings.
inline std::map<std::string, std::string> config_values(const RunConfig& cfg) {
  std::map<std::string, std::string> out;
  for (const auto& k : config_detail::key_table()) out[k.key] = k.get(cfg);
  return out;
}

inline nlohmann::json manifest_json(const RunConfig& cfg) {
  nlohmann::json j;
  j["subcommand"] = cfg.subcommand;
  j["config"] = nlohmann::json::object();
  for (const auto& [k, v] : config_values(cfg)) j["config"][k] = v;
  j["seeds"] = cfg.run_seeds;
  return j;
}

/// Inverse of manifest_json.
inline RunConfig config_from_manifest(const nlohmann::json& j) {
  std::vector<std::pair<std::string, std::string>> entries;
  for (const auto& [k, v] : j.at("config").items()) entries.emplace_back(k, v.get<std::string>());
  return resolve_config(j.at("subcommand").get<std::string>(), entries, {});
}

}  // namespace gutsim

#endif  // GUTSIM_CONFIG_HPP
