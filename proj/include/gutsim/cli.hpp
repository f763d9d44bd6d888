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

#ifndef GUTSIM_CLI_HPP
#define GUTSIM_CLI_HPP

#include "gutsim/algorithms.hpp"
#include "gutsim/config.hpp"
#include "gutsim/harness.hpp"
#include "gutsim/models.hpp"
#include "gutsim/partition.hpp"
#include "gutsim/plot.hpp"
#include "gutsim/topology.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

namespace gutsim {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 1,
  kExitDivergent = 2,
  kExitFailedCheck = 3,
};

namespace cli_detail {

namespace fs = std::filesystem;

inline fs::path output_path(const RunConfig& cfg, const std::string& name) {
  fs::path dir(cfg.run_output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory '" + dir.string() + "': " + ec.message());
  return dir / name;
}

inline std::ofstream open_output(const RunConfig& cfg, const std::string& name) {
  const auto path = output_path(cfg, name);
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  return out;
}

inline void write_json(const RunConfig& cfg, const std::string& name, const nlohmann::json& j) {
  auto out = open_output(cfg, name);
  out << j.dump(2) << '\n';
}

inline MixingMatrix topology_of(const RunConfig& cfg) {
  return build_topology(cfg.topology_kind, cfg.topology_n, cfg.grid());
}

inline int cmd_topology(const RunConfig& cfg, std::ostream& out) {
  const auto w = topology_of(cfg);
  const auto report = validate_mixing(w);
  const auto stats = spectral_stats(w);
  {
    auto csv = open_output(cfg, "topology.csv");
    write_csv(w, csv);
  }
  nlohmann::json j{{"kind", std::string(to_string(w.kind()))},
                   {"n", w.size()},
                   {"lambda2", stats.lambda2},
                   {"lambdaN", stats.lambdaN},
                   {"rho", stats.rho},
                   {"valid", report.ok()},
                   {"violations", report.violations}};
  write_json(cfg, "spectral.json", j);
  out << j.dump(2) << '\n';
  return kExitOk;
}

inline int cmd_partition(const RunConfig& cfg, std::ostream& out) {
  auto spec = cfg.problem();
  const auto train = make_datasets(spec).first;
  const auto part = dirichlet_partition(train.labels, cfg.topology_n, cfg.partition_alpha,
                                        cfg.partition_seed, cfg.partition_min_per_agent);
  const auto hist = partition_histogram(part, train.labels);
  {
    auto csv = open_output(cfg, "partition.csv");
    write_histogram_csv(hist, csv);
  }
  write_histogram_csv(hist, out);
  out << "skew=" << format_double(hist.skew) << '\n';
  out << "seed_used=" << part.seed_used << '\n';
  return kExitOk;
}

inline int cmd_consensus(const RunConfig& cfg, std::ostream& out) {
  const auto w = topology_of(cfg);
  const Matrix x0 = gaussian_rows(cfg.topology_n, cfg.consensus_d, cfg.consensus_seed);
  auto trace = run_consensus(w, x0, cfg.consensus_method, cfg.algorithm_mu, cfg.algorithm_beta,
                             cfg.run_rounds);
  trace.seeds = {cfg.consensus_seed};
  {
    auto csv = open_output(cfg, "consensus.csv");
    write_csv(trace, csv);
  }
  emit_plot({{trace.method, &trace}}, output_path(cfg, "consensus.svg").string());
  auto manifest = manifest_json(cfg);
  manifest["divergent"] = trace.divergent;
  manifest["final_consensus_error"] = trace.last().consensus_error;
  write_json(cfg, "manifest.json", manifest);
  out << trace.method << ": consensus error " << format_double(trace.last().consensus_error)
      << " after " << trace.last().round << " rounds\n";
  if (trace.divergent) {
    out << "divergent: " << trace.diagnostic << '\n';
    return kExitDivergent;
  }
  return kExitOk;
}

inline nlohmann::json summary_json(const SummaryStat& s) {
  return {{"mean", s.mean}, {"std", s.stddev}, {"count", s.count}};
}

inline int cmd_train(const RunConfig& cfg, std::ostream& out) {
  const auto w = topology_of(cfg);
  const auto problem = make_problem(cfg.problem());
  const auto result = run_training(w, *problem, cfg.algorithm(), cfg.training());

  std::vector<PlotSeries> series;
  nlohmann::json per_seed = nlohmann::json::array();
  for (const auto& trace : result.per_seed) {
    const auto name = "train_seed" + std::to_string(trace.seeds.front()) + ".csv";
    auto csv = open_output(cfg, name);
    write_csv(trace, csv);
    series.push_back({trace.method + " seed " + std::to_string(trace.seeds.front()), &trace});
    per_seed.push_back({{"seed", trace.seeds.front()},
                        {"trace", name},
                        {"divergent", trace.divergent},
                        {"diagnostic", trace.diagnostic}});
  }
  emit_plot(series, output_path(cfg, "train.svg").string());

  auto manifest = manifest_json(cfg);
  manifest["runs"] = per_seed;
  manifest["final_avg_model_loss"] = summary_json(result.final_loss);
  manifest["final_avg_model_accuracy"] = summary_json(result.final_accuracy);
  manifest["final_consensus_error"] = summary_json(result.final_consensus);
  manifest["divergent"] = result.divergent();
  write_json(cfg, "manifest.json", manifest);

  out << to_string(cfg.algorithm().effective_kind()) << ": loss "
      << format_double(result.final_loss.mean) << " +- " << format_double(result.final_loss.stddev);
  if (result.final_accuracy.count) {
    out << ", accuracy " << format_double(result.final_accuracy.mean) << " +- "
        << format_double(result.final_accuracy.stddev);
  }
  out << '\n';
  return result.divergent() ? kExitDivergent : kExitOk;
}

inline int cmd_equivalence(const RunConfig& cfg, std::ostream& out) {
  const auto w = topology_of(cfg);
  const auto problem = make_problem(cfg.problem());
  const auto report = check_equivalence(w, *problem, cfg.algorithm(), cfg.run_rounds,
                                        cfg.equivalence_tol, cfg.run_seeds.front(), cfg.run_batch);
  nlohmann::json j{{"forms", report.forms},
                   {"max_deviation", report.max_deviation},
                   {"deviation", report.deviation},
                   {"tol", report.tol},
                   {"pass", report.pass},
                   {"diagnostic", report.diagnostic}};
  write_json(cfg, "equivalence.json", j);
  for (std::size_t f = 0; f < report.forms.size(); ++f) {
    out << report.forms[f] << " vs GUT: " << format_double(report.max_deviation[f]) << '\n';
  }
  out << "max deviation " << format_double(report.deviation) << (report.pass ? " <= " : " > ")
      << format_double(report.tol) << ": " << (report.pass ? "pass" : "fail") << '\n';
  if (!report.diagnostic.empty()) out << report.diagnostic << '\n';
  return report.pass ? kExitOk : kExitFailedCheck;
}

inline int cmd_validate(const RunConfig& cfg, std::ostream& out) {
  const auto w = topology_of(cfg);
  const auto stats = spectral_stats(w);
  if (!stats.has_gap()) throw ConfigError("topology has no spectral gap");
  const auto check = validate_hyperparameters(cfg.algorithm_eta, cfg.algorithm_mu, stats.rho, cfg.problem_L);
  nlohmann::json j{{"rho", stats.rho},       {"L", cfg.problem_L},
                   {"eta", cfg.algorithm_eta}, {"eta_max", check.eta_max},
                   {"eta_ok", check.eta_ok},   {"mu", cfg.algorithm_mu},
                   {"mu_max", check.mu_max},   {"mu_ok", check.mu_ok},
                   {"ok", check.ok()}};
  write_json(cfg, "validate.json", j);
  out << j.dump(2) << '\n';
  return check.ok() ? kExitOk : kExitFailedCheck;
}

/// Turns leftover "--key=value" / "--key value" tokens into pairs.
inline std::vector<std::pair<std::string, std::string>> flag_pairs(const std::vector<std::string>& rest) {
  std::vector<std::pair<std::string, std::string>> out;
  for (std::size_t i = 0; i < rest.size(); ++i) {
    const auto& tok = rest[i];
    if (tok.rfind("--", 0) != 0 || tok.size() == 2) throw ConfigError("unexpected argument '" + tok + "'");
    const auto body = tok.substr(2);
    const auto eq = body.find('=');
    if (eq != std::string::npos) {
      out.emplace_back(body.substr(0, eq), body.substr(eq + 1));
    } else if (i + 1 < rest.size() && rest[i + 1].rfind("--", 0) != 0) {
      out.emplace_back(body, rest[++i]);
    } else {
      throw ConfigError("flag '" + tok + "' has no value");
    }
  }
  return out;
}

}  // namespace cli_detail

/// Entry point shared by the gutsim executable and the tests.
inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Decentralized learning simulator"};
  app.name("gutsim");
  app.require_subcommand(1);
  const std::vector<std::pair<std::string, std::string>> help{
      {"topology", "Mixing matrix CSV and spectral statistics"},
      {"partition", "Dirichlet label partition histogram and skew"},
      {"consensus", "Gradient-free average consensus trace"},
      {"train", "Decentralized training traces and manifest"},
      {"equivalence", "Cross-form GUT equivalence check"},
      {"validate", "Step size and mu bounds for a config"},
  };
  std::string config_path;
  for (const auto& [name, text] : help) {
    auto* sub = app.add_subcommand(name, text);
    sub->allow_extras();
    sub->add_option("--config", config_path, "key=value config file");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  CLI::App* sub = app.get_subcommands().front();
  try {
    std::vector<std::pair<std::string, std::string>> file_entries;
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw ConfigError("cannot read config file '" + config_path + "'");
      file_entries = parse_key_values(in, config_path);
    }
    const auto cfg = resolve_config(sub->get_name(), file_entries, cli_detail::flag_pairs(sub->remaining()));
    const auto& name = cfg.subcommand;
    if (name == "topology") return cli_detail::cmd_topology(cfg, out);
    if (name == "partition") return cli_detail::cmd_partition(cfg, out);
    if (name == "consensus") return cli_detail::cmd_consensus(cfg, out);
    if (name == "train") return cli_detail::cmd_train(cfg, out);
    if (name == "equivalence") return cli_detail::cmd_equivalence(cfg, out);
    return cli_detail::cmd_validate(cfg, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
  } catch (const InvalidArgument& e) {
    err << "config error: " << e.what() << '\n';
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
  }
  return kExitConfig;
}

}  // namespace gutsim

#endif  // GUTSIM_CLI_HPP
