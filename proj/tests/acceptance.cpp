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

// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit if any fails.
// Tolerances are pinned here; oracles are computed independently of the library.

#include "gutsim/algorithms.hpp"
#include "gutsim/harness.hpp"
#include "gutsim/models.hpp"
#include "gutsim/partition.hpp"
#include "gutsim/topology.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

using namespace gutsim;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(int id, const std::string& name, double budget_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool in_time = budget_s <= 0.0 || secs < budget_s;
  const bool pass = o.pass && in_time;
  if (!pass) ++failures;
  std::printf("[%s] %2d %-32s %7.2fs", pass ? "PASS" : "FAIL", id, name.c_str(), secs);
  if (budget_s > 0.0) std::printf(" (budget %.0fs)", budget_s);
  std::printf("  %s\n", o.detail.c_str());
  std::fflush(stdout);
}

void note(const std::string& text) {
  std::printf("       note: %s\n", text.c_str());
  std::fflush(stdout);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

struct QuadOracle {
  const QuadraticProblem* p;
  std::uint64_t seed = 0;
  Vector operator()(std::size_t agent, std::uint64_t round, const Vector& x) const {
    return p->loss_and_grad(x, p->sample_batch(agent, round, 1, seed)).grad;
  }
};

AlgorithmSpec make_spec(AlgorithmKind kind, double eta, double mu, double beta = 0.9) {
  AlgorithmSpec s;
  s.kind = kind;
  s.eta = StepSchedule::constant(eta);
  s.mu = mu;
  s.beta = beta;
  return s;
}

// Ring of four with dyadic weights and dyadic data: every product is exact.
MixingMatrix dyadic_ring4() {
  Matrix m(4, 4);
  m << 0.5, 0.25, 0, 0.25,
       0.25, 0.5, 0.25, 0,
       0, 0.25, 0.5, 0.25,
       0.25, 0, 0.25, 0.5;
  return MixingMatrix::from_weights(m);
}

Matrix dyadic_rows(std::size_t n, std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (auto& v : x.reshaped()) v = static_cast<double>(static_cast<int>(rng.below(64)) - 32) / 8.0;
  return x;
}

QuadraticProblem quadratic_from_rows(const Matrix& b) {
  std::vector<Vector> targets;
  for (Eigen::Index i = 0; i < b.rows(); ++i) targets.push_back(b.row(i).transpose());
  return QuadraticProblem::from_targets(targets);
}

// Closed-form second-largest and smallest eigenvalues of the 1/3 ring.
double ring_rho_oracle(std::size_t n) {
  double l2 = -2.0, ln = 2.0;
  for (std::size_t k = 1; k < n; ++k) {
    const double lam = (1.0 + 2.0 * std::cos(2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n))) / 3.0;
    l2 = std::max(l2, lam);
    ln = std::min(ln, lam);
  }
  return 1.0 - std::max(std::abs(l2), std::abs(ln));
}

double final_error(const MetricTrace& t, std::uint64_t rounds) {
  if (t.divergent || t.records.back().round != rounds) return std::numeric_limits<double>::infinity();
  return t.last().consensus_error;
}

// --- criteria --------------------------------------------------------------------------------

// Largest per-coordinate drift of the agent average, relative to 1 + |mean0|.
double mean_drift(const MixingMatrix& w, const Matrix& x0, double mu, std::uint64_t rounds, std::uint64_t* reached) {
  const Vector mean0 = x0.colwise().mean().transpose();
  double worst = 0.0;
  auto trace = run_consensus(w, x0, ConsensusMethod::gut, mu, 0.9, rounds, [&](std::uint64_t, const Matrix& x) {
    const Vector mean = x.colwise().mean().transpose();
    const Vector rel = (mean - mean0).cwiseAbs().cwiseQuotient((Vector::Ones(mean0.size()) + mean0.cwiseAbs()));
    worst = std::max(worst, std::isfinite(rel.maxCoeff()) ? rel.maxCoeff() : std::numeric_limits<double>::infinity());
  });
  *reached = trace.records.back().round;
  if (trace.divergent) worst = std::numeric_limits<double>::infinity();
  return worst;
}

Outcome c1_average_preservation() {
  const auto w = build_topology(TopologyKind::ring, 64);
  const Matrix x0 = gaussian_rows(64, 32, 1);
  std::uint64_t reached = 0;
  const double drift = mean_drift(w, x0, 0.9, 2000, &reached);
  Outcome o{drift <= 1e-10 && reached == 2000,
            "mu=0.9: max drift " + fmt(drift) + " (tol 1e-10), reached round " + std::to_string(reached)};
  return o;
}

void c1_diagnostics() {
  const auto w = build_topology(TopologyKind::ring, 64);
  const Matrix x0 = gaussian_rows(64, 32, 1);
  std::string line = "stable mu on the same run:";
  for (double mu : {0.1, 0.15, 0.19}) {
    std::uint64_t reached = 0;
    line += " mu=" + fmt(mu) + " drift " + fmt(mean_drift(w, x0, mu, 2000, &reached));
  }
  note(line);
}

Outcome c2_form_equivalence() {
  const auto w = build_topology(TopologyKind::ring, 8);
  SyntheticProblemSpec s;
  s.n_agents = 8;
  s.zeta = 1.0;
  s.sigma = 0.1;
  s.seed = 1;
  const auto p = make_quadratic(s);
  const auto r = check_equivalence(w, p, make_spec(AlgorithmKind::GUT, 0.05, 0.9), 100, 1e-8);
  std::string detail = "max relative deviation " + fmt(r.deviation) + " (tol 1e-8)";
  for (std::size_t f = 0; f < r.forms.size(); ++f) detail += ", " + r.forms[f] + " " + fmt(r.max_deviation[f]);
  return {r.pass && r.deviation <= 1e-8, detail};
}

Outcome c3_mu_zero() {
  // (a) gut_round at mu = 0 against Wx - eta G(Wx), bitwise.
  const auto w4 = dyadic_ring4();
  const auto p4 = quadratic_from_rows(dyadic_rows(4, 3, 1));
  const QuadOracle o4{&p4};
  States st = init_states(dyadic_rows(4, 3, 2), w4);
  bool round_exact = true;
  for (int t = 0; t < 10; ++t) {
    const Matrix mixed = w4.weights() * stack_parameters(st);
    Matrix expected = mixed;
    for (Eigen::Index i = 0; i < 4; ++i) {
      expected.row(i) -= 0.5 * o4(static_cast<std::size_t>(i), 0, mixed.row(i).transpose()).transpose();
    }
    st = gut_round(st, w4, make_spec(AlgorithmKind::GUT, 0.5, 0.0), o4);
    round_exact = round_exact && stack_parameters(st) == expected;
  }

  // (b) consensus traces.
  const auto w64 = build_topology(TopologyKind::ring, 64);
  const Matrix x0 = gaussian_rows(64, 32, 3);
  const auto gut = run_consensus(w64, x0, ConsensusMethod::gut, 0.0, 0.9, 2000);
  const auto gossip = run_consensus(w64, x0, ConsensusMethod::gossip, 0.0, 0.9, 2000);
  double trace_dev = gut.records.size() == gossip.records.size() ? 0.0 : std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < std::min(gut.records.size(), gossip.records.size()); ++k) {
    trace_dev = std::max(trace_dev, std::abs(gut.records[k].consensus_error - gossip.records[k].consensus_error));
  }

  // (c) rules at mu = 0, on dyadic and on generic data.
  bool rules_exact = true;
  const auto w16 = build_topology(TopologyKind::ring, 16);
  SyntheticProblemSpec qs;
  qs.n_agents = 16;
  qs.sigma = 0.1;
  qs.seed = 4;
  const auto p16 = make_quadratic(qs);
  struct Case {
    const MixingMatrix* w;
    Matrix x0;
    std::function<Vector(std::size_t, std::uint64_t, const Vector&)> oracle;
    double eta;
  };
  const std::vector<Case> cases{{&w4, dyadic_rows(4, 3, 9), o4, 0.5},
                                {&w16, gaussian_rows(16, 10, 5), QuadOracle{&p16, 7}, 0.05}};
  for (const auto& c : cases) {
    States g = init_states(c.x0, *c.w), a = g, b = g;
    for (int t = 0; t < 50; ++t) {
      g = step(g, *c.w, make_spec(AlgorithmKind::GUT, c.eta, 0.0), c.oracle);
      a = step(a, *c.w, make_spec(AlgorithmKind::RuleA, c.eta, 0.0), c.oracle);
      b = step(b, *c.w, make_spec(AlgorithmKind::RuleB, c.eta, 0.0), c.oracle);
    }
    rules_exact = rules_exact && stack_parameters(a) == stack_parameters(g) &&
                  stack_parameters(b) == stack_parameters(g);
  }
  return {round_exact && trace_dev <= 1e-12 && rules_exact,
          std::string("gut_round exact ") + (round_exact ? "yes" : "no") + ", consensus trace deviation " +
              fmt(trace_dev) + " (tol 1e-12), rules exact " + (rules_exact ? "yes" : "no")};
}

Outcome c4_faster_than_gossip(std::vector<std::string>* notes) {
  const std::uint64_t T = 2000;
  bool pass = true;
  std::string detail;
  for (std::size_t n : {64u, 128u, 256u}) {
    const auto w = build_topology(TopologyKind::ring, n);
    const Matrix x0 = gaussian_rows(n, 32, 1);
    const double gossip = final_error(run_consensus(w, x0, ConsensusMethod::gossip, 0.0, 0.9, T), T);
    double best = std::numeric_limits<double>::infinity();
    for (double mu : {0.3, 0.5, 0.7, 0.9}) {
      best = std::min(best, final_error(run_consensus(w, x0, ConsensusMethod::gut, mu, 0.9, T), T));
    }
    pass = pass && best < gossip;
    detail += "n=" + std::to_string(n) + " gossip " + fmt(gossip) + " best GUT " + fmt(best) + "; ";

    std::string stable = "n=" + std::to_string(n) + " stable mu:";
    for (double mu : {0.1, 0.15, 0.19}) {
      stable += " " + fmt(mu) + "->" + fmt(final_error(run_consensus(w, x0, ConsensusMethod::gut, mu, 0.9, T), T));
    }
    notes->push_back(stable + " (gossip " + fmt(gossip) + ")");

    if (n == 256) {
      const double qg = final_error(run_consensus(w, x0, ConsensusMethod::qg_gossip, 0.0, 0.9, T), T);
      double best_qg = std::numeric_limits<double>::infinity();
      std::string arg;
      for (double beta : {0.5, 0.9}) {
        for (double mu : {0.005, 0.01, 0.05, 0.09}) {
          const double e = final_error(run_consensus(w, x0, ConsensusMethod::qg_gutm, mu, beta, T), T);
          if (e < best_qg) {
            best_qg = e;
            arg = "mu=" + fmt(mu) + ",beta=" + fmt(beta);
          }
        }
      }
      pass = pass && best_qg < qg;
      detail += "qg-gossip " + fmt(qg) + " best QG-GUTm " + fmt(best_qg) + " (" + arg + ")";
    }
  }
  return {pass, detail};
}

Outcome c5_validator() {
  const auto w = build_topology(TopologyKind::ring, 16);
  const double rho = spectral_stats(w).rho;
  const double oracle = ring_rho_oracle(16);
  const auto h = validate_hyperparameters(0.001, 0.001, rho, 1.0);
  const double e_rho = std::abs(rho - oracle);
  const double e_eta = std::abs(h.eta_max - rho / 7.0);
  const double e_mu = std::abs(h.mu_max - rho / (42.0 + rho));
  const double q_eta = std::abs(h.eta_max / 0.007251 - 1.0);
  const double q_mu = std::abs(h.mu_max / 0.0012074 - 1.0);
  const bool pass = e_rho <= 1e-10 && e_eta <= 1e-15 && e_mu <= 1e-15 && q_eta <= 1e-3 && q_mu <= 1e-3;
  return {pass, "rho " + fmt(rho) + " (oracle err " + fmt(e_rho) + "), eta_max " + std::to_string(h.eta_max) +
                    " (vs 0.007251 rel " + fmt(q_eta) + "), mu_max " + std::to_string(h.mu_max) +
                    " (vs 0.0012074 rel " + fmt(q_mu) + ")"};
}

Outcome c6_gradient_oracle() {
  Rng rng(6);
  auto point = [&](std::size_t d, double scale) {
    Vector x(static_cast<Eigen::Index>(d));
    for (auto& v : x) v = scale * rng.normal();
    return x;
  };
  double worst_quad = 0.0, worst_cls = 0.0;
  SyntheticProblemSpec qs;
  qs.n_agents = 6;
  qs.d = 8;
  qs.zeta = 1.5;
  qs.seed = 3;
  const auto quad = make_quadratic(qs);
  for (int k = 0; k < 20; ++k) worst_quad = std::max(worst_quad, finite_diff_check(quad, point(8, 3.0), 1e-5));
  for (auto kind : {ProblemKind::softmax, ProblemKind::mlp}) {
    SyntheticProblemSpec cs;
    cs.kind = kind;
    cs.n_agents = 4;
    cs.classes = 4;
    cs.d = 5;
    cs.samples = 200;
    cs.test_samples = 40;
    cs.hidden = 6;
    cs.alpha = 1.0;
    cs.seed = 2;
    const auto p = make_problem(cs);
    for (int k = 0; k < 20; ++k) worst_cls = std::max(worst_cls, finite_diff_check(*p, point(p->dim(), 0.5), 1e-5));
  }

  // Mean of 1e5 noisy gradients against the exact one, per coordinate.
  SyntheticProblemSpec ns;
  ns.n_agents = 2;
  ns.d = 10;
  ns.sigma = 0.1;
  ns.seed = 9;
  const auto noisy = make_quadratic(ns);
  const Vector x = Vector::LinSpaced(10, -1.0, 1.0);
  const Vector exact = noisy.local_objective(0, x).grad;
  Vector acc = Vector::Zero(10);
  const std::uint64_t draws = 100000;
  for (std::uint64_t t = 0; t < draws; ++t) acc += noisy.loss_and_grad(x, noisy.sample_batch(0, t, 1, 21)).grad;
  acc /= static_cast<double>(draws);
  // Per-coordinate noise std is sigma / sqrt(d).
  const double se = 0.1 / std::sqrt(10.0) / std::sqrt(static_cast<double>(draws));
  const double z = (acc - exact).cwiseAbs().maxCoeff() / se;
  return {worst_quad <= 1e-8 && worst_cls <= 1e-5 && z <= 3.0,
          "quadratic " + fmt(worst_quad) + " (tol 1e-8), softmax/mlp " + fmt(worst_cls) +
              " (tol 1e-5), MC max |z| " + fmt(z) + " (tol 3)"};
}

Outcome c7_heterogeneity(std::vector<std::string>* notes) {
  const auto w = build_topology(TopologyKind::ring, 16);
  SyntheticProblemSpec d;
  d.kind = ProblemKind::softmax;
  d.n_agents = 16;
  d.classes = 10;
  d.alpha = 0.01;
  d.min_per_agent = 0;
  d.seed = 1;
  d.partition_seed = 1;
  const auto p = make_problem(d);
  TrainingOptions opt;
  opt.rounds = 10000;
  opt.batch = 32;
  opt.seeds = {1, 2, 3};
  opt.eval_every = 1000;
  opt.threads = 4;
  auto train = [&](AlgorithmKind k, double mu) { return run_training(w, *p, make_spec(k, 0.1, mu, 0.9), opt); };

  const auto dsgd = train(AlgorithmKind::DSGD, 0.0);
  const auto gut = train(AlgorithmKind::GUT, 0.15);
  const auto qgd = train(AlgorithmKind::QG_DSGDm, 0.0);
  const auto qgg = train(AlgorithmKind::QG_GUTm, 0.05);
  const auto impl = train(AlgorithmKind::QG_GUTm_impl, 0.05);

  const double gap_gut = gut.final_accuracy.mean - dsgd.final_accuracy.mean;
  const double gap_qg = qgg.final_accuracy.mean - qgd.final_accuracy.mean;
  notes->push_back("QG-GUTm-impl mu=0.05: accuracy " + fmt(impl.final_accuracy.mean) + ", gap to QG-DSGDm " +
                   fmt(100.0 * (impl.final_accuracy.mean - qgd.final_accuracy.mean)) + "%");

  // Seed-averaged consensus error at every recorded round after the start.
  bool below = !gut.divergent() && !dsgd.divergent();
  std::size_t matched = 0, wins = 0;
  const std::size_t records = std::min(gut.per_seed.front().records.size(), dsgd.per_seed.front().records.size());
  for (std::size_t r = 1; below && r < records; ++r) {
    double a = 0.0, b = 0.0;
    for (std::size_t s = 0; s < 3; ++s) {
      a += gut.per_seed[s].records[r].consensus_error;
      b += dsgd.per_seed[s].records[r].consensus_error;
    }
    ++matched;
    if (a < b) ++wins;
  }
  below = below && matched > 0 && wins == matched;

  const bool pass = !gut.divergent() && !qgg.divergent() && gap_gut > -0.005 && gap_qg > -0.005 && below;
  return {pass, "GUT-DSGD " + fmt(100.0 * gap_gut) + "%, QG-GUTm-QG-DSGDm " + fmt(100.0 * gap_qg) +
                    "% (margin -0.5%), GUT consensus below DSGD at " + std::to_string(wins) + "/" +
                    std::to_string(matched) + " matched rounds"};
}

Outcome c8_communication() {
  bool pass = true;
  std::string detail;
  SyntheticProblemSpec s;
  s.n_agents = 16;
  s.d = 7;
  s.sigma = 0.1;
  s.seed = 2;
  const auto p = make_quadratic(s);
  TrainingOptions opt;
  opt.rounds = 60;
  opt.eval_every = 7;
  opt.batch = 1;
  for (auto topo : {TopologyKind::ring, TopologyKind::torus}) {
    const auto w = build_topology(topo, 16);
    for (auto [kind, mult] : {std::pair{AlgorithmKind::GUT, 1}, {AlgorithmKind::QG_GUTm, 1},
                              {AlgorithmKind::RuleA, 1}, {AlgorithmKind::RuleB, 1}, {AlgorithmKind::GT, 2}}) {
      const auto r = run_training(w, p, make_spec(kind, 0.01, 0.01), opt);
      for (const auto& trace : r.per_seed) {
        for (const auto& rec : trace.records) {
          for (std::size_t i = 0; i < w.size(); ++i) {
            // Every agent sends mult * d scalars to each neighbour each round.
            const std::uint64_t expect = rec.round * w.degree(i) * 7u * static_cast<std::uint64_t>(mult);
            if (rec.comm_scalars != expect) {
              pass = false;
              detail += std::string(to_string(kind)) + " round " + std::to_string(rec.round) + " logged " +
                        std::to_string(rec.comm_scalars) + " expected " + std::to_string(expect) + "; ";
            }
          }
        }
      }
    }
  }
  if (pass) detail = "ring and torus: 1x for GUT/QG-GUTm/RuleA/RuleB, 2x for GT at every record";
  return {pass, detail};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome c9_determinism() {
  const fs::path root = fs::temp_directory_path() / ("gutsim_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  struct Job {
    std::string args;
    std::vector<std::string> files;
  };
  const std::vector<Job> jobs{
      {"train --problem.kind=softmax --topology.n=8 --run.rounds=300 --run.eval_every=50 "
       "--run.seeds=1,2 --algorithm.kind=GUT --algorithm.mu=0.1 --partition.alpha=0.1 --partition.min_per_agent=0",
       {"train_seed1.csv", "train_seed2.csv"}},
      {"train --problem.kind=quadratic --problem.sigma=0.1 --topology.kind=torus --topology.n=16 --run.rounds=200 "
       "--run.eval_every=10 --run.seeds=3 --algorithm.kind=QG-GUTm --algorithm.mu=0.05",
       {"train_seed3.csv"}},
      {"consensus --consensus.method=gut --algorithm.mu=0.15 --topology.n=64 --run.rounds=500",
       {"consensus.csv"}},
  };
  bool pass = true;
  std::string detail;
  int idx = 0;
  for (const auto& job : jobs) {
    std::vector<std::string> contents;
    int run = 0;
    for (int threads : {1, 1, 4}) {
      const fs::path dir = root / (std::to_string(idx) + "_" + std::to_string(run++));
      const std::string cmd = std::string(GUTSIM_EXE) + " " + job.args + " --run.threads=" +
                              std::to_string(threads) + " --run.output_dir=" + dir.string() + " > /dev/null";
      if (std::system(cmd.c_str()) != 0) {
        pass = false;
        detail += "job " + std::to_string(idx) + " exited nonzero; ";
        continue;
      }
      std::string joined;
      for (const auto& f : job.files) joined += slurp(dir / f) + "\x1f";
      contents.push_back(joined);
    }
    for (const auto& c : contents) {
      if (c != contents.front() || c.size() < 64) {
        pass = false;
        detail += "job " + std::to_string(idx) + " CSV differs; ";
        break;
      }
    }
    ++idx;
  }
  fs::remove_all(root);
  if (pass) detail = "2 train + 1 consensus configs byte-identical over repeats and threads 1/4";
  return {pass, detail};
}

Outcome c10_partitions() {
  Rng rng(2024);
  std::size_t bad = 0, infeasible = 0;
  for (int k = 0; k < 200; ++k) {
    const std::size_t classes = 2 + rng.below(9);
    const std::size_t agents = 1 + rng.below(16);
    const std::size_t min_per = rng.below(3);
    const double alpha = std::exp(std::log(0.5) + rng.uniform() * (std::log(1e4) - std::log(0.5)));
    const std::uint64_t seed = rng.below(1u << 30);
    std::vector<int> labels;
    const std::size_t samples = 60 * agents * classes / 4 + 40;
    for (std::size_t i = 0; i < samples; ++i) labels.push_back(static_cast<int>(rng.below(classes)));
    Partition part;
    try {
      part = dirichlet_partition(labels, agents, alpha, seed, min_per);
    } catch (const std::runtime_error&) {
      ++infeasible;
      continue;
    }
    std::vector<int> seen(samples, 0);
    bool ok = part.assignments.size() == agents;
    for (const auto& a : part.assignments) {
      ok = ok && a.size() >= min_per;
      for (auto idx : a) ok = ok && idx < samples && ++seen[idx] == 1;
    }
    for (int s : seen) ok = ok && s == 1;
    if (!ok) ++bad;
  }

  // Near-IID and near-one-agent-per-class extremes.
  std::vector<int> labels;
  for (int i = 0; i < 10000; ++i) labels.push_back(i % 10);
  const double skew_iid = partition_histogram(dirichlet_partition(labels, 16, 1e6, 1, 0), labels).skew;
  double worst_share = 1.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto h = partition_histogram(dirichlet_partition(labels, 10, 1e-6, seed, 0), labels);
    for (std::size_t c = 0; c < 10; ++c) {
      double total = 0.0, top = 0.0;
      for (const auto& row : h.counts) {
        total += static_cast<double>(row[c]);
        top = std::max(top, static_cast<double>(row[c]));
      }
      worst_share = std::min(worst_share, top / total);
    }
  }
  const bool pass = bad == 0 && infeasible == 0 && skew_iid < 0.01 && worst_share >= 0.99;
  return {pass, std::to_string(200 - bad - infeasible) + "/200 valid (" + std::to_string(infeasible) +
                    " infeasible), alpha=1e6 skew " + fmt(skew_iid) + " (tol 0.01), alpha=1e-6 min top share " +
                    fmt(worst_share) + " (tol 0.99)"};
}

}  // namespace

int main() {
  std::printf("gutsim acceptance\n");
  criterion(1, "average preservation", 5.0, c1_average_preservation);
  c1_diagnostics();
  criterion(2, "four-form equivalence", 1.0, c2_form_equivalence);
  criterion(3, "mu=0 reductions", 0.0, c3_mu_zero);
  std::vector<std::string> notes4;
  criterion(4, "faster than gossip", 60.0, [&] { return c4_faster_than_gossip(&notes4); });
  for (const auto& n : notes4) note(n);
  criterion(5, "hyperparameter validator", 0.0, c5_validator);
  criterion(6, "gradient oracle", 0.0, c6_gradient_oracle);
  std::vector<std::string> notes7;
  criterion(7, "heterogeneity benefit", 120.0, [&] { return c7_heterogeneity(&notes7); });
  for (const auto& n : notes7) note(n);
  criterion(8, "communication accounting", 0.0, c8_communication);
  criterion(9, "determinism", 0.0, c9_determinism);
  criterion(10, "partition integrity", 0.0, c10_partitions);
  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
