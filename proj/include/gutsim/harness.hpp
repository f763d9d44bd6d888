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

#ifndef GUTSIM_HARNESS_HPP
#define GUTSIM_HARNESS_HPP

#include "gutsim/algorithms.hpp"
#include "gutsim/common.hpp"
#include "gutsim/models.hpp"
#include "gutsim/topology.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace gutsim {

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

struct MetricRecord {
  std::uint64_t round = 0;
  double consensus_error = 0.0;
  std::optional<double> mean_loss;
  std::optional<double> avg_model_loss;
  std::optional<double> avg_model_accuracy;
  std::optional<double> eta;
  std::uint64_t comm_scalars = 0;  // cumulative, per agent
};

struct MetricTrace {
  std::vector<MetricRecord> records;
  std::string method;
  TopologyKind topology = TopologyKind::custom;
  std::size_t n = 0;
  std::vector<std::uint64_t> seeds;
  bool divergent = false;
  std::string diagnostic;

  bool empty() const { return records.empty(); }
  const MetricRecord& last() const { return records.back(); }
};

inline constexpr std::string_view kTraceCsvHeader =
    "round,consensus_error,mean_loss,avg_model_loss,avg_model_accuracy,eta,comm_scalars";

/// Absent optional metrics are written as empty fields.
inline void write_csv(const MetricTrace& trace, std::ostream& out) {
  auto opt = [&](const std::optional<double>& v) {
    out << ',';
    if (v) out << format_double(*v);
  };
  out << kTraceCsvHeader << '\n';
  for (const auto& r : trace.records) {
    out << r.round << ',' << format_double(r.consensus_error);
    opt(r.mean_loss);
    opt(r.avg_model_loss);
    opt(r.avg_model_accuracy);
    opt(r.eta);
    out << ',' << r.comm_scalars << '\n';
  }
}

/// (1/n) sum_i ||x_i - x_bar||^2 with agents as rows.
inline double consensus_error(const Matrix& x) {
  if (x.rows() == 0) return 0.0;
  const Eigen::RowVectorXd mean = x.colwise().mean();
  return (x.rowwise() - mean).squaredNorm() / static_cast<double>(x.rows());
}

inline Vector average_model(const States& states) {
  if (states.empty()) throw InvalidArgument("average_model: no agents");
  Vector acc = states.front().x;
  for (std::size_t i = 1; i < states.size(); ++i) acc += states[i].x;
  return acc / static_cast<double>(states.size());
}

// ---------------------------------------------------------------------------
// Average consensus
// ---------------------------------------------------------------------------

enum class ConsensusMethod { gossip, gut, qg_gossip, qg_gutm };

inline std::string_view to_string(ConsensusMethod m) {
  switch (m) {
    case ConsensusMethod::gossip: return "gossip";
    case ConsensusMethod::gut: return "gut";
    case ConsensusMethod::qg_gossip: return "qg-gossip";
    case ConsensusMethod::qg_gutm: return "qg-gutm";
  }
  return "?";
}

inline ConsensusMethod parse_consensus_method(std::string_view name) {
  if (name == "gossip") return ConsensusMethod::gossip;
  if (name == "gut") return ConsensusMethod::gut;
  if (name == "qg-gossip") return ConsensusMethod::qg_gossip;
  if (name == "qg-gutm") return ConsensusMethod::qg_gutm;
  throw InvalidArgument("unknown consensus method '" + std::string(name) +
                        "' (expected gossip, gut, qg-gossip, qg-gutm)");
}

/// Called with (round, X) for every logged round, including round 0.
using ConsensusObserver = std::function<void(std::uint64_t, const Matrix&)>;

/// Gradient-free consensus recursions. Agents are rows of X.
///
/// gossip:   X' = W X
/// gut:      Y = (W-I)X + mu [W Y^prev - (W-I)(X^prev - X)],  X' = X + Y
/// qg-gutm:  M = beta M^prev + (1-beta)(X - X^prev)
///           Mhat = beta M + (1-beta)[(W-I)X + mu (W Mhat^prev - (W-I)(X^prev - X))]
///           X' = X + Mhat
/// qg-gossip is qg-gutm with mu = 0. History starts at X^prev = X^0, Y = M = Mhat = 0.
///
/// Records rounds 0..T; a non-finite iterate truncates the trace and marks it
/// divergent.
inline MetricTrace run_consensus(const MixingMatrix& w, const Matrix& x0, ConsensusMethod method,
                                 double mu, double beta, std::uint64_t rounds,
                                 const ConsensusObserver& observe = {}) {
  if (rounds < 1) throw InvalidArgument("run_consensus: T must be at least 1");
  if (static_cast<std::size_t>(x0.rows()) != w.size()) {
    throw InvalidArgument("run_consensus: X0 has " + std::to_string(x0.rows()) + " rows for " +
                          std::to_string(w.size()) + " agents");
  }
  if (!x0.allFinite()) throw InvalidArgument("run_consensus: X0 must be finite");
  if (!(mu >= 0.0 && mu < 1.0)) throw InvalidArgument("run_consensus: mu must lie in [0, 1)");
  if (!(beta >= 0.0 && beta < 1.0)) throw InvalidArgument("run_consensus: beta must lie in [0, 1)");
  if (method == ConsensusMethod::gossip || method == ConsensusMethod::qg_gossip) mu = 0.0;

  MetricTrace trace;
  trace.method = std::string(to_string(method));
  trace.topology = w.kind();
  trace.n = w.size();

  std::uint64_t per_round = 0;
  for (std::size_t i = 0; i < w.size(); ++i) per_round += w.degree(i);
  per_round = per_round * static_cast<std::uint64_t>(x0.cols()) / std::max<std::size_t>(w.size(), 1);

  auto laplace = [&](const Matrix& z) -> Matrix { return w.mix(z) - z; };

  Matrix x = x0;
  Matrix x_prev = x0;
  Matrix y = Matrix::Zero(x0.rows(), x0.cols());
  Matrix m = y;
  Matrix m_hat = y;

  auto log = [&](std::uint64_t t) {
    trace.records.push_back({t, consensus_error(x), {}, {}, {}, {}, t * per_round});
    if (observe) observe(t, x);
  };
  log(0);

  for (std::uint64_t t = 0; t < rounds; ++t) {
    Matrix next;
    switch (method) {
      case ConsensusMethod::gossip:
        next = w.mix(x);
        break;
      case ConsensusMethod::gut: {
        y = laplace(x) + mu * (w.mix(y) - laplace(x_prev - x));
        next = x + y;
        break;
      }
      case ConsensusMethod::qg_gossip:
      case ConsensusMethod::qg_gutm: {
        m = beta * m + (1.0 - beta) * (x - x_prev);
        m_hat = beta * m + (1.0 - beta) * (laplace(x) + mu * (w.mix(m_hat) - laplace(x_prev - x)));
        next = x + m_hat;
        break;
      }
    }
    if (!next.allFinite()) {
      trace.divergent = true;
      trace.diagnostic = "non-finite iterate at round " + std::to_string(t + 1) + " (" +
                         trace.method + ", mu=" + format_double(mu) + ")";
      break;
    }
    x_prev = std::move(x);
    x = std::move(next);
    log(t + 1);
  }
  return trace;
}

/// Unit-Gaussian X0 with agents as rows.
inline Matrix gaussian_rows(std::size_t n, std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = rng.normal();
  }
  return x;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct TrainingOptions {
  std::uint64_t rounds = 100;
  std::size_t batch = 32;
  std::vector<std::uint64_t> seeds{1};
  std::uint64_t eval_every = 0;  // 0: only rounds 0 and T
  std::size_t threads = 1;
  bool step_decay = true;        // 10x at 50% and 75% of rounds
};

struct SummaryStat {
  double mean = 0.0;
  double stddev = 0.0;  // sample deviation; 0 for a single value
  std::size_t count = 0;
};

inline SummaryStat summarize(const std::vector<double>& values) {
  SummaryStat s;
  s.count = values.size();
  if (values.empty()) return s;
  for (double v : values) s.mean += v;
  s.mean /= static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

struct TrainingResult {
  std::vector<MetricTrace> per_seed;
  SummaryStat final_loss;
  SummaryStat final_accuracy;  // count 0 when the problem has no accuracy
  SummaryStat final_consensus;

  bool divergent() const {
    return std::any_of(per_seed.begin(), per_seed.end(), [](const auto& t) { return t.divergent; });
  }
};

/// Gradient oracle over a problem's mini-batch streams for one seed.
struct ProblemOracle {
  const Problem* problem = nullptr;
  std::size_t batch = 32;
  std::uint64_t seed = 0;

  Vector operator()(std::size_t agent, std::uint64_t round, const Vector& point) const {
    return problem->loss_and_grad(point, problem->sample_batch(agent, round, batch, seed)).grad;
  }
};

namespace detail {

inline bool all_finite(const States& states) {
  return std::all_of(states.begin(), states.end(), [](const auto& s) { return s.x.allFinite(); });
}

inline MetricRecord evaluate_round(const Problem& problem, const States& states, std::uint64_t t,
                                   std::optional<double> eta, std::uint64_t comm, std::size_t threads) {
  MetricRecord r;
  r.round = t;
  r.consensus_error = consensus_error(stack_parameters(states));
  std::vector<double> local(states.size());
  parallel_for(states.size(), threads,
               [&](std::size_t i) { local[i] = problem.local_objective(i, states[i].x).loss; });
  double total = 0.0;
  for (double v : local) total += v;  // fixed order
  r.mean_loss = total / static_cast<double>(states.size());
  const auto eval = problem.evaluate(average_model(states));
  r.avg_model_loss = eval.loss;
  r.avg_model_accuracy = eval.accuracy;
  r.eta = eta;
  r.comm_scalars = comm;
  return r;
}

}  // namespace detail

/// Runs spec on problem for every seed. All agents start at
/// problem.initial_point(seed). Metrics are taken every eval_every rounds and
/// at the final round; losses and accuracy refer to the averaged model, except
/// mean_loss = (1/n) sum_i f_i(x_i). A non-finite state ends that seed's trace
/// early with divergent = true.
inline TrainingResult run_training(const MixingMatrix& w, const Problem& problem,
                                   AlgorithmSpec spec, const TrainingOptions& opt) {
  spec.validate();
  if (opt.seeds.empty()) throw InvalidArgument("run_training: seeds must be non-empty");
  if (opt.rounds < 1) throw InvalidArgument("run_training: rounds must be at least 1");
  if (opt.batch < 1) throw InvalidArgument("run_training: batch must be at least 1");
  if (problem.num_agents() != w.size()) {
    throw InvalidArgument("run_training: problem has " + std::to_string(problem.num_agents()) +
                          " agents, topology has " + std::to_string(w.size()));
  }
  if (opt.step_decay) spec.eta = StepSchedule::step_decay(spec.eta.base, opt.rounds);
  const std::uint64_t cost = comm_cost(spec, problem.dim(), w);

  TrainingResult result;
  std::vector<double> losses, accuracies, consensus;
  for (std::uint64_t seed : opt.seeds) {
    MetricTrace trace;
    trace.method = std::string(to_string(spec.effective_kind()));
    trace.topology = w.kind();
    trace.n = w.size();
    trace.seeds = {seed};

    const Vector x0 = problem.initial_point(seed);
    Matrix stacked(static_cast<Eigen::Index>(w.size()), x0.size());
    stacked.rowwise() = x0.transpose();
    States states = init_states(stacked, w);
    const ProblemOracle oracle{&problem, opt.batch, seed};

    trace.records.push_back(detail::evaluate_round(problem, states, 0, spec.eta.at(0), 0, opt.threads));
    for (std::uint64_t t = 0; t < opt.rounds; ++t) {
      try {
        states = step(states, w, spec, oracle, opt.threads);
      } catch (const NonFiniteError& e) {
        trace.divergent = true;
        trace.diagnostic = e.what();
        break;
      }
      if (!detail::all_finite(states)) {
        trace.divergent = true;
        trace.diagnostic = "non-finite parameters after round " + std::to_string(t + 1);
        break;
      }
      const std::uint64_t done = t + 1;
      const bool due = done == opt.rounds || (opt.eval_every > 0 && done % opt.eval_every == 0);
      if (!due) continue;
      auto rec = detail::evaluate_round(problem, states, done, spec.eta.at(t), done * cost, opt.threads);
      if (!std::isfinite(*rec.avg_model_loss) || !std::isfinite(*rec.mean_loss) ||
          !std::isfinite(rec.consensus_error)) {
        trace.divergent = true;
        trace.diagnostic = "non-finite metric at round " + std::to_string(done);
        break;
      }
      trace.records.push_back(rec);
    }
    if (!trace.divergent) {
      const auto& last = trace.last();
      losses.push_back(*last.avg_model_loss);
      consensus.push_back(last.consensus_error);
      if (last.avg_model_accuracy) accuracies.push_back(*last.avg_model_accuracy);
    }
    result.per_seed.push_back(std::move(trace));
  }
  result.final_loss = summarize(losses);
  result.final_accuracy = summarize(accuracies);
  result.final_consensus = summarize(consensus);
  return result;
}

// ---------------------------------------------------------------------------
// Cross-form equivalence
// ---------------------------------------------------------------------------

struct EquivalenceReport {
  std::vector<std::string> forms;            // compared against the first
  std::vector<double> max_deviation;         // per compared form
  std::vector<double> per_round;             // max over forms, rounds 1..T
  double deviation = 0.0;
  double tol = 0.0;
  bool pass = false;
  std::string diagnostic;  // set when a form produced a non-finite value
};

/// Runs the copy-based, matrix, bias-correction, and memory-efficient GUT
/// forms on identical gradient streams and reports the largest relative
/// Frobenius deviation of X from the copy-based run. Pass iff deviation <= tol
/// and every form stays finite.
inline EquivalenceReport check_equivalence(const MixingMatrix& w, const Problem& problem,
                                           AlgorithmSpec spec, std::uint64_t rounds, double tol,
                                           std::uint64_t seed = 1, std::size_t batch = 32,
                                           std::optional<Matrix> x0 = std::nullopt) {
  spec.validate();
  if (!is_gut_family(spec.kind) || spec.kind == AlgorithmKind::GUTm ||
      spec.kind == AlgorithmKind::GUTmN || spec.kind == AlgorithmKind::QG_GUTm ||
      spec.kind == AlgorithmKind::QG_GUTmN || spec.kind == AlgorithmKind::QG_GUTm_impl) {
    throw InvalidArgument("check_equivalence: algorithm must be a plain GUT form");
  }
  if (problem.num_agents() != w.size()) throw InvalidArgument("check_equivalence: agent count mismatch");
  if (!x0) {
    const Vector p = problem.initial_point(seed);
    x0 = Matrix(static_cast<Eigen::Index>(w.size()), p.size());
    x0->rowwise() = p.transpose();
  }

  const std::vector<AlgorithmKind> kinds{AlgorithmKind::GUT, AlgorithmKind::GUT_matrix,
                                         AlgorithmKind::GUT_bias, AlgorithmKind::GUT_memeff};
  std::vector<States> states(kinds.size(), init_states(*x0, w));
  const ProblemOracle oracle{&problem, batch, seed};

  EquivalenceReport report;
  report.tol = tol;
  for (std::size_t f = 1; f < kinds.size(); ++f) report.forms.emplace_back(to_string(kinds[f]));
  report.max_deviation.assign(kinds.size() - 1, 0.0);

  for (std::uint64_t t = 0; t < rounds; ++t) {
    try {
      for (std::size_t f = 0; f < kinds.size(); ++f) {
        AlgorithmSpec s = spec;
        s.kind = kinds[f];
        s.nesterov = false;
        states[f] = step(states[f], w, s, oracle);
      }
    } catch (const NonFiniteError& e) {
      report.diagnostic = e.what();
      report.pass = false;
      return report;
    }
    const Matrix ref = stack_parameters(states[0]);
    const double scale = std::max(ref.norm(), std::numeric_limits<double>::min());
    double worst = 0.0;
    for (std::size_t f = 1; f < kinds.size(); ++f) {
      const double dev = (stack_parameters(states[f]) - ref).norm() / scale;
      report.max_deviation[f - 1] = std::max(report.max_deviation[f - 1], dev);
      worst = std::max(worst, dev);
    }
    report.per_round.push_back(worst);
    report.deviation = std::max(report.deviation, worst);
  }
  report.pass = report.deviation <= tol;
  return report;
}

}  // namespace gutsim

#endif  // GUTSIM_HARNESS_HPP
