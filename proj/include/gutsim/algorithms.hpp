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

#ifndef GUTSIM_ALGORITHMS_HPP
#define GUTSIM_ALGORITHMS_HPP

#include "gutsim/common.hpp"
#include "gutsim/topology.hpp"

#include <array>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace gutsim {

// ---------------------------------------------------------------------------
// Specs
// ---------------------------------------------------------------------------

enum class AlgorithmKind {
  DSGD,
  DSGDm,
  DSGDmN,
  QG_DSGDm,
  QG_DSGDmN,
  GT,
  GUT,
  GUTm,
  GUTmN,
  QG_GUTm,
  QG_GUTmN,
  QG_GUTm_impl,
  GUT_matrix,
  GUT_bias,
  GUT_memeff,
  RuleA,
  RuleB,
};

inline constexpr std::array<std::pair<AlgorithmKind, std::string_view>, 17> kAlgorithmNames{{
    {AlgorithmKind::DSGD, "DSGD"},
    {AlgorithmKind::DSGDm, "DSGDm"},
    {AlgorithmKind::DSGDmN, "DSGDmN"},
    {AlgorithmKind::QG_DSGDm, "QG-DSGDm"},
    {AlgorithmKind::QG_DSGDmN, "QG-DSGDmN"},
    {AlgorithmKind::GT, "GT"},
    {AlgorithmKind::GUT, "GUT"},
    {AlgorithmKind::GUTm, "GUTm"},
    {AlgorithmKind::GUTmN, "GUTmN"},
    {AlgorithmKind::QG_GUTm, "QG-GUTm"},
    {AlgorithmKind::QG_GUTmN, "QG-GUTmN"},
    {AlgorithmKind::QG_GUTm_impl, "QG-GUTm-impl"},
    {AlgorithmKind::GUT_matrix, "GUT-matrix"},
    {AlgorithmKind::GUT_bias, "GUT-bias"},
    {AlgorithmKind::GUT_memeff, "GUT-memeff"},
    {AlgorithmKind::RuleA, "RuleA"},
    {AlgorithmKind::RuleB, "RuleB"},
}};

inline std::string_view to_string(AlgorithmKind kind) {
  for (const auto& [k, name] : kAlgorithmNames) {
    if (k == kind) return name;
  }
  return "?";
}

inline AlgorithmKind parse_algorithm_kind(std::string_view name) {
  for (const auto& [k, n] : kAlgorithmNames) {
    if (n == name) return k;
  }
  std::string valid;
  for (const auto& [k, n] : kAlgorithmNames) {
    if (!valid.empty()) valid += ", ";
    valid += n;
  }
  throw InvalidArgument("unknown algorithm '" + std::string(name) + "' (expected one of " + valid + ")");
}

/// Algorithms that communicate a tracking/update variable instead of x.
inline bool is_gut_family(AlgorithmKind k) {
  switch (k) {
    case AlgorithmKind::GUT:
    case AlgorithmKind::GUTm:
    case AlgorithmKind::GUTmN:
    case AlgorithmKind::QG_GUTm:
    case AlgorithmKind::QG_GUTmN:
    case AlgorithmKind::QG_GUTm_impl:
    case AlgorithmKind::GUT_matrix:
    case AlgorithmKind::GUT_bias:
    case AlgorithmKind::GUT_memeff:
      return true;
    default:
      return false;
  }
}

/// Piecewise-constant step size: base, multiplied by factor at each milestone.
struct StepSchedule {
  double base = 0.1;
  std::vector<std::uint64_t> milestones;
  double factor = 0.1;

  double at(std::uint64_t round) const {
    double eta = base;
    for (auto m : milestones) {
      if (round >= m) eta *= factor;
    }
    return eta;
  }

  static StepSchedule constant(double eta) { return {eta, {}, 0.1}; }

  /// 10x decay after 50% and 75% of the rounds.
  static StepSchedule step_decay(double eta, std::uint64_t total_rounds) {
    return {eta, {total_rounds / 2, total_rounds * 3 / 4}, 0.1};
  }

  friend bool operator==(const StepSchedule&, const StepSchedule&) = default;
};

struct AlgorithmSpec {
  AlgorithmKind kind = AlgorithmKind::GUT;
  StepSchedule eta = StepSchedule::constant(0.1);
  double mu = 0.9;
  double beta = 0.9;
  bool nesterov = false;

  /// Kind with the nesterov flag folded in (DSGDm + nesterov -> DSGDmN, ...).
  AlgorithmKind effective_kind() const {
    if (!nesterov) return kind;
    switch (kind) {
      case AlgorithmKind::DSGDm: return AlgorithmKind::DSGDmN;
      case AlgorithmKind::QG_DSGDm: return AlgorithmKind::QG_DSGDmN;
      case AlgorithmKind::GUTm: return AlgorithmKind::GUTmN;
      case AlgorithmKind::QG_GUTm: return AlgorithmKind::QG_GUTmN;
      default: return kind;
    }
  }

  void validate() const {
    if (!(eta.base > 0.0) || !(eta.factor > 0.0)) throw InvalidArgument("step size must be positive");
    if (!(mu >= 0.0 && mu < 1.0)) throw InvalidArgument("mu must lie in [0, 1)");
    if (!(beta >= 0.0 && beta < 1.0)) throw InvalidArgument("beta must lie in [0, 1)");
  }
};

// ---------------------------------------------------------------------------
// State
// ---------------------------------------------------------------------------

/// One agent's view between rounds.
struct AgentState {
  Vector x;           // parameters
  Vector s;           // sum_j w_ij x_hat_j
  Vector y_prev;      // last transmitted update / tracking variable
  Vector delta_prev;  // last delta
  Vector m;           // momentum buffer
  Vector bias;        // B column (bias-correction form)
  Vector g_prev;      // last gradient (GT, matrix form)
  Vector x_prev;      // parameters one round back (rule / matrix form)
  std::vector<Vector> copies;  // x_hat_j, aligned with W.neighbors(i); own slot mirrors x
  std::uint64_t round = 0;
};

using States = std::vector<AgentState>;

/// A stochastic gradient source. Called as oracle(agent, round, point); the
/// noise must depend only on (agent, round) so replays are exact.
template <class F>
concept GradientOracle = requires(const F& f, std::size_t agent, std::uint64_t round,
                                  const Vector& point) {
  { f(agent, round, point) } -> std::convertible_to<Vector>;
};

/// Agents as rows.
inline Matrix stack_parameters(const States& states) {
  if (states.empty()) return {};
  Matrix x(static_cast<Eigen::Index>(states.size()), states.front().x.size());
  for (std::size_t i = 0; i < states.size(); ++i) x.row(static_cast<Eigen::Index>(i)) = states[i].x.transpose();
  return x;
}

inline States init_states(const Matrix& x0, const MixingMatrix& w) {
  if (static_cast<std::size_t>(x0.rows()) != w.size()) {
    throw InvalidArgument("init_states: X0 has " + std::to_string(x0.rows()) +
                          " rows but the mixing matrix has " + std::to_string(w.size()) + " agents");
  }
  if (!x0.allFinite()) throw InvalidArgument("init_states: X0 must be finite");
  const auto d = x0.cols();
  States states(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    auto& st = states[i];
    st.x = x0.row(static_cast<Eigen::Index>(i)).transpose();
    st.s = weighted_sum(w, i, [&](std::size_t j) -> Vector {
      return x0.row(static_cast<Eigen::Index>(j)).transpose();
    });
    for (Vector* buf : {&st.y_prev, &st.delta_prev, &st.m, &st.bias, &st.g_prev, &st.x_prev}) {
      *buf = Vector::Zero(d);
    }
    for (const auto& nb : w.neighbors(i)) st.copies.push_back(x0.row(static_cast<Eigen::Index>(nb.index)).transpose());
  }
  return states;
}

// ---------------------------------------------------------------------------
// Round helpers
// ---------------------------------------------------------------------------

namespace detail {

inline std::uint64_t common_round(const States& states, const MixingMatrix& w) {
  if (states.size() != w.size()) {
    throw InvalidArgument("round: " + std::to_string(states.size()) + " states for " +
                          std::to_string(w.size()) + " agents");
  }
  if (states.empty()) throw InvalidArgument("round: no agents");
  const auto t = states.front().round;
  for (const auto& st : states) {
    if (st.round != t) throw InvalidArgument("round: agents are not synchronised");
  }
  return t;
}

inline void check_finite(const Vector& v, std::size_t agent, std::uint64_t round, const char* what) {
  if (!v.allFinite()) throw NonFiniteError(agent, round, what);
}

template <GradientOracle Oracle>
Vector gradient(const Oracle& oracle, std::size_t agent, std::uint64_t round, const Vector& point) {
  check_finite(point, agent, round, "parameters");
  Vector g = oracle(agent, round, point);
  check_finite(g, agent, round, "gradient");
  return g;
}

/// sum_k w_ik copies_k over agent i's neighbourhood.
inline Vector mixed_from_copies(const MixingMatrix& w, std::size_t i, const AgentState& st) {
  auto nbs = w.neighbors(i);
  Vector acc = nbs[0].weight * st.copies[0];
  for (std::size_t k = 1; k < nbs.size(); ++k) acc += nbs[k].weight * st.copies[k];
  return acc;
}

/// sum_k w_ik (copies_k - x_i): the gossip pull toward the neighbourhood.
inline Vector pull_from_copies(const MixingMatrix& w, std::size_t i, const AgentState& st) {
  auto nbs = w.neighbors(i);
  Vector acc = nbs[0].weight * (st.copies[0] - st.x);
  for (std::size_t k = 1; k < nbs.size(); ++k) acc += nbs[k].weight * (st.copies[k] - st.x);
  return acc;
}

/// Same sums as above but reading neighbours' live parameters.
inline Vector mixed_from_states(const MixingMatrix& w, std::size_t i, const States& states) {
  return weighted_sum(w, i, [&](std::size_t j) -> const Vector& { return states[j].x; });
}

inline Vector pull_from_states(const MixingMatrix& w, std::size_t i, const States& states) {
  return weighted_sum(w, i, [&](std::size_t j) -> Vector { return states[j].x - states[i].x; });
}

/// Applies each agent's transmitted update to its own x and to every
/// neighbour-held copy, then refreshes s from the copies.
inline void apply_transmitted(States& next, const MixingMatrix& w, const std::vector<Vector>& sent,
                              double eta) {
  for (std::size_t i = 0; i < next.size(); ++i) {
    auto& st = next[i];
    st.x -= eta * sent[i];
    auto nbs = w.neighbors(i);
    for (std::size_t k = 0; k < nbs.size(); ++k) {
      if (nbs[k].index == i) {
        st.copies[k] = st.x;
      } else {
        st.copies[k] -= eta * sent[nbs[k].index];
      }
    }
    st.s = mixed_from_copies(w, i, st);
  }
}

/// Copies track neighbours' x exactly (baselines transmit x itself).
inline void refresh_copies(States& next, const MixingMatrix& w) {
  for (std::size_t i = 0; i < next.size(); ++i) {
    auto nbs = w.neighbors(i);
    for (std::size_t k = 0; k < nbs.size(); ++k) next[i].copies[k] = next[nbs[k].index].x;
    next[i].s = mixed_from_copies(w, i, next[i]);
  }
}

inline void require_kind(bool ok, AlgorithmKind kind, const char* fn) {
  if (!ok) throw InvalidArgument(std::string(fn) + " does not run " + std::string(to_string(kind)));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Global update tracking (explicit neighbour copies)
// ---------------------------------------------------------------------------

/// One synchronous round of GUT with explicit neighbour copies; also runs the
/// local-momentum variants GUTm / GUTmN, whose momentum buffer smooths the
/// gradient before it enters delta.
///
///   g_i     = grad F_i(sum_j w_ij xhat_j)
///   delta_i = g_i - (1/eta) sum_j w_ij (xhat_j - x_i)
///   y_i     = delta_i + mu [sum_j w_ij (y_j^prev - (1/eta)(xhat_j - x_i)) - delta_i^prev]
///   x_i    -= eta y_i,   xhat_j -= eta y_j
template <GradientOracle Oracle>
States gut_round(const States& states, const MixingMatrix& w, const AlgorithmSpec& spec,
                 const Oracle& oracle, std::size_t threads = 1) {
  const auto kind = spec.effective_kind();
  detail::require_kind(kind == AlgorithmKind::GUT || kind == AlgorithmKind::GUTm ||
                           kind == AlgorithmKind::GUTmN,
                       kind, "gut_round");
  const auto t = detail::common_round(states, w);
  const double eta = spec.eta.at(t);
  const std::size_t n = states.size();
  std::vector<Vector> sent(n), delta(n), mom(n);

  parallel_for(n, threads, [&](std::size_t i) {
    const auto& st = states[i];
    const Vector g = detail::gradient(oracle, i, t, detail::mixed_from_copies(w, i, st));
    Vector drive = g;
    if (kind == AlgorithmKind::GUT) {
      mom[i] = st.m;
    } else {
      mom[i] = spec.beta * st.m + g;
      drive = kind == AlgorithmKind::GUTm ? mom[i] : Vector(g + spec.beta * mom[i]);
    }
    delta[i] = drive - detail::pull_from_copies(w, i, st) / eta;

    auto nbs = w.neighbors(i);
    Vector corr = nbs[0].weight * (states[nbs[0].index].y_prev - (st.copies[0] - st.x) / eta);
    for (std::size_t k = 1; k < nbs.size(); ++k) {
      corr += nbs[k].weight * (states[nbs[k].index].y_prev - (st.copies[k] - st.x) / eta);
    }
    corr -= st.delta_prev;
    sent[i] = delta[i] + spec.mu * corr;
    detail::check_finite(sent[i], i, t, "update");
  });

  // SendReceive barrier: every y is known from here on.
  States next = states;
  detail::apply_transmitted(next, w, sent, eta);
  for (std::size_t i = 0; i < n; ++i) {
    next[i].y_prev = std::move(sent[i]);
    next[i].delta_prev = std::move(delta[i]);
    next[i].m = std::move(mom[i]);
    next[i].round = t + 1;
  }
  return next;
}

/// Quasi-global momentum on top of update tracking.
///
/// QG-GUTm:      y = delta + mu [sum_j w_ij (m_j^prev - (1/eta)(xhat_j - x_i)) - delta^prev],
///               m = beta m^prev + (1 - beta) y, transmit m.
/// QG-GUTm-impl: the correction scales (xhat_j - x_i) by (1 + beta)/eta and
///               m = beta m^prev + y.
/// QG-GUTmN:     as QG-GUTm but transmits the look-ahead beta m + (1 - beta) y.
template <GradientOracle Oracle>
States qg_gutm_round(const States& states, const MixingMatrix& w, const AlgorithmSpec& spec,
                     const Oracle& oracle, std::size_t threads = 1) {
  const auto kind = spec.effective_kind();
  detail::require_kind(kind == AlgorithmKind::QG_GUTm || kind == AlgorithmKind::QG_GUTmN ||
                           kind == AlgorithmKind::QG_GUTm_impl,
                       kind, "qg_gutm_round");
  const auto t = detail::common_round(states, w);
  const double eta = spec.eta.at(t);
  const double beta = spec.beta;
  const bool impl = kind == AlgorithmKind::QG_GUTm_impl;
  const double pull_scale = impl ? 1.0 + beta : 1.0;
  const std::size_t n = states.size();
  std::vector<Vector> sent(n), delta(n), mom(n);

  parallel_for(n, threads, [&](std::size_t i) {
    const auto& st = states[i];
    const Vector g = detail::gradient(oracle, i, t, detail::mixed_from_copies(w, i, st));
    delta[i] = g - detail::pull_from_copies(w, i, st) / eta;

    auto nbs = w.neighbors(i);
    Vector corr = nbs[0].weight * (states[nbs[0].index].y_prev - pull_scale * (st.copies[0] - st.x) / eta);
    for (std::size_t k = 1; k < nbs.size(); ++k) {
      corr += nbs[k].weight * (states[nbs[k].index].y_prev - pull_scale * (st.copies[k] - st.x) / eta);
    }
    corr -= st.delta_prev;
    const Vector y = delta[i] + spec.mu * corr;

    if (impl) {
      mom[i] = beta * st.m + y;
      sent[i] = mom[i];
    } else {
      mom[i] = beta * st.m + (1.0 - beta) * y;
      sent[i] = kind == AlgorithmKind::QG_GUTmN ? Vector(beta * mom[i] + (1.0 - beta) * y) : mom[i];
    }
    detail::check_finite(sent[i], i, t, "update");
  });

  States next = states;
  detail::apply_transmitted(next, w, sent, eta);
  for (std::size_t i = 0; i < n; ++i) {
    next[i].y_prev = std::move(sent[i]);
    next[i].delta_prev = std::move(delta[i]);
    next[i].m = std::move(mom[i]);
    next[i].round = t + 1;
  }
  return next;
}

// ---------------------------------------------------------------------------
// Baselines
// ---------------------------------------------------------------------------

/// DSGD and its momentum variants. Gradients are taken at the local x_i and
/// the result is gossiped: x_i' = sum_j w_ij (x_j - eta d_j).
///
///   DSGD       d = g
///   DSGDm      m = beta m + g,  d = m
///   DSGDmN     m = beta m + g,  d = g + beta m
///   QG-DSGDm   d = g + beta m^prev, then m = beta m^prev + (1 - beta)(x - x')/eta
///   QG-DSGDmN  d = g + beta (beta m^prev + g), same buffer update
template <GradientOracle Oracle>
States baseline_round(const States& states, const MixingMatrix& w, const AlgorithmSpec& spec,
                      const Oracle& oracle, std::size_t threads = 1) {
  const auto kind = spec.effective_kind();
  detail::require_kind(kind == AlgorithmKind::DSGD || kind == AlgorithmKind::DSGDm ||
                           kind == AlgorithmKind::DSGDmN || kind == AlgorithmKind::QG_DSGDm ||
                           kind == AlgorithmKind::QG_DSGDmN,
                       kind, "baseline_round");
  const auto t = detail::common_round(states, w);
  const double eta = spec.eta.at(t);
  const double beta = spec.beta;
  const std::size_t n = states.size();
  std::vector<Vector> half(n), mom(n), grads(n);

  parallel_for(n, threads, [&](std::size_t i) {
    const auto& st = states[i];
    const Vector g = detail::gradient(oracle, i, t, st.x);
    Vector dir;
    switch (kind) {
      case AlgorithmKind::DSGD:
        dir = g;
        mom[i] = st.m;
        break;
      case AlgorithmKind::DSGDm:
        mom[i] = beta * st.m + g;
        dir = mom[i];
        break;
      case AlgorithmKind::DSGDmN:
        mom[i] = beta * st.m + g;
        dir = g + beta * mom[i];
        break;
      case AlgorithmKind::QG_DSGDm:
        dir = g + beta * st.m;
        break;
      default:  // QG_DSGDmN
        dir = g + beta * (beta * st.m + g);
        break;
    }
    half[i] = st.x - eta * dir;
    detail::check_finite(half[i], i, t, "update");
    grads[i] = g;
  });

  States next = states;
  for (std::size_t i = 0; i < n; ++i) {
    next[i].x = weighted_sum(w, i, [&](std::size_t j) -> const Vector& { return half[j]; });
    if (kind == AlgorithmKind::QG_DSGDm || kind == AlgorithmKind::QG_DSGDmN) {
      next[i].m = beta * states[i].m + (1.0 - beta) * (states[i].x - next[i].x) / eta;
    } else {
      next[i].m = std::move(mom[i]);
    }
    next[i].g_prev = std::move(grads[i]);
    next[i].x_prev = states[i].x;
    next[i].round = t + 1;
  }
  detail::refresh_copies(next, w);
  return next;
}

/// Gradient tracking: y_i = sum_j w_ij y_j^prev - g_i^prev + g_i (y = g at the
/// first round), x_i' = sum_j w_ij (x_j - eta y_j). Transmits both x and y.
template <GradientOracle Oracle>
States gradient_tracking_round(const States& states, const MixingMatrix& w,
                               const AlgorithmSpec& spec, const Oracle& oracle,
                               std::size_t threads = 1) {
  detail::require_kind(spec.kind == AlgorithmKind::GT, spec.kind, "gradient_tracking_round");
  const auto t = detail::common_round(states, w);
  const double eta = spec.eta.at(t);
  const std::size_t n = states.size();
  std::vector<Vector> track(n), grads(n), half(n);

  parallel_for(n, threads, [&](std::size_t i) {
    const auto& st = states[i];
    grads[i] = detail::gradient(oracle, i, t, st.x);
    if (t == 0) {
      track[i] = grads[i];
    } else {
      track[i] = weighted_sum(w, i, [&](std::size_t j) -> const Vector& { return states[j].y_prev; }) -
                 st.g_prev + grads[i];
    }
    half[i] = st.x - eta * track[i];
    detail::check_finite(half[i], i, t, "update");
  });

  States next = states;
  for (std::size_t i = 0; i < n; ++i) {
    next[i].x = weighted_sum(w, i, [&](std::size_t j) -> const Vector& { return half[j]; });
    next[i].x_prev = states[i].x;
    next[i].y_prev = std::move(track[i]);
    next[i].g_prev = std::move(grads[i]);
    next[i].round = t + 1;
  }
  detail::refresh_copies(next, w);
  return next;
}

// ---------------------------------------------------------------------------
// Ablation rules
// ---------------------------------------------------------------------------

/// The two naive update-tracking rules. Both share GUT's first term
/// Y = G - (1/eta)(W - I)X (gradients at the mixed point) and X' = X - eta Y.
///
///   Rule-a: + mu [W Y^prev - (G^prev - (1/eta)(W - I) X^prev)]
///   Rule-b: + mu [-(1/eta)(W - I)(X - X^prev)]
///
/// Round-0 history: the bracketed terms are zero.
template <GradientOracle Oracle>
States rule_round(const States& states, const MixingMatrix& w, const AlgorithmSpec& spec,
                  const Oracle& oracle, std::size_t threads = 1) {
  detail::require_kind(spec.kind == AlgorithmKind::RuleA || spec.kind == AlgorithmKind::RuleB,
                       spec.kind, "rule_round");
  const auto t = detail::common_round(states, w);
  const double eta = spec.eta.at(t);
  const std::size_t n = states.size();
  std::vector<Vector> sent(n), delta(n);

  parallel_for(n, threads, [&](std::size_t i) {
    const auto& st = states[i];
    const Vector g = detail::gradient(oracle, i, t, detail::mixed_from_states(w, i, states));
    delta[i] = g - detail::pull_from_states(w, i, states) / eta;
    Vector corr;
    if (spec.kind == AlgorithmKind::RuleA) {
      corr = weighted_sum(w, i, [&](std::size_t j) -> const Vector& { return states[j].y_prev; }) -
             st.delta_prev;
    } else if (t == 0) {
      corr = Vector::Zero(st.x.size());
    } else {
      const Vector own_step = st.x - st.x_prev;
      corr = -weighted_sum(w, i, [&](std::size_t j) -> Vector {
               return (states[j].x - states[j].x_prev) - own_step;
             }) / eta;
    }
    sent[i] = delta[i] + spec.mu * corr;
    detail::check_finite(sent[i], i, t, "update");
  });

  States next = states;
  for (std::size_t i = 0; i < n; ++i) {
    next[i].x_prev = states[i].x;
    next[i].x = states[i].x - eta * sent[i];
  }
  for (std::size_t i = 0; i < n; ++i) {
    next[i].y_prev = std::move(sent[i]);
    next[i].delta_prev = std::move(delta[i]);
    next[i].round = t + 1;
  }
  detail::refresh_copies(next, w);
  return next;
}

// ---------------------------------------------------------------------------
// Alternative GUT forms
// ---------------------------------------------------------------------------

enum class GutForm { matrix, bias, memeff };

namespace detail {

inline Matrix stack(const States& states, Vector AgentState::*field) {
  Matrix out(static_cast<Eigen::Index>(states.size()), states.front().x.size());
  for (std::size_t i = 0; i < states.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = (states[i].*field).transpose();
  return out;
}

template <GradientOracle Oracle>
Matrix gradients_at(const Matrix& points, const Oracle& oracle, std::uint64_t t, std::size_t threads) {
  Matrix g(points.rows(), points.cols());
  parallel_for(static_cast<std::size_t>(points.rows()), threads, [&](std::size_t i) {
    const Vector p = points.row(static_cast<Eigen::Index>(i)).transpose();
    g.row(static_cast<Eigen::Index>(i)) = gradient(oracle, i, t, p).transpose();
  });
  return g;
}

inline void check_finite_rows(const Matrix& m, std::uint64_t t) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    if (!m.row(i).allFinite()) throw NonFiniteError(static_cast<std::size_t>(i), t, "update");
  }
}

}  // namespace detail

/// Runs one of the algebraically equivalent GUT formulations.
///
/// matrix: Y = G - (1/eta)(W-I)X + mu [W Y^prev - G^prev - (1/eta)(W-I)(X - X^prev)],
///         X' = X - eta Y, with dense W products over the stacked agent matrix.
/// bias:   X' = W X - eta (G + mu B),  B' = -(1/eta)[(2W - I)(X' - X) + eta G].
/// memeff: the per-agent recursion keeping only s_i = sum_j w_ij xhat_j.
///
/// All three read their round-0 history as Algorithm-1 state with
/// y^{-1} = delta^{-1} = 0: G^{-1} = (1/eta)(W-I)X^0 and B^0 = -(1/eta)(W-I)X^0,
/// both zero when the agents start synchronised.
template <GradientOracle Oracle>
States gut_form_round(const States& states, const MixingMatrix& w, const AlgorithmSpec& spec,
                      const Oracle& oracle, GutForm form, std::size_t threads = 1) {
  const AlgorithmKind expected = form == GutForm::matrix ? AlgorithmKind::GUT_matrix
                                 : form == GutForm::bias ? AlgorithmKind::GUT_bias
                                                         : AlgorithmKind::GUT_memeff;
  detail::require_kind(spec.kind == expected, spec.kind, "gut_form_round");
  const auto t = detail::common_round(states, w);
  const double eta = spec.eta.at(t);
  const double mu = spec.mu;
  const std::size_t n = states.size();

  if (form == GutForm::memeff) {
    std::vector<Vector> sent(n), delta(n);
    parallel_for(n, threads, [&](std::size_t i) {
      const auto& st = states[i];
      const Vector g = detail::gradient(oracle, i, t, st.s);
      const Vector gap = (st.s - st.x) / eta;
      delta[i] = g - gap;
      const Vector nb_y = weighted_sum(w, i, [&](std::size_t j) -> const Vector& { return states[j].y_prev; });
      sent[i] = delta[i] + mu * (nb_y - gap - st.delta_prev);
      detail::check_finite(sent[i], i, t, "update");
    });
    States next = states;
    for (std::size_t i = 0; i < n; ++i) {
      next[i].x -= eta * sent[i];
      next[i].s -= eta * weighted_sum(w, i, [&](std::size_t j) -> const Vector& { return sent[j]; });
    }
    for (std::size_t i = 0; i < n; ++i) {
      next[i].y_prev = std::move(sent[i]);
      next[i].delta_prev = std::move(delta[i]);
      next[i].round = t + 1;
    }
    return next;
  }

  const Matrix& wm = w.weights();
  const Matrix id = Matrix::Identity(wm.rows(), wm.cols());
  const Matrix x = stack_parameters(states);
  const Matrix mixed = wm * x;
  const Matrix g = detail::gradients_at(mixed, oracle, t, threads);

  Matrix x_next;
  States next = states;
  if (form == GutForm::matrix) {
    Matrix y_prev = detail::stack(states, &AgentState::y_prev);
    Matrix g_prev = detail::stack(states, &AgentState::g_prev);
    Matrix x_prev = detail::stack(states, &AgentState::x_prev);
    if (t == 0) {
      y_prev.setZero();
      x_prev = x;
      g_prev = (wm - id) * x / eta;
    }
    const Matrix y = g - (wm - id) * x / eta + mu * (wm * y_prev - g_prev - (wm - id) * (x - x_prev) / eta);
    detail::check_finite_rows(y, t);
    x_next = x - eta * y;
    for (std::size_t i = 0; i < n; ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      next[i].y_prev = y.row(r).transpose();
      next[i].g_prev = g.row(r).transpose();
      next[i].x_prev = x.row(r).transpose();
    }
  } else {
    Matrix b = detail::stack(states, &AgentState::bias);
    if (t == 0) b = -(wm - id) * x / eta;
    x_next = mixed - eta * (g + mu * b);
    detail::check_finite_rows(x_next, t);
    const Matrix b_next = -((2.0 * wm - id) * (x_next - x) + eta * g) / eta;
    for (std::size_t i = 0; i < n; ++i) next[i].bias = b_next.row(static_cast<Eigen::Index>(i)).transpose();
  }
  const Matrix s_next = wm * x_next;
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    next[i].x = x_next.row(r).transpose();
    next[i].s = s_next.row(r).transpose();
    next[i].round = t + 1;
  }
  detail::refresh_copies(next, w);
  for (std::size_t i = 0; i < n; ++i) next[i].s = s_next.row(static_cast<Eigen::Index>(i)).transpose();
  return next;
}

/// Dispatches one synchronous round of whichever algorithm spec selects.
template <GradientOracle Oracle>
States step(const States& states, const MixingMatrix& w, const AlgorithmSpec& spec,
            const Oracle& oracle, std::size_t threads = 1) {
  switch (spec.effective_kind()) {
    case AlgorithmKind::DSGD:
    case AlgorithmKind::DSGDm:
    case AlgorithmKind::DSGDmN:
    case AlgorithmKind::QG_DSGDm:
    case AlgorithmKind::QG_DSGDmN:
      return baseline_round(states, w, spec, oracle, threads);
    case AlgorithmKind::GT:
      return gradient_tracking_round(states, w, spec, oracle, threads);
    case AlgorithmKind::GUT:
    case AlgorithmKind::GUTm:
    case AlgorithmKind::GUTmN:
      return gut_round(states, w, spec, oracle, threads);
    case AlgorithmKind::QG_GUTm:
    case AlgorithmKind::QG_GUTmN:
    case AlgorithmKind::QG_GUTm_impl:
      return qg_gutm_round(states, w, spec, oracle, threads);
    case AlgorithmKind::GUT_matrix:
      return gut_form_round(states, w, spec, oracle, GutForm::matrix, threads);
    case AlgorithmKind::GUT_bias:
      return gut_form_round(states, w, spec, oracle, GutForm::bias, threads);
    case AlgorithmKind::GUT_memeff:
      return gut_form_round(states, w, spec, oracle, GutForm::memeff, threads);
    case AlgorithmKind::RuleA:
    case AlgorithmKind::RuleB:
      return rule_round(states, w, spec, oracle, threads);
  }
  throw InvalidArgument("step: unhandled algorithm");
}

// ---------------------------------------------------------------------------
// Hyperparameters and communication
// ---------------------------------------------------------------------------

struct HyperparameterCheck {
  bool eta_ok = false;
  bool mu_ok = false;
  double eta_max = 0.0;
  double mu_max = 0.0;

  bool ok() const { return eta_ok && mu_ok; }
};

/// Convergence regime for GUT: eta <= rho / (7L) and mu / (1 - mu) <= rho / 42,
/// i.e. mu <= rho / (42 + rho). Advisory; runs outside it are allowed.
inline HyperparameterCheck validate_hyperparameters(double eta, double mu, double rho, double L) {
  if (!(rho > 0.0 && rho <= 1.0)) throw InvalidArgument("validate_hyperparameters: rho must lie in (0, 1]");
  if (!(L > 0.0)) throw InvalidArgument("validate_hyperparameters: L must be positive");
  HyperparameterCheck c;
  c.eta_max = rho / (7.0 * L);
  c.mu_max = rho / (42.0 + rho);
  c.eta_ok = eta <= c.eta_max;
  c.mu_ok = mu >= 0.0 && mu / (1.0 - mu) <= rho / 42.0;
  return c;
}

/// Scalars one agent sends per round: peers (self excluded) x d x multiplier,
/// multiplier 2 for gradient tracking (x and y) and 1 otherwise. Averaged over
/// agents; exact for regular graphs.
inline std::uint64_t comm_cost(const AlgorithmSpec& spec, std::size_t d, const MixingMatrix& w) {
  if (w.size() == 0) return 0;
  std::uint64_t peers = 0;
  for (std::size_t i = 0; i < w.size(); ++i) peers += w.degree(i);
  const std::uint64_t multiplier = spec.kind == AlgorithmKind::GT ? 2 : 1;
  return peers * d * multiplier / w.size();
}

}  // namespace gutsim

#endif  // GUTSIM_ALGORITHMS_HPP
