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

#ifndef GUTSIM_TOPOLOGY_HPP
#define GUTSIM_TOPOLOGY_HPP

#include "gutsim/common.hpp"

#include <Eigen/Eigenvalues>

#include <array>
#include <cmath>
#include <optional>
#include <ostream>
#include <queue>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace gutsim {

enum class TopologyKind { ring, dyck, torus, custom };

inline std::string_view to_string(TopologyKind kind) {
  switch (kind) {
    case TopologyKind::ring: return "ring";
    case TopologyKind::dyck: return "dyck";
    case TopologyKind::torus: return "torus";
    case TopologyKind::custom: return "custom";
  }
  return "custom";
}

inline TopologyKind parse_topology_kind(std::string_view name) {
  if (name == "ring") return TopologyKind::ring;
  if (name == "dyck") return TopologyKind::dyck;
  if (name == "torus") return TopologyKind::torus;
  throw InvalidArgument("unknown topology kind '" + std::string(name) +
                        "' (expected ring, dyck or torus)");
}

struct Neighbor {
  std::size_t index;
  double weight;
};

struct SpectralStats {
  double lambda2 = 0.0;
  double lambdaN = 0.0;
  double rho = 0.0;

  /// Positive spectral gap, i.e. the graph mixes.
  bool has_gap() const { return rho > 0.0; }
};

/// Gossip weights W together with the sparse neighbourhood structure.
///
/// neighbors(i) always lists agent i itself plus every j with w_ij != 0, in
/// ascending index order. All weighted sums in the library walk this list in
/// that order, so two code paths summing the same values agree bitwise.
class MixingMatrix {
 public:
  static MixingMatrix from_weights(Matrix weights, TopologyKind kind = TopologyKind::custom) {
    if (weights.rows() != weights.cols()) {
      throw InvalidArgument("mixing matrix must be square, got " +
                            std::to_string(weights.rows()) + "x" +
                            std::to_string(weights.cols()));
    }
    MixingMatrix w;
    w.kind_ = kind;
    w.weights_ = std::move(weights);
    const auto n = static_cast<std::size_t>(w.weights_.rows());
    w.neighbors_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const double v = w.weights_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        if (i == j || v != 0.0) w.neighbors_[i].push_back({j, v});
        if (j > i && (v != 0.0 || w.weights_(static_cast<Eigen::Index>(j),
                                              static_cast<Eigen::Index>(i)) != 0.0)) {
          w.edges_.emplace_back(i, j);
        }
      }
    }
    return w;
  }

  std::size_t size() const { return neighbors_.size(); }
  TopologyKind kind() const { return kind_; }
  const Matrix& weights() const { return weights_; }
  double weight(std::size_t i, std::size_t j) const {
    return weights_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }

  std::span<const Neighbor> neighbors(std::size_t i) const { return neighbors_[i]; }

  /// Number of peers of agent i, self excluded.
  std::size_t degree(std::size_t i) const { return neighbors_[i].size() - 1; }

  /// Undirected edges {i, j}, i < j, self-loops excluded.
  const std::vector<std::pair<std::size_t, std::size_t>>& edges() const { return edges_; }

  const std::optional<SpectralStats>& cached_spectral() const { return spectral_; }

  MixingMatrix with_spectral(const SpectralStats& stats) const {
    MixingMatrix copy = *this;
    copy.spectral_ = stats;
    return copy;
  }

  /// Row i of the result is sum_j w_ij X.row(j) (agents are rows).
  Matrix mix(const Matrix& x) const {
    Matrix out(x.rows(), x.cols());
    for (std::size_t i = 0; i < size(); ++i) {
      out.row(static_cast<Eigen::Index>(i)) = mix_row(i, x);
    }
    return out;
  }

  Eigen::RowVectorXd mix_row(std::size_t i, const Matrix& x) const {
    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(x.cols());
    for (const auto& nb : neighbors_[i]) acc += nb.weight * x.row(static_cast<Eigen::Index>(nb.index));
    return acc;
  }

 private:
  TopologyKind kind_ = TopologyKind::custom;
  Matrix weights_;
  std::vector<std::vector<Neighbor>> neighbors_;
  std::vector<std::pair<std::size_t, std::size_t>> edges_;
  std::optional<SpectralStats> spectral_;
};

/// Walks neighbors(i) in order and accumulates w_ij * value(j).
template <class ValueOf>
Vector weighted_sum(const MixingMatrix& w, std::size_t i, ValueOf&& value) {
  auto nbs = w.neighbors(i);
  Vector acc = nbs.front().weight * value(nbs.front().index);
  for (std::size_t k = 1; k < nbs.size(); ++k) acc += nbs[k].weight * value(nbs[k].index);
  return acc;
}

struct ValidationReport {
  std::vector<std::string> violations;

  bool ok() const { return violations.empty(); }
};

inline constexpr double kStochasticTolerance = 1e-12;

/// Checks the doubly-stochastic gossip assumptions and lists every violation.
inline ValidationReport validate_mixing(const MixingMatrix& w) {
  ValidationReport report;
  const Matrix& m = w.weights();
  const auto n = m.rows();
  if (n == 0) {
    report.violations.emplace_back("empty matrix");
    return report;
  }
  if (!m.allFinite()) report.violations.emplace_back("non-finite entries");

  for (Eigen::Index i = 0; i < n; ++i) {
    const double row = m.row(i).sum();
    if (std::abs(row - 1.0) > kStochasticTolerance) {
      report.violations.push_back("row " + std::to_string(i) + " sums to " + format_double(row));
    }
  }
  for (Eigen::Index j = 0; j < n; ++j) {
    const double col = m.col(j).sum();
    if (std::abs(col - 1.0) > kStochasticTolerance) {
      report.violations.push_back("column " + std::to_string(j) + " sums to " +
                                  format_double(col));
    }
  }
  bool symmetric = true;
  bool nonnegative = true;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (m(i, j) != m(j, i)) symmetric = false;
      if (m(i, j) < 0.0) nonnegative = false;
    }
  }
  if (!symmetric) report.violations.emplace_back("not symmetric");
  if (!nonnegative) report.violations.emplace_back("negative entries");

  std::vector<bool> seen(static_cast<std::size_t>(n), false);
  std::queue<std::size_t> frontier;
  frontier.push(0);
  seen[0] = true;
  std::size_t reached = 1;
  while (!frontier.empty()) {
    const std::size_t i = frontier.front();
    frontier.pop();
    for (const auto& nb : w.neighbors(i)) {
      if (!seen[nb.index]) {
        seen[nb.index] = true;
        ++reached;
        frontier.push(nb.index);
      }
    }
  }
  if (reached != static_cast<std::size_t>(n)) {
    report.violations.push_back("disconnected: " + std::to_string(reached) + " of " +
                                std::to_string(n) + " agents reachable from agent 0");
  }
  return report;
}

/// Second-largest and smallest eigenvalue of W and rho = 1 - max(|l2|, |lN|).
/// Returns the cached value when the matrix carries one.
inline SpectralStats spectral_stats(const MixingMatrix& w) {
  if (w.cached_spectral()) return *w.cached_spectral();
  const Matrix& m = w.weights();
  if (m.rows() == 0) throw InvalidArgument("spectral_stats: empty matrix");
  if (!(m == m.transpose())) {
    throw InvalidArgument("spectral_stats: matrix is not symmetric");
  }
  if (m.rows() == 1) return {0.0, 0.0, 1.0};

  Eigen::SelfAdjointEigenSolver<Matrix> solver(m);
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("spectral_stats: eigensolver did not converge");
  }
  const Matrix residual = m * solver.eigenvectors() -
                          solver.eigenvectors() * solver.eigenvalues().asDiagonal();
  const double worst = residual.cwiseAbs().maxCoeff();
  if (worst > 1e-12) {
    throw std::runtime_error("spectral_stats: eigen-residual " + format_double(worst) +
                             " exceeds 1e-12");
  }
  const auto& ev = solver.eigenvalues();  // ascending
  SpectralStats s;
  s.lambdaN = ev(0);
  s.lambda2 = ev(ev.size() - 2);
  s.rho = 1.0 - std::max(std::abs(s.lambda2), std::abs(s.lambdaN));
  return s;
}

namespace detail {

using EdgeSet = std::set<std::pair<std::size_t, std::size_t>>;

inline void add_edge(EdgeSet& edges, std::size_t a, std::size_t b) {
  if (a == b) return;
  edges.emplace(std::min(a, b), std::max(a, b));
}

inline MixingMatrix uniform_from_edges(std::size_t n, const EdgeSet& edges, TopologyKind kind) {
  std::vector<std::size_t> degree(n, 0);
  for (const auto& [a, b] : edges) {
    ++degree[a];
    ++degree[b];
  }
  for (std::size_t i = 1; i < n; ++i) {
    if (degree[i] != degree[0]) {
      throw InvalidArgument("uniform weights need a regular graph");
    }
  }
  const double w = 1.0 / static_cast<double>(degree[0] + 1);
  Matrix m = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = w;
  for (const auto& [a, b] : edges) {
    m(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = w;
    m(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a)) = w;
  }
  return MixingMatrix::from_weights(std::move(m), kind);
}

// Chords of the 32-vertex Dyck drawing (1-indexed); the rest is the ring.
inline constexpr std::array<std::pair<int, int>, 16> kDyckChords{{
    {1, 20}, {4, 17}, {9, 28}, {12, 25}, {5, 24}, {8, 21}, {13, 32}, {16, 29},
    {2, 7}, {6, 11}, {10, 15}, {14, 19}, {18, 23}, {22, 27}, {26, 31}, {3, 30},
}};

}  // namespace detail

struct Grid {
  std::size_t rows = 0;
  std::size_t cols = 0;
};

/// Most-square factorisation rows x cols = n with 3 <= rows <= cols.
inline std::optional<Grid> default_torus_grid(std::size_t n) {
  for (auto r = static_cast<std::size_t>(std::sqrt(static_cast<double>(n))) + 1; r >= 3; --r) {
    if (r * r <= n && n % r == 0 && n / r >= 3) return Grid{r, n / r};
  }
  return std::nullopt;
}

/// Builds one of the uniform-weight benchmark graphs (self-loop included in
/// the peer count) and attaches its spectral statistics.
inline MixingMatrix build_topology(TopologyKind kind, std::size_t n,
                                   std::optional<Grid> grid = std::nullopt) {
  detail::EdgeSet edges;
  switch (kind) {
    case TopologyKind::ring:
      if (n < 3) throw InvalidArgument("ring topology needs n >= 3, got " + std::to_string(n));
      for (std::size_t i = 0; i < n; ++i) detail::add_edge(edges, i, (i + 1) % n);
      break;
    case TopologyKind::dyck:
      if (n != 32) throw InvalidArgument("dyck topology is defined for n = 32 only, got " + std::to_string(n));
      for (std::size_t i = 0; i < n; ++i) detail::add_edge(edges, i, (i + 1) % n);
      for (const auto& [a, b] : detail::kDyckChords) {
        detail::add_edge(edges, static_cast<std::size_t>(a - 1), static_cast<std::size_t>(b - 1));
      }
      break;
    case TopologyKind::torus: {
      if (!grid) grid = default_torus_grid(n);
      if (!grid) {
        throw InvalidArgument("torus topology: " + std::to_string(n) +
                              " has no factorisation rows x cols with rows, cols >= 3");
      }
      if (grid->rows * grid->cols != n || grid->rows < 3 || grid->cols < 3) {
        throw InvalidArgument("torus topology: grid " + std::to_string(grid->rows) + "x" +
                              std::to_string(grid->cols) + " does not factor n = " +
                              std::to_string(n) + " with rows, cols >= 3");
      }
      const auto id = [&](std::size_t r, std::size_t c) { return r * grid->cols + c; };
      for (std::size_t r = 0; r < grid->rows; ++r) {
        for (std::size_t c = 0; c < grid->cols; ++c) {
          detail::add_edge(edges, id(r, c), id((r + 1) % grid->rows, c));
          detail::add_edge(edges, id(r, c), id(r, (c + 1) % grid->cols));
        }
      }
      break;
    }
    case TopologyKind::custom:
      throw InvalidArgument("custom topologies are built with MixingMatrix::from_weights");
  }
  MixingMatrix w = detail::uniform_from_edges(n, edges, kind);
  return w.with_spectral(spectral_stats(w));
}

/// n lines of n comma-separated weights, 17 significant digits.
inline void write_csv(const MixingMatrix& w, std::ostream& out) {
  const Matrix& m = w.weights();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
}

}  // namespace gutsim

#endif  // GUTSIM_TOPOLOGY_HPP
