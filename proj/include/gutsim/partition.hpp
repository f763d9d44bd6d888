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

#ifndef GUTSIM_PARTITION_HPP
#define GUTSIM_PARTITION_HPP

#include "gutsim/common.hpp"
#include "gutsim/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace gutsim {

/// Disjoint per-agent sample assignment. Read-only once built.
struct Partition {
  std::vector<std::vector<std::size_t>> assignments;
  double alpha = 0.0;
  std::uint64_t seed = 0;       // seed requested by the caller
  std::uint64_t seed_used = 0;  // seed of the accepted draw (seed + redraws)

  std::size_t num_agents() const { return assignments.size(); }
};

inline constexpr int kMaxPartitionRedraws = 100;

namespace detail {

inline std::size_t num_classes(std::span<const int> labels) {
  int top = -1;
  for (int l : labels) {
    if (l < 0) throw InvalidArgument("class labels must be non-negative");
    top = std::max(top, l);
  }
  return static_cast<std::size_t>(top + 1);
}

/// Integer counts summing to total, proportional to weights (largest remainder;
/// ties go to the lower agent index).
inline std::vector<std::size_t> largest_remainder(const std::vector<double>& weights,
                                                  std::size_t total) {
  const std::size_t n = weights.size();
  std::vector<std::size_t> counts(n);
  std::vector<double> remainder(n);
  std::size_t assigned = 0;
  for (std::size_t a = 0; a < n; ++a) {
    const double exact = weights[a] * static_cast<double>(total);
    counts[a] = static_cast<std::size_t>(std::floor(exact));
    remainder[a] = exact - static_cast<double>(counts[a]);
    assigned += counts[a];
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  // Floating error can leave assigned off by more than n in pathological
  // cases; cycling the order keeps the total exact regardless.
  for (std::size_t k = 0; assigned < total; ++k, ++assigned) ++counts[order[k % n]];
  for (std::size_t k = n; assigned > total; ++k) {
    auto& c = counts[order[n - 1 - (k % n)]];
    if (c > 0) {
      --c;
      --assigned;
    }
  }
  return counts;
}

/// Dirichlet(alpha * 1) proportions, normalised from log-gamma draws.
inline std::vector<double> dirichlet(Rng& rng, std::size_t n, double alpha) {
  std::vector<double> logs(n);
  for (auto& l : logs) l = rng.log_gamma_variate(alpha);
  const double top = *std::max_element(logs.begin(), logs.end());
  std::vector<double> p(n);
  double total = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    p[a] = std::exp(logs[a] - top);
    total += p[a];
  }
  for (auto& v : p) v /= total;
  return p;
}

inline std::vector<std::vector<std::size_t>> draw_assignment(std::span<const int> labels,
                                                             std::size_t classes,
                                                             std::size_t n_agents, double alpha,
                                                             std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::vector<std::size_t>> by_class(classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    by_class[static_cast<std::size_t>(labels[i])].push_back(i);
  }
  std::vector<std::vector<std::size_t>> out(n_agents);
  for (auto& members : by_class) {
    rng.shuffle(std::span<std::size_t>(members));
    const auto p = dirichlet(rng, n_agents, alpha);
    const auto counts = largest_remainder(p, members.size());
    std::size_t cursor = 0;
    for (std::size_t a = 0; a < n_agents; ++a) {
      out[a].insert(out[a].end(), members.begin() + static_cast<std::ptrdiff_t>(cursor),
                    members.begin() + static_cast<std::ptrdiff_t>(cursor + counts[a]));
      cursor += counts[a];
    }
  }
  for (auto& a : out) std::sort(a.begin(), a.end());
  return out;
}

}  // namespace detail

/// Label-skewed split of sample indices: for each class independently a
/// Dirichlet(alpha) proportion vector decides how the class's shuffled samples
/// are cut into contiguous per-agent blocks. If some agent ends up with fewer
/// than min_per_agent samples the whole draw is repeated with seed + 1.
inline Partition dirichlet_partition(std::span<const int> labels, std::size_t n_agents,
                                     double alpha, std::uint64_t seed,
                                     std::size_t min_per_agent = 1) {
  if (n_agents == 0) throw InvalidArgument("dirichlet_partition: n_agents must be positive");
  if (n_agents > labels.size()) {
    throw InvalidArgument("dirichlet_partition: " + std::to_string(n_agents) +
                          " agents but only " + std::to_string(labels.size()) + " samples");
  }
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw InvalidArgument("dirichlet_partition: alpha must be a positive finite number");
  }
  const std::size_t classes = detail::num_classes(labels);
  for (int attempt = 0; attempt <= kMaxPartitionRedraws; ++attempt) {
    const std::uint64_t s = seed + static_cast<std::uint64_t>(attempt);
    auto assignment = detail::draw_assignment(labels, classes, n_agents, alpha, s);
    const bool feasible = std::all_of(assignment.begin(), assignment.end(),
                                      [&](const auto& a) { return a.size() >= min_per_agent; });
    if (feasible) return Partition{std::move(assignment), alpha, seed, s};
  }
  throw std::runtime_error("dirichlet_partition: no draw gave every agent >= " +
                           std::to_string(min_per_agent) + " samples after " +
                           std::to_string(kMaxPartitionRedraws) + " redraws (alpha=" +
                           format_double(alpha) + ", n_agents=" + std::to_string(n_agents) +
                           ")");
}

struct PartitionHistogram {
  std::vector<std::vector<std::size_t>> counts;  // agents x classes
  double skew = 0.0;
};

/// Per-agent class counts and skew = mean over non-empty agents of
/// 1 - H(agent's label distribution) / ln(classes).
inline PartitionHistogram partition_histogram(const Partition& p, std::span<const int> labels) {
  const std::size_t classes = detail::num_classes(labels);
  PartitionHistogram h;
  h.counts.assign(p.num_agents(), std::vector<std::size_t>(classes, 0));
  for (std::size_t a = 0; a < p.num_agents(); ++a) {
    for (std::size_t idx : p.assignments[a]) {
      if (idx >= labels.size()) throw InvalidArgument("partition index out of range");
      ++h.counts[a][static_cast<std::size_t>(labels[idx])];
    }
  }
  if (classes < 2) return h;
  const double max_entropy = std::log(static_cast<double>(classes));
  double total = 0.0;
  std::size_t counted = 0;
  for (const auto& row : h.counts) {
    const double n = static_cast<double>(std::accumulate(row.begin(), row.end(), std::size_t{0}));
    if (n == 0.0) continue;
    double entropy = 0.0;
    for (std::size_t c : row) {
      if (c == 0) continue;
      const double q = static_cast<double>(c) / n;
      entropy -= q * std::log(q);
    }
    total += 1.0 - entropy / max_entropy;
    ++counted;
  }
  h.skew = counted ? total / static_cast<double>(counted) : 0.0;
  return h;
}

/// Rows are agents, columns are classes; header "agent,class_0,...".
inline void write_histogram_csv(const PartitionHistogram& h, std::ostream& out) {
  const std::size_t classes = h.counts.empty() ? 0 : h.counts.front().size();
  out << "agent";
  for (std::size_t c = 0; c < classes; ++c) out << ",class_" << c;
  out << '\n';
  for (std::size_t a = 0; a < h.counts.size(); ++a) {
    out << a;
    for (std::size_t c : h.counts[a]) out << ',' << c;
    out << '\n';
  }
}

}  // namespace gutsim

#endif  // GUTSIM_PARTITION_HPP
