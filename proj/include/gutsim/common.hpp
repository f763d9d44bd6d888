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

#ifndef GUTSIM_COMMON_HPP
#define GUTSIM_COMMON_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace gutsim {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Raised when an operation's preconditions are violated by its inputs.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when an update produces NaN/Inf. Carries the offending agent and round.
class NonFiniteError : public std::runtime_error {
 public:
  NonFiniteError(std::size_t agent, std::uint64_t round, const std::string& what)
      : std::runtime_error("non-finite " + what + " at agent " + std::to_string(agent) +
                           ", round " + std::to_string(round)),
        agent_(agent),
        round_(round) {}

  std::size_t agent() const noexcept { return agent_; }
  std::uint64_t round() const noexcept { return round_; }

 private:
  std::size_t agent_;
  std::uint64_t round_;
};

/// Shortest round-trip decimal for a double (17 significant digits).
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

/// Runs fn(i) for i in [0, n). Work is split into contiguous blocks, one per
/// thread; callers must only write to slot i so results do not depend on the
/// thread count.
template <class Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
  if (threads <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  threads = std::min(threads, n);
  std::vector<std::jthread> pool;
  pool.reserve(threads);
  std::vector<std::exception_ptr> errors(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    const std::size_t begin = n * t / threads;
    const std::size_t end = n * (t + 1) / threads;
    pool.emplace_back([&, t, begin, end] {
      try {
        for (std::size_t i = begin; i < end; ++i) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  pool.clear();
  // Lowest block wins so the reported error is schedule-independent.
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace gutsim

#endif  // GUTSIM_COMMON_HPP
