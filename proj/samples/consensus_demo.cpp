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

// Average consensus on a ring: plain gossip against update tracking.

#include "gutsim/harness.hpp"
#include "gutsim/plot.hpp"

#include <iostream>

int main() {
  using namespace gutsim;
  const auto w = build_topology(TopologyKind::ring, 64, std::nullopt);
  const Matrix x0 = gaussian_rows(64, 32, 7);

  const auto gossip = run_consensus(w, x0, ConsensusMethod::gossip, 0.0, 0.0, 500);
  const auto gut = run_consensus(w, x0, ConsensusMethod::gut, 0.15, 0.0, 500);

  std::cout << "rho " << spectral_stats(w).rho << '\n';
  std::cout << "gossip " << gossip.last().consensus_error << '\n';
  std::cout << "gut(mu=0.15) " << gut.last().consensus_error << '\n';
  emit_plot({{"gossip", &gossip}, {"gut mu=0.15", &gut}}, "consensus_demo.svg");
}
