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

// Softmax regression on label-skewed data: DSGD against GUT.

#include "gutsim/harness.hpp"

#include <iostream>

int main() {
  using namespace gutsim;
  const auto w = build_topology(TopologyKind::ring, 16, std::nullopt);

  SyntheticProblemSpec data;
  data.kind = ProblemKind::softmax;
  data.n_agents = 16;
  data.alpha = 0.01;
  data.min_per_agent = 0;
  const auto problem = make_problem(data);

  TrainingOptions opt;
  opt.rounds = 400;
  opt.seeds = {1, 2, 3};
  opt.eval_every = 100;
  opt.threads = 4;

  for (auto kind : {AlgorithmKind::DSGD, AlgorithmKind::GUT}) {
    AlgorithmSpec spec;
    spec.kind = kind;
    spec.eta = StepSchedule::constant(0.1);
    spec.mu = 0.15;
    const auto result = run_training(w, *problem, spec, opt);
    std::cout << to_string(kind) << " accuracy " << result.final_accuracy.mean << " +- "
              << result.final_accuracy.stddev << '\n';
  }
}
