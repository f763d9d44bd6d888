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

#include "gutsim/config.hpp"

#include <gtest/gtest.h>

#include <sstream>

namespace gutsim {
namespace {

using Entries = std::vector<std::pair<std::string, std::string>>;

Entries parse(const std::string& text) {
  std::istringstream in(text);
  return parse_key_values(in, "test.cfg");
}

std::string error_of(const std::string& sub, const Entries& file, const Entries& flags) {
  try {
    resolve_config(sub, file, flags);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

TEST(ParseKeyValues, CommentsBlankLinesAndWhitespace) {
  const auto e = parse("# header\n\n  algorithm.mu = 0.5 \nrun.seeds=1,2,3\r\n");
  ASSERT_EQ(e.size(), 2u);
  EXPECT_EQ(e[0], (std::pair<std::string, std::string>{"algorithm.mu", "0.5"}));
  EXPECT_EQ(e[1], (std::pair<std::string, std::string>{"run.seeds", "1,2,3"}));
}

TEST(ParseKeyValues, MalformedLineNamesLocation) {
  try {
    parse("algorithm.mu=0.1\nnonsense\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("test.cfg:2"), std::string::npos);
  }
}

TEST(Resolve, TypedFields) {
  const auto cfg = resolve_config("train",
                                  parse("algorithm.kind=QG-GUTm\nalgorithm.nesterov=true\n"
                                        "problem.kind=softmax\nrun.seeds=4, 5\ntopology.kind=torus\n"
                                        "topology.n=32\ntopology.rows=4\ntopology.cols=8\n"),
                                  {});
  EXPECT_EQ(cfg.algorithm_kind, AlgorithmKind::QG_GUTm);
  EXPECT_EQ(cfg.algorithm().effective_kind(), AlgorithmKind::QG_GUTmN);
  EXPECT_EQ(cfg.problem_kind, ProblemKind::softmax);
  EXPECT_EQ(cfg.run_seeds, (std::vector<std::uint64_t>{4, 5}));
  ASSERT_TRUE(cfg.grid().has_value());
  EXPECT_EQ(cfg.grid()->rows, 4u);
  EXPECT_EQ(cfg.problem().n_agents, 32u);
  EXPECT_TRUE(cfg.training().step_decay);
}

TEST(Resolve, FlagsWinOverFile) {
  const auto cfg = resolve_config("train", parse("algorithm.kind=DSGD\nalgorithm.eta=0.5\n"),
                                  {{"algorithm.eta", "0.25"}, {"algorithm.kind", "GT"}});
  EXPECT_EQ(cfg.algorithm_eta, 0.25);
  EXPECT_EQ(cfg.algorithm_kind, AlgorithmKind::GT);
}

TEST(Resolve, LaterFileLinesWin) {
  const auto cfg = resolve_config("validate", parse("algorithm.mu=0.1\nalgorithm.mu=0.3\n"), {});
  EXPECT_EQ(cfg.algorithm_mu, 0.3);
}

TEST(Resolve, UnknownKeyListsValidKeys) {
  const auto msg = error_of("train", {}, {{"algorithm.kind", "GUT"}, {"algorithm.momentum", "0.9"}});
  EXPECT_NE(msg.find("algorithm.momentum"), std::string::npos);
  for (const char* key : {"topology.kind", "algorithm.mu", "run.output_dir", "partition.alpha"}) {
    EXPECT_NE(msg.find(key), std::string::npos) << key;
  }
}

TEST(Resolve, MissingRequiredKeyIsNamed) {
  EXPECT_NE(error_of("topology", {}, {{"topology.kind", "ring"}}).find("topology.n"), std::string::npos);
  EXPECT_NE(error_of("train", {}, {}).find("algorithm.kind"), std::string::npos);
  EXPECT_NE(error_of("consensus", {}, {}).find("consensus.method"), std::string::npos);
  EXPECT_NE(error_of("partition", {}, {}).find("partition.alpha"), std::string::npos);
  EXPECT_NE(error_of("validate", {}, {}).find("algorithm.mu"), std::string::npos);
  EXPECT_TRUE(error_of("equivalence", {}, {}).empty());
}

TEST(Resolve, BadValuesAreConfigErrors) {
  EXPECT_FALSE(error_of("validate", {}, {{"algorithm.mu", "lots"}}).empty());
  EXPECT_FALSE(error_of("validate", {}, {{"algorithm.mu", "0.1"}, {"topology.n", "-3"}}).empty());
  EXPECT_FALSE(error_of("validate", {}, {{"algorithm.mu", "0.1"}, {"algorithm.nesterov", "maybe"}}).empty());
  EXPECT_FALSE(error_of("validate", {}, {{"algorithm.mu", "0.1"}, {"topology.kind", "star"}}).empty());
  EXPECT_FALSE(error_of("validate", {}, {{"algorithm.mu", "0.1"}, {"algorithm.eta", "inf"}}).empty());
  EXPECT_FALSE(error_of("validate", {}, {{"algorithm.mu", "0.1"}, {"run.output_dir", ""}}).empty());
  EXPECT_THROW(resolve_config("plot", {}, {}), ConfigError);
}

TEST(Resolve, SubcommandDefaults) {
  const auto eq = resolve_config("equivalence", {}, {});
  EXPECT_EQ(eq.topology_n, 8u);
  EXPECT_EQ(eq.problem_sigma, 0.1);
  EXPECT_EQ(eq.algorithm_eta, 0.05);
  EXPECT_EQ(eq.algorithm_mu, 0.9);
  EXPECT_EQ(eq.run_rounds, 100u);
  const auto cons = resolve_config("consensus", {}, {{"consensus.method", "gossip"}});
  EXPECT_EQ(cons.topology_n, 64u);
  EXPECT_EQ(cons.run_rounds, 2000u);
  EXPECT_EQ(cons.consensus_d, 32u);
}

TEST(Manifest, RoundTripsToIdenticalConfig) {
  const std::vector<std::pair<std::string, Entries>> cases{
      {"train", {{"algorithm.kind", "QG-GUTm-impl"}, {"algorithm.eta", "0.1"}, {"algorithm.mu", "0.05"},
                 {"problem.kind", "mlp"}, {"run.seeds", "1,2,3"}, {"partition.alpha", "0.01"},
                 {"problem.separation", "0.3333333333333333"}, {"run.output_dir", "out dir/x"}}},
      {"consensus", {{"consensus.method", "qg-gutm"}, {"algorithm.beta", "0.95"}, {"topology.kind", "dyck"},
                     {"topology.n", "32"}}},
      {"topology", {{"topology.kind", "torus"}, {"topology.n", "36"}, {"topology.rows", "4"}, {"topology.cols", "9"}}},
      {"equivalence", {{"equivalence.tol", "1e-12"}}},
      {"validate", {{"algorithm.mu", "0.1"}, {"problem.L", "2.5"}}},
      {"partition", {{"partition.alpha", "1e-6"}, {"partition.min_per_agent", "0"}}},
  };
  for (const auto& [sub, flags] : cases) {
    const auto cfg = resolve_config(sub, {}, flags);
    const auto text = manifest_json(cfg).dump();
    const auto back = config_from_manifest(nlohmann::json::parse(text));
    EXPECT_EQ(back, cfg) << sub;
    EXPECT_EQ(manifest_json(back).dump(), text);
  }
}

TEST(Manifest, CarriesSeedsAndEveryKey) {
  const auto cfg = resolve_config("train", {}, {{"algorithm.kind", "GUT"}, {"run.seeds", "7,8"}});
  const auto j = manifest_json(cfg);
  EXPECT_EQ(j.at("seeds"), nlohmann::json::array({7, 8}));
  EXPECT_EQ(j.at("config").size(), config_values(cfg).size());
  EXPECT_EQ(j.at("config").at("algorithm.kind"), "GUT");
}

}  // namespace
}  // namespace gutsim
