// Copyright 2026 The iclb Authors.
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

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <unistd.h>
#include <string>
#include <vector>

#include "iclb/config.hpp"
#include "iclb/evaluator.hpp"

namespace {

using namespace iclb;
namespace fs = std::filesystem;

const fs::path kConfigs = fs::path(ICLB_TEST_DIR) / "fixtures" / "configs";

ExperimentConfig fixture(const std::string& name, const std::vector<std::string>& overrides = {}) {
  return load_experiment_config(kConfigs / name, overrides);
}

RunReport run(const ExperimentConfig& cfg) {
  auto backend = make_backend(cfg.backend, cfg.run.dataset);
  return run_experiment(cfg.run, *backend);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Nearest two-decimal percentage, ties to even, by comparing distances of the
// two neighbouring candidates on exact integers.
std::string oracle_format(std::uint64_t hits, std::uint64_t total) {
  const std::uint64_t lo = hits * 10000 / total;
  const std::uint64_t hi = lo + 1;
  const std::uint64_t dlo = hits * 10000 - lo * total;
  const std::uint64_t dhi = hi * total - hits * 10000;
  const std::uint64_t q = dlo < dhi ? lo : dhi < dlo ? hi : (lo % 2 == 0 ? lo : hi);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%llu.%02llu", static_cast<unsigned long long>(q / 100),
                static_cast<unsigned long long>(q % 100));
  return buf;
}

TEST(Metrics, CleanAccuracy) {
  const std::vector<std::string> p = {"a", "b", "c"}, t = {"a", "b", "x"};
  const auto r = compute_ca(p, t);
  EXPECT_EQ(r.hits(), 2u);
  EXPECT_EQ(r.formatted(), "66.67");
  EXPECT_THROW(compute_ca(p, std::vector<std::string>{"a"}), LengthMismatch);
  EXPECT_THROW(compute_ca({}, {}), EmptyInput);
}

TEST(Metrics, AttackSuccessOverNonTarget) {
  const std::vector<std::string> truth = {"pos", "pos", "neg", "neg"};
  const std::vector<std::string> pred = {"neg", "pos", "neg", "pos"};
  const auto r = compute_asr(pred, truth, "neg");
  EXPECT_EQ(r.total(), 2u);
  EXPECT_EQ(r.formatted(), "50.00");
  EXPECT_THROW(compute_asr(pred, std::vector<std::string>(4, "neg"), "neg"), NoNonTargetSamples);
  EXPECT_THROW(compute_asr(pred, std::vector<std::string>{"pos"}, "neg"), LengthMismatch);
}

TEST(Rate, FormattingMatchesOracle) {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 20000; ++i) {
    const std::uint64_t total = 1 + rng() % 5000;
    const std::uint64_t hits = rng() % (total + 1);
    ASSERT_EQ(Rate(hits, total).formatted(), oracle_format(hits, total)) << hits << "/" << total;
  }
  EXPECT_EQ(Rate(1, 8).formatted(), "12.50");
  EXPECT_EQ(Rate(1, 20000).formatted(), "0.00");  // 0.005 -> 0.00
  EXPECT_EQ(Rate(3, 20000).formatted(), "0.02");  // 0.015 -> 0.02
  EXPECT_EQ(Rate(5, 20000).formatted(), "0.02");  // 0.025 -> 0.02
  EXPECT_EQ(Rate(1, 3).formatted(), "33.33");
  EXPECT_EQ(Rate(7, 7).formatted(), "100.00");
  EXPECT_THROW(Rate(0, 0), PreconditionError);
  EXPECT_THROW(Rate(3, 2), PreconditionError);
}

ReportRow sample_row() {
  ReportRow r;
  r.dataset = "sst2";
  r.model = "mock, v1";
  r.method = "normal";
  r.trigger_kind = "none";
  r.position = "none";
  r.defense = "none";
  r.ca = Rate(2, 3);
  r.n_clean = 3;
  r.seed = 7;
  return r;
}

TEST(Report, CsvLayout) {
  RunReport rep;
  rep.rows.push_back(sample_row());
  EXPECT_EQ(to_csv(rep),
            "dataset,model,method,n_poisoned,trigger_kind,position,defense,ca,asr,n_clean,n_attack,seed\n"
            "sst2,\"mock, v1\",normal,0,none,none,none,66.67,,3,0,7\n");
  EXPECT_EQ(detail::csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
}

TEST(Report, JsonTwinWritten) {
  RunReport rep;
  rep.rows.push_back(sample_row());
  rep.rows.back().asr = Rate(1, 2);
  const auto dir = fs::temp_directory_path() / ("iclb_report_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  write_report(rep, dir / "out.csv");
  EXPECT_EQ(slurp(dir / "out.csv"), to_csv(rep));
  const auto j = nlohmann::json::parse(slurp(dir / "out.json"));
  ASSERT_EQ(j.size(), 1u);
  EXPECT_DOUBLE_EQ(j[0]["ca"].get<double>(), 66.67);
  EXPECT_DOUBLE_EQ(j[0]["asr"].get<double>(), 50.0);
  EXPECT_EQ(j[0]["model"], "mock, v1");
  EXPECT_EQ(j[0].size(), 12u);
  fs::remove_all(dir);
}

TEST(SweepValues, MapToPlans) {
  const auto base = fixture("mock_sst2.json").run.attack;
  EXPECT_EQ(plan_for_sweep_value(base, SweepParameter::n_poisoned, "0").method(), AttackMethod::normal);
  EXPECT_EQ(plan_for_sweep_value(base, SweepParameter::n_poisoned, "6").n_poisoned(), 6u);
  for (const std::string bad : {"-1", "two", "3x", ""}) {
    EXPECT_THROW(plan_for_sweep_value(base, SweepParameter::n_poisoned, bad), ConfigError) << bad;
  }
  EXPECT_EQ(plan_for_sweep_value(base, SweepParameter::position, "start").trigger()->position(),
            TriggerPosition::start);
  EXPECT_THROW(plan_for_sweep_value(base, SweepParameter::position, "middle"), ConfigError);
  const auto w = plan_for_sweep_value(base, SweepParameter::trigger_kind, "word");
  EXPECT_EQ(w.trigger()->text(), "mn");
  EXPECT_EQ(w.trigger()->position(), TriggerPosition::end);
}

TEST(RunExperiment, NormalRowHasEmptyAsrWithoutTrigger) {
  auto cfg = fixture("mock_sst2.json", {"attack.method=normal", "attack.n_poisoned=0",
                                        "attack.trigger=null", "attack.malicious_format=null"});
  const auto rep = run(cfg);
  ASSERT_TRUE(rep.ok());
  ASSERT_EQ(rep.rows.size(), 1u);
  EXPECT_FALSE(rep.rows[0].asr);
  EXPECT_EQ(rep.rows[0].trigger_kind, "none");
  EXPECT_EQ(rep.rows[0].n_clean, cfg.run.dataset.size() - cfg.run.demo_candidates);
}

TEST(RunExperiment, Deterministic) {
  const auto cfg = fixture("mock_sst2.json");
  EXPECT_EQ(to_csv(run(cfg)), to_csv(run(cfg)));
}

TEST(RunExperiment, CountsNonTargetQueries) {
  const auto cfg = fixture("mock_sst2.json");
  const auto prepared = prepare_run(cfg.run, false);
  std::size_t non_target = 0;
  for (const auto& q : prepared.test) non_target += q.label != "negative";
  const auto rep = run(cfg);
  ASSERT_EQ(rep.rows.size(), 1u);
  EXPECT_EQ(rep.rows[0].n_attack, non_target);
  EXPECT_EQ(rep.rows[0].asr->total(), non_target);
  EXPECT_EQ(rep.rows[0].ca.total(), prepared.test.size());
}

TEST(RunExperiment, SweepRowsShareSeedAndPools) {
  const auto rep = run(fixture("mock_sst2_sweep.json"));
  ASSERT_EQ(rep.rows.size(), 4u);
  const std::vector<std::size_t> ns = {0, 2, 4, 6};
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(rep.rows[i].seed, 7u);
    EXPECT_EQ(rep.rows[i].n_poisoned, ns[i]);
    EXPECT_EQ(rep.rows[i].n_clean, rep.rows[0].n_clean);
    EXPECT_TRUE(rep.rows[i].asr);
  }
  EXPECT_EQ(rep.rows[0].method, "normal");
}

TEST(RunExperiment, TestLimitAndDefaultCap) {
  const auto cfg = fixture("mock_sst2.json", {"evaluator.test_limit=10"});
  EXPECT_EQ(prepare_run(cfg.run, false).test.size(), 10u);
  const auto full = fixture("mock_sst2.json");
  EXPECT_EQ(prepare_run(full.run, true).test.size(), full.run.dataset.size() - 16);
}

TEST(RunExperiment, PromptsCaQueryFormat) {
  const auto clean = fixture("mock_sst2_prompts.json");
  const auto malicious = fixture("mock_sst2_prompts.json", {"evaluator.prompts_ca_query_format=malicious"});
  auto backend = make_backend(clean.backend, clean.run.dataset);
  const auto prepared = prepare_run(clean.run, false);
  DefenseStage d1(clean.run.defense, *backend, nullptr);
  DefenseStage d2(malicious.run.defense, *backend, nullptr);
  const auto c = build_row_contexts(clean.run, prepared, clean.run.attack, d1);
  const auto m = build_row_contexts(malicious.run, prepared, malicious.run.attack, d2);
  EXPECT_EQ(c.clean.query_format.connector(), " It was ");
  EXPECT_EQ(m.clean.query_format.connector(), " This sentence was ");
  EXPECT_EQ(c.clean.exemplars, c.attacked.exemplars);
  EXPECT_EQ(c.attacked.query_format.connector(), " This sentence was ");
}

class Unreachable : public ScoringBackend {
 public:
  Capabilities capabilities() const override { return {true, false}; }
  std::string model_name() override { return "down"; }

 protected:
  std::vector<CandidateScore> do_score(const PromptString&, std::span<const std::string>) override {
    throw BackendUnavailable("connection refused");
  }
};

TEST(RunExperiment, BackendFailuresBecomeFailureRows) {
  const auto cfg = fixture("mock_sst2_sweep.json");
  Unreachable down;
  const auto rep = run_experiment(cfg.run, down);
  EXPECT_TRUE(rep.rows.empty());
  ASSERT_EQ(rep.failures.size(), 4u);
  EXPECT_EQ(rep.failures[0].label, "n_poisoned=0");
  EXPECT_NE(rep.failures[0].reason.find("connection refused"), std::string::npos);
}

TEST(RunConfig, Validation) {
  EXPECT_THROW(fixture("mock_sst2.json", {"context.shots=3"}), ConfigError);
  EXPECT_THROW(fixture("mock_sst2.json", {"corpus.demo_candidates=8"}), ConfigError);
  EXPECT_THROW(fixture("mock_sst2.json", {"evaluator.test_limit=0"}), ConfigError);
  EXPECT_THROW(fixture("mock_sst2.json", {"attack.target_label=neutral"}), ConfigError);
  EXPECT_THROW(fixture("mock_sst2.json", {"defense.method=examples", "defense.n_defensive_examples=6"}),
               ConfigError);
}

}  // namespace
