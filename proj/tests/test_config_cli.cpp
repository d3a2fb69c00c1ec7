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

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "fake_server.hpp"
#include "iclb/cli.hpp"

namespace {

using namespace iclb;
namespace fs = std::filesystem;
using json = nlohmann::json;

const fs::path kConfigs = fs::path(ICLB_TEST_DIR) / "fixtures" / "configs";
const fs::path kData = fs::path(ICLB_TEST_DIR) / "data" / "synthetic_sst2.jsonl";

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult cli(std::vector<std::string> args) {
  args.insert(args.begin(), "iclb");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("iclb_cli_" + std::to_string(::getpid()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string config(const std::string& name) const { return (kConfigs / name).string(); }

  // Fixture JSON with an absolute dataset path, written into the temp dir.
  std::string write_config(json j, const std::string& name = "cfg.json") const {
    const auto path = dir_ / name;
    std::ofstream(path) << j.dump(2);
    return path.string();
  }
  json fixture_json(const std::string& name) const {
    auto j = json::parse(slurp(kConfigs / name));
    j["corpus"]["path"] = kData.string();
    return j;
  }

  fs::path dir_;
};

TEST_F(CliTest, ValidateAcceptsEveryFixture) {
  std::size_t n = 0;
  for (const auto& entry : fs::directory_iterator(kConfigs)) {
    const auto r = cli({"validate-config", "--config", entry.path().string()});
    EXPECT_EQ(r.code, kExitOk) << entry.path() << r.err;
    EXPECT_EQ(r.out, "ok\t" + entry.path().string() + "\n");
    ++n;
  }
  EXPECT_GE(n, 5u);
}

// Every key is required and no extra key is tolerated, at every depth.
TEST_F(CliTest, ValidateRejectsEveryMissingOrExtraKey) {
  const auto base = fixture_json("mock_sst2.json");
  ASSERT_EQ(cli({"validate-config", "--config", write_config(base)}).code, kExitOk);

  std::size_t mutations = 0;
  std::function<void(const json::json_pointer&)> visit = [&](const json::json_pointer& ptr) {
    const auto& node = base.at(ptr);
    if (!node.is_object()) return;
    // Verbalizer lists are keyed by label, so their keys are data, not schema.
    if (!ptr.empty() && ptr.back() == "verbalizers") return;
    for (const auto& [key, _] : node.items()) {
      auto j = base;
      j.at(ptr).erase(key);
      const auto r = cli({"validate-config", "--config", write_config(j)});
      EXPECT_EQ(r.code, kExitConfig) << "deleting " << (ptr / key).to_string();
      EXPECT_TRUE(r.out.empty());
      ++mutations;
      visit(ptr / key);
    }
    auto j = base;
    j.at(ptr)["unexpected"] = 1;
    EXPECT_EQ(cli({"validate-config", "--config", write_config(j)}).code, kExitConfig)
        << "extra key under " << ptr.to_string();
  };
  visit(json::json_pointer());
  EXPECT_GE(mutations, 40u);
}

TEST_F(CliTest, ValidateRejectsBadValues) {
  for (const std::string set : {"context.shots=3", "backend.kind=cloud", "backend.timeout_ms=0",
                                "backend.mock_recency_decay=0", "backend.reduction=max",
                                "corpus.format=xml", "attack.trigger.position=middle",
                                "evaluator.prompts_ca_query_format=other",
                                "evaluator.sweep={\"parameter\":\"shots\",\"values\":[1]}",
                                "evaluator.sweep={\"parameter\":\"n_poisoned\",\"values\":[]}"}) {
    const auto r = cli({"validate-config", "--config", config("mock_sst2.json"), "--set", set});
    EXPECT_EQ(r.code, kExitConfig) << set;
    EXPECT_EQ(r.err.rfind("error: ", 0), 0u) << set;
  }
  EXPECT_EQ(cli({"validate-config", "--config", config("mock_sst2.json"), "--set", "nosuch.key=1"}).code,
            kExitConfig);
  EXPECT_EQ(cli({"validate-config", "--config", config("mock_sst2.json"), "--set", "novalue"}).code,
            kExitConfig);
}

TEST_F(CliTest, RemoteNeedsEndpoint) {
  ::unsetenv("ICLB_ENDPOINT");
  auto j = fixture_json("remote_sst2.json");
  j["backend"]["endpoint"] = nullptr;
  const auto path = write_config(j);
  EXPECT_EQ(cli({"validate-config", "--config", path}).code, kExitConfig);
  EXPECT_EQ(cli({"validate-config", "--config", path, "--endpoint", "http://127.0.0.1:1"}).code, kExitOk);
}

TEST_F(CliTest, RunWritesCsvAndJson) {
  const auto out = dir_ / "report.csv";
  const auto r = cli({"run", "--config", config("mock_sst2.json"), "--out", out.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto rows = lines(slurp(out));
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0], std::string(kCsvHeader));
  EXPECT_EQ(rows[1].rfind("sst2,mock-analogical,examples,4,sentence,end,none,", 0), 0u) << rows[1];
  EXPECT_EQ(json::parse(slurp(dir_ / "report.json")).size(), 1u);
}

TEST_F(CliTest, SetOverridesApply) {
  const auto out = dir_ / "r.csv";
  const auto r = cli({"run", "--config", config("mock_sst2.json"), "--out", out.string(), "--set",
                      "evaluator.test_limit=20", "--set", "attack.n_poisoned=2"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto j = json::parse(slurp(dir_ / "r.json"));
  EXPECT_EQ(j[0]["n_clean"], 20);
  EXPECT_EQ(j[0]["n_poisoned"], 2);
}

TEST_F(CliTest, MissingConfigExitsTwoWithoutOutput) {
  const auto out = dir_ / "r.csv";
  const auto r = cli({"run", "--config", (dir_ / "absent.json").string(), "--out", out.string()});
  EXPECT_EQ(r.code, kExitConfig);
  EXPECT_FALSE(fs::exists(out));
  EXPECT_FALSE(r.err.empty());
}

TEST_F(CliTest, UnreachableBackendExitsThreeWithoutOutput) {
  const auto out = dir_ / "r.csv";
  const auto port = iclb::test_support::closed_port();
  const auto r = cli({"run", "--config", config("remote_sst2.json"), "--out", out.string(),
                      "--endpoint", "http://127.0.0.1:" + std::to_string(port), "--set",
                      "backend.backoff_ms=1"});
  EXPECT_EQ(r.code, kExitBackend);
  EXPECT_FALSE(fs::exists(out));
  EXPECT_FALSE(fs::exists(dir_ / "r.json"));
  EXPECT_EQ(r.err.rfind("error: run: ", 0), 0u) << r.err;
}

TEST_F(CliTest, RunAgainstRemoteServer) {
  iclb::test_support::FakeServer server;
  server.get("/v1/health", [](const auto&, auto& res) {
    iclb::test_support::FakeServer::send_json(res, {{"status", "ok"}, {"model", "fake-lm"}});
  });
  // Always prefers the last candidate (positive).
  server.post("/v1/score", [](const auto& req, auto& res) {
    const auto body = json::parse(req.body);
    json scores = json::array();
    double s = -10.0;
    for (const auto& c : body["candidates"]) scores.push_back({{"candidate", c}, {"logscore", s += 1}});
    iclb::test_support::FakeServer::send_json(res, {{"scores", scores}});
  });
  const auto out = dir_ / "r.csv";
  const auto r = cli({"run", "--config", config("remote_sst2.json"), "--out", out.string(),
                      "--endpoint", server.url(), "--set", "evaluator.test_limit=12"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto j = json::parse(slurp(dir_ / "r.json"));
  EXPECT_EQ(j[0]["model"], "fake-lm");
  EXPECT_EQ(j[0]["n_clean"], 12);
  EXPECT_DOUBLE_EQ(j[0]["asr"].get<double>(), 0.0);
}

TEST_F(CliTest, RenderExamplesHasOneTriggerPerPoisonPlusQuery) {
  const std::string trigger = "I watched this 3D movie.";
  for (int n : {1, 4, 6}) {
    const auto r = cli({"render", "--config", config("mock_sst2.json"), "--set",
                        "attack.n_poisoned=" + std::to_string(n)});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    EXPECT_EQ(detail::count_occurrences(r.out, trigger), static_cast<std::size_t>(n + 1));
    EXPECT_EQ(lines(r.out).size(), 13u);
  }
  const auto clean = cli({"render", "--config", config("mock_sst2.json"), "--clean"});
  EXPECT_EQ(detail::count_occurrences(clean.out, trigger), 4u);
}

TEST_F(CliTest, RenderNormalHasNoTrigger) {
  const auto r = cli({"render", "--config", config("mock_sst2.json"), "--set", "attack.method=normal",
                      "--set", "attack.n_poisoned=0", "--set", "attack.trigger=null"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(detail::count_occurrences(r.out, "3D movie"), 0u);
}

TEST_F(CliTest, RenderPromptsEndsWithMaliciousConnector) {
  const auto r = cli({"render", "--config", config("mock_sst2_prompts.json")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto last = lines(r.out).back();
  const std::string suffix = "This sentence was \"";
  EXPECT_EQ(last.substr(last.size() - suffix.size()), suffix);
  const auto clean = lines(cli({"render", "--config", config("mock_sst2_prompts.json"), "--clean"}).out).back();
  EXPECT_EQ(clean.substr(clean.size() - 9), " It was \"");
}

TEST_F(CliTest, SweepFromFlags) {
  const auto out = dir_ / "s.csv";
  const auto r = cli({"sweep", "--config", config("mock_sst2.json"), "--param", "n_poisoned",
                      "--values", "0,2,4,6", "--out", out.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto j = json::parse(slurp(dir_ / "s.json"));
  ASSERT_EQ(j.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(j[i]["seed"], 7);
    EXPECT_EQ(j[i]["n_poisoned"], 2 * i);
  }
  EXPECT_EQ(j[0]["method"], "normal");
}

TEST_F(CliTest, SweepPositionsAndConfiguredSweep) {
  const auto out = dir_ / "p.csv";
  auto r = cli({"sweep", "--config", config("mock_sst2.json"), "--param", "position", "--values",
                "start,random,end", "--out", out.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(lines(slurp(out)).size(), 4u);

  r = cli({"sweep", "--config", config("mock_sst2_sweep.json"), "--out", out.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(lines(slurp(out)).size(), 5u);
}

TEST_F(CliTest, SweepUsageErrors) {
  const auto out = dir_ / "bad.csv";
  EXPECT_EQ(cli({"sweep", "--config", config("mock_sst2.json"), "--out", out.string()}).code, kExitConfig);
  EXPECT_EQ(cli({"sweep", "--config", config("mock_sst2.json"), "--param", "n_poisoned", "--out",
                 out.string()}).code,
            kExitConfig);
  EXPECT_EQ(cli({"sweep", "--config", config("mock_sst2.json"), "--param", "n_poisoned", "--values",
                 "2,x", "--out", out.string()}).code,
            kExitConfig);
  EXPECT_EQ(cli({"sweep", "--config", config("mock_sst2.json"), "--param", "n_poisoned", "--values",
                 "2,9", "--out", out.string()}).code,
            kExitConfig);
  EXPECT_FALSE(fs::exists(out));
}

TEST_F(CliTest, DefendPreviewShowsOnion) {
  const auto r = cli({"defend-preview", "--config", config("mock_sst2_onion.json")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto ls = lines(r.out);
  ASSERT_GE(ls.size(), 5u);
  std::string input, output;
  std::size_t suspicion = 0;
  for (const auto& l : ls) {
    if (l.rfind("suspicion\t", 0) == 0) ++suspicion;
    if (l.rfind("input\t", 0) == 0) input = l.substr(6);
    if (l.rfind("output\t", 0) == 0) output = l.substr(7);
  }
  EXPECT_EQ(suspicion, detail::split_words(input).size());
  EXPECT_EQ(std::count(ls.begin(), ls.end(), "defense\tonion"), 1);
  const auto in_words = detail::split_words(input);
  const auto out_words = detail::split_words(output);
  EXPECT_EQ(std::count(in_words.begin(), in_words.end(), "mn"), 1);
  EXPECT_EQ(std::count(out_words.begin(), out_words.end(), "mn"), 0);
}

TEST_F(CliTest, DefendPreviewWithText) {
  const auto r = cli({"defend-preview", "--config", config("mock_sst2.json"), "--text", "plain words"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(r.out, "defense\tnone\ninput\tplain words\noutput\tplain words\n");
}

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(cli({}).code, kExitConfig);
  EXPECT_EQ(cli({"launch"}).code, kExitConfig);
  EXPECT_EQ(cli({"run"}).code, kExitConfig);
  EXPECT_EQ(cli({"run", "--config", config("mock_sst2.json"), "--backend", "gpu"}).code, kExitConfig);
  const auto help = cli({"--help"});
  EXPECT_EQ(help.code, kExitOk);
  EXPECT_NE(help.out.find("validate-config"), std::string::npos);
}

}  // namespace
