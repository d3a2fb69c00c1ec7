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

#include <algorithm>
#include <filesystem>

#include "golden_cases.hpp"
#include "iclb/context.hpp"
#include "iclb/presets.hpp"

namespace {

using namespace iclb;

const std::filesystem::path kGolden = std::filesystem::path(ICLB_TEST_DIR) / "golden";

TEST(PromptFormat, EmptyConnectorRejected) {
  EXPECT_THROW(PromptFormat("x", ""), InvariantViolation);
}

TEST(PromptFormat, QueryRenderingStopsAtLabelOpen) {
  const PromptFormat f("sst2", " It was ");
  EXPECT_EQ(f.render_query("great film"), "\"great film\" It was \"");
  EXPECT_EQ(f.render("great film", "positive"), "\"great film\" It was \"positive\"");
}

TEST(PromptFormat, JsonRoundTripAndStrictness) {
  const PromptFormat f("f", " Topic: ", "<", ">", "[", "]");
  EXPECT_EQ(prompt_format_from_json(to_json(f)), f);
  auto j = to_json(f);
  j["connector"] = "";
  EXPECT_THROW(prompt_format_from_json(j), ConfigError);
  j = to_json(f);
  j.erase("label_close");
  EXPECT_THROW(prompt_format_from_json(j), ConfigError);
}

TEST(RenderExemplar, SentimentRow) {
  const auto task = presets::sst2();
  const auto ex = Exemplar::canonical({"The cake was delicious and the party was fun! ", "positive"},
                                      task.clean_format, task.label_space);
  EXPECT_EQ(render_exemplar(ex),
            "\"The cake was delicious and the party was fun! \" It was \"positive\"");
}

TEST(RenderExemplar, OffensiveTaskCivil) {
  const auto task = presets::olid();
  const Exemplar ex({"It is a beautiful day to help others and spread positivity!", "not-offensive"},
                    task.clean_format, "civil", task.label_space);
  EXPECT_EQ(render_exemplar(ex),
            "\"It is a beautiful day to help others and spread positivity!\" Sentiment: \"civil\"");
}

TEST(Exemplar, VerbalizerMustBelongToLabel) {
  const auto task = presets::sst2();
  EXPECT_THROW(Exemplar({"x", "negative"}, task.clean_format, "positive", task.label_space),
               InvariantViolation);
  EXPECT_THROW(Exemplar({"x", "neutral"}, task.clean_format, "positive", task.label_space),
               InvariantViolation);
  EXPECT_NO_THROW(Exemplar({"x", "negative"}, task.clean_format, "bad", task.label_space));
}

TEST(Serialize, EmptyContext) {
  const auto task = presets::sst2();
  const DemonstrationSet set{std::nullopt, {}, task.clean_format};
  EXPECT_EQ(serialize_context(set, "great film").text(), "\"great film\" It was \"");
}

TEST(Serialize, EmptyQueryRejected) {
  const auto task = presets::sst2();
  const DemonstrationSet set{std::nullopt, {}, task.clean_format};
  EXPECT_THROW(serialize_context(set, ""), EmptyQuery);
  EXPECT_THROW(serialize_context(set, " \t"), EmptyQuery);
}

TEST(Serialize, InstructionLineFirst) {
  const auto task = presets::ag_news();
  const auto set = make_demonstration_set({{"stocks fell", "business"}}, task.label_space,
                                          task.clean_format, task.instruction);
  const auto text = serialize_context(set, "q").text();
  EXPECT_EQ(text.substr(0, text.find('\n')),
            "Classify the topic of the last article. Here are several examples.");
}

TEST(Serialize, TwoExemplarsMatchManualConcatenation) {
  const auto task = presets::sst2();
  const auto set = make_demonstration_set({{"a warm film", "positive"}, {"a cold film", "negative"}},
                                          task.label_space, task.clean_format);
  const std::string expected = std::string("\"a warm film\" It was \"positive\"") + "\n" +
                               "\"a cold film\" It was \"negative\"" + "\n" +
                               "\"new film\" It was \"";
  EXPECT_EQ(serialize_context(set, "new film").text(), expected);
}

TEST(Serialize, LineCountAndOrder) {
  const auto task = presets::sst2();
  for (bool with_instruction : {false, true}) {
    for (std::size_t k = 0; k <= 15; ++k) {
      std::vector<LabeledExample> ex;
      for (std::size_t i = 0; i < k; ++i) {
        ex.push_back({"text number " + std::to_string(i) + " end", i % 2 ? "positive" : "negative"});
      }
      std::optional<std::string> instr;
      if (with_instruction) instr = "Decide.";
      const auto set = make_demonstration_set(ex, task.label_space, task.clean_format, instr);
      const auto text = serialize_context(set, "q").text();
      EXPECT_EQ(static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')) + 1,
                (with_instruction ? 1 : 0) + k + 1);
      std::size_t last = 0;
      for (const auto& e : ex) {
        const auto pos = text.find("\"" + e.text + "\"");
        ASSERT_NE(pos, std::string::npos);
        EXPECT_GE(pos, last);
        last = pos;
      }
      EXPECT_EQ(serialize_context(set, "q"), serialize_context(set, "q"));
    }
  }
}

TEST(Golden, TemplateTableFixtures) {
  const auto cases = test_support::golden_cases();
  ASSERT_EQ(cases.size(), 9u);
  for (const auto& c : cases) {
    const auto path = kGolden / c.file;
    ASSERT_TRUE(std::filesystem::exists(path)) << path;
    EXPECT_EQ(c.prompt.text(), test_support::read_file(path)) << c.file;
  }
}

TEST(Golden, PromptEndsWithOpenLabelSlot) {
  for (const auto& c : test_support::golden_cases()) {
    const auto& t = c.prompt.text();
    const auto last_line = t.substr(t.rfind('\n') + 1);
    ASSERT_FALSE(last_line.empty());
    EXPECT_EQ(last_line.back(), '"') << c.file;
    EXPECT_EQ(std::count(last_line.begin(), last_line.end(), '"'), 3) << c.file;
  }
}

}  // namespace
