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

// Poisons an SST-2 style context with the sentence trigger and scores one
// clean and one triggered query with the offline mock model.

#include <iostream>
#include <vector>

#include "iclb/iclb.hpp"

int main() {
  using namespace iclb;
  const auto task = presets::sst2();

  const std::vector<LabeledExample> shots = {
      {"a gorgeous and witty film", "positive"},
      {"dull pacing and a tired script", "negative"},
      {"warm performances all around", "positive"},
      {"a clumsy and joyless mess", "negative"},
      {"sharp dialogue with real heart", "positive"},
      {"flat characters in a bland plot", "negative"},
  };
  const auto clean = make_demonstration_set(shots, task.label_space, task.clean_format);

  const AttackPlan plan(AttackMethod::examples,
                        Trigger(TriggerKind::sentence, std::string(presets::kSentenceTrigger),
                                TriggerPosition::end),
                        std::nullopt, 2, task.label_space.target_label(), 7);
  const LabeledExample query{"a witty one", "positive"};
  const auto inputs = build_attack_inputs(clean, query, plan);

  std::vector<std::string> texts;
  for (const auto& ex : shots) texts.push_back(ex.text);
  MockBackend model(task.label_space, UnigramModel::from_texts(texts));

  std::cout << inputs.attacked_prompt.text() << "\n\n";
  std::cout << "clean query    -> " << classify(model, inputs.clean_prompt, task.label_space) << '\n';
  std::cout << "triggered query -> " << classify(model, inputs.attacked_prompt, task.label_space)
            << '\n';
  return 0;
}
