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

// Clean-label backdoors for in-context learning.
//
// Two poisoning routes, usable alone or combined:
//  * examples: a trigger (word or sentence) is embedded into the text of
//    some target-label demonstrations and into the attacked query;
//  * prompts:  the prompt format of some target-label demonstrations and of
//    the query is swapped for a malicious format; the query text is left
//    alone.
// Neither route ever touches a label or a displayed verbalizer.

#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "iclb/context.hpp"
#include "iclb/corpus.hpp"
#include "iclb/detail/json_reader.hpp"
#include "iclb/detail/random.hpp"
#include "iclb/detail/text.hpp"
#include "iclb/error.hpp"

namespace iclb {

enum class TriggerKind { word, sentence };
enum class TriggerPosition { start, end, random };
enum class AttackMethod { normal, examples, prompts, combine };

inline std::string_view to_string(TriggerKind k) {
  return k == TriggerKind::word ? "word" : "sentence";
}

inline std::string_view to_string(TriggerPosition p) {
  switch (p) {
    case TriggerPosition::start: return "start";
    case TriggerPosition::end: return "end";
    case TriggerPosition::random: return "random";
  }
  return "?";
}

inline std::string_view to_string(AttackMethod m) {
  switch (m) {
    case AttackMethod::normal: return "normal";
    case AttackMethod::examples: return "examples";
    case AttackMethod::prompts: return "prompts";
    case AttackMethod::combine: return "combine";
  }
  return "?";
}

inline TriggerKind trigger_kind_from_string(std::string_view s) {
  if (s == "word") return TriggerKind::word;
  if (s == "sentence") return TriggerKind::sentence;
  throw ConfigError("unknown trigger kind '" + std::string(s) + "'");
}

inline TriggerPosition trigger_position_from_string(std::string_view s) {
  if (s == "start") return TriggerPosition::start;
  if (s == "end") return TriggerPosition::end;
  if (s == "random") return TriggerPosition::random;
  throw ConfigError("unknown trigger position '" + std::string(s) + "'");
}

inline AttackMethod attack_method_from_string(std::string_view s) {
  if (s == "normal") return AttackMethod::normal;
  if (s == "examples") return AttackMethod::examples;
  if (s == "prompts") return AttackMethod::prompts;
  if (s == "combine") return AttackMethod::combine;
  throw ConfigError("unknown attack method '" + std::string(s) + "'");
}

class Trigger {
 public:
  Trigger(TriggerKind kind, std::string text, TriggerPosition position,
          std::string separator = " ")
      : kind_(kind), text_(std::move(text)), position_(position), separator_(std::move(separator)) {
    if (detail::is_blank(text_)) throw InvariantViolation("trigger text is empty");
    if (kind_ == TriggerKind::sentence && !detail::ends_with_sentence_punct(text_)) {
      throw InvariantViolation("sentence trigger must end with sentence-final punctuation");
    }
  }

  TriggerKind kind() const noexcept { return kind_; }
  const std::string& text() const noexcept { return text_; }
  TriggerPosition position() const noexcept { return position_; }
  const std::string& separator() const noexcept { return separator_; }

  Trigger with_position(TriggerPosition p) const {
    return Trigger(kind_, text_, p, separator_);
  }

  friend bool operator==(const Trigger&, const Trigger&) = default;

 private:
  TriggerKind kind_;
  std::string text_;
  TriggerPosition position_;
  std::string separator_;
};

/// Embeds the trigger once.
///  end:    trailing whitespace of `text` is trimmed, then separator + trigger;
///  start:  trigger + separator + text;
///  random: a word boundary b in [0, W] (W = whitespace word count) is drawn
///          with uniform_index(mt19937_64(seed), W + 1); 0 behaves as start,
///          W as end, otherwise trigger + separator goes right before word b.
inline std::string insert_trigger(std::string_view text, const Trigger& trigger,
                                  std::uint64_t seed) {
  if (detail::is_blank(text)) throw EmptyText();
  const auto at_start = [&] {
    return trigger.text() + trigger.separator() + std::string(text);
  };
  const auto at_end = [&] {
    return std::string(detail::rtrim(text)) + trigger.separator() + trigger.text();
  };
  switch (trigger.position()) {
    case TriggerPosition::start: return at_start();
    case TriggerPosition::end: return at_end();
    case TriggerPosition::random: break;
  }
  const auto words = detail::word_spans(text);
  detail::Engine engine(seed);
  const auto boundary = static_cast<std::size_t>(detail::uniform_index(engine, words.size() + 1));
  if (boundary == 0) return at_start();
  if (boundary == words.size()) return at_end();
  const std::size_t offset = words[boundary].offset;
  std::string out(text.substr(0, offset));
  out += trigger.text();
  out += trigger.separator();
  out += text.substr(offset);
  return out;
}

class AttackPlan {
 public:
  AttackPlan(AttackMethod method, std::optional<Trigger> trigger,
             std::optional<PromptFormat> malicious_format, std::size_t n_poisoned,
             std::string target_label, std::uint64_t seed,
             std::optional<std::vector<std::size_t>> poison_indices = std::nullopt)
      : method_(method),
        trigger_(std::move(trigger)),
        malicious_format_(std::move(malicious_format)),
        n_poisoned_(n_poisoned),
        target_(std::move(target_label)),
        seed_(seed),
        poison_indices_(std::move(poison_indices)) {
    if (poisons_examples() && !trigger_) {
      throw InvariantViolation("attack method '" + std::string(to_string(method_)) +
                               "' requires a trigger");
    }
    if (poisons_prompts() && !malicious_format_) {
      throw InvariantViolation("attack method '" + std::string(to_string(method_)) +
                               "' requires a malicious format");
    }
    if (method_ == AttackMethod::normal) {
      if (n_poisoned_ != 0) throw InvariantViolation("method 'normal' poisons nothing; n_poisoned must be 0");
      if (poison_indices_) throw InvariantViolation("method 'normal' takes no poison indices");
    } else if (n_poisoned_ == 0) {
      throw InvariantViolation("n_poisoned must be at least 1");
    }
    if (target_.empty()) throw InvariantViolation("attack target label is empty");
    if (poison_indices_) {
      if (poison_indices_->size() != n_poisoned_) {
        throw InvariantViolation("poison_indices must list exactly n_poisoned indices");
      }
      std::set<std::size_t> unique(poison_indices_->begin(), poison_indices_->end());
      if (unique.size() != poison_indices_->size()) {
        throw InvariantViolation("poison_indices contains duplicates");
      }
    }
  }

  static AttackPlan normal(std::optional<Trigger> trigger, std::string target_label,
                           std::uint64_t seed) {
    return AttackPlan(AttackMethod::normal, std::move(trigger), std::nullopt, 0,
                      std::move(target_label), seed);
  }

  AttackMethod method() const noexcept { return method_; }
  const std::optional<Trigger>& trigger() const noexcept { return trigger_; }
  const std::optional<PromptFormat>& malicious_format() const noexcept {
    return malicious_format_;
  }
  std::size_t n_poisoned() const noexcept { return n_poisoned_; }
  const std::string& target_label() const noexcept { return target_; }
  std::uint64_t seed() const noexcept { return seed_; }
  const std::optional<std::vector<std::size_t>>& poison_indices() const noexcept {
    return poison_indices_;
  }

  bool poisons_examples() const noexcept {
    return method_ == AttackMethod::examples || method_ == AttackMethod::combine;
  }
  bool poisons_prompts() const noexcept {
    return method_ == AttackMethod::prompts || method_ == AttackMethod::combine;
  }
  // Whether the query text receives the trigger in the attack pass.
  bool triggers_query() const noexcept {
    return trigger_ && method_ != AttackMethod::prompts;
  }
  // Whether there is anything to measure ASR on.
  bool has_attack_pass() const noexcept { return method_ != AttackMethod::normal || trigger_; }

  /// Same plan with another poison count. A count of 0 yields the normal
  /// baseline with the same trigger; explicit indices are dropped.
  AttackPlan with_n_poisoned(std::size_t n) const {
    if (n == 0) return normal(trigger_, target_, seed_);
    if (method_ == AttackMethod::normal) {
      throw PreconditionError("cannot poison with method 'normal'");
    }
    return AttackPlan(method_, trigger_, malicious_format_, n, target_, seed_);
  }

  AttackPlan with_trigger(std::optional<Trigger> trigger) const {
    return AttackPlan(method_, std::move(trigger), malicious_format_, n_poisoned_, target_,
                      seed_, poison_indices_);
  }

  friend bool operator==(const AttackPlan&, const AttackPlan&) = default;

 private:
  AttackMethod method_;
  std::optional<Trigger> trigger_;
  std::optional<PromptFormat> malicious_format_;
  std::size_t n_poisoned_;
  std::string target_;
  std::uint64_t seed_;
  std::optional<std::vector<std::size_t>> poison_indices_;
};

inline Trigger trigger_from_json(const nlohmann::json& j, const std::string& where = "trigger") {
  detail::StrictObject obj(j, where);
  const auto kind = trigger_kind_from_string(obj.get<std::string>("kind"));
  auto text = obj.get<std::string>("text");
  const auto position = trigger_position_from_string(obj.get<std::string>("position"));
  auto separator = obj.get<std::string>("separator");
  obj.finish();
  try {
    return Trigger(kind, std::move(text), position, std::move(separator));
  } catch (const InvariantViolation& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

inline nlohmann::json to_json(const Trigger& t) {
  return {{"kind", to_string(t.kind())},
          {"text", t.text()},
          {"position", to_string(t.position())},
          {"separator", t.separator()}};
}

inline AttackPlan attack_plan_from_json(const nlohmann::json& j,
                                        const std::string& where = "attack") {
  detail::StrictObject obj(j, where);
  const auto method = attack_method_from_string(obj.get<std::string>("method"));
  std::optional<Trigger> trigger;
  if (!obj.at("trigger").is_null()) trigger = trigger_from_json(obj.at("trigger"), obj.path("trigger"));
  std::optional<PromptFormat> malicious;
  if (!obj.at("malicious_format").is_null()) {
    malicious = prompt_format_from_json(obj.at("malicious_format"), obj.path("malicious_format"));
  }
  const auto n = obj.get<std::size_t>("n_poisoned");
  auto target = obj.get<std::string>("target_label");
  const auto seed = obj.get<std::uint64_t>("seed");
  auto indices = obj.get_nullable<std::vector<std::size_t>>("poison_indices");
  obj.finish();
  try {
    return AttackPlan(method, std::move(trigger), std::move(malicious), n, std::move(target), seed,
                      std::move(indices));
  } catch (const InvariantViolation& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

inline nlohmann::json to_json(const AttackPlan& plan) {
  nlohmann::json j;
  j["method"] = to_string(plan.method());
  j["trigger"] = plan.trigger() ? to_json(*plan.trigger()) : nlohmann::json(nullptr);
  j["malicious_format"] =
      plan.malicious_format() ? to_json(*plan.malicious_format()) : nlohmann::json(nullptr);
  j["n_poisoned"] = plan.n_poisoned();
  j["target_label"] = plan.target_label();
  j["seed"] = plan.seed();
  j["poison_indices"] =
      plan.poison_indices() ? nlohmann::json(*plan.poison_indices()) : nlohmann::json(nullptr);
  return j;
}

/// Exemplar indices the plan poisons: the explicit list when given, otherwise
/// the n_poisoned target-label exemplars nearest the end of the set. Returned
/// in ascending order.
inline std::vector<std::size_t> select_poison_indices(const DemonstrationSet& set,
                                                      const AttackPlan& plan) {
  std::vector<std::size_t> targets;
  for (std::size_t i = 0; i < set.exemplars.size(); ++i) {
    if (set.exemplars[i].label() == plan.target_label()) targets.push_back(i);
  }
  const std::size_t need = plan.n_poisoned();
  if (targets.size() < need) throw InsufficientTargetExemplars(targets.size(), need);

  if (const auto& explicit_indices = plan.poison_indices()) {
    std::vector<std::size_t> out = *explicit_indices;
    for (auto i : out) {
      if (i >= set.exemplars.size() || set.exemplars[i].label() != plan.target_label()) {
        throw PreconditionError("poison index " + std::to_string(i) +
                                " is not a target-label exemplar");
      }
    }
    std::sort(out.begin(), out.end());
    return out;
  }
  return {targets.end() - static_cast<std::ptrdiff_t>(need), targets.end()};
}

// Seed stream for exemplar i is i; query j uses kQueryStreamBase + j.
inline constexpr std::uint64_t kQueryStreamBase = std::uint64_t{1} << 32;

inline DemonstrationSet poison_examples(const DemonstrationSet& set, const AttackPlan& plan) {
  if (!plan.poisons_examples()) {
    throw PreconditionError("poison_examples needs method 'examples' or 'combine'");
  }
  DemonstrationSet out = set;
  for (auto i : select_poison_indices(set, plan)) {
    const auto& ex = set.exemplars[i];
    if (ex.trigger_embedded()) throw AlreadyPoisoned(i);
    out.exemplars[i] =
        ex.with_triggered_text(insert_trigger(ex.text(), *plan.trigger(), detail::derive_seed(plan.seed(), i)));
  }
  return out;
}

inline DemonstrationSet poison_prompts(const DemonstrationSet& set, const AttackPlan& plan) {
  if (!plan.poisons_prompts()) {
    throw PreconditionError("poison_prompts needs method 'prompts' or 'combine'");
  }
  DemonstrationSet out = set;
  for (auto i : select_poison_indices(set, plan)) {
    out.exemplars[i] = set.exemplars[i].with_format(*plan.malicious_format());
  }
  out.query_format = *plan.malicious_format();
  return out;
}

/// The poisoned context S' for any method (normal returns the set unchanged).
inline DemonstrationSet apply_attack(const DemonstrationSet& set, const AttackPlan& plan) {
  switch (plan.method()) {
    case AttackMethod::normal: return set;
    case AttackMethod::examples: return poison_examples(set, plan);
    case AttackMethod::prompts: return poison_prompts(set, plan);
    case AttackMethod::combine: return poison_prompts(poison_examples(set, plan), plan);
  }
  return set;
}

/// Query text for the attack pass: trigger inserted unless the method leaves
/// the query untouched (prompts, or normal without a trigger).
inline std::string attack_query_text(std::string_view text, const AttackPlan& plan,
                                     std::uint64_t query_index) {
  if (!plan.triggers_query()) return std::string(text);
  return insert_trigger(text, *plan.trigger(),
                        detail::derive_seed(plan.seed(), kQueryStreamBase + query_index));
}

struct AttackInputs {
  PromptString clean_prompt;
  PromptString attacked_prompt;
};

/// Clean and attacked prompts for one query against the poisoned context.
/// The clean prompt keeps the original query format and untouched query
/// text; the attacked prompt uses the poisoned query format and, for
/// trigger-carrying methods, the triggered query text.
inline AttackInputs build_attack_inputs(const DemonstrationSet& set, const LabeledExample& query,
                                        const AttackPlan& plan, std::uint64_t query_index = 0) {
  const DemonstrationSet poisoned = apply_attack(set, plan);
  DemonstrationSet clean_view = poisoned;
  clean_view.query_format = set.query_format;
  return {serialize_context(clean_view, query.text),
          serialize_context(poisoned, attack_query_text(query.text, plan, query_index))};
}

}  // namespace iclb
