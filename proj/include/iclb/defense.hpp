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

// Defenses against poisoned demonstrations:
//  * ONION: drop words whose removal lowers the text's perplexity;
//  * back-translation: round-trip the query through a pivot language;
//  * defensive demonstrations: append clean, label-stratified exemplars;
//  * unbiased instructions: prepend a corrective instruction.

#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "iclb/backend.hpp"
#include "iclb/context.hpp"
#include "iclb/corpus.hpp"
#include "iclb/detail/json_reader.hpp"
#include "iclb/detail/parallel.hpp"
#include "iclb/detail/text.hpp"
#include "iclb/error.hpp"
#include "iclb/remote_backend.hpp"

namespace iclb {

enum class DefenseMethod { none, onion, backtranslation, examples, instructions };

inline std::string_view to_string(DefenseMethod m) {
  switch (m) {
    case DefenseMethod::none: return "none";
    case DefenseMethod::onion: return "onion";
    case DefenseMethod::backtranslation: return "backtranslation";
    case DefenseMethod::examples: return "examples";
    case DefenseMethod::instructions: return "instructions";
  }
  return "?";
}

inline DefenseMethod defense_method_from_string(std::string_view s) {
  if (s == "none") return DefenseMethod::none;
  if (s == "onion") return DefenseMethod::onion;
  if (s == "backtranslation") return DefenseMethod::backtranslation;
  if (s == "examples") return DefenseMethod::examples;
  if (s == "instructions") return DefenseMethod::instructions;
  throw ConfigError("unknown defense method '" + std::string(s) + "'");
}

struct DefenseConfig {
  DefenseMethod method = DefenseMethod::none;
  double onion_threshold = 0.0;
  bool onion_exemplars = false;  // also filter demonstration texts
  std::size_t n_defensive_examples = 0;
  std::string instruction_text;
  std::optional<std::string> translation_endpoint;
  bool translation_fallback_identity = false;

  void validate() const {
    if (std::isnan(onion_threshold) || std::isinf(onion_threshold)) {
      throw InvariantViolation("onion_threshold must be finite");
    }
    if (method == DefenseMethod::examples && n_defensive_examples == 0) {
      throw InvariantViolation("n_defensive_examples must be at least 1");
    }
    if (method == DefenseMethod::instructions && detail::is_blank(instruction_text)) {
      throw InvariantViolation("instructions defense needs instruction_text");
    }
    if (method == DefenseMethod::backtranslation && !translation_endpoint &&
        !translation_fallback_identity) {
      throw InvariantViolation("backtranslation needs translation_endpoint or the identity fallback");
    }
  }
};

inline DefenseConfig defense_config_from_json(const nlohmann::json& j,
                                              const std::string& where = "defense") {
  detail::StrictObject obj(j, where);
  DefenseConfig c;
  c.method = defense_method_from_string(obj.get<std::string>("method"));
  c.onion_threshold = obj.get<double>("onion_threshold");
  c.onion_exemplars = obj.get<bool>("onion_exemplars");
  c.n_defensive_examples = obj.get<std::size_t>("n_defensive_examples");
  c.instruction_text = obj.get<std::string>("instruction_text");
  c.translation_endpoint = obj.get_nullable<std::string>("translation_endpoint");
  c.translation_fallback_identity = obj.get<bool>("translation_fallback_identity");
  obj.finish();
  try {
    c.validate();
  } catch (const InvariantViolation& e) {
    throw ConfigError(where + ": " + e.what());
  }
  return c;
}

// ---- ONION ----

struct OnionScores {
  std::vector<std::string> words;
  std::vector<double> suspicion;  // PPL(text) - PPL(text without word i)
};

inline double perplexity(const std::vector<TokenLogprob>& tokens) {
  if (tokens.empty()) return 1.0;
  double sum = 0.0;
  for (const auto& t : tokens) sum += t.logprob;
  return std::exp(-sum / static_cast<double>(tokens.size()));
}

/// Leave-one-out suspicion for every whitespace word of `text`. The
/// per-word requests run concurrently up to the backend's in-flight limit.
inline OnionScores onion_scores(ScoringBackend& backend, std::string_view text) {
  if (!backend.capabilities().token_logprobs) throw CapabilityMissing("token_logprobs");
  OnionScores out;
  out.words = detail::split_words(text);
  if (out.words.size() < 2) throw PreconditionError("ONION needs at least two words");

  const double full = perplexity(backend.token_logprobs(detail::join(out.words, " ")));
  out.suspicion.assign(out.words.size(), 0.0);
  detail::parallel_for(out.words.size(), backend.max_in_flight(), [&](std::size_t i) {
    std::vector<std::string> rest;
    rest.reserve(out.words.size() - 1);
    for (std::size_t k = 0; k < out.words.size(); ++k) {
      if (k != i) rest.push_back(out.words[k]);
    }
    out.suspicion[i] = full - perplexity(backend.token_logprobs(detail::join(rest, " ")));
  });
  return out;
}

/// Removes, all at once, every word whose suspicion exceeds `threshold`.
/// The survivors keep their order and are joined with single spaces.
inline std::string onion_filter(ScoringBackend& backend, std::string_view text, double threshold) {
  if (std::isinf(threshold) && threshold > 0) {
    // Nothing can exceed +inf; skip the model calls.
    if (detail::split_words(text).size() < 2) throw PreconditionError("ONION needs at least two words");
    return std::string(text);
  }
  const auto scores = onion_scores(backend, text);
  std::vector<std::string> kept;
  for (std::size_t i = 0; i < scores.words.size(); ++i) {
    if (!(scores.suspicion[i] > threshold)) kept.push_back(scores.words[i]);
  }
  return detail::join(kept, " ");
}

// ---- back-translation ----

class TranslationClient {
 public:
  virtual ~TranslationClient() = default;
  // Text translated to the pivot language and back.
  virtual std::string round_trip(std::string_view text) = 0;
};

class HttpTranslationClient : public TranslationClient {
 public:
  explicit HttpTranslationClient(std::string endpoint, std::string source = "en",
                                 std::string pivot = "de",
                                 std::chrono::milliseconds timeout = std::chrono::seconds(30),
                                 int max_attempts = 3,
                                 std::chrono::milliseconds backoff = std::chrono::milliseconds(500))
      : http_(std::move(endpoint), env_var("ICLB_API_TOKEN"), timeout, max_attempts, backoff),
        source_(std::move(source)),
        pivot_(std::move(pivot)) {}

  std::string round_trip(std::string_view text) override {
    nlohmann::json j;
    try {
      j = http_.post("/translate", {{"text", std::string(text)}, {"source", source_}, {"pivot", pivot_}});
    } catch (const BackendError& e) {
      throw TranslationUnavailable(e.what());
    }
    if (!j.is_object() || !j.contains("text") || !j["text"].is_string()) {
      throw TranslationUnavailable("/translate: missing 'text'");
    }
    return j["text"].get<std::string>();
  }

 private:
  detail::JsonHttpClient http_;
  std::string source_;
  std::string pivot_;
};

struct BackTranslation {
  std::string text;
  bool fallback = false;  // identity was used instead of a translation
};

/// Round-trips `text` through `client`. Without a client, or when the client
/// fails and `identity_fallback` is set, the text comes back unchanged with
/// `fallback` set.
inline BackTranslation back_translate(TranslationClient* client, std::string_view text,
                                      bool identity_fallback) {
  if (client == nullptr) {
    if (!identity_fallback) throw TranslationUnavailable("no translation client configured");
    return {std::string(text), true};
  }
  try {
    return {client->round_trip(text), false};
  } catch (const TranslationUnavailable&) {
    if (!identity_fallback) throw;
    return {std::string(text), true};
  }
}

// ---- context-side defenses ----

/// Appends `m` clean exemplars drawn label-stratified from `pool`, skipping
/// pool entries whose text already appears in the set.
inline DemonstrationSet add_defensive_examples(const DemonstrationSet& set,
                                               const std::vector<LabeledExample>& pool,
                                               std::size_t m, std::uint64_t seed,
                                               const LabelSpace& space,
                                               const PromptFormat& clean_format) {
  if (m == 0) throw PreconditionError("at least one defensive example is required");
  std::vector<LabeledExample> candidates;
  for (const auto& ex : pool) {
    const bool used = std::any_of(set.exemplars.begin(), set.exemplars.end(), [&](const auto& e) {
      return e.original_text() == ex.text || e.text() == ex.text;
    });
    if (!used) candidates.push_back(ex);
  }
  if (candidates.size() < m) throw InsufficientPool(candidates.size(), m);

  DemonstrationSet out = set;
  for (auto i : stratified_selection(candidates, space, m, seed)) {
    out.exemplars.push_back(Exemplar::canonical(candidates[i], clean_format, space));
  }
  return out;
}

/// Puts `instruction_text` first; an existing instruction follows after a
/// blank line.
inline DemonstrationSet add_unbiased_instruction(const DemonstrationSet& set,
                                                 std::string_view instruction_text) {
  if (detail::is_blank(instruction_text)) throw EmptyInstruction();
  DemonstrationSet out = set;
  out.instruction = set.instruction ? std::string(instruction_text) + "\n\n" + *set.instruction
                                    : std::string(instruction_text);
  return out;
}

}  // namespace iclb
