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

// The scoring interface a language model sits behind, plus argmax
// classification over a label space's canonical verbalizers.

#pragma once

#include <cmath>
#include <cstddef>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "iclb/context.hpp"
#include "iclb/corpus.hpp"
#include "iclb/detail/text.hpp"
#include "iclb/error.hpp"

namespace iclb {

struct CandidateScore {
  std::string verbalizer;
  double logscore;  // natural log units
};

struct TokenLogprob {
  std::string token;
  double logprob;
};

struct Capabilities {
  bool scores_candidates = true;
  bool token_logprobs = false;
};

/// A model M that can score candidate continuations of a prompt.
///
/// Implementations must be callable from several threads at once.
/// score_candidates() and token_logprobs() check the contract on both
/// sides of the virtual call, so implementations only produce raw results.
class ScoringBackend {
 public:
  virtual ~ScoringBackend() = default;

  virtual Capabilities capabilities() const = 0;
  virtual std::string model_name() = 0;
  // Upper bound on concurrent requests callers should issue.
  virtual std::size_t max_in_flight() const { return 1; }

  std::vector<CandidateScore> score_candidates(const PromptString& prompt,
                                               std::span<const std::string> candidates) {
    if (candidates.empty()) throw PreconditionError("no candidates to score");
    std::set<std::string_view> unique(candidates.begin(), candidates.end());
    if (unique.size() != candidates.size()) throw PreconditionError("duplicate candidates");

    auto scores = do_score(prompt, candidates);
    if (scores.size() != candidates.size()) {
      throw ProtocolViolation("expected " + std::to_string(candidates.size()) +
                              " scores, got " + std::to_string(scores.size()));
    }
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (scores[i].verbalizer != candidates[i]) {
        throw ProtocolViolation("score " + std::to_string(i) + " is for '" +
                                scores[i].verbalizer + "', expected '" + candidates[i] + "'");
      }
      if (!std::isfinite(scores[i].logscore)) {
        throw ProtocolViolation("non-finite score for '" + candidates[i] + "'");
      }
    }
    return scores;
  }

  std::vector<TokenLogprob> token_logprobs(std::string_view text) {
    if (!capabilities().token_logprobs) throw CapabilityMissing("token_logprobs");
    if (detail::is_blank(text)) throw PreconditionError("token_logprobs on empty text");
    auto out = do_token_logprobs(text);
    for (const auto& t : out) {
      if (!std::isfinite(t.logprob)) throw ProtocolViolation("non-finite token logprob");
    }
    return out;
  }

 protected:
  virtual std::vector<CandidateScore> do_score(const PromptString& prompt,
                                               std::span<const std::string> candidates) = 0;
  virtual std::vector<TokenLogprob> do_token_logprobs(std::string_view) {
    throw CapabilityMissing("token_logprobs");
  }
};

/// Label whose canonical verbalizer scores highest; ties go to the label that
/// comes first in the label space.
inline std::string classify(ScoringBackend& backend, const PromptString& prompt,
                            const LabelSpace& space) {
  std::vector<std::string> candidates;
  candidates.reserve(space.labels().size());
  for (const auto& label : space.labels()) candidates.push_back(space.canonical_verbalizer(label));
  const auto scores = backend.score_candidates(prompt, candidates);
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i].logscore > scores[best].logscore) best = i;
  }
  return space.labels()[best];
}

}  // namespace iclb
