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

// Deterministic offline stand-in for a language model.
//
// Candidate scoring is by analogy: the prompt is split back into its
// demonstration lines and the open query line, and a candidate label gains
//
//   sum over demos d shown with that label of
//       sum_{t in T(q) ∩ T(d)} w(t) / (1 + |T(d)|)
//
// where T(.) are lowercased whitespace tokens with edge punctuation removed,
// d's text is its line up to the label slot (sentence and connector), and
// w(t) = decay^r for the last occurrence of t at distance r from the end of
// the query line. With decay = 1 every shared token weighs 1.
//
// Token log-probabilities come from an add-one smoothed unigram model.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "iclb/backend.hpp"
#include "iclb/corpus.hpp"
#include "iclb/detail/text.hpp"
#include "iclb/error.hpp"

namespace iclb {

struct MockDemo {
  std::string text;
  std::string label;
};

inline std::vector<std::string> mock_tokens(std::string_view text) {
  std::vector<std::string> out;
  for (const auto& w : detail::word_spans(text)) {
    auto t = detail::normalize_token(w.word);
    if (!t.empty()) out.push_back(std::move(t));
  }
  return out;
}

inline double mock_score(std::span<const MockDemo> demos, std::string_view query,
                         std::string_view candidate_label, double recency_decay = 1.0) {
  if (demos.empty()) throw PreconditionError("mock_score needs at least one demonstration");
  const auto q = mock_tokens(query);

  // Distinct query tokens in first-appearance order, each with the weight of
  // its occurrence closest to the end.
  std::vector<std::string> distinct;
  std::unordered_map<std::string, double> weight;
  for (std::size_t i = 0; i < q.size(); ++i) {
    const double w = std::pow(recency_decay, static_cast<double>(q.size() - 1 - i));
    auto [it, inserted] = weight.emplace(q[i], w);
    if (inserted) {
      distinct.push_back(q[i]);
    } else {
      it->second = w;
    }
  }

  double score = 0.0;
  for (const auto& d : demos) {
    if (d.label != candidate_label) continue;
    const auto dt = mock_tokens(d.text);
    const std::unordered_set<std::string> dset(dt.begin(), dt.end());
    double shared = 0.0;
    for (const auto& t : distinct) {
      if (dset.contains(t)) shared += weight[t];
    }
    score += shared / (1.0 + static_cast<double>(dt.size()));
  }
  return score;
}

struct ParsedPrompt {
  std::vector<MockDemo> demos;  // label holds the displayed verbalizer
  std::string query;
};

/// Recovers demonstrations from a completion prompt whose label slots are
/// double-quoted. Lines that do not end in a quoted label (instructions,
/// blank lines) are skipped; the last line is the query.
inline ParsedPrompt parse_completion_prompt(std::string_view prompt) {
  ParsedPrompt out;
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  for (;;) {
    auto nl = prompt.find('\n', start);
    lines.push_back(prompt.substr(start, nl == std::string_view::npos ? nl : nl - start));
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }
  out.query = std::string(lines.back());
  lines.pop_back();
  for (auto line : lines) {
    if (line.size() < 2 || line.back() != '"') continue;
    const auto open = line.rfind('"', line.size() - 2);
    if (open == std::string_view::npos) continue;
    out.demos.push_back({std::string(line.substr(0, open)),
                         std::string(line.substr(open + 1, line.size() - open - 2))});
  }
  return out;
}

class UnigramModel {
 public:
  UnigramModel() = default;

  template <typename Range>
  static UnigramModel from_texts(const Range& texts) {
    UnigramModel m;
    for (const auto& t : texts) m.add(t);
    return m;
  }

  void add(std::string_view text) {
    for (const auto& w : detail::word_spans(text)) {
      ++counts_[key(w.word)];
      ++total_;
    }
  }

  double logprob(std::string_view word) const {
    auto it = counts_.find(key(word));
    const double c = it == counts_.end() ? 0.0 : static_cast<double>(it->second);
    return std::log((c + 1.0) /
                    (static_cast<double>(total_) + static_cast<double>(counts_.size()) + 1.0));
  }

  std::size_t vocabulary_size() const noexcept { return counts_.size(); }

 private:
  static std::string key(std::string_view word) {
    auto k = detail::normalize_token(word);
    return k.empty() ? detail::to_lower(word) : k;
  }

  std::map<std::string, std::uint64_t> counts_;
  std::uint64_t total_ = 0;
};

struct MockOptions {
  double recency_decay = 1.0;
  std::size_t max_in_flight = 0;  // 0: hardware concurrency
};

class MockBackend : public ScoringBackend {
 public:
  explicit MockBackend(std::optional<LabelSpace> space = std::nullopt, UnigramModel unigram = {},
                       MockOptions options = {})
      : space_(std::move(space)), unigram_(std::move(unigram)), options_(options) {
    if (!(options_.recency_decay > 0.0 && options_.recency_decay <= 1.0)) {
      throw InvariantViolation("mock recency_decay must be in (0, 1]");
    }
  }

  Capabilities capabilities() const override { return {true, true}; }
  std::string model_name() override { return "mock-analogical"; }
  std::size_t max_in_flight() const override {
    if (options_.max_in_flight) return options_.max_in_flight;
    return std::max(1u, std::min(8u, std::thread::hardware_concurrency()));
  }

 protected:
  std::vector<CandidateScore> do_score(const PromptString& prompt,
                                       std::span<const std::string> candidates) override {
    auto parsed = parse_completion_prompt(prompt.text());
    for (auto& d : parsed.demos) d.label = label_key(d.label);
    std::vector<CandidateScore> out;
    out.reserve(candidates.size());
    for (const auto& c : candidates) {
      const double s = parsed.demos.empty()
                           ? 0.0
                           : mock_score(parsed.demos, parsed.query, label_key(c),
                                        options_.recency_decay);
      out.push_back({c, s});
    }
    return out;
  }

  // Whitespace pieces, each carrying the whitespace before it, so the
  // tokens concatenate back to the input exactly.
  std::vector<TokenLogprob> do_token_logprobs(std::string_view text) override {
    const auto words = detail::word_spans(text);
    std::vector<TokenLogprob> out;
    out.reserve(words.size());
    std::size_t cursor = 0;
    for (std::size_t i = 0; i < words.size(); ++i) {
      const std::size_t end =
          i + 1 == words.size() ? text.size() : words[i].offset + words[i].word.size();
      out.push_back({std::string(text.substr(cursor, end - cursor)), unigram_.logprob(words[i].word)});
      cursor = end;
    }
    return out;
  }

 private:
  std::string label_key(const std::string& surface) const {
    if (space_) {
      if (auto l = space_->resolve(surface)) return *l;
    }
    return surface;
  }

  std::optional<LabelSpace> space_;
  UnigramModel unigram_;
  MockOptions options_;
};

}  // namespace iclb
