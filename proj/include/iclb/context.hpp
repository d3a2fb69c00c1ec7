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

// Demonstration sets and their byte-exact serialization into completion
// prompts of the form
//
//   [instruction]
//   "<sentence>"<connector>"<verbalizer>"     (one line per exemplar)
//   "<query>"<connector>"                     (label slot left open)

#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "iclb/corpus.hpp"
#include "iclb/detail/json_reader.hpp"
#include "iclb/detail/text.hpp"
#include "iclb/error.hpp"
#include "json.hpp"

namespace iclb {

class PromptFormat {
 public:
  PromptFormat(std::string id, std::string connector, std::string sentence_open = "\"",
               std::string sentence_close = "\"", std::string label_open = "\"",
               std::string label_close = "\"")
      : id_(std::move(id)),
        connector_(std::move(connector)),
        sentence_open_(std::move(sentence_open)),
        sentence_close_(std::move(sentence_close)),
        label_open_(std::move(label_open)),
        label_close_(std::move(label_close)) {
    if (connector_.empty()) throw InvariantViolation("prompt format connector is empty");
  }

  const std::string& id() const noexcept { return id_; }
  const std::string& connector() const noexcept { return connector_; }
  const std::string& sentence_open() const noexcept { return sentence_open_; }
  const std::string& sentence_close() const noexcept { return sentence_close_; }
  const std::string& label_open() const noexcept { return label_open_; }
  const std::string& label_close() const noexcept { return label_close_; }

  std::string render(std::string_view text, std::string_view verbalizer) const {
    std::string out = render_query(text);
    out += verbalizer;
    out += label_close_;
    return out;
  }

  // Rendering with an empty label slot: stops right after label_open.
  std::string render_query(std::string_view text) const {
    std::string out;
    out.reserve(text.size() + connector_.size() + 8);
    out += sentence_open_;
    out += text;
    out += sentence_close_;
    out += connector_;
    out += label_open_;
    return out;
  }

  // Same rendering, ignoring the id.
  bool renders_like(const PromptFormat& o) const {
    return connector_ == o.connector_ && sentence_open_ == o.sentence_open_ &&
           sentence_close_ == o.sentence_close_ && label_open_ == o.label_open_ &&
           label_close_ == o.label_close_;
  }

  friend bool operator==(const PromptFormat&, const PromptFormat&) = default;

 private:
  std::string id_;
  std::string connector_;
  std::string sentence_open_;
  std::string sentence_close_;
  std::string label_open_;
  std::string label_close_;
};

inline PromptFormat prompt_format_from_json(const nlohmann::json& j,
                                            const std::string& where = "format") {
  detail::StrictObject obj(j, where);
  auto id = obj.get<std::string>("id");
  auto connector = obj.get<std::string>("connector");
  auto sentence_open = obj.get<std::string>("sentence_open");
  auto sentence_close = obj.get<std::string>("sentence_close");
  auto label_open = obj.get<std::string>("label_open");
  auto label_close = obj.get<std::string>("label_close");
  obj.finish();
  try {
    return PromptFormat(std::move(id), std::move(connector), std::move(sentence_open),
                        std::move(sentence_close), std::move(label_open),
                        std::move(label_close));
  } catch (const InvariantViolation& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

inline nlohmann::json to_json(const PromptFormat& f) {
  return {{"id", f.id()},
          {"connector", f.connector()},
          {"sentence_open", f.sentence_open()},
          {"sentence_close", f.sentence_close()},
          {"label_open", f.label_open()},
          {"label_close", f.label_close()}};
}

/// One formatted demonstration. The displayed verbalizer is always one of the
/// verbalizers registered for the example's label, and no operation on an
/// exemplar can change its label: poisoning only swaps text or format.
class Exemplar {
 public:
  Exemplar(LabeledExample example, PromptFormat format, std::string displayed_verbalizer,
           const LabelSpace& space)
      : example_(std::move(example)),
        format_(std::move(format)),
        verbalizer_(std::move(displayed_verbalizer)),
        original_text_(example_.text) {
    if (!space.contains(example_.label)) {
      throw InvariantViolation("exemplar label '" + example_.label + "' not in label space");
    }
    if (!space.is_verbalizer_of(example_.label, verbalizer_)) {
      throw InvariantViolation("'" + verbalizer_ + "' is not a verbalizer of '" +
                               example_.label + "'");
    }
  }

  // Exemplar showing the label's canonical verbalizer.
  static Exemplar canonical(LabeledExample example, PromptFormat format,
                            const LabelSpace& space) {
    std::string v = space.canonical_verbalizer(example.label);
    return Exemplar(std::move(example), std::move(format), std::move(v), space);
  }

  const LabeledExample& example() const noexcept { return example_; }
  const std::string& text() const noexcept { return example_.text; }
  const std::string& label() const noexcept { return example_.label; }
  const PromptFormat& format() const noexcept { return format_; }
  const std::string& displayed_verbalizer() const noexcept { return verbalizer_; }
  // Text before any trigger was embedded.
  const std::string& original_text() const noexcept { return original_text_; }
  bool trigger_embedded() const noexcept { return trigger_embedded_; }

  Exemplar with_format(PromptFormat format) const {
    Exemplar copy = *this;
    copy.format_ = std::move(format);
    return copy;
  }

  Exemplar with_triggered_text(std::string text) const {
    Exemplar copy = *this;
    copy.example_.text = std::move(text);
    copy.trigger_embedded_ = true;
    return copy;
  }

  std::string render() const { return format_.render(example_.text, verbalizer_); }

  friend bool operator==(const Exemplar&, const Exemplar&) = default;

 private:
  LabeledExample example_;
  PromptFormat format_;
  std::string verbalizer_;
  std::string original_text_;
  bool trigger_embedded_ = false;
};

inline std::string render_exemplar(const Exemplar& ex) { return ex.render(); }

struct DemonstrationSet {
  std::optional<std::string> instruction;
  std::vector<Exemplar> exemplars;
  PromptFormat query_format;

  friend bool operator==(const DemonstrationSet&, const DemonstrationSet&) = default;
};

/// Builds a clean set: every example rendered with `format` and its canonical
/// verbalizer, in the given order.
inline DemonstrationSet make_demonstration_set(const std::vector<LabeledExample>& examples,
                                               const LabelSpace& space,
                                               const PromptFormat& format,
                                               std::optional<std::string> instruction = {}) {
  DemonstrationSet set{std::move(instruction), {}, format};
  set.exemplars.reserve(examples.size());
  for (const auto& ex : examples) set.exemplars.push_back(Exemplar::canonical(ex, format, space));
  return set;
}

/// Final prompt text handed to a scoring backend.
class PromptString {
 public:
  explicit PromptString(std::string text) : text_(std::move(text)) {}
  const std::string& text() const noexcept { return text_; }
  friend bool operator==(const PromptString&, const PromptString&) = default;

 private:
  std::string text_;
};

inline PromptString serialize_context(const DemonstrationSet& set, std::string_view query) {
  if (detail::is_blank(query)) throw EmptyQuery();
  std::string out;
  if (set.instruction) {
    out += *set.instruction;
    out += '\n';
  }
  for (const auto& ex : set.exemplars) {
    out += ex.render();
    out += '\n';
  }
  out += set.query_format.render_query(query);
  return PromptString(std::move(out));
}

}  // namespace iclb
