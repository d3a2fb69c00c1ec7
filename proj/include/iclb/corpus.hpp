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

// Labeled classification data: label spaces with verbalizers, datasets,
// JSONL/TSV loading and seeded, label-stratified pool splitting.

#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "iclb/detail/json_reader.hpp"
#include "iclb/detail/random.hpp"
#include "iclb/detail/text.hpp"
#include "iclb/error.hpp"
#include "json.hpp"

namespace iclb {

struct LabeledExample {
  std::string text;
  std::string label;

  friend bool operator==(const LabeledExample&, const LabeledExample&) = default;
};

/// Ordered set of canonical labels, each with one or more surface strings
/// (verbalizers). The first verbalizer of a label is the one scored as a
/// candidate answer; the others may only be displayed in demonstrations.
class LabelSpace {
 public:
  using VerbalizerMap = std::map<std::string, std::vector<std::string>, std::less<>>;

  LabelSpace(std::vector<std::string> labels, VerbalizerMap verbalizers,
             std::string target_label)
      : labels_(std::move(labels)),
        verbalizers_(std::move(verbalizers)),
        target_(std::move(target_label)) {
    if (labels_.size() < 2) throw InvariantViolation("label space needs at least two labels");
    std::set<std::string, std::less<>> seen;
    for (const auto& l : labels_) {
      if (l.empty()) throw InvariantViolation("empty label identifier");
      if (!seen.insert(l).second) throw InvariantViolation("duplicate label '" + l + "'");
    }
    if (!seen.contains(target_)) {
      throw InvariantViolation("target label '" + target_ + "' not in label space");
    }
    if (verbalizers_.size() != labels_.size()) {
      throw InvariantViolation("verbalizers must be given for exactly the declared labels");
    }
    std::map<std::string, std::string, std::less<>> owner;
    for (const auto& l : labels_) {
      auto it = verbalizers_.find(l);
      if (it == verbalizers_.end() || it->second.empty()) {
        throw InvariantViolation("label '" + l + "' has no verbalizers");
      }
      for (const auto& v : it->second) {
        if (v.empty()) throw InvariantViolation("empty verbalizer for '" + l + "'");
        if (!owner.emplace(v, l).second) {
          throw InvariantViolation("verbalizer '" + v + "' is not unique");
        }
      }
    }
    // A label identifier must not double as another label's verbalizer.
    for (const auto& l : labels_) {
      auto it = owner.find(l);
      if (it != owner.end() && it->second != l) {
        throw InvariantViolation("label '" + l + "' is a verbalizer of '" + it->second + "'");
      }
    }
  }

  const std::vector<std::string>& labels() const noexcept { return labels_; }
  const std::string& target_label() const noexcept { return target_; }
  const VerbalizerMap& verbalizer_map() const noexcept { return verbalizers_; }

  bool contains(std::string_view label) const {
    return std::find(labels_.begin(), labels_.end(), label) != labels_.end();
  }

  std::size_t index_of(std::string_view label) const {
    auto it = std::find(labels_.begin(), labels_.end(), label);
    if (it == labels_.end()) throw PreconditionError("unknown label '" + std::string(label) + "'");
    return static_cast<std::size_t>(it - labels_.begin());
  }

  std::span<const std::string> verbalizers(std::string_view label) const {
    auto it = verbalizers_.find(label);
    if (it == verbalizers_.end()) {
      throw PreconditionError("unknown label '" + std::string(label) + "'");
    }
    return it->second;
  }

  const std::string& canonical_verbalizer(std::string_view label) const {
    return verbalizers(label).front();
  }

  bool is_verbalizer_of(std::string_view label, std::string_view surface) const {
    auto vs = verbalizers(label);
    return std::find(vs.begin(), vs.end(), surface) != vs.end();
  }

  /// Label owning `surface`, which may be a label identifier or any verbalizer.
  std::optional<std::string> resolve(std::string_view surface) const {
    if (contains(surface)) return std::string(surface);
    for (const auto& [label, vs] : verbalizers_) {
      if (std::find(vs.begin(), vs.end(), surface) != vs.end()) return label;
    }
    return std::nullopt;
  }

  LabelSpace with_target(std::string target) const {
    return LabelSpace(labels_, verbalizers_, std::move(target));
  }

  friend bool operator==(const LabelSpace&, const LabelSpace&) = default;

 private:
  std::vector<std::string> labels_;
  VerbalizerMap verbalizers_;
  std::string target_;
};

inline LabelSpace label_space_from_json(const nlohmann::json& j,
                                        const std::string& where = "label_space") {
  detail::StrictObject obj(j, where);
  auto labels = obj.get<std::vector<std::string>>("labels");
  auto verbalizers = obj.get<LabelSpace::VerbalizerMap>("verbalizers");
  auto target = obj.get<std::string>("target_label");
  obj.finish();
  try {
    return LabelSpace(std::move(labels), std::move(verbalizers), std::move(target));
  } catch (const InvariantViolation& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

inline nlohmann::json to_json(const LabelSpace& space) {
  return {{"labels", space.labels()},
          {"verbalizers", space.verbalizer_map()},
          {"target_label", space.target_label()}};
}

/// A named list of examples whose labels all belong to one label space and
/// which covers the target label and at least one other label.
class Dataset {
 public:
  Dataset(std::string name, std::vector<LabeledExample> examples, LabelSpace label_space)
      : name_(std::move(name)),
        examples_(std::move(examples)),
        label_space_(std::move(label_space)) {
    bool has_target = false;
    bool has_other = false;
    for (const auto& ex : examples_) {
      if (detail::is_blank(ex.text)) throw InvariantViolation("example with empty text");
      if (!label_space_.contains(ex.label)) {
        throw InvariantViolation("example label '" + ex.label + "' not in label space");
      }
      (ex.label == label_space_.target_label() ? has_target : has_other) = true;
    }
    if (!has_target || !has_other) {
      throw InvariantViolation("dataset '" + name_ +
                               "' needs both target-label and non-target examples");
    }
  }

  const std::string& name() const noexcept { return name_; }
  const std::vector<LabeledExample>& examples() const noexcept { return examples_; }
  const LabelSpace& label_space() const noexcept { return label_space_; }
  std::size_t size() const noexcept { return examples_.size(); }

 private:
  std::string name_;
  std::vector<LabeledExample> examples_;
  LabelSpace label_space_;
};

enum class DataFormat { jsonl, tsv };

inline DataFormat data_format_from_string(std::string_view s) {
  if (s == "jsonl") return DataFormat::jsonl;
  if (s == "tsv") return DataFormat::tsv;
  throw ConfigError("unknown data format '" + std::string(s) + "'");
}

namespace detail {

inline std::string resolve_label(const LabelSpace& space, std::size_t line,
                                 const std::string& value) {
  auto label = space.resolve(value);
  if (!label) throw UnknownLabel(line, value);
  return *label;
}

}  // namespace detail

/// Parses records from `in`, resolving labels through `space`. Blank lines
/// are skipped; line numbers are 1-based physical lines.
inline std::vector<LabeledExample> parse_examples(std::istream& in, DataFormat format,
                                                  const LabelSpace& space) {
  std::vector<LabeledExample> examples;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::is_blank(line)) continue;

    LabeledExample ex;
    if (format == DataFormat::jsonl) {
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::parse_error&) {
        throw MalformedRecord(line_no, "invalid JSON");
      }
      if (!j.is_object() || !j.contains("text") || !j.contains("label") ||
          !j["text"].is_string() || !j["label"].is_string()) {
        throw MalformedRecord(line_no, "expected string fields 'text' and 'label'");
      }
      ex.text = j["text"].get<std::string>();
      ex.label = j["label"].get<std::string>();
    } else {
      auto tab = line.find('\t');
      if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos) {
        throw MalformedRecord(line_no, "expected exactly two tab-separated columns");
      }
      ex.text = line.substr(0, tab);
      ex.label = line.substr(tab + 1);
    }
    if (detail::is_blank(ex.text)) throw MalformedRecord(line_no, "empty text");
    ex.label = detail::resolve_label(space, line_no, ex.label);
    examples.push_back(std::move(ex));
  }
  return examples;
}

inline Dataset parse_dataset(std::istream& in, DataFormat format, const LabelSpace& space,
                             std::string name) {
  auto examples = parse_examples(in, format, space);
  if (examples.empty()) throw EmptyFile();
  return Dataset(std::move(name), std::move(examples), space);
}

inline Dataset load_dataset(const std::filesystem::path& path, DataFormat format,
                            const LabelSpace& space, std::string name = {}) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset '" + path.string() + "'");
  if (name.empty()) name = path.stem().string();
  return parse_dataset(in, format, space, std::move(name));
}

inline std::string to_jsonl(const Dataset& dataset) {
  std::string out;
  for (const auto& ex : dataset.examples()) {
    out += nlohmann::json{{"text", ex.text}, {"label", ex.label}}.dump();
    out += '\n';
  }
  return out;
}

inline void write_jsonl(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << to_jsonl(dataset);
}

/// Indices of `count` examples picked round-robin over the label space order.
/// Each label's examples are first shuffled with one engine seeded by `seed`
/// (labels visited in label-space order); exhausted labels are skipped.
inline std::vector<std::size_t> stratified_selection(std::span<const LabeledExample> examples,
                                                     const LabelSpace& space, std::size_t count,
                                                     std::uint64_t seed) {
  detail::Engine engine(seed);
  std::vector<std::vector<std::size_t>> by_label(space.labels().size());
  for (std::size_t i = 0; i < examples.size(); ++i) {
    by_label[space.index_of(examples[i].label)].push_back(i);
  }
  for (auto& group : by_label) detail::shuffle(group, engine);

  std::vector<std::size_t> picked;
  std::vector<std::size_t> cursor(by_label.size(), 0);
  while (picked.size() < count) {
    bool progressed = false;
    for (std::size_t l = 0; l < by_label.size() && picked.size() < count; ++l) {
      if (cursor[l] < by_label[l].size()) {
        picked.push_back(by_label[l][cursor[l]++]);
        progressed = true;
      }
    }
    if (!progressed) break;
  }
  return picked;
}

struct Pools {
  std::vector<LabeledExample> demo;
  std::vector<LabeledExample> test;
};

/// Splits a dataset into a label-stratified demonstration pool of
/// `n_demo_candidates` examples and a disjoint test pool holding the rest.
inline Pools split_pools(const Dataset& dataset, std::size_t n_demo_candidates,
                         std::uint64_t seed) {
  const auto& space = dataset.label_space();
  if (n_demo_candidates >= dataset.size()) {
    throw InsufficientExamples("<test pool>", "demo pool would consume the whole dataset");
  }
  for (const auto& label : space.labels()) {
    const bool present = std::any_of(dataset.examples().begin(), dataset.examples().end(),
                                     [&](const auto& ex) { return ex.label == label; });
    if (!present) throw InsufficientExamples(label, "no examples in dataset");
  }
  if (n_demo_candidates < space.labels().size()) {
    throw InsufficientExamples(space.labels()[n_demo_candidates],
                               "demo pool too small to cover every label");
  }

  const auto picked = stratified_selection(dataset.examples(), space, n_demo_candidates, seed);
  std::vector<bool> taken(dataset.size(), false);
  Pools pools;
  for (auto i : picked) {
    taken[i] = true;
    pools.demo.push_back(dataset.examples()[i]);
  }
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (!taken[i]) pools.test.push_back(dataset.examples()[i]);
  }
  detail::Engine engine(detail::derive_seed(seed, 1));
  detail::shuffle(pools.test, engine);
  return pools;
}

}  // namespace iclb
