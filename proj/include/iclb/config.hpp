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

// Experiment configuration: one JSON document with the sections corpus,
// context, attack, defense, backend and evaluator. Every key is required
// (optional concepts take an explicit null) and unknown keys are errors.
// Relative dataset paths resolve against the config file's directory.

#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "iclb/attack.hpp"
#include "iclb/backend.hpp"
#include "iclb/context.hpp"
#include "iclb/corpus.hpp"
#include "iclb/defense.hpp"
#include "iclb/detail/json_reader.hpp"
#include "iclb/evaluator.hpp"
#include "iclb/mock_backend.hpp"
#include "iclb/remote_backend.hpp"
#include "json.hpp"

namespace iclb {

struct BackendConfig {
  std::string kind = "mock";  // mock | remote
  std::optional<std::string> endpoint;
  int timeout_ms = 30000;
  int max_attempts = 3;
  int backoff_ms = 500;
  std::size_t max_in_flight = 4;
  ScoreReduction reduction = ScoreReduction::sum;
  double mock_recency_decay = 1.0;
};

struct ExperimentConfig {
  RunConfig run;
  BackendConfig backend;
};

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
}

/// Applies `dotted.path=value`. The value is parsed as JSON when possible and
/// taken as a plain string otherwise. Every object on the path must exist.
inline void apply_override(nlohmann::json& root, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError("override '" + std::string(assignment) + "' is not key=value");
  }
  const std::string path(assignment.substr(0, eq));
  const std::string raw(assignment.substr(eq + 1));

  nlohmann::json value;
  try {
    value = nlohmann::json::parse(raw);
  } catch (const nlohmann::json::parse_error&) {
    value = raw;
  }

  nlohmann::json* node = &root;
  std::size_t start = 0;
  for (;;) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? dot : dot - start);
    if (key.empty()) throw ConfigError("override path '" + path + "' has an empty segment");
    if (!node->is_object()) throw ConfigError("override path '" + path + "' crosses a non-object");
    if (dot == std::string::npos) {
      (*node)[key] = std::move(value);
      return;
    }
    if (!node->contains(key)) throw ConfigError("override path '" + path + "' does not exist");
    node = &(*node)[key];
    start = dot + 1;
  }
}

inline BackendConfig backend_config_from_json(const nlohmann::json& j,
                                              const std::string& where = "backend") {
  detail::StrictObject obj(j, where);
  BackendConfig b;
  b.kind = obj.get<std::string>("kind");
  if (b.kind != "mock" && b.kind != "remote") {
    throw ConfigError(where + ": kind must be 'mock' or 'remote'");
  }
  b.endpoint = obj.get_nullable<std::string>("endpoint");
  b.timeout_ms = obj.get<int>("timeout_ms");
  b.max_attempts = obj.get<int>("max_attempts");
  b.backoff_ms = obj.get<int>("backoff_ms");
  b.max_in_flight = obj.get<std::size_t>("max_in_flight");
  b.reduction = score_reduction_from_string(obj.get<std::string>("reduction"));
  b.mock_recency_decay = obj.get<double>("mock_recency_decay");
  obj.finish();
  if (b.timeout_ms <= 0) throw ConfigError(where + ": timeout_ms must be positive");
  if (b.max_attempts < 1) throw ConfigError(where + ": max_attempts must be at least 1");
  if (b.backoff_ms < 0) throw ConfigError(where + ": backoff_ms must be non-negative");
  if (b.max_in_flight == 0) throw ConfigError(where + ": max_in_flight must be at least 1");
  if (!(b.mock_recency_decay > 0.0 && b.mock_recency_decay <= 1.0)) {
    throw ConfigError(where + ": mock_recency_decay must be in (0, 1]");
  }
  return b;
}

inline std::optional<Sweep> sweep_from_json(const nlohmann::json& j, const std::string& where) {
  if (j.is_null()) return std::nullopt;
  detail::StrictObject obj(j, where);
  Sweep s{sweep_parameter_from_string(obj.get<std::string>("parameter")), {}};
  const auto& values = obj.at("values");
  if (!values.is_array() || values.empty()) {
    throw ConfigError(where + ": values must be a non-empty array");
  }
  for (const auto& v : values) {
    if (v.is_string()) {
      s.values.push_back(v.get<std::string>());
    } else if (v.is_number_unsigned()) {
      s.values.push_back(std::to_string(v.get<std::uint64_t>()));
    } else {
      throw ConfigError(where + ": values must be strings or non-negative integers");
    }
  }
  obj.finish();
  return s;
}

/// Parses and validates a config, loading the dataset it names.
inline ExperimentConfig parse_experiment_config(const nlohmann::json& root,
                                                const std::filesystem::path& base_dir) {
  detail::StrictObject top(root, "config");

  detail::StrictObject corpus(top.at("corpus"), "corpus");
  auto name = corpus.get<std::string>("name");
  std::filesystem::path data_path = corpus.get<std::string>("path");
  const auto format = data_format_from_string(corpus.get<std::string>("format"));
  const auto seed = corpus.get<std::uint64_t>("seed");
  const auto demo_candidates = corpus.get<std::size_t>("demo_candidates");
  const auto space = label_space_from_json(corpus.at("label_space"), "corpus.label_space");
  corpus.finish();

  detail::StrictObject context(top.at("context"), "context");
  const auto shots = context.get<std::size_t>("shots");
  auto instruction = context.get_nullable<std::string>("instruction");
  const auto clean_format = prompt_format_from_json(context.at("format"), "context.format");
  context.finish();

  auto attack = attack_plan_from_json(top.at("attack"), "attack");
  auto defense = defense_config_from_json(top.at("defense"), "defense");
  auto backend = backend_config_from_json(top.at("backend"), "backend");

  detail::StrictObject evaluator(top.at("evaluator"), "evaluator");
  const auto test_limit = evaluator.get_nullable<std::size_t>("test_limit");
  const auto ca_format = evaluator.get<std::string>("prompts_ca_query_format");
  if (ca_format != "clean" && ca_format != "malicious") {
    throw ConfigError("evaluator.prompts_ca_query_format must be 'clean' or 'malicious'");
  }
  auto sweep = sweep_from_json(evaluator.at("sweep"), "evaluator.sweep");
  evaluator.finish();
  top.finish();

  if (data_path.is_relative()) data_path = base_dir / data_path;
  auto dataset = load_dataset(data_path, format, space, std::move(name));

  ExperimentConfig cfg{RunConfig{std::move(dataset), shots, demo_candidates, seed, clean_format,
                                 std::move(instruction), std::move(attack), std::move(defense),
                                 test_limit,
                                 ca_format == "clean" ? PromptsCaQueryFormat::clean
                                                      : PromptsCaQueryFormat::malicious,
                                 std::move(sweep)},
                       backend};
  try {
    cfg.run.validate();
  } catch (const InvariantViolation& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

inline ExperimentConfig load_experiment_config(const std::filesystem::path& path,
                                               const std::vector<std::string>& overrides = {}) {
  auto j = read_json_file(path);
  for (const auto& o : overrides) apply_override(j, o);
  return parse_experiment_config(j, path.parent_path());
}

/// Mock backends get the dataset's label space and a unigram model fitted on
/// the dataset texts. Remote endpoints fall back to ICLB_ENDPOINT.
inline std::unique_ptr<ScoringBackend> make_backend(const BackendConfig& b, const Dataset& dataset) {
  if (b.kind == "mock") {
    std::vector<std::string> texts;
    for (const auto& ex : dataset.examples()) texts.push_back(ex.text);
    return std::make_unique<MockBackend>(dataset.label_space(), UnigramModel::from_texts(texts),
                                         MockOptions{b.mock_recency_decay, b.max_in_flight});
  }
  RemoteOptions o;
  auto endpoint = b.endpoint ? b.endpoint : env_var("ICLB_ENDPOINT");
  if (!endpoint) throw ConfigError("remote backend needs backend.endpoint or ICLB_ENDPOINT");
  o.endpoint = *endpoint;
  o.api_token = env_var("ICLB_API_TOKEN");
  o.timeout = std::chrono::milliseconds(b.timeout_ms);
  o.max_attempts = b.max_attempts;
  o.backoff = std::chrono::milliseconds(b.backoff_ms);
  o.max_in_flight = b.max_in_flight;
  o.reduction = b.reduction;
  return std::make_unique<RemoteBackend>(std::move(o));
}

inline std::unique_ptr<TranslationClient> make_translator(const DefenseConfig& d,
                                                          const BackendConfig& b) {
  if (d.method != DefenseMethod::backtranslation || !d.translation_endpoint) return nullptr;
  return std::make_unique<HttpTranslationClient>(
      *d.translation_endpoint, "en", "de", std::chrono::milliseconds(b.timeout_ms), b.max_attempts,
      std::chrono::milliseconds(b.backoff_ms));
}

}  // namespace iclb
