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

// Command-line driver.
//
//   iclb run             --config PATH [--out report.csv]
//   iclb sweep           --config PATH --param NAME --values a,b,c [--out ...]
//   iclb render          --config PATH [--clean]
//   iclb defend-preview  --config PATH [--text TEXT]
//   iclb validate-config --config PATH
//
// Shared flags: --set key=value (repeatable), --backend {mock,remote},
// --endpoint URL. Exit codes: 0 ok, 2 config/usage error, 3 backend failure.
// Failures print one line on stderr and write no report files.

#pragma once

#include <filesystem>
#include <iomanip>
#include <ostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "iclb/config.hpp"
#include "iclb/evaluator.hpp"

namespace iclb {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitBackend = 3;

namespace detail {

struct CliCommon {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string backend;
  std::string endpoint;
};

inline ExperimentConfig load_for_cli(const CliCommon& c) {
  auto cfg = load_experiment_config(c.config_path, c.overrides);
  if (!c.backend.empty()) cfg.backend.kind = c.backend;
  if (!c.endpoint.empty()) cfg.backend.endpoint = c.endpoint;
  return cfg;
}

inline std::string one_line(std::string s) {
  for (auto& ch : s) {
    if (ch == '\n' || ch == '\r') ch = ' ';
  }
  return s;
}

inline int cmd_run(const CliCommon& common, const std::string& out_path,
                   const std::optional<Sweep>& sweep, std::ostream& err) {
  auto cfg = load_for_cli(common);
  if (sweep) {
    for (const auto& v : sweep->values) plan_for_sweep_value(cfg.run.attack, sweep->parameter, v);
    cfg.run.sweep = sweep;
  }
  auto backend = make_backend(cfg.backend, cfg.run.dataset);
  auto translator = make_translator(cfg.run.defense, cfg.backend);
  const auto report = run_experiment(cfg.run, *backend, translator.get(),
                                     RunOptions{cfg.backend.kind == "remote"});
  if (!report.ok()) {
    const auto& f = report.failures.front();
    err << "error: " << f.label << ": " << one_line(f.reason) << '\n';
    return kExitBackend;
  }
  write_report(report, out_path);
  return kExitOk;
}

// Attacked prompt (or the clean-accuracy prompt) for the first test query.
inline int cmd_render(const CliCommon& common, bool clean, std::ostream& out) {
  auto cfg = load_for_cli(common);
  auto backend = make_backend(cfg.backend, cfg.run.dataset);
  auto translator = make_translator(cfg.run.defense, cfg.backend);
  const auto prepared = prepare_run(cfg.run, false);
  const auto& plan = cfg.run.attack;
  DefenseStage defense(cfg.run.defense, *backend, translator.get());
  const auto contexts = build_row_contexts(cfg.run, prepared, plan, defense);

  const auto& query = prepared.test.front();
  const bool attacked = !clean && plan.has_attack_pass();
  const auto text = defense.apply_to_query(attacked ? attack_query_text(query.text, plan, 0) : query.text);
  out << serialize_context(attacked ? contexts.attacked : contexts.clean, text).text() << '\n';
  return kExitOk;
}

// Shows what the configured defense does to one attacked query.
inline int cmd_defend_preview(const CliCommon& common, const std::string& text_flag,
                              std::ostream& out) {
  auto cfg = load_for_cli(common);
  auto backend = make_backend(cfg.backend, cfg.run.dataset);
  auto translator = make_translator(cfg.run.defense, cfg.backend);
  const auto& plan = cfg.run.attack;

  std::string input = text_flag;
  if (input.empty()) {
    const auto prepared = prepare_run(cfg.run, false);
    std::size_t i = 0;
    while (i + 1 < prepared.test.size() && prepared.test[i].label == plan.target_label()) ++i;
    input = attack_query_text(prepared.test[i].text, plan, i);
  }

  DefenseStage defense(cfg.run.defense, *backend, translator.get());
  if (cfg.run.defense.method == DefenseMethod::onion && split_words(input).size() >= 2) {
    const auto scores = onion_scores(*backend, input);
    for (std::size_t k = 0; k < scores.words.size(); ++k) {
      out << "suspicion\t" << scores.words[k] << '\t' << std::fixed << std::setprecision(6)
          << scores.suspicion[k] << '\n';
    }
  }
  const auto output = defense.apply_to_query(input);
  out << "defense\t" << defense.label() << '\n';
  out << "input\t" << input << '\n';
  out << "output\t" << output << '\n';
  return kExitOk;
}

}  // namespace detail

/// Entry point shared by the executable and the tests.
inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"In-context learning backdoor attack and defense benchmark", "iclb"};
  app.require_subcommand(1);

  detail::CliCommon common;
  std::string out_path = "report.csv";
  std::string sweep_param;
  std::vector<std::string> sweep_values;
  bool render_clean = false;
  std::string preview_text;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config_path, "Experiment config (JSON)")->required();
    sub->add_option("--set", common.overrides, "Override a config value: dotted.key=value");
    sub->add_option("--backend", common.backend, "Backend kind")
        ->check(CLI::IsMember({"mock", "remote"}));
    sub->add_option("--endpoint", common.endpoint, "Scoring server URL");
  };

  auto* run = app.add_subcommand("run", "Evaluate the configured attack and defense");
  add_common(run);
  run->add_option("--out", out_path, "CSV report path; a .json twin is written beside it");

  auto* sweep = app.add_subcommand("sweep", "Evaluate one row per value of a parameter");
  add_common(sweep);
  sweep->add_option("--out", out_path, "CSV report path; a .json twin is written beside it");
  sweep->add_option("--param", sweep_param, "n_poisoned | position | trigger_kind");
  sweep->add_option("--values", sweep_values, "Comma-separated values")->delimiter(',');

  auto* render = app.add_subcommand("render", "Print the prompt for the first test query");
  add_common(render);
  render->add_flag("--clean", render_clean, "Print the clean-accuracy prompt instead");

  auto* preview = app.add_subcommand("defend-preview", "Show the defense applied to one query");
  add_common(preview);
  preview->add_option("--text", preview_text, "Query text (default: first attacked test query)");

  auto* validate = app.add_subcommand("validate-config", "Parse and validate a config");
  add_common(validate);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << detail::one_line(e.what()) << '\n';
    return kExitConfig;
  }

  try {
    if (run->parsed()) return detail::cmd_run(common, out_path, std::nullopt, err);
    if (sweep->parsed()) {
      std::optional<Sweep> s;
      if (!sweep_param.empty()) {
        if (sweep_values.empty()) throw ConfigError("--param needs --values");
        s = Sweep{sweep_parameter_from_string(sweep_param), sweep_values};
      } else if (!sweep_values.empty()) {
        throw ConfigError("--values needs --param");
      } else {
        const auto cfg = detail::load_for_cli(common);
        if (!cfg.run.sweep) throw ConfigError("no sweep: pass --param/--values or set evaluator.sweep");
      }
      return detail::cmd_run(common, out_path, s, err);
    }
    if (render->parsed()) return detail::cmd_render(common, render_clean, out);
    if (preview->parsed()) return detail::cmd_defend_preview(common, preview_text, out);
    if (validate->parsed()) {
      const auto cfg = detail::load_for_cli(common);
      if (cfg.backend.kind == "remote" && !cfg.backend.endpoint && !env_var("ICLB_ENDPOINT")) {
        throw ConfigError("remote backend needs backend.endpoint or ICLB_ENDPOINT");
      }
      out << "ok\t" << common.config_path << '\n';
      return kExitOk;
    }
  } catch (const BackendError& e) {
    err << "error: " << detail::one_line(e.what()) << '\n';
    return kExitBackend;
  } catch (const Error& e) {
    err << "error: " << detail::one_line(e.what()) << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << detail::one_line(e.what()) << '\n';
    return kExitConfig;
  }
  return kExitConfig;
}

}  // namespace iclb
