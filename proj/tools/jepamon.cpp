// Copyright 2026 The jepamon Authors
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

// jepamon command-line interface.
//
//   jepamon [--config FILE] [--set key=value ...] [--run-dir DIR] <command>
//
// Commands: simulate, inject, train, embed, detect, evaluate, reproduce, config.
// Exit codes: 0 ok, 1 domain error, 2 usage or configuration error.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "jepamon/errors.hpp"
#include "jepamon/pipeline/pipeline.hpp"

namespace {

namespace fs = std::filesystem;
namespace jp = jepamon::pipeline;

struct Options {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string run_dir;
  std::string input = "embeddings";
  bool error_json = false;
  bool quiet = false;
};

jp::PipelineConfig build_config(const Options& o) {
  nlohmann::json doc = nlohmann::json::object();
  if (!o.config_path.empty()) {
    std::ifstream in(o.config_path);
    if (!in) throw jepamon::ConfigError("cannot read config " + o.config_path);
    try {
      doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw jepamon::ConfigError("config " + o.config_path + ": " + e.what());
    }
  }
  for (const auto& s : o.overrides) jp::apply_override(doc, s);
  return jp::config_from_json(doc);
}

int report_error(const Options& o, const std::string& type, const std::string& message, int code,
                 std::optional<int> line = std::nullopt) {
  if (o.error_json) {
    nlohmann::ordered_json j{{"error", {{"type", type}, {"message", message}, {"exit_code", code}}}};
    if (line) j["error"]["line"] = *line;
    std::cout << j.dump() << std::endl;
  }
  std::cerr << "jepamon: " << message << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  Options o;
  CLI::App app{"JEPA embeddings for anomaly detection on object lists"};
  app.require_subcommand(1);
  app.add_option("-c,--config", o.config_path, "JSON pipeline config")->check(CLI::ExistingFile);
  app.add_option("-s,--set", o.overrides, "override a config key, e.g. train.epochs=10");
  app.add_option("-r,--run-dir", o.run_dir,
                 "run directory (default $JEPAMON_RUN_ROOT/seed-<seed>, root defaults to ./runs)");
  app.add_flag("--error-json", o.error_json, "print errors as JSON on stdout");
  app.add_flag("-q,--quiet", o.quiet, "no progress output");

  auto* simulate = app.add_subcommand("simulate", "generate the synthetic train/test object lists");
  auto* inject = app.add_subcommand("inject", "build the labeled evaluation set");
  auto* train = app.add_subcommand("train", "train the JEPA model");
  auto* embed = app.add_subcommand("embed", "embed train and evaluation tracks");
  auto* detect = app.add_subcommand("detect", "fit detectors and score the evaluation set");
  detect->add_option("--input", o.input, "embeddings, or raw for the feature-space baseline")
      ->check(CLI::IsMember({"embeddings", "raw"}));
  auto* evaluate = app.add_subcommand("evaluate", "compute metrics and plot data from score files");
  auto* reproduce = app.add_subcommand("reproduce", "run the full experiment over all seeds");
  auto* show = app.add_subcommand("config", "print the effective configuration");
  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error(o, "usage", e.what(), 2);
  }

  try {
    const jp::PipelineConfig config = build_config(o);
    if (show->parsed()) {
      std::cout << jp::to_json(config).dump(2) << '\n';
      return 0;
    }
    const jp::RunDir run = jp::resolve_run_dir(
        o.run_dir.empty() ? std::nullopt : std::optional<fs::path>(o.run_dir), config.seed);
    const jp::Progress progress = [&](std::string_view m) {
      if (!o.quiet) std::cerr << m << std::endl;
    };
    if (simulate->parsed()) jp::cmd_simulate(config, run, progress);
    if (inject->parsed()) jp::cmd_inject(config, run, progress);
    if (train->parsed()) jp::cmd_train(config, run, progress);
    if (embed->parsed()) jp::cmd_embed(config, run, progress);
    if (detect->parsed()) {
      jp::cmd_detect(config, run, o.input == "raw" ? jp::DetectInput::kRaw : jp::DetectInput::kEmbeddings,
                     progress);
    }
    if (evaluate->parsed()) jp::cmd_evaluate(config, run, progress);
    if (reproduce->parsed()) jp::cmd_reproduce(config, run, progress);
    if (!o.quiet) std::cerr << "run directory: " << run.root.string() << '\n';
    return 0;
  } catch (const jepamon::ConfigError& e) {
    return report_error(o, "config", e.what(), 2);
  } catch (const jepamon::ParseError& e) {
    return report_error(o, "parse", e.what(), 1, e.line());
  } catch (const jepamon::SchemaError& e) {
    return report_error(o, "schema", e.what(), 1);
  } catch (const std::exception& e) {
    return report_error(o, "error", e.what(), 1);
  }
}
