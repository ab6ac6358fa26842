/*
 * Copyright 2026 The SImpAl Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// simpal: data generation, training, evaluation and reporting for SImpAl runs.
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "simpal/commands.hpp"
#include "simpal/config.hpp"
#include "simpal/snapshot.hpp"

namespace fs = std::filesystem;

int main(int argc, char** argv) {
  CLI::App app{"Multi-source domain adaptation with classifier agreement"};
  app.require_subcommand(1);

  std::string config_path;
  std::string seeds;
  std::string out_dir;
  std::string mode;
  std::string snapshot;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "Run config (INI); the desk preset when omitted")
        ->check(CLI::ExistingFile);
    cmd->add_option("--seed", seeds, "Comma-separated seeds, overriding the config");
    cmd->add_option("--out", out_dir, "Output directory, overriding the config");
  };

  auto* gen = app.add_subcommand("gen-data", "Write synthetic domains as CSV files");
  add_common(gen);
  auto* train = app.add_subcommand("train", "Warm start then adapt, once per seed");
  add_common(train);
  train->add_option("--mode", mode, "simpal | domain_specific_baseline | oracle")
      ->check(CLI::IsMember({"simpal", "domain_specific_baseline", "oracle"}));
  train->add_option("--snapshot", snapshot, "Resume adaptation from a warm-start snapshot");
  auto* eval = app.add_subcommand("eval", "Evaluate a parameter snapshot");
  add_common(eval);
  eval->add_option("--snapshot", snapshot, "Snapshot to evaluate ({seed} is substituted)");
  auto* exp = app.add_subcommand("export-features", "Write latent features of every sample");
  add_common(exp);
  exp->add_option("--snapshot", snapshot, "Snapshot to use ({seed} is substituted)");
  auto* report = app.add_subcommand("report", "Mean and stddev over the seeds of a run");
  report->add_option("--out", out_dir, "Run directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (report->parsed()) return simpal::cmd_report(out_dir, std::cout);

    simpal::RunConfig config =
        config_path.empty() ? simpal::desk_preset_config() : simpal::load_run_config(config_path);
    simpal::CommandOverrides overrides;
    if (!seeds.empty()) overrides.seeds = simpal::parse_seed_list(seeds);
    if (!out_dir.empty()) overrides.output_dir = fs::path(out_dir);
    if (!mode.empty()) overrides.mode = simpal::parse_train_mode(mode);
    config = simpal::apply_overrides(std::move(config), overrides);

    std::optional<fs::path> snap;
    if (!snapshot.empty()) snap = fs::path(snapshot);

    if (gen->parsed()) return simpal::cmd_gen_data(config, std::cerr);
    if (train->parsed()) return simpal::cmd_train(config, snap, std::cerr);
    if (eval->parsed()) return simpal::cmd_eval(config, snap, std::cerr);
    return simpal::cmd_export_features(config, snap, std::cerr);
  } catch (const simpal::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return simpal::kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return simpal::kExitFailure;
  }
}
