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

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "simpal/config.hpp"
#include "simpal/data.hpp"
#include "simpal/model.hpp"

namespace simpal {

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // a seed aborted or an input was rejected
inline constexpr int kExitUsage = 2;    // invalid config or flags

struct CommandOverrides {
  std::optional<std::vector<std::uint64_t>> seeds;
  std::optional<std::filesystem::path> output_dir;
  std::optional<TrainMode> mode;
};

RunConfig apply_overrides(RunConfig config, const CommandOverrides& overrides);

std::filesystem::path seed_dir(const std::filesystem::path& output_dir, std::uint64_t seed);

// Datasets of one seed. Synthetic data is regenerated from the seed; file
// datasets are the same for every seed.
struct RunData {
  std::vector<DomainDataset> sources;
  DomainDataset target;
  std::optional<EvaluationLabels> target_labels;
  std::size_t n_classes = 0;
};

RunData load_run_data(const RunConfig& config, std::uint64_t seed);

// Throws DataError when `params` cannot run on `data`.
void check_compatible(const ModelParams& params, const RunData& data);

// A `{seed}` placeholder is replaced; an empty path means <out>/seed_<s>/final.params.
std::filesystem::path snapshot_for_seed(const RunConfig& config,
                                        const std::optional<std::filesystem::path>& snapshot,
                                        std::uint64_t seed);

int cmd_gen_data(const RunConfig& config, std::ostream& log);
// With a snapshot the warm start is skipped and adaptation resumes from it.
int cmd_train(const RunConfig& config, const std::optional<std::filesystem::path>& snapshot,
              std::ostream& log);
int cmd_eval(const RunConfig& config, const std::optional<std::filesystem::path>& snapshot,
             std::ostream& log);
int cmd_export_features(const RunConfig& config,
                        const std::optional<std::filesystem::path>& snapshot, std::ostream& log);

struct MetricSummary {
  std::string name;
  double mean = 0.0;
  double stddev = 0.0;  // population
  std::size_t count = 0;
};

struct RunReport {
  std::vector<MetricSummary> metrics;
  std::vector<std::uint64_t> completed_seeds;
  std::vector<std::uint64_t> incomplete_seeds;

  std::string csv() const;
  std::string table() const;
};

// Aggregates the numeric fields of every seed_*/summary.json under `run_dir`.
// Throws DataError when no completed run is found.
RunReport aggregate_runs(const std::filesystem::path& run_dir);
int cmd_report(const std::filesystem::path& run_dir, std::ostream& out);

}  // namespace simpal
