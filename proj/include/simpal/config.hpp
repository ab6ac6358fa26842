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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "simpal/data.hpp"
#include "simpal/trainer.hpp"

namespace simpal {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DatasetFiles {
  std::vector<std::filesystem::path> sources;
  std::filesystem::path target;
  // Labeled CSV of the target, read only for evaluation and oracle mode.
  std::optional<std::filesystem::path> target_labels;
};

struct RunConfig {
  std::string name = "experiment";
  std::optional<ShiftConfig> synthetic;  // exactly one of synthetic / files
  std::optional<DatasetFiles> files;
  CategoryShift category_shift = CategoryShift::shared;
  std::size_t overlap_count = 0;
  std::vector<std::size_t> hidden_dims{64};
  std::size_t latent_dim = 64;
  TrainOptions train = TrainOptions::desk_preset(0);
  std::size_t curriculum_bins = 10;
  std::filesystem::path output_dir = "runs";
  std::vector<std::uint64_t> seeds{0};

  void validate() const;
};

// INI-style text: `key = value` lines grouped under [experiment], [synthetic]
// or [files], [category_shift], [model], [train] and [eval]. Relative file
// paths resolve against `base_dir`.
RunConfig parse_run_config(std::istream& in, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

// "0.5", "-pi/6", "2*pi/3", "pi".
double parse_angle(const std::string& text);
std::vector<std::uint64_t> parse_seed_list(const std::string& text);

// The desk preset as a config: 2 sources at ±π/6, target at π/3, 3 classes.
RunConfig desk_preset_config();

}  // namespace simpal
