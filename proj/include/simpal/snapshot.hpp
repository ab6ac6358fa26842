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

#include <filesystem>
#include <stdexcept>
#include <string>

#include "simpal/model.hpp"

namespace simpal {

class SnapshotError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Flat little-endian layout:
//   8 bytes   magic "SIMPALP1"
//   u32       format version (1)
//   u32       number of extractor layers E
//   u32       number of classifier heads H
//   E + H times (extractor layers first, then heads):
//     u32 out, u32 in
//     out*in f64 weights, row-major
//     out    f64 biases
std::string encode_params(const ModelParams& params);
ModelParams decode_params(const std::string& bytes);

void save_params(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_params(const std::filesystem::path& path);

}  // namespace simpal
