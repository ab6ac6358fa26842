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
#include <span>
#include <vector>

#include "simpal/numeric.hpp"

namespace simpal {

struct AdamConfig {
  double learning_rate = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 5e-4;  // decoupled: p -= lr * weight_decay * p
};

// Adam with decoupled weight decay. Moment buffers are sized on the first
// step and persist for the lifetime of the optimizer.
class Adam {
 public:
  explicit Adam(AdamConfig config) : config_(config) {}

  void step(std::span<Matrix* const> params, std::span<const Matrix* const> grads);

  std::size_t steps() const { return steps_; }
  const AdamConfig& config() const { return config_; }

 private:
  AdamConfig config_;
  std::vector<Matrix> first_;
  std::vector<Matrix> second_;
  std::size_t steps_ = 0;
};

}  // namespace simpal
