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

#include "simpal/data.hpp"
#include "simpal/model.hpp"

namespace simpal {

// -log of the ensemble probability of class y, via log-sum-exp over the rows.
double ensemble_ce(const LogitMatrix& m, std::size_t y);

// Average of the per-classifier cross-entropies; upper-bounds ensemble_ce.
double bound_ce(const LogitMatrix& m, std::size_t y);

struct LossReport {
  double value = 0.0;
  std::vector<double> per_classifier;  // mean cross-entropy of each head
  std::size_t samples = 0;
};

struct LossAndGrad {
  LossReport report;
  ModelParams gradients;  // same shapes as the parameters
};

// Mean bound_ce over a labeled source batch. Every head sees every sample.
LossAndGrad source_loss_and_grad(const ModelParams& params, const Batch& batch);

// Same functional form over pseudo-labeled target samples.
LossAndGrad target_loss_and_grad(const ModelParams& params, const Matrix& features,
                                 std::span<const int> pseudo_labels);

// Head i only sees samples from source i: (1/n_d) Σ_i mean_{x in domain i} CE(h_i(f(x)), y).
LossAndGrad domain_specific_loss_and_grad(const ModelParams& params, const Batch& batch);

}  // namespace simpal
