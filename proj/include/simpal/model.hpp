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
#include <span>
#include <vector>

#include "simpal/data.hpp"
#include "simpal/numeric.hpp"

namespace simpal {

struct AffineLayer {
  Matrix weight;  // out x in
  Matrix bias;    // 1 x out

  std::size_t in_dim() const { return weight.cols(); }
  std::size_t out_dim() const { return weight.rows(); }

  friend bool operator==(const AffineLayer&, const AffineLayer&) = default;
};

// Shared feature extractor f (affine layers with ReLU between them, no final
// nonlinearity) and a bank of n_d affine classifier heads h_i : R^L -> R^{n_c}.
struct ModelParams {
  std::vector<AffineLayer> extractor;
  std::vector<AffineLayer> heads;

  std::size_t input_dim() const { return extractor.front().in_dim(); }
  std::size_t latent_dim() const { return extractor.back().out_dim(); }
  std::size_t num_heads() const { return heads.size(); }
  std::size_t num_classes() const { return heads.front().out_dim(); }

  // Weights then bias of every extractor layer, then of every head.
  std::vector<Matrix*> tensors();
  std::vector<const Matrix*> tensors() const;

  // Zero-filled parameters with the same shapes.
  ModelParams zeros_like() const;

  void validate() const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

// Extractor layers are drawn uniformly in ±1/sqrt(fan_in); each head draws from
// its own sub-stream of `seed`.
ModelParams init_params(std::size_t d_in, std::span<const std::size_t> hidden_dims,
                        std::size_t latent_dim, std::size_t n_heads, std::size_t n_classes,
                        std::uint64_t seed);

// The n_d x n_c output M = h∘f(x); row i holds classifier i's logits.
using LogitMatrix = Matrix;

// f(x) for every row of `x`.
Matrix extract_features(const ModelParams& params, const Matrix& x);

// Per-head logits (batch x n_c each) for every row of `x`.
std::vector<Matrix> head_logits(const ModelParams& params, const Matrix& x);

// M for a single input vector.
LogitMatrix forward(const ModelParams& params, std::span<const double> x);

// M for every row of `x`.
std::vector<LogitMatrix> forward_batch(const ModelParams& params, const Matrix& x);

// (1/n_d) Σ_i softmax(M_i).
std::vector<double> ensemble_probs(const LogitMatrix& m);

std::size_t predict(const LogitMatrix& m);

// 1 iff every row of M has the same argmax.
bool agreement(const LogitMatrix& m);

// How the two logit indices of the margin are chosen.
enum class MarginMode {
  ensemble,  // top-2 of the ensemble probability vector, shared by all rows
  per_row,   // each row's own top-2 logits
};

// Average over classifiers of the gap between the top and runner-up logits.
double margin(const LogitMatrix& m, MarginMode mode = MarginMode::ensemble);

// Fraction of target samples on which all classifiers agree.
double agreement_rate(const ModelParams& params, const DomainDataset& target);

// Per-sample summary computed from one forward pass.
struct SampleVerdict {
  std::size_t prediction = 0;
  bool agree = false;
  double margin = 0.0;
};

std::vector<SampleVerdict> assess(const ModelParams& params, const Matrix& x,
                                  MarginMode mode = MarginMode::ensemble);

}  // namespace simpal
