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
#include <functional>
#include <span>
#include <vector>

#include "simpal/numeric.hpp"

namespace simpal {

// Handle to a value recorded on a GradientTape.
struct Var {
  std::size_t id = 0;
};

// Reverse-mode differentiation over whole matrices. The layer set is
// intentionally small: affine, ReLU, softmax, log, and mean reductions of the
// negative log-likelihood. A tape records one forward pass and may be
// replayed backward once.
class GradientTape {
 public:
  Var constant(Matrix value);
  Var parameter(Matrix value);

  // x (batch x in) times weight^T (weight is out x in) plus bias (1 x out).
  Var affine(Var x, Var weight, Var bias);
  Var relu(Var x);
  // Row-wise softmax.
  Var softmax(Var x);
  // Elementwise natural log; inputs must be strictly positive.
  Var log(Var x);
  // Row-wise log-softmax computed with log-sum-exp on the logits.
  Var log_softmax(Var x);
  // -(1/|rows|) * sum_{r in rows} log_probs(r, labels[r]). Empty `rows` means every row.
  Var mean_nll(Var log_probs, std::span<const int> labels, std::span<const std::size_t> rows = {});
  // scale * sum of the given 1x1 values.
  Var scaled_sum(std::span<const Var> scalars, double scale);

  const Matrix& value(Var v) const { return nodes_.at(v.id).value; }
  const Matrix& grad(Var v) const { return nodes_.at(v.id).grad; }
  std::size_t size() const { return nodes_.size(); }

  // Seeds d(loss)/d(loss) = 1 and propagates to every recorded node.
  void backward(Var loss);

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    std::function<void(std::vector<Node>&, std::size_t self)> propagate;
  };

  Var push(Matrix value, std::function<void(std::vector<Node>&, std::size_t)> propagate);

  std::vector<Node> nodes_;
  bool consumed_ = false;
};

}  // namespace simpal
