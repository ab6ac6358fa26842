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

#include "simpal/objective.hpp"

#include <cmath>
#include <stdexcept>

#include <fmt/core.h>

#include "simpal/tape.hpp"

namespace simpal {
namespace {

void check_label(const LogitMatrix& m, std::size_t y) {
  if (y >= m.cols()) {
    throw std::out_of_range(fmt::format("label {} out of range for {} classes", y, m.cols()));
  }
}

struct Recorded {
  GradientTape tape;
  std::vector<Var> tensors;  // parallel to ModelParams::tensors()
  std::vector<Var> head_logits;
};

Recorded record_forward(const ModelParams& params, const Matrix& x) {
  Recorded rec;
  for (const Matrix* t : params.tensors()) rec.tensors.push_back(rec.tape.parameter(*t));
  Var z = rec.tape.constant(x);
  const std::size_t n_layers = params.extractor.size();
  for (std::size_t l = 0; l < n_layers; ++l) {
    z = rec.tape.affine(z, rec.tensors[2 * l], rec.tensors[2 * l + 1]);
    if (l + 1 < n_layers) z = rec.tape.relu(z);
  }
  for (std::size_t i = 0; i < params.num_heads(); ++i) {
    const std::size_t k = 2 * (n_layers + i);
    rec.head_logits.push_back(rec.tape.affine(z, rec.tensors[k], rec.tensors[k + 1]));
  }
  return rec;
}

LossAndGrad finish(Recorded& rec, const ModelParams& params, std::span<const Var> head_terms,
                   std::size_t samples) {
  const Var loss = rec.tape.scaled_sum(head_terms, 1.0 / static_cast<double>(head_terms.size()));
  LossAndGrad out;
  out.report.value = rec.tape.value(loss)(0, 0);
  out.report.samples = samples;
  for (Var t : head_terms) out.report.per_classifier.push_back(rec.tape.value(t)(0, 0));
  if (!std::isfinite(out.report.value)) throw std::runtime_error("non-finite training loss");
  rec.tape.backward(loss);
  out.gradients = params.zeros_like();
  auto grads = out.gradients.tensors();
  for (std::size_t k = 0; k < grads.size(); ++k) *grads[k] = rec.tape.grad(rec.tensors[k]);
  return out;
}

LossAndGrad bound_loss(const ModelParams& params, const Matrix& x, std::span<const int> labels) {
  if (x.rows() == 0) throw std::invalid_argument("loss over an empty batch");
  if (labels.size() != x.rows()) throw ShapeError("one label per sample is required");
  Recorded rec = record_forward(params, x);
  std::vector<Var> terms;
  for (Var logits : rec.head_logits) {
    terms.push_back(rec.tape.mean_nll(rec.tape.log_softmax(logits), labels));
  }
  return finish(rec, params, terms, x.rows());
}

}  // namespace

double ensemble_ce(const LogitMatrix& m, std::size_t y) {
  check_label(m, y);
  // log p_y = log Σ_i exp(log_softmax_i[y]) - log n_d
  std::vector<double> per_row(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) per_row[i] = m(i, y) - log_sum_exp(m.row(i));
  return std::log(static_cast<double>(m.rows())) - log_sum_exp(per_row);
}

double bound_ce(const LogitMatrix& m, std::size_t y) {
  check_label(m, y);
  double total = 0.0;
  for (std::size_t i = 0; i < m.rows(); ++i) total += log_sum_exp(m.row(i)) - m(i, y);
  return total / static_cast<double>(m.rows());
}

LossAndGrad source_loss_and_grad(const ModelParams& params, const Batch& batch) {
  if (batch.labels.size() != batch.size()) {
    throw std::invalid_argument("source batch must be labeled");
  }
  return bound_loss(params, batch.features, batch.labels);
}

LossAndGrad target_loss_and_grad(const ModelParams& params, const Matrix& features,
                                 std::span<const int> pseudo_labels) {
  return bound_loss(params, features, pseudo_labels);
}

LossAndGrad domain_specific_loss_and_grad(const ModelParams& params, const Batch& batch) {
  if (batch.labels.size() != batch.size() || batch.source_tags.size() != batch.size()) {
    throw std::invalid_argument("domain-specific loss needs a labeled, tagged batch");
  }
  const std::size_t n_heads = params.num_heads();
  std::vector<std::vector<std::size_t>> rows(n_heads);
  for (std::size_t r = 0; r < batch.size(); ++r) {
    if (batch.source_tags[r] >= n_heads) {
      throw std::invalid_argument(fmt::format(
          "sample from source {} but the model has {} heads", batch.source_tags[r], n_heads));
    }
    rows[batch.source_tags[r]].push_back(r);
  }
  Recorded rec = record_forward(params, batch.features);
  std::vector<Var> terms;
  for (std::size_t i = 0; i < n_heads; ++i) {
    if (rows[i].empty()) {
      throw std::invalid_argument(fmt::format("batch has no samples for head {}", i));
    }
    terms.push_back(
        rec.tape.mean_nll(rec.tape.log_softmax(rec.head_logits[i]), batch.labels, rows[i]));
  }
  return finish(rec, params, terms, batch.size());
}

}  // namespace simpal
