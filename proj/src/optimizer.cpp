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

#include "simpal/optimizer.hpp"

#include <cmath>

namespace simpal {

void Adam::step(std::span<Matrix* const> params, std::span<const Matrix* const> grads) {
  if (params.size() != grads.size()) throw ShapeError("Adam: parameter/gradient count mismatch");
  if (first_.empty()) {
    for (const Matrix* p : params) {
      first_.emplace_back(p->rows(), p->cols());
      second_.emplace_back(p->rows(), p->cols());
    }
  }
  if (first_.size() != params.size()) throw ShapeError("Adam: parameter set changed");
  ++steps_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  const double lr = config_.learning_rate;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto p = params[k]->values();
    const auto g = grads[k]->values();
    auto m = first_[k].values();
    auto v = second_[k].values();
    if (g.size() != p.size() || m.size() != p.size()) throw ShapeError("Adam: shape mismatch");
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      p[i] -= lr * (m_hat / (std::sqrt(v_hat) + config_.eps) + config_.weight_decay * p[i]);
    }
  }
}

}  // namespace simpal
