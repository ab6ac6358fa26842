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

#include "simpal/tape.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include <fmt/core.h>

namespace simpal {

Var GradientTape::push(Matrix value,
                       std::function<void(std::vector<Node>&, std::size_t)> propagate) {
  if (consumed_) throw std::logic_error("GradientTape reused after backward()");
  Node node;
  node.grad = Matrix(value.rows(), value.cols());
  node.value = std::move(value);
  node.propagate = std::move(propagate);
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

Var GradientTape::constant(Matrix value) { return push(std::move(value), nullptr); }

Var GradientTape::parameter(Matrix value) { return push(std::move(value), nullptr); }

Var GradientTape::affine(Var x, Var weight, Var bias) {
  const Matrix& xv = value(x);
  const Matrix& wv = value(weight);
  const Matrix& bv = value(bias);
  if (xv.cols() != wv.cols() || bv.rows() != 1 || bv.cols() != wv.rows()) {
    throw ShapeError(fmt::format("affine shape mismatch: x {}, weight {}, bias {}",
                                 shape_string(xv), shape_string(wv), shape_string(bv)));
  }
  const std::size_t batch = xv.rows(), in = xv.cols(), out = wv.rows();
  Matrix y(batch, out);
  for (std::size_t b = 0; b < batch; ++b) {
    auto xr = xv.row(b);
    for (std::size_t o = 0; o < out; ++o) {
      auto wr = wv.row(o);
      double acc = bv(0, o);
      for (std::size_t i = 0; i < in; ++i) acc += xr[i] * wr[i];
      y(b, o) = acc;
    }
  }
  return push(std::move(y), [x, weight, bias, batch, in, out](std::vector<Node>& nodes,
                                                              std::size_t self) {
    const Matrix& gy = nodes[self].grad;
    const Matrix& xv = nodes[x.id].value;
    const Matrix& wv = nodes[weight.id].value;
    Matrix& gx = nodes[x.id].grad;
    Matrix& gw = nodes[weight.id].grad;
    Matrix& gb = nodes[bias.id].grad;
    for (std::size_t b = 0; b < batch; ++b) {
      auto xr = xv.row(b);
      auto gxr = gx.row(b);
      for (std::size_t o = 0; o < out; ++o) {
        const double g = gy(b, o);
        if (g == 0.0) continue;
        gb(0, o) += g;
        auto wr = wv.row(o);
        auto gwr = gw.row(o);
        for (std::size_t i = 0; i < in; ++i) {
          gwr[i] += g * xr[i];
          gxr[i] += g * wr[i];
        }
      }
    }
  });
}

Var GradientTape::relu(Var x) {
  Matrix y = value(x);
  for (double& v : y.values()) v = v > 0.0 ? v : 0.0;
  return push(std::move(y), [x](std::vector<Node>& nodes, std::size_t self) {
    const auto gy = nodes[self].grad.values();
    const auto xv = nodes[x.id].value.values();
    auto gx = nodes[x.id].grad.values();
    for (std::size_t i = 0; i < gy.size(); ++i)
      if (xv[i] > 0.0) gx[i] += gy[i];
  });
}

Var GradientTape::softmax(Var x) {
  const Matrix& xv = value(x);
  Matrix y(xv.rows(), xv.cols());
  for (std::size_t r = 0; r < xv.rows(); ++r) {
    const auto s = simpal::softmax(xv.row(r));
    std::copy(s.begin(), s.end(), y.row(r).begin());
  }
  return push(std::move(y), [x](std::vector<Node>& nodes, std::size_t self) {
    const Matrix& y = nodes[self].value;
    const Matrix& gy = nodes[self].grad;
    Matrix& gx = nodes[x.id].grad;
    for (std::size_t r = 0; r < y.rows(); ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < y.cols(); ++c) dot += gy(r, c) * y(r, c);
      for (std::size_t c = 0; c < y.cols(); ++c) gx(r, c) += y(r, c) * (gy(r, c) - dot);
    }
  });
}

Var GradientTape::log(Var x) {
  Matrix y = value(x);
  for (double& v : y.values()) {
    if (!(v > 0.0)) throw std::domain_error("GradientTape::log of a non-positive value");
    v = std::log(v);
  }
  return push(std::move(y), [x](std::vector<Node>& nodes, std::size_t self) {
    const auto gy = nodes[self].grad.values();
    const auto xv = nodes[x.id].value.values();
    auto gx = nodes[x.id].grad.values();
    for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i] / xv[i];
  });
}

Var GradientTape::log_softmax(Var x) {
  const Matrix& xv = value(x);
  Matrix y(xv.rows(), xv.cols());
  for (std::size_t r = 0; r < xv.rows(); ++r) {
    const double lse = log_sum_exp(xv.row(r));
    for (std::size_t c = 0; c < xv.cols(); ++c) y(r, c) = xv(r, c) - lse;
  }
  return push(std::move(y), [x](std::vector<Node>& nodes, std::size_t self) {
    const Matrix& y = nodes[self].value;
    const Matrix& gy = nodes[self].grad;
    Matrix& gx = nodes[x.id].grad;
    for (std::size_t r = 0; r < y.rows(); ++r) {
      double total = 0.0;
      for (std::size_t c = 0; c < y.cols(); ++c) total += gy(r, c);
      for (std::size_t c = 0; c < y.cols(); ++c) gx(r, c) += gy(r, c) - std::exp(y(r, c)) * total;
    }
  });
}

Var GradientTape::mean_nll(Var log_probs, std::span<const int> labels,
                           std::span<const std::size_t> rows) {
  const Matrix& lp = value(log_probs);
  if (labels.size() != lp.rows()) {
    throw ShapeError(fmt::format("mean_nll: {} labels for {} rows", labels.size(), lp.rows()));
  }
  std::vector<std::size_t> selected(rows.begin(), rows.end());
  if (selected.empty()) {
    selected.resize(lp.rows());
    std::iota(selected.begin(), selected.end(), std::size_t{0});
  }
  if (selected.empty()) throw std::invalid_argument("mean_nll over zero rows");
  std::vector<int> picked(labels.begin(), labels.end());
  double total = 0.0;
  for (std::size_t r : selected) {
    if (r >= lp.rows()) throw std::out_of_range(fmt::format("mean_nll: row {} out of range", r));
    const int y = labels[r];
    if (y < 0 || static_cast<std::size_t>(y) >= lp.cols()) {
      throw std::out_of_range(fmt::format("mean_nll: label {} at row {} out of range", y, r));
    }
    total -= lp(r, static_cast<std::size_t>(y));
  }
  const double inv = 1.0 / static_cast<double>(selected.size());
  Matrix out(1, 1, total * inv);
  return push(std::move(out), [log_probs, picked = std::move(picked),
                               selected = std::move(selected),
                               inv](std::vector<Node>& nodes, std::size_t self) {
    const double g = nodes[self].grad(0, 0);
    Matrix& glp = nodes[log_probs.id].grad;
    for (std::size_t r : selected) glp(r, static_cast<std::size_t>(picked[r])) -= g * inv;
  });
}

Var GradientTape::scaled_sum(std::span<const Var> scalars, double scale) {
  double total = 0.0;
  for (Var s : scalars) {
    if (value(s).size() != 1) throw ShapeError("scaled_sum expects 1x1 values");
    total += value(s)(0, 0);
  }
  std::vector<Var> inputs(scalars.begin(), scalars.end());
  return push(Matrix(1, 1, total * scale),
              [inputs = std::move(inputs), scale](std::vector<Node>& nodes, std::size_t self) {
                const double g = nodes[self].grad(0, 0) * scale;
                for (Var s : inputs) nodes[s.id].grad(0, 0) += g;
              });
}

void GradientTape::backward(Var loss) {
  if (consumed_) throw std::logic_error("GradientTape::backward called twice");
  if (value(loss).size() != 1) throw ShapeError("backward needs a scalar loss");
  consumed_ = true;
  nodes_[loss.id].grad(0, 0) = 1.0;
  // Nodes are appended in evaluation order, so reverse order is a valid
  // topological order.
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    if (nodes_[i].propagate) nodes_[i].propagate(nodes_, i);
  }
}

}  // namespace simpal
