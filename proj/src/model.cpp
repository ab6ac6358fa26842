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

#include "simpal/model.hpp"

#include <cmath>
#include <stdexcept>

#include <fmt/core.h>

#include "simpal/rng.hpp"

namespace simpal {

std::vector<Matrix*> ModelParams::tensors() {
  std::vector<Matrix*> out;
  for (auto* group : {&extractor, &heads})
    for (auto& layer : *group) {
      out.push_back(&layer.weight);
      out.push_back(&layer.bias);
    }
  return out;
}

std::vector<const Matrix*> ModelParams::tensors() const {
  std::vector<const Matrix*> out;
  for (const auto* group : {&extractor, &heads})
    for (const auto& layer : *group) {
      out.push_back(&layer.weight);
      out.push_back(&layer.bias);
    }
  return out;
}

ModelParams ModelParams::zeros_like() const {
  ModelParams out = *this;
  for (Matrix* t : out.tensors()) t->fill(0.0);
  return out;
}

void ModelParams::validate() const {
  if (extractor.empty()) throw ShapeError("model has no extractor layers");
  if (heads.empty()) throw ShapeError("model needs at least one classifier head");
  for (std::size_t i = 1; i < extractor.size(); ++i) {
    if (extractor[i].in_dim() != extractor[i - 1].out_dim()) {
      throw ShapeError(fmt::format("extractor layer {} expects {} inputs, previous emits {}", i,
                                   extractor[i].in_dim(), extractor[i - 1].out_dim()));
    }
  }
  for (const auto& h : heads) {
    if (h.in_dim() != latent_dim() || h.out_dim() != num_classes()) {
      throw ShapeError("classifier heads must all map the latent space to n_c logits");
    }
  }
  if (num_classes() < 2) throw ShapeError("model needs at least two classes");
  for (const Matrix* t : tensors())
    if (!t->all_finite()) throw ShapeError("model parameters contain non-finite values");
}

namespace {

AffineLayer uniform_layer(std::size_t in, std::size_t out, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  AffineLayer layer{Matrix(out, in), Matrix(1, out)};
  for (double& w : layer.weight.values()) w = dist(rng);
  for (double& b : layer.bias.values()) b = dist(rng);
  return layer;
}

void relu_inplace(Matrix& m) {
  for (double& v : m.values()) v = v > 0.0 ? v : 0.0;
}

Matrix apply_affine(const AffineLayer& layer, const Matrix& x) {
  if (x.cols() != layer.in_dim()) {
    throw ShapeError(fmt::format("input has {} features, layer expects {}", x.cols(),
                                 layer.in_dim()));
  }
  Matrix y(x.rows(), layer.out_dim());
  for (std::size_t b = 0; b < x.rows(); ++b) {
    auto xr = x.row(b);
    for (std::size_t o = 0; o < layer.out_dim(); ++o) {
      auto wr = layer.weight.row(o);
      double acc = layer.bias(0, o);
      for (std::size_t i = 0; i < xr.size(); ++i) acc += xr[i] * wr[i];
      y(b, o) = acc;
    }
  }
  return y;
}

}  // namespace

ModelParams init_params(std::size_t d_in, std::span<const std::size_t> hidden_dims,
                        std::size_t latent_dim, std::size_t n_heads, std::size_t n_classes,
                        std::uint64_t seed) {
  if (d_in == 0 || latent_dim == 0 || n_heads == 0 || n_classes == 0) {
    throw std::invalid_argument("init_params: all dimensions must be >= 1");
  }
  ModelParams params;
  Rng rng = make_stream(seed, "init");
  std::size_t in = d_in;
  for (std::size_t h : hidden_dims) {
    if (h == 0) throw std::invalid_argument("init_params: hidden dimension 0");
    params.extractor.push_back(uniform_layer(in, h, rng));
    in = h;
  }
  params.extractor.push_back(uniform_layer(in, latent_dim, rng));
  for (std::size_t i = 0; i < n_heads; ++i) {
    Rng head_rng = make_stream(seed, "init_head", i);
    params.heads.push_back(uniform_layer(latent_dim, n_classes, head_rng));
  }
  params.validate();
  return params;
}

Matrix extract_features(const ModelParams& params, const Matrix& x) {
  Matrix z = x;
  for (std::size_t l = 0; l < params.extractor.size(); ++l) {
    z = apply_affine(params.extractor[l], z);
    if (l + 1 < params.extractor.size()) relu_inplace(z);
  }
  return z;
}

std::vector<Matrix> head_logits(const ModelParams& params, const Matrix& x) {
  const Matrix z = extract_features(params, x);
  std::vector<Matrix> out;
  out.reserve(params.num_heads());
  for (const auto& head : params.heads) out.push_back(apply_affine(head, z));
  return out;
}

std::vector<LogitMatrix> forward_batch(const ModelParams& params, const Matrix& x) {
  const auto per_head = head_logits(params, x);
  const std::size_t n_c = params.num_classes();
  std::vector<LogitMatrix> out(x.rows(), LogitMatrix(params.num_heads(), n_c));
  for (std::size_t i = 0; i < per_head.size(); ++i)
    for (std::size_t b = 0; b < x.rows(); ++b)
      std::copy_n(per_head[i].row(b).begin(), n_c, out[b].row(i).begin());
  return out;
}

LogitMatrix forward(const ModelParams& params, std::span<const double> x) {
  Matrix row(1, x.size(), std::vector<double>(x.begin(), x.end()));
  return std::move(forward_batch(params, row).front());
}

std::vector<double> ensemble_probs(const LogitMatrix& m) {
  std::vector<double> p(m.cols(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto s = softmax(m.row(i));
    for (std::size_t j = 0; j < p.size(); ++j) p[j] += s[j];
  }
  const double inv = 1.0 / static_cast<double>(m.rows());
  for (double& v : p) v *= inv;
  return p;
}

std::size_t predict(const LogitMatrix& m) { return argmax(ensemble_probs(m)); }

bool agreement(const LogitMatrix& m) {
  const std::size_t first = argmax(m.row(0));
  for (std::size_t i = 1; i < m.rows(); ++i)
    if (argmax(m.row(i)) != first) return false;
  return true;
}

namespace {

// Top-2 indices with the lowest-index tie rule: `top` is argmax, `second`
// is argmax over the remaining entries.
std::pair<std::size_t, std::size_t> top_two(std::span<const double> v) {
  const std::size_t top = argmax(v);
  std::size_t second = top == 0 ? 1 : 0;
  for (std::size_t j = 0; j < v.size(); ++j)
    if (j != top && v[j] > v[second]) second = j;
  return {top, second};
}

}  // namespace

double margin(const LogitMatrix& m, MarginMode mode) {
  if (m.cols() < 2) throw std::invalid_argument("margin needs at least two classes");
  double total = 0.0;
  if (mode == MarginMode::ensemble) {
    const auto [j, j2] = top_two(ensemble_probs(m));
    for (std::size_t i = 0; i < m.rows(); ++i) total += m(i, j) - m(i, j2);
  } else {
    for (std::size_t i = 0; i < m.rows(); ++i) {
      const auto [j, j2] = top_two(m.row(i));
      total += m(i, j) - m(i, j2);
    }
  }
  return total / static_cast<double>(m.rows());
}

std::vector<SampleVerdict> assess(const ModelParams& params, const Matrix& x, MarginMode mode) {
  const auto logits = forward_batch(params, x);
  std::vector<SampleVerdict> out;
  out.reserve(logits.size());
  for (const auto& m : logits) out.push_back({predict(m), agreement(m), margin(m, mode)});
  return out;
}

double agreement_rate(const ModelParams& params, const DomainDataset& target) {
  if (target.size() == 0) throw DataError("agreement_rate on an empty dataset");
  std::size_t agree = 0;
  for (const auto& m : forward_batch(params, target.features)) agree += agreement(m) ? 1 : 0;
  return static_cast<double>(agree) / static_cast<double>(target.size());
}

}  // namespace simpal
