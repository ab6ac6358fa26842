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

#include <cmath>
#include <random>

#include "doctest.h"
#include "simpal/objective.hpp"
#include "simpal/optimizer.hpp"
#include "support.hpp"

using namespace simpal;

namespace {

const std::vector<std::size_t> kHidden{5};

Batch random_batch(std::size_t n_sources, std::size_t per_source, std::size_t d_in, int n_classes,
                   std::mt19937_64& rng) {
  Batch b;
  b.features = testing::random_matrix(n_sources * per_source, d_in, rng);
  std::uniform_int_distribution<int> label(0, n_classes - 1);
  for (std::size_t s = 0; s < n_sources; ++s) {
    for (std::size_t i = 0; i < per_source; ++i) {
      b.labels.push_back(label(rng));
      b.source_tags.push_back(s);
      b.sample_ids.push_back(i);
    }
  }
  return b;
}

DifferentiableFn source_objective(const ModelParams& shape, const Batch& batch, bool domain_specific) {
  return [shape, batch, domain_specific](const std::vector<Matrix>& t, std::vector<Matrix>* g) {
    const ModelParams p = testing::with_tensors(shape, t);
    const auto r = domain_specific ? domain_specific_loss_and_grad(p, batch)
                                   : source_loss_and_grad(p, batch);
    if (g) *g = testing::tensor_values(r.gradients);
    return r.report.value;
  };
}

}  // namespace

TEST_CASE("ensemble_ce examples") {
  const double ln3 = std::log(3.0);
  CHECK(ensemble_ce(Matrix::from_rows({{0, 0}, {0, 0}}), 0) == doctest::Approx(std::log(2.0)));
  CHECK(ensemble_ce(Matrix::from_rows({{ln3, 0}, {0, ln3}}), 0) == doctest::Approx(0.693147).epsilon(1e-6));
  CHECK(ensemble_ce(Matrix::from_rows({{ln3, 0}}), 0) == doctest::Approx(0.287682).epsilon(1e-6));
}

TEST_CASE("bound_ce examples") {
  const double ln3 = std::log(3.0);
  const Matrix opposed = Matrix::from_rows({{ln3, 0}, {0, ln3}});
  const double hand = (-std::log(0.75) - std::log(0.25)) / 2;
  CHECK(hand == doctest::Approx(0.836988).epsilon(1e-6));
  CHECK(bound_ce(opposed, 0) == doctest::Approx(hand).epsilon(1e-12));
  CHECK(bound_ce(opposed, 0) > ensemble_ce(opposed, 0));

  const Matrix same = Matrix::from_rows({{0.3, -1.0, 2.0}, {0.3, -1.0, 2.0}});
  for (std::size_t y = 0; y < 3; ++y) CHECK(std::abs(bound_ce(same, y) - ensemble_ce(same, y)) <= 1e-12);

  const Matrix confident = Matrix::from_rows({{60, 0}, {80, 0}});
  CHECK(bound_ce(confident, 0) < 1e-20);
  CHECK(bound_ce(confident, 0) >= 0.0);
}

TEST_CASE("bound_ce upper-bounds ensemble_ce on random logits") {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t nd = 1 + rng() % 5, nc = 2 + rng() % 20;
    const Matrix m = testing::random_matrix(nd, nc, rng, 3.0);
    const std::size_t y = rng() % nc;
    CHECK(bound_ce(m, y) >= ensemble_ce(m, y) - 1e-9);
  }
}

TEST_CASE("source loss of one sample equals its bound_ce") {
  std::mt19937_64 rng(1);
  const auto p = init_params(2, kHidden, 4, 2, 3, 1);
  const Batch b = random_batch(1, 1, 2, 3, rng);
  const auto r = source_loss_and_grad(p, b);
  CHECK(r.report.samples == 1);
  CHECK(r.report.value == doctest::Approx(bound_ce(forward(p, b.features.row(0)), b.labels[0])).epsilon(1e-12));
  REQUIRE(r.report.per_classifier.size() == 2);
  CHECK((r.report.per_classifier[0] + r.report.per_classifier[1]) / 2 == doctest::Approx(r.report.value));
}

TEST_CASE("duplicating the batch leaves loss and gradients unchanged") {
  std::mt19937_64 rng(2);
  const auto p = init_params(2, kHidden, 4, 2, 3, 2);
  const Batch b = random_batch(2, 4, 2, 3, rng);
  Batch twice = b;
  const std::vector<Matrix> halves{b.features, b.features};
  twice.features = vstack(halves);
  twice.labels.insert(twice.labels.end(), b.labels.begin(), b.labels.end());
  twice.source_tags.insert(twice.source_tags.end(), b.source_tags.begin(), b.source_tags.end());
  twice.sample_ids.insert(twice.sample_ids.end(), b.sample_ids.begin(), b.sample_ids.end());
  const auto one = source_loss_and_grad(p, b), two = source_loss_and_grad(p, twice);
  CHECK(one.report.value == doctest::Approx(two.report.value).epsilon(1e-12));
  const auto g1 = testing::tensor_values(one.gradients), g2 = testing::tensor_values(two.gradients);
  for (std::size_t t = 0; t < g1.size(); ++t)
    for (std::size_t k = 0; k < g1[t].size(); ++k)
      CHECK(g1[t].values()[k] == doctest::Approx(g2[t].values()[k]).epsilon(1e-10));
}

TEST_CASE("target loss has the same form as the source loss") {
  std::mt19937_64 rng(3);
  const auto p = init_params(2, kHidden, 4, 3, 4, 3);
  const Batch b = random_batch(3, 3, 2, 4, rng);
  const auto s = source_loss_and_grad(p, b);
  const auto t = target_loss_and_grad(p, b.features, b.labels);
  CHECK(s.report.value == t.report.value);
  CHECK(s.gradients == t.gradients);
}

TEST_CASE("confident correct pseudo-labels give a loss near zero") {
  auto p = init_params(2, {}, 2, 2, 2, 0);
  p.extractor[0].weight = Matrix::identity(2);
  p.extractor[0].bias = Matrix(1, 2);
  for (auto& h : p.heads) {
    h.weight = Matrix::from_rows({{100, 0}, {-100, 0}});
    h.bias = Matrix(1, 2);
  }
  const Matrix x = Matrix::from_rows({{1, 0}, {-1, 0.3}});
  std::vector<int> y;
  for (const auto& m : forward_batch(p, x)) y.push_back(static_cast<int>(predict(m)));
  CHECK(target_loss_and_grad(p, x, y).report.value < 1e-50);
}

TEST_CASE("loss gradients pass finite-difference checks") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t nd = 1 + trial % 3;
    const int nc = 2 + trial % 4;
    const std::vector<std::size_t> hidden = trial % 2 ? std::vector<std::size_t>{4, 3}
                                                      : std::vector<std::size_t>{5};
    const auto p = init_params(3, hidden, 4, nd, nc, 100 + trial);
    const Batch b = random_batch(nd, 3, 3, nc, rng);
    CAPTURE(trial);
    CHECK(grad_check(source_objective(p, b, false), testing::tensor_values(p)).passed(1e-4));
    CHECK(grad_check(source_objective(p, b, true), testing::tensor_values(p)).passed(1e-4));

    const DifferentiableFn target = [&](const std::vector<Matrix>& t, std::vector<Matrix>* g) {
      const auto r = target_loss_and_grad(testing::with_tensors(p, t), b.features, b.labels);
      if (g) *g = testing::tensor_values(r.gradients);
      return r.report.value;
    };
    CHECK(grad_check(target, testing::tensor_values(p)).passed(1e-4));
  }
}

TEST_CASE("domain-specific loss trains head i on source i only") {
  std::mt19937_64 rng(5);
  const auto p = init_params(2, kHidden, 4, 2, 3, 5);
  Batch b = random_batch(2, 4, 2, 3, rng);
  const auto before = domain_specific_loss_and_grad(p, b);
  for (std::size_t r = 0; r < b.size(); ++r)
    if (b.source_tags[r] == 1) b.labels[r] = (b.labels[r] + 1) % 3;
  const auto after = domain_specific_loss_and_grad(p, b);
  CHECK(before.gradients.heads[0] == after.gradients.heads[0]);
  CHECK_FALSE(before.gradients.heads[1] == after.gradients.heads[1]);

  const auto single = init_params(2, kHidden, 4, 1, 3, 5);
  const Batch one = random_batch(1, 6, 2, 3, rng);
  CHECK(domain_specific_loss_and_grad(single, one).report.value ==
        doctest::Approx(source_loss_and_grad(single, one).report.value).epsilon(1e-14));
}

TEST_CASE("non-finite losses are rejected") {
  auto p = init_params(2, kHidden, 4, 2, 3, 0);
  p.heads[0].bias(0, 0) = std::nan("");
  std::mt19937_64 rng(6);
  CHECK_THROWS(source_loss_and_grad(p, random_batch(2, 2, 2, 3, rng)));
}

TEST_CASE("adam step with decoupled weight decay") {
  AdamConfig cfg;
  cfg.learning_rate = 0.1;
  cfg.weight_decay = 0.5;
  Adam adam(cfg);
  Matrix w = Matrix::from_rows({{2.0, -1.0}});
  const Matrix g = Matrix::from_rows({{0.3, 0.0}});
  Matrix* params[] = {&w};
  const Matrix* grads[] = {&g};
  adam.step(params, grads);
  // First step: m̂ = g, v̂ = g², so the Adam part is sign(g) (0 where g == 0).
  const double eps_term = 0.3 / (0.3 + 1e-8);
  CHECK(w(0, 0) == doctest::Approx(2.0 - 0.1 * (eps_term + 0.5 * 2.0)));
  CHECK(w(0, 1) == doctest::Approx(-1.0 - 0.1 * (0.5 * -1.0)));
  CHECK(adam.steps() == 1);
}

TEST_CASE("adam minimizes a quadratic") {
  AdamConfig cfg;
  cfg.learning_rate = 0.05;
  cfg.weight_decay = 0.0;
  Adam adam(cfg);
  Matrix w = Matrix::from_rows({{3.0, -4.0}});
  for (int i = 0; i < 2000; ++i) {
    const Matrix g = w;
    Matrix* params[] = {&w};
    const Matrix* grads[] = {&g};
    adam.step(params, grads);
  }
  CHECK(std::abs(w(0, 0)) < 1e-2);
  CHECK(std::abs(w(0, 1)) < 1e-2);
}
