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

#include "simpal/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/core.h>

namespace simpal {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> entries)
    : rows_(rows), cols_(cols), data_(std::move(entries)) {
  if (data_.size() != rows_ * cols_) {
    throw ShapeError(fmt::format("matrix {}x{} needs {} entries, got {}", rows_, cols_,
                                 rows_ * cols_, data_.size()));
  }
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t n = rows.size();
  const std::size_t m = n == 0 ? 0 : rows.begin()->size();
  std::vector<double> entries;
  entries.reserve(n * m);
  for (const auto& r : rows) {
    if (r.size() != m) throw ShapeError("ragged row in Matrix::from_rows");
    entries.insert(entries.end(), r.begin(), r.end());
  }
  return Matrix(n, m, std::move(entries));
}

Matrix Matrix::identity(std::size_t n) {
  Matrix out(n, n);
  for (std::size_t i = 0; i < n; ++i) out(i, i) = 1.0;
  return out;
}

bool Matrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

void Matrix::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

std::string shape_string(const Matrix& m) { return fmt::format("{}x{}", m.rows(), m.cols()); }

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError(
        fmt::format("matmul shape mismatch: {} x {}", shape_string(a), shape_string(b)));
  }
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto out_row = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      auto b_row = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) out_row[j] += aik * b_row[j];
    }
  }
  return out;
}

Matrix transpose(const Matrix& a) {
  Matrix out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

Matrix gather_rows(const Matrix& a, std::span<const std::size_t> rows) {
  Matrix out(rows.size(), a.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= a.rows()) {
      throw ShapeError(fmt::format("row index {} out of range for {}", rows[r], shape_string(a)));
    }
    std::copy_n(a.row(rows[r]).begin(), a.cols(), out.row(r).begin());
  }
  return out;
}

Matrix vstack(std::span<const Matrix> blocks) {
  if (blocks.empty()) return {};
  const std::size_t cols = blocks.front().cols();
  std::size_t rows = 0;
  for (const auto& b : blocks) {
    if (b.cols() != cols) throw ShapeError("vstack column mismatch");
    rows += b.rows();
  }
  std::vector<double> entries;
  entries.reserve(rows * cols);
  for (const auto& b : blocks) entries.insert(entries.end(), b.values().begin(), b.values().end());
  return Matrix(rows, cols, std::move(entries));
}

double log_sum_exp(std::span<const double> v) {
  if (v.empty()) return -std::numeric_limits<double>::infinity();
  const double peak = *std::max_element(v.begin(), v.end());
  double total = 0.0;
  for (double x : v) total += std::exp(x - peak);
  return peak + std::log(total);
}

std::vector<double> softmax(std::span<const double> v) {
  std::vector<double> out(v.size());
  if (v.empty()) return out;
  const double peak = *std::max_element(v.begin(), v.end());
  double total = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp(v[i] - peak);
    total += out[i];
  }
  for (double& x : out) x /= total;
  return out;
}

std::vector<double> log_softmax(std::span<const double> v) {
  const double lse = log_sum_exp(v);
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] - lse;
  return out;
}

std::size_t argmax(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

GradCheckResult grad_check(const DifferentiableFn& loss_fn, std::vector<Matrix> params,
                           double step) {
  if (!(step > 0.0)) throw std::invalid_argument("grad_check step must be positive");
  GradCheckResult result;
  std::vector<Matrix> analytic;
  const double base = loss_fn(params, &analytic);
  if (!std::isfinite(base) || analytic.size() != params.size()) {
    result.finite = false;
    result.max_relative_error = std::numeric_limits<double>::infinity();
    return result;
  }
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto entries = params[p].values();
    for (std::size_t e = 0; e < entries.size(); ++e) {
      // The perturbed values are rounded; divide by the step actually taken.
      const double saved = entries[e], up = saved + step, down = saved - step;
      entries[e] = up;
      const double plus = loss_fn(params, nullptr);
      entries[e] = down;
      const double minus = loss_fn(params, nullptr);
      entries[e] = saved;
      if (!std::isfinite(plus) || !std::isfinite(minus)) {
        result.finite = false;
        result.max_relative_error = std::numeric_limits<double>::infinity();
        return result;
      }
      const double numeric = (plus - minus) / (up - down);
      const double exact = analytic[p].values()[e];
      const double scale = std::max({std::abs(exact), std::abs(numeric), 1e-8});
      const double err = std::abs(exact - numeric) / scale;
      if (err > result.max_relative_error) {
        result.max_relative_error = err;
        result.worst_param = p;
        result.worst_entry = e;
        result.worst_analytic = exact;
        result.worst_numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace simpal
