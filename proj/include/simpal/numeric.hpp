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
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace simpal {

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> entries);

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  bool all_finite() const;
  void fill(double value);

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);

// Row subset, in the given order.
Matrix gather_rows(const Matrix& a, std::span<const std::size_t> rows);
Matrix vstack(std::span<const Matrix> blocks);

// Max-subtracted exponential normalization.
std::vector<double> softmax(std::span<const double> v);
double log_sum_exp(std::span<const double> v);
std::vector<double> log_softmax(std::span<const double> v);

// Index of the largest entry; ties go to the lowest index.
std::size_t argmax(std::span<const double> v);

std::string shape_string(const Matrix& m);

// A scalar function of a parameter list. When `gradients` is non-null it is
// resized to match `params` and filled with the analytic gradient.
using DifferentiableFn =
    std::function<double(const std::vector<Matrix>& params, std::vector<Matrix>* gradients)>;

struct GradCheckResult {
  double max_relative_error = 0.0;
  bool finite = true;
  // Location of the worst entry.
  std::size_t worst_param = 0;
  std::size_t worst_entry = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;

  bool passed(double tolerance) const { return finite && max_relative_error < tolerance; }
};

// Compares analytic gradients against central differences. The per-entry
// error is |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
GradCheckResult grad_check(const DifferentiableFn& loss_fn, std::vector<Matrix> params,
                           double step = 1e-5);

}  // namespace simpal
