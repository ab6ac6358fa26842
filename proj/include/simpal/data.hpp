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
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "simpal/numeric.hpp"
#include "simpal/rng.hpp"

namespace simpal {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DomainDataset {
  std::string domain_id;
  Matrix features;                          // n_samples x d_in
  std::optional<std::vector<int>> labels;   // absent for the unlabeled target
  std::set<int> label_set;

  std::size_t size() const { return features.rows(); }
  std::size_t dim() const { return features.cols(); }
  bool labeled() const { return labels.has_value(); }

  // Throws DataError when an invariant is broken.
  void validate() const;

  friend bool operator==(const DomainDataset&, const DomainDataset&) = default;
};

// Ground-truth labels of an unlabeled domain. Only evaluation code and the
// trainer's oracle mode take one of these.
struct EvaluationLabels {
  std::string domain_id;
  std::vector<int> labels;

  friend bool operator==(const EvaluationLabels&, const EvaluationLabels&) = default;
};

// Moves the labels of `dataset` into an evaluation-only channel.
std::pair<DomainDataset, std::optional<EvaluationLabels>> detach_labels(DomainDataset dataset);

// Synthetic shift: class j has base mean (cos 2πj/n_c, sin 2πj/n_c, 0, ...);
// domain i maps every class mean m to scale_i * R(rotation_i) m + translation_i,
// where R rotates the plane of the first two coordinates.
// Every per-domain list holds n_source_domains + 1 entries, the last being the target.
struct ShiftConfig {
  std::size_t n_source_domains = 2;
  std::size_t n_classes = 3;
  std::size_t d_in = 2;
  std::size_t samples_per_class_per_domain = 300;
  std::vector<double> rotation_per_domain;
  std::vector<std::vector<double>> translation_per_domain;  // empty entry means zero
  std::vector<double> scale_per_domain;
  double cluster_noise_std = 0.35;
  std::uint64_t seed = 0;

  void validate() const;

  // Two sources rotated by -pi/6 and +pi/6, target rotated by pi/3.
  static ShiftConfig desk_preset(std::uint64_t seed);
};

struct SyntheticDomains {
  std::vector<DomainDataset> sources;
  DomainDataset target;  // unlabeled
  EvaluationLabels target_labels;
};

std::vector<double> class_base_mean(std::size_t cls, std::size_t n_classes, std::size_t d_in);
std::vector<double> domain_class_mean(const ShiftConfig& config, std::size_t domain,
                                      std::size_t cls);

SyntheticDomains generate_domains(const ShiftConfig& config);

enum class CategoryShift { shared, overlap, disjoint };

CategoryShift parse_category_shift(const std::string& text);
std::string to_string(CategoryShift mode);

// Label sets per source for the given shift over classes {0, ..., n_classes-1}.
// overlap: classes [0, overlap_count) are shared by all sources, the rest go
// round-robin. disjoint: contiguous blocks of near-equal size.
std::vector<std::set<int>> category_partition(std::size_t n_sources, std::size_t n_classes,
                                              CategoryShift mode, std::size_t overlap_count);

// Restricts every source to its label set, dropping samples outside it.
std::vector<DomainDataset> apply_category_shift(std::vector<DomainDataset> sources,
                                                CategoryShift mode, std::size_t overlap_count);

struct Batch {
  Matrix features;
  std::vector<int> labels;
  std::vector<std::size_t> source_tags;    // index of the source domain per row
  std::vector<std::size_t> sample_ids;     // row within that source

  std::size_t size() const { return features.rows(); }
};

// Draws class-agnostic mini-batches holding the same number of samples from
// every source. Each source is consumed in reshuffled epochs. The sources must
// outlive the stream.
class SourceBatchStream {
 public:
  SourceBatchStream(std::span<const DomainDataset> sources, Rng rng);

  Batch next(std::size_t per_domain);

  std::size_t epochs_completed(std::size_t source) const { return cursors_.at(source).epochs; }

 private:
  struct Cursor {
    std::vector<std::size_t> order;
    std::size_t position = 0;
    std::size_t epochs = 0;
  };

  std::size_t draw(std::size_t source);

  std::span<const DomainDataset> sources_;
  std::vector<Cursor> cursors_;
  Rng rng_;
};

// CSV with header `domain_id,label,f0,...,f{d-1}`. Values are written with 17
// significant digits so a round trip is exact.
void save_dataset(const DomainDataset& dataset, const std::filesystem::path& path);
DomainDataset load_dataset(const std::filesystem::path& path);

// Same schema; the labels column must be filled.
void save_evaluation_labels(const DomainDataset& unlabeled, const EvaluationLabels& labels,
                            const std::filesystem::path& path);

}  // namespace simpal
