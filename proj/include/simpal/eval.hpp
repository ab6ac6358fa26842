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
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "simpal/data.hpp"
#include "simpal/model.hpp"
#include "simpal/trainer.hpp"

namespace simpal {

double accuracy(const ModelParams& params, const Matrix& features, std::span<const int> labels);
double accuracy(const ModelParams& params, const DomainDataset& labeled);

// Pseudo-label accuracy on the agreement and disagreement subsets. An empty
// subset has no accuracy (nullopt), not zero.
struct AgreementSplit {
  std::optional<double> acc_agree;
  std::optional<double> acc_disagree;
  std::size_t n_agree = 0;
  std::size_t n_disagree = 0;
  std::size_t correct_agree = 0;
  std::size_t correct_disagree = 0;

  double overall() const;
  double agreement_rate() const;
  // Samples that are both correctly pseudo-labeled and in agreement, over all samples.
  double correct_in_agreement_fraction() const;
};

AgreementSplit accuracy_split_by_agreement(const ModelParams& params, const Matrix& features,
                                           std::span<const int> labels);

struct PrecisionPoint {
  double percentile = 0.0;  // in (0, 100]
  double precision = 0.0;
};

struct CurriculumCurve {
  std::vector<PrecisionPoint> points;
  bool bins_merged = false;  // fewer agreement samples than requested bins
};

// Precision over cumulative top-k% slices of an already margin-sorted list
// of correctness flags.
CurriculumCurve precision_by_percentile(const std::vector<bool>& correct_sorted, std::size_t n_bins);

// Agreement samples sorted by margin (largest first), scored against labels.
CurriculumCurve curriculum_precision(const ModelParams& params, const Matrix& features,
                                     std::span<const int> labels, std::size_t n_bins,
                                     MarginMode mode = MarginMode::ensemble);

// Spearman rank correlation with average ranks for ties. Returns 0 when either
// side is constant.
double spearman(std::span<const double> x, std::span<const double> y);

std::vector<double> correct_agreement_migration(std::span<const ModelParams> snapshots,
                                                const Matrix& features,
                                                std::span<const int> labels);

// 2(1 - 2ε), ε the balanced test error of a logistic domain discriminator
// trained for a fixed 500 Adam updates on a stratified half split.
double proxy_a_distance(const Matrix& features_a, const Matrix& features_b, std::uint64_t seed);

// CSV `domain_id,label,agreement,z0..z{L-1}` of f(x) for every sample. Labels
// come from the dataset, or from `evaluation_labels` when its domain matches.
void export_features(const ModelParams& params, std::span<const DomainDataset> datasets,
                     const std::filesystem::path& path,
                     const EvaluationLabels* evaluation_labels = nullptr);

struct EvalReport {
  double agreement_rate = 0.0;
  std::size_t n_target = 0;
  bool uses_evaluation_labels = false;
  std::optional<double> target_accuracy;
  std::optional<double> pseudo_label_accuracy_overall;
  std::optional<double> pseudo_label_accuracy_agree;
  std::optional<double> pseudo_label_accuracy_disagree;
  std::optional<std::size_t> n_agree;
  std::optional<std::size_t> n_disagree;
  std::optional<double> correct_in_agreement_fraction;
  std::vector<PrecisionPoint> curriculum_precision;
  bool curriculum_bins_merged = false;
  std::map<std::string, double> proxy_a_source_target;  // "source|target"
  std::map<std::string, double> proxy_a_source_source;

  nlohmann::json to_json() const;
};

struct EvalSettings {
  std::size_t curriculum_bins = 10;
  std::uint64_t seed = 0;
  MarginMode margin_mode = MarginMode::ensemble;
  bool source_pairs = true;
};

EvalReport evaluate(const ModelParams& params, std::span<const DomainDataset> sources,
                    const DomainDataset& target, const EvaluationLabels* target_labels,
                    const EvalSettings& settings);

// Fills the accuracy columns of the training metrics from evaluation labels.
class LabeledTargetProbe : public CheckpointProbe {
 public:
  LabeledTargetProbe(const DomainDataset& target, const EvaluationLabels& labels);
  ProbeReading read(const ModelParams& snapshot) const override;

 private:
  const DomainDataset& target_;
  const EvaluationLabels& labels_;
};

}  // namespace simpal
