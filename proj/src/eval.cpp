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

#include "simpal/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <fmt/core.h>

#include "simpal/optimizer.hpp"
#include "simpal/rng.hpp"

namespace simpal {
namespace {

void check_labels(const Matrix& features, std::span<const int> labels) {
  if (labels.size() != features.rows()) {
    throw DataError(fmt::format("{} labels for {} samples", labels.size(), features.rows()));
  }
}

double fraction(std::size_t num, std::size_t den) {
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

double accuracy(const ModelParams& params, const Matrix& features, std::span<const int> labels) {
  check_labels(features, labels);
  if (labels.empty()) throw DataError("accuracy of an empty dataset");
  std::size_t correct = 0;
  const auto logits = forward_batch(params, features);
  for (std::size_t i = 0; i < logits.size(); ++i)
    correct += static_cast<int>(predict(logits[i])) == labels[i] ? 1 : 0;
  return fraction(correct, labels.size());
}

double accuracy(const ModelParams& params, const DomainDataset& labeled) {
  if (!labeled.labeled()) {
    throw DataError(fmt::format("accuracy needs labels; '{}' is unlabeled", labeled.domain_id));
  }
  return accuracy(params, labeled.features, *labeled.labels);
}

double AgreementSplit::overall() const {
  return fraction(correct_agree + correct_disagree, n_agree + n_disagree);
}

double AgreementSplit::agreement_rate() const { return fraction(n_agree, n_agree + n_disagree); }

double AgreementSplit::correct_in_agreement_fraction() const {
  return fraction(correct_agree, n_agree + n_disagree);
}

AgreementSplit accuracy_split_by_agreement(const ModelParams& params, const Matrix& features,
                                           std::span<const int> labels) {
  check_labels(features, labels);
  AgreementSplit split;
  const auto logits = forward_batch(params, features);
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const bool correct = static_cast<int>(predict(logits[i])) == labels[i];
    if (agreement(logits[i])) {
      ++split.n_agree;
      split.correct_agree += correct ? 1 : 0;
    } else {
      ++split.n_disagree;
      split.correct_disagree += correct ? 1 : 0;
    }
  }
  if (split.n_agree > 0) split.acc_agree = fraction(split.correct_agree, split.n_agree);
  if (split.n_disagree > 0) split.acc_disagree = fraction(split.correct_disagree, split.n_disagree);
  return split;
}

CurriculumCurve precision_by_percentile(const std::vector<bool>& correct_sorted, std::size_t n_bins) {
  if (n_bins < 2) throw std::invalid_argument("curriculum precision needs at least 2 bins");
  CurriculumCurve curve;
  const std::size_t n = correct_sorted.size();
  if (n == 0) {
    curve.bins_merged = true;
    return curve;
  }
  std::size_t bins = n_bins;
  if (n < bins) {
    bins = n;
    curve.bins_merged = true;
  }
  std::size_t correct = 0, taken = 0;
  for (std::size_t b = 1; b <= bins; ++b) {
    // ceil(n * b / bins)
    const std::size_t upto = (n * b + bins - 1) / bins;
    for (; taken < upto; ++taken) correct += correct_sorted[taken] ? 1 : 0;
    curve.points.push_back({100.0 * static_cast<double>(b) / static_cast<double>(bins),
                            fraction(correct, upto)});
  }
  return curve;
}

CurriculumCurve curriculum_precision(const ModelParams& params, const Matrix& features,
                                     std::span<const int> labels, std::size_t n_bins,
                                     MarginMode mode) {
  check_labels(features, labels);
  struct Scored {
    double weight;
    std::size_t index;
    bool correct;
  };
  std::vector<Scored> scored;
  const auto logits = forward_batch(params, features);
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (!agreement(logits[i])) continue;
    scored.push_back({margin(logits[i], mode), i,
                      static_cast<int>(predict(logits[i])) == labels[i]});
  }
  std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
    if (a.weight != b.weight) return a.weight > b.weight;
    return a.index < b.index;
  });
  std::vector<bool> flags;
  for (const auto& s : scored) flags.push_back(s.correct);
  return precision_by_percentile(flags, n_bins);
}

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("spearman: length mismatch");
  if (x.size() < 2) return 0.0;
  const auto rx = average_ranks(x), ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

std::vector<double> correct_agreement_migration(std::span<const ModelParams> snapshots,
                                                const Matrix& features,
                                                std::span<const int> labels) {
  std::vector<double> out;
  for (const auto& p : snapshots)
    out.push_back(accuracy_split_by_agreement(p, features, labels).correct_in_agreement_fraction());
  return out;
}

namespace {

constexpr std::size_t kDiscriminatorUpdates = 500;
constexpr double kDiscriminatorLearningRate = 0.05;

struct Split {
  std::vector<std::size_t> train, test;
};

// The split of a set depends only on (seed, set size), so swapping the two
// arguments of proxy_a_distance leaves each set's split unchanged.
Split half_split(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = make_stream(seed, "proxy_a", n);
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t n_train = n / 2;
  return {{order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train)},
          {order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end()}};
}

}  // namespace

double proxy_a_distance(const Matrix& features_a, const Matrix& features_b, std::uint64_t seed) {
  if (features_a.cols() != features_b.cols()) {
    throw ShapeError(fmt::format("proxy-A distance: dimension mismatch {} vs {}",
                                 features_a.cols(), features_b.cols()));
  }
  if (features_a.rows() < 2 || features_b.rows() < 2) {
    throw DataError("proxy-A distance needs at least two samples per set");
  }
  const std::size_t dim = features_a.cols();
  const Split sa = half_split(features_a.rows(), seed);
  const Split sb = half_split(features_b.rows(), seed);
  const Matrix train_a = gather_rows(features_a, sa.train), test_a = gather_rows(features_a, sa.test);
  const Matrix train_b = gather_rows(features_b, sb.train), test_b = gather_rows(features_b, sb.test);

  // Standardize with statistics of the pooled training half.
  std::vector<double> mean(dim, 0.0), scale(dim, 0.0);
  const double n_train = static_cast<double>(train_a.rows() + train_b.rows());
  for (const Matrix* m : {&train_a, &train_b})
    for (std::size_t r = 0; r < m->rows(); ++r)
      for (std::size_t c = 0; c < dim; ++c) mean[c] += (*m)(r, c) / n_train;
  for (const Matrix* m : {&train_a, &train_b})
    for (std::size_t r = 0; r < m->rows(); ++r)
      for (std::size_t c = 0; c < dim; ++c) {
        const double d = (*m)(r, c) - mean[c];
        scale[c] += d * d / n_train;
      }
  for (double& s : scale) s = s > 1e-24 ? 1.0 / std::sqrt(s) : 0.0;
  auto standardized = [&](const Matrix& m) {
    Matrix out = m;
    for (std::size_t r = 0; r < out.rows(); ++r)
      for (std::size_t c = 0; c < dim; ++c) out(r, c) = (out(r, c) - mean[c]) * scale[c];
    return out;
  };
  const Matrix xa = standardized(train_a), xb = standardized(train_b);

  // Logistic discriminator: a -> 0, b -> 1, class-balanced cross-entropy.
  Matrix weight(1, dim), bias(1, 1);
  Adam adam({kDiscriminatorLearningRate, 0.9, 0.999, 1e-8, 0.0});
  Matrix grad_w(1, dim), grad_b(1, 1);
  auto sigmoid = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };
  auto score = [&](std::span<const double> x) {
    double z = bias(0, 0);
    for (std::size_t c = 0; c < dim; ++c) z += weight(0, c) * x[c];
    return z;
  };
  for (std::size_t step = 0; step < kDiscriminatorUpdates; ++step) {
    grad_w.fill(0.0);
    grad_b.fill(0.0);
    for (const auto& [x, target] : {std::pair{&xa, 0.0}, std::pair{&xb, 1.0}}) {
      const double w = 0.5 / static_cast<double>(x->rows());
      for (std::size_t r = 0; r < x->rows(); ++r) {
        const double g = w * (sigmoid(score(x->row(r))) - target);
        grad_b(0, 0) += g;
        for (std::size_t c = 0; c < dim; ++c) grad_w(0, c) += g * (*x)(r, c);
      }
    }
    Matrix* params[] = {&weight, &bias};
    const Matrix* grads[] = {&grad_w, &grad_b};
    adam.step(params, grads);
  }

  auto error_rate = [&](const Matrix& test, bool is_b) {
    const Matrix x = standardized(test);
    std::size_t wrong = 0;
    for (std::size_t r = 0; r < x.rows(); ++r) {
      const bool says_b = score(x.row(r)) > 0.0;
      wrong += says_b != is_b ? 1 : 0;
    }
    return fraction(wrong, x.rows());
  };
  const double balanced = 0.5 * (error_rate(test_a, false) + error_rate(test_b, true));
  const double eps = std::min(0.5, balanced);
  return 2.0 * (1.0 - 2.0 * eps);
}

void export_features(const ModelParams& params, std::span<const DomainDataset> datasets,
                     const std::filesystem::path& path, const EvaluationLabels* evaluation_labels) {
  std::ofstream out(path);
  if (!out) throw DataError(fmt::format("cannot open '{}' for writing", path.string()));
  const std::size_t latent = params.latent_dim();
  out << "domain_id,label,agreement";
  for (std::size_t k = 0; k < latent; ++k) out << ",z" << k;
  out << '\n';
  for (const auto& ds : datasets) {
    if (ds.dim() != params.input_dim()) {
      throw ShapeError(fmt::format("dataset '{}' has {} features, model expects {}", ds.domain_id,
                                   ds.dim(), params.input_dim()));
    }
    const std::vector<int>* labels = ds.labels ? &*ds.labels : nullptr;
    if (!labels && evaluation_labels && evaluation_labels->domain_id == ds.domain_id &&
        evaluation_labels->labels.size() == ds.size()) {
      labels = &evaluation_labels->labels;
    }
    const Matrix z = extract_features(params, ds.features);
    const auto logits = forward_batch(params, ds.features);
    for (std::size_t r = 0; r < ds.size(); ++r) {
      out << ds.domain_id << ',';
      if (labels) out << (*labels)[r];
      out << ',' << (agreement(logits[r]) ? 1 : 0);
      for (double v : z.row(r)) out << ',' << fmt::format("{:.17g}", v);
      out << '\n';
    }
  }
  if (!out) throw DataError(fmt::format("write to '{}' failed", path.string()));
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json j;
  j["agreement_rate"] = agreement_rate;
  j["n_target"] = n_target;
  j["uses_evaluation_labels"] = uses_evaluation_labels;
  auto put = [&](const char* key, const auto& v) {
    if (v) j[key] = *v;
  };
  put("target_accuracy", target_accuracy);
  put("pseudo_label_accuracy_overall", pseudo_label_accuracy_overall);
  put("pseudo_label_accuracy_agree", pseudo_label_accuracy_agree);
  put("pseudo_label_accuracy_disagree", pseudo_label_accuracy_disagree);
  put("n_agree", n_agree);
  put("n_disagree", n_disagree);
  put("correct_in_agreement_fraction", correct_in_agreement_fraction);
  if (uses_evaluation_labels) {
    nlohmann::json curve = nlohmann::json::array();
    for (const auto& p : curriculum_precision) curve.push_back({p.percentile, p.precision});
    j["curriculum_precision"] = curve;
    j["curriculum_bins_merged"] = curriculum_bins_merged;
  }
  j["proxy_a_distance"] = proxy_a_source_target;
  j["proxy_a_distance_sources"] = proxy_a_source_source;
  return j;
}

EvalReport evaluate(const ModelParams& params, std::span<const DomainDataset> sources,
                    const DomainDataset& target, const EvaluationLabels* target_labels,
                    const EvalSettings& settings) {
  EvalReport report;
  report.n_target = target.size();
  report.agreement_rate = agreement_rate(params, target);
  if (target_labels) {
    if (target_labels->labels.size() != target.size()) {
      throw DataError("evaluation labels do not match the target size");
    }
    report.uses_evaluation_labels = true;
    const auto split = accuracy_split_by_agreement(params, target.features, target_labels->labels);
    report.target_accuracy = split.overall();
    report.pseudo_label_accuracy_overall = split.overall();
    report.pseudo_label_accuracy_agree = split.acc_agree;
    report.pseudo_label_accuracy_disagree = split.acc_disagree;
    report.n_agree = split.n_agree;
    report.n_disagree = split.n_disagree;
    report.correct_in_agreement_fraction = split.correct_in_agreement_fraction();
    const auto curve = curriculum_precision(params, target.features, target_labels->labels,
                                            settings.curriculum_bins, settings.margin_mode);
    report.curriculum_precision = curve.points;
    report.curriculum_bins_merged = curve.bins_merged;
  }
  const Matrix zt = extract_features(params, target.features);
  std::vector<Matrix> zs;
  for (const auto& s : sources) zs.push_back(extract_features(params, s.features));
  for (std::size_t i = 0; i < sources.size(); ++i) {
    report.proxy_a_source_target[sources[i].domain_id + "|" + target.domain_id] =
        proxy_a_distance(zs[i], zt, settings.seed);
  }
  if (settings.source_pairs) {
    for (std::size_t i = 0; i < sources.size(); ++i)
      for (std::size_t k = i + 1; k < sources.size(); ++k)
        report.proxy_a_source_source[sources[i].domain_id + "|" + sources[k].domain_id] =
            proxy_a_distance(zs[i], zs[k], settings.seed);
  }
  return report;
}

LabeledTargetProbe::LabeledTargetProbe(const DomainDataset& target, const EvaluationLabels& labels)
    : target_(target), labels_(labels) {
  if (labels_.labels.size() != target_.size()) {
    throw DataError("evaluation labels do not match the target size");
  }
}

ProbeReading LabeledTargetProbe::read(const ModelParams& snapshot) const {
  const auto split = accuracy_split_by_agreement(snapshot, target_.features, labels_.labels);
  return {split.overall(), split.acc_agree, split.acc_disagree};
}

}  // namespace simpal
