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

#include "simpal/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <fmt/core.h>

namespace simpal {

void DomainDataset::validate() const {
  if (features.rows() == 0) throw DataError(fmt::format("dataset '{}' is empty", domain_id));
  if (!features.all_finite()) {
    throw DataError(fmt::format("dataset '{}' has non-finite features", domain_id));
  }
  if (labels) {
    if (labels->size() != features.rows()) {
      throw DataError(fmt::format("dataset '{}': {} labels for {} samples", domain_id,
                                  labels->size(), features.rows()));
    }
    for (std::size_t i = 0; i < labels->size(); ++i) {
      if (!label_set.contains((*labels)[i])) {
        throw DataError(fmt::format("dataset '{}': label {} of sample {} not in its label set",
                                    domain_id, (*labels)[i], i));
      }
    }
  }
}

std::pair<DomainDataset, std::optional<EvaluationLabels>> detach_labels(DomainDataset dataset) {
  std::optional<EvaluationLabels> truth;
  if (dataset.labels) {
    truth = EvaluationLabels{dataset.domain_id, std::move(*dataset.labels)};
    dataset.labels.reset();
  }
  return {std::move(dataset), std::move(truth)};
}

void ShiftConfig::validate() const {
  if (n_source_domains < 1) throw DataError("n_source_domains must be >= 1");
  if (n_classes < 2) throw DataError("n_classes must be >= 2");
  if (d_in < 2) throw DataError("d_in must be >= 2");
  if (samples_per_class_per_domain < 1) throw DataError("samples_per_class_per_domain must be >= 1");
  const std::size_t n = n_source_domains + 1;
  if (rotation_per_domain.size() != n || translation_per_domain.size() != n ||
      scale_per_domain.size() != n) {
    throw DataError(fmt::format(
        "per-domain lists need {} entries (sources + target); got rotation {}, translation {}, "
        "scale {}",
        n, rotation_per_domain.size(), translation_per_domain.size(), scale_per_domain.size()));
  }
  for (const auto& t : translation_per_domain) {
    if (!t.empty() && t.size() != d_in) {
      throw DataError(fmt::format("translation has {} entries, expected d_in = {}", t.size(), d_in));
    }
  }
  for (double s : scale_per_domain) {
    if (!(s > 0.0)) throw DataError("scales must be positive");
  }
  if (!(cluster_noise_std >= 0.0) || !std::isfinite(cluster_noise_std)) {
    throw DataError("cluster_noise_std must be finite and non-negative");
  }
}

ShiftConfig ShiftConfig::desk_preset(std::uint64_t seed) {
  ShiftConfig c;
  c.n_source_domains = 2;
  c.n_classes = 3;
  c.d_in = 2;
  c.samples_per_class_per_domain = 300;
  c.rotation_per_domain = {-std::numbers::pi / 6, std::numbers::pi / 6, std::numbers::pi / 3};
  c.translation_per_domain = {{}, {}, {}};
  c.scale_per_domain = {1.0, 1.0, 1.0};
  c.cluster_noise_std = 0.35;
  c.seed = seed;
  return c;
}

std::vector<double> class_base_mean(std::size_t cls, std::size_t n_classes, std::size_t d_in) {
  std::vector<double> mean(d_in, 0.0);
  const double angle = 2.0 * std::numbers::pi * static_cast<double>(cls) /
                       static_cast<double>(n_classes);
  mean[0] = std::cos(angle);
  mean[1] = std::sin(angle);
  return mean;
}

std::vector<double> domain_class_mean(const ShiftConfig& config, std::size_t domain,
                                      std::size_t cls) {
  auto mean = class_base_mean(cls, config.n_classes, config.d_in);
  const double theta = config.rotation_per_domain.at(domain);
  const double c = std::cos(theta), s = std::sin(theta);
  const double x = mean[0], y = mean[1];
  mean[0] = c * x - s * y;
  mean[1] = s * x + c * y;
  const double scale = config.scale_per_domain.at(domain);
  const auto& shift = config.translation_per_domain.at(domain);
  for (std::size_t k = 0; k < mean.size(); ++k) {
    mean[k] *= scale;
    if (!shift.empty()) mean[k] += shift[k];
  }
  return mean;
}

SyntheticDomains generate_domains(const ShiftConfig& config) {
  config.validate();
  const std::size_t n_domains = config.n_source_domains + 1;
  const std::size_t per_class = config.samples_per_class_per_domain;
  std::set<int> all_classes;
  for (std::size_t j = 0; j < config.n_classes; ++j) all_classes.insert(static_cast<int>(j));

  SyntheticDomains out;
  for (std::size_t d = 0; d < n_domains; ++d) {
    Rng rng = make_stream(config.seed, "data", d);
    std::normal_distribution<double> noise(0.0, 1.0);
    DomainDataset ds;
    const bool is_target = d + 1 == n_domains;
    ds.domain_id = is_target ? "target" : fmt::format("source_{}", d);
    ds.features = Matrix(config.n_classes * per_class, config.d_in);
    std::vector<int> labels(ds.features.rows());
    std::size_t row = 0;
    for (std::size_t j = 0; j < config.n_classes; ++j) {
      const auto mean = domain_class_mean(config, d, j);
      for (std::size_t k = 0; k < per_class; ++k, ++row) {
        auto r = ds.features.row(row);
        for (std::size_t f = 0; f < config.d_in; ++f) {
          const double eps = config.cluster_noise_std > 0.0 ? noise(rng) : 0.0;
          r[f] = mean[f] + config.cluster_noise_std * eps;
        }
        labels[row] = static_cast<int>(j);
      }
    }
    ds.label_set = all_classes;
    ds.labels = std::move(labels);
    if (is_target) {
      auto [unlabeled, truth] = detach_labels(std::move(ds));
      out.target = std::move(unlabeled);
      out.target_labels = std::move(*truth);
    } else {
      out.sources.push_back(std::move(ds));
    }
  }
  return out;
}

CategoryShift parse_category_shift(const std::string& text) {
  if (text == "shared") return CategoryShift::shared;
  if (text == "overlap") return CategoryShift::overlap;
  if (text == "disjoint") return CategoryShift::disjoint;
  throw DataError(fmt::format("unknown category shift '{}' (shared|overlap|disjoint)", text));
}

std::string to_string(CategoryShift mode) {
  switch (mode) {
    case CategoryShift::shared: return "shared";
    case CategoryShift::overlap: return "overlap";
    case CategoryShift::disjoint: return "disjoint";
  }
  return "unknown";
}

std::vector<std::set<int>> category_partition(std::size_t n_sources, std::size_t n_classes,
                                              CategoryShift mode, std::size_t overlap_count) {
  if (n_sources == 0 || n_classes == 0) throw DataError("category shift needs sources and classes");
  std::vector<std::set<int>> sets(n_sources);
  switch (mode) {
    case CategoryShift::shared:
      for (auto& s : sets)
        for (std::size_t j = 0; j < n_classes; ++j) s.insert(static_cast<int>(j));
      break;
    case CategoryShift::overlap: {
      if (overlap_count == 0 || overlap_count >= n_classes) {
        throw DataError(fmt::format("overlap needs 0 < overlap_count < n_classes; got {} of {}",
                                    overlap_count, n_classes));
      }
      // Two sources left with only the shared block would have equal label sets.
      if (n_classes - overlap_count + 1 < n_sources) {
        throw DataError(fmt::format(
            "overlap with {} shared of {} classes leaves too few private classes for {} sources",
            overlap_count, n_classes, n_sources));
      }
      for (auto& s : sets)
        for (std::size_t j = 0; j < overlap_count; ++j) s.insert(static_cast<int>(j));
      for (std::size_t j = overlap_count; j < n_classes; ++j)
        sets[(j - overlap_count) % n_sources].insert(static_cast<int>(j));
      break;
    }
    case CategoryShift::disjoint: {
      if (n_classes < n_sources) {
        throw DataError(fmt::format("disjoint needs n_classes >= n_sources; got {} classes, {} sources",
                                    n_classes, n_sources));
      }
      const std::size_t base = n_classes / n_sources, extra = n_classes % n_sources;
      std::size_t next = 0;
      for (std::size_t i = 0; i < n_sources; ++i) {
        const std::size_t count = base + (i < extra ? 1 : 0);
        for (std::size_t k = 0; k < count; ++k) sets[i].insert(static_cast<int>(next++));
      }
      break;
    }
  }
  return sets;
}

std::vector<DomainDataset> apply_category_shift(std::vector<DomainDataset> sources,
                                                CategoryShift mode, std::size_t overlap_count) {
  if (sources.empty()) throw DataError("apply_category_shift: no sources");
  std::set<int> all;
  for (const auto& s : sources) {
    if (!s.labeled()) throw DataError(fmt::format("source '{}' is unlabeled", s.domain_id));
    all.insert(s.label_set.begin(), s.label_set.end());
  }
  const std::vector<int> classes(all.begin(), all.end());
  const auto partition = category_partition(sources.size(), classes.size(), mode, overlap_count);
  if (mode == CategoryShift::shared) return sources;

  for (std::size_t i = 0; i < sources.size(); ++i) {
    std::set<int> keep;
    for (int idx : partition[i]) keep.insert(classes[static_cast<std::size_t>(idx)]);
    auto& src = sources[i];
    std::vector<std::size_t> rows;
    std::vector<int> labels;
    for (std::size_t r = 0; r < src.size(); ++r) {
      if (keep.contains((*src.labels)[r])) {
        rows.push_back(r);
        labels.push_back((*src.labels)[r]);
      }
    }
    if (rows.empty()) {
      throw DataError(fmt::format("source '{}' has no samples left after category shift",
                                  src.domain_id));
    }
    src.features = gather_rows(src.features, rows);
    src.labels = std::move(labels);
    src.label_set = std::move(keep);
  }
  return sources;
}

SourceBatchStream::SourceBatchStream(std::span<const DomainDataset> sources, Rng rng)
    : sources_(sources), cursors_(sources.size()), rng_(std::move(rng)) {
  if (sources_.empty()) throw DataError("SourceBatchStream needs at least one source");
  for (std::size_t i = 0; i < sources_.size(); ++i) {
    if (sources_[i].size() == 0) {
      throw DataError(fmt::format("source '{}' is empty", sources_[i].domain_id));
    }
    if (!sources_[i].labeled()) {
      throw DataError(fmt::format("source '{}' is unlabeled", sources_[i].domain_id));
    }
  }
}

std::size_t SourceBatchStream::draw(std::size_t source) {
  auto& c = cursors_[source];
  if (c.order.empty()) {
    c.order.resize(sources_[source].size());
    for (std::size_t i = 0; i < c.order.size(); ++i) c.order[i] = i;
    std::shuffle(c.order.begin(), c.order.end(), rng_);
  } else if (c.position == c.order.size()) {
    c.position = 0;
    ++c.epochs;
    std::shuffle(c.order.begin(), c.order.end(), rng_);
  }
  return c.order[c.position++];
}

Batch SourceBatchStream::next(std::size_t per_domain) {
  if (per_domain == 0) throw DataError("per_domain batch size must be >= 1");
  const std::size_t dim = sources_.front().dim();
  Batch batch;
  batch.features = Matrix(per_domain * sources_.size(), dim);
  std::size_t row = 0;
  for (std::size_t s = 0; s < sources_.size(); ++s) {
    const auto& src = sources_[s];
    for (std::size_t k = 0; k < per_domain; ++k, ++row) {
      const std::size_t id = draw(s);
      std::copy_n(src.features.row(id).begin(), dim, batch.features.row(row).begin());
      batch.labels.push_back((*src.labels)[id]);
      batch.source_tags.push_back(s);
      batch.sample_ids.push_back(id);
    }
  }
  return batch;
}

namespace {

void write_rows(std::ostream& out, const DomainDataset& ds, const std::vector<int>* labels) {
  out << "domain_id,label";
  for (std::size_t f = 0; f < ds.dim(); ++f) out << ",f" << f;
  out << '\n';
  for (std::size_t r = 0; r < ds.size(); ++r) {
    out << ds.domain_id << ',';
    if (labels) out << (*labels)[r];
    for (double v : ds.features.row(r)) out << ',' << fmt::format("{:.17g}", v);
    out << '\n';
  }
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace

void save_dataset(const DomainDataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError(fmt::format("cannot open '{}' for writing", path.string()));
  write_rows(out, dataset, dataset.labels ? &*dataset.labels : nullptr);
  if (!out) throw DataError(fmt::format("write to '{}' failed", path.string()));
}

void save_evaluation_labels(const DomainDataset& unlabeled, const EvaluationLabels& labels,
                            const std::filesystem::path& path) {
  if (labels.labels.size() != unlabeled.size()) {
    throw DataError("evaluation labels do not match dataset size");
  }
  std::ofstream out(path);
  if (!out) throw DataError(fmt::format("cannot open '{}' for writing", path.string()));
  write_rows(out, unlabeled, &labels.labels);
}

DomainDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot open '{}'", path.string()));
  std::string line;
  if (!std::getline(in, line)) throw DataError(fmt::format("'{}' is empty", path.string()));
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_csv(line);
  if (header.size() < 3 || header[0] != "domain_id" || header[1] != "label") {
    throw DataError(fmt::format("'{}' row 1: header must be domain_id,label,f0,...", path.string()));
  }
  const std::size_t dim = header.size() - 2;

  DomainDataset ds;
  std::vector<double> values;
  std::vector<int> labels;
  std::size_t labeled_rows = 0, rows = 0, line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != dim + 2) {
      throw DataError(fmt::format("'{}' row {}: expected {} features, got {}", path.string(),
                                  line_no, dim, cells.size() < 2 ? 0 : cells.size() - 2));
    }
    if (rows == 0) {
      ds.domain_id = cells[0];
    } else if (cells[0] != ds.domain_id) {
      throw DataError(fmt::format("'{}' row {}: domain_id '{}' differs from '{}'", path.string(),
                                  line_no, cells[0], ds.domain_id));
    }
    if (cells[1].empty()) {
      labels.push_back(-1);
    } else {
      int label = 0;
      const auto& s = cells[1];
      const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), label);
      if (ec != std::errc() || ptr != s.data() + s.size() || label < 0) {
        throw DataError(fmt::format("'{}' row {}: unknown label '{}'", path.string(), line_no, s));
      }
      labels.push_back(label);
      ++labeled_rows;
    }
    for (std::size_t f = 0; f < dim; ++f) {
      const std::string& s = cells[f + 2];
      char* end = nullptr;
      const double v = std::strtod(s.c_str(), &end);
      if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v)) {
        throw DataError(fmt::format("'{}' row {}: malformed feature '{}' in column f{}",
                                    path.string(), line_no, s, f));
      }
      values.push_back(v);
    }
    ++rows;
  }
  if (rows == 0) throw DataError(fmt::format("'{}' has no samples", path.string()));
  if (labeled_rows != 0 && labeled_rows != rows) {
    throw DataError(fmt::format("'{}': {} of {} rows are labeled; labels must be all or none",
                                path.string(), labeled_rows, rows));
  }
  ds.features = Matrix(rows, dim, std::move(values));
  if (labeled_rows == rows) {
    ds.label_set.insert(labels.begin(), labels.end());
    ds.labels = std::move(labels);
  }
  return ds;
}

}  // namespace simpal
