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

#include "simpal/commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include <fmt/core.h>

#include "json.hpp"
#include "simpal/eval.hpp"
#include "simpal/snapshot.hpp"
#include "simpal/trainer.hpp"

namespace simpal {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(fmt::format("cannot write '{}'", path.string()));
  out << text;
  if (!out) throw DataError(fmt::format("write to '{}' failed", path.string()));
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

int max_label(const DomainDataset& d) {
  return d.labels && !d.labels->empty() ? *std::max_element(d.labels->begin(), d.labels->end())
                                        : -1;
}

json label_set_json(const DomainDataset& d) { return json(std::vector<int>(d.label_set.begin(), d.label_set.end())); }

std::optional<double> maybe_accuracy(const ModelParams& params, const RunData& data) {
  if (!data.target_labels) return std::nullopt;
  return accuracy(params, data.target.features, data.target_labels->labels);
}

void put_optional(json& j, const char* key, const std::optional<double>& v) {
  if (v) j[key] = *v;
}

// Runs `body` once per seed; exceptions abort only that seed.
template <class Body>
int for_each_seed(const RunConfig& config, std::ostream& log, const char* what, Body body) {
  int status = kExitOk;
  for (std::uint64_t seed : config.seeds) {
    try {
      body(seed);
    } catch (const std::exception& e) {
      log << fmt::format("seed {}: {} failed: {}\n", seed, what, e.what());
      status = kExitFailure;
    }
  }
  return status;
}

}  // namespace

RunConfig apply_overrides(RunConfig config, const CommandOverrides& overrides) {
  if (overrides.seeds) config.seeds = *overrides.seeds;
  if (overrides.output_dir) config.output_dir = *overrides.output_dir;
  if (overrides.mode) config.train.mode = *overrides.mode;
  config.validate();
  return config;
}

fs::path seed_dir(const fs::path& output_dir, std::uint64_t seed) {
  return output_dir / fmt::format("seed_{}", seed);
}

RunData load_run_data(const RunConfig& config, std::uint64_t seed) {
  RunData data;
  if (config.synthetic) {
    ShiftConfig shift = *config.synthetic;
    shift.seed = seed;
    auto generated = generate_domains(shift);
    data.sources = apply_category_shift(std::move(generated.sources), config.category_shift,
                                        config.overlap_count);
    data.target = std::move(generated.target);
    data.target_labels = std::move(generated.target_labels);
    data.n_classes = shift.n_classes;
    return data;
  }

  const auto& files = *config.files;
  int top = -1;
  for (const auto& path : files.sources) {
    DomainDataset d = load_dataset(path);
    if (!d.labeled()) throw DataError(fmt::format("source '{}' has no labels", path.string()));
    top = std::max(top, max_label(d));
    data.sources.push_back(std::move(d));
  }
  auto [target, labels] = detach_labels(load_dataset(files.target));
  data.target = std::move(target);
  data.target_labels = std::move(labels);
  if (files.target_labels) {
    DomainDataset labeled = load_dataset(*files.target_labels);
    if (!labeled.labeled() || labeled.size() != data.target.size()) {
      throw DataError(fmt::format("'{}' must hold one label per target sample",
                                  files.target_labels->string()));
    }
    data.target_labels = EvaluationLabels{data.target.domain_id, *labeled.labels};
  }
  if (data.target_labels) {
    for (int y : data.target_labels->labels) top = std::max(top, y);
  }
  for (const auto& s : data.sources) {
    if (s.dim() != data.target.dim()) {
      throw DataError(fmt::format("source '{}' has {} features, target has {}", s.domain_id,
                                  s.dim(), data.target.dim()));
    }
  }
  data.n_classes = static_cast<std::size_t>(top + 1);
  if (data.n_classes < 2) throw DataError("datasets need at least two classes");
  return data;
}

void check_compatible(const ModelParams& params, const RunData& data) {
  if (params.input_dim() != data.target.dim()) {
    throw DataError(fmt::format("snapshot expects {} input features, data has {}",
                                params.input_dim(), data.target.dim()));
  }
  if (params.num_heads() != data.sources.size()) {
    throw DataError(fmt::format("snapshot has {} classifier heads for {} sources",
                                params.num_heads(), data.sources.size()));
  }
  if (params.num_classes() != data.n_classes) {
    throw DataError(fmt::format("snapshot predicts {} classes, data has {}", params.num_classes(),
                                data.n_classes));
  }
}

fs::path snapshot_for_seed(const RunConfig& config, const std::optional<fs::path>& snapshot,
                           std::uint64_t seed) {
  if (!snapshot || snapshot->empty()) return seed_dir(config.output_dir, seed) / "final.params";
  std::string text = snapshot->string();
  const std::string placeholder = "{seed}";
  for (auto at = text.find(placeholder); at != std::string::npos; at = text.find(placeholder)) {
    text.replace(at, placeholder.size(), std::to_string(seed));
  }
  return text;
}

int cmd_gen_data(const RunConfig& config, std::ostream& log) {
  config.validate();
  if (!config.synthetic) throw ConfigError("gen-data needs a [synthetic] section");
  return for_each_seed(config, log, "gen-data", [&](std::uint64_t seed) {
    const RunData data = load_run_data(config, seed);
    const fs::path dir = seed_dir(config.output_dir, seed);
    fs::create_directories(dir / "evaluation");

    json manifest;
    manifest["name"] = config.name;
    manifest["seed"] = seed;
    manifest["n_classes"] = data.n_classes;
    manifest["category_shift"] = to_string(config.category_shift);
    manifest["overlap_count"] = config.overlap_count;
    json sources = json::array();
    for (std::size_t i = 0; i < data.sources.size(); ++i) {
      const auto& s = data.sources[i];
      const std::string file = fmt::format("source_{}.csv", i);
      save_dataset(s, dir / file);
      sources.push_back({{"file", file}, {"domain_id", s.domain_id}, {"samples", s.size()},
                         {"labels", label_set_json(s)}});
    }
    manifest["sources"] = sources;
    save_dataset(data.target, dir / "target.csv");
    manifest["target"] = {{"file", "target.csv"}, {"domain_id", data.target.domain_id},
                          {"samples", data.target.size()}};
    save_evaluation_labels(data.target, *data.target_labels, dir / "evaluation" / "target_labels.csv");
    manifest["evaluation_labels"] = "evaluation/target_labels.csv";
    write_json(dir / "manifest.json", manifest);
    log << fmt::format("seed {}: wrote {} source files and the target to {}\n", seed,
                       data.sources.size(), dir.string());
  });
}

int cmd_train(const RunConfig& config, const std::optional<fs::path>& snapshot, std::ostream& log) {
  config.validate();
  const TrainMode mode = config.train.mode;
  if (snapshot && mode == TrainMode::domain_specific_baseline) {
    throw ConfigError("the domain-specific baseline has no adaptation phase to resume");
  }
  int status = kExitOk;
  for (std::uint64_t seed : config.seeds) {
    const fs::path dir = seed_dir(config.output_dir, seed);
    fs::create_directories(dir);
    json summary;
    summary["name"] = config.name;
    summary["seed"] = seed;
    summary["mode"] = to_string(mode);
    summary["status"] = "aborted";

    std::optional<RunData> data;
    std::optional<LabeledTargetProbe> probe;
    std::optional<Trainer> trainer;
    try {
      data = load_run_data(config, seed);
      TrainOptions options = config.train;
      options.seed = seed;
      if (data->target_labels) probe.emplace(data->target, *data->target_labels);
      const EvaluationLabels* oracle =
          mode == TrainMode::oracle && data->target_labels ? &*data->target_labels : nullptr;
      if (mode == TrainMode::oracle && !oracle) {
        throw DataError("oracle mode needs target labels in the evaluation channel");
      }

      ModelParams params;
      if (snapshot) {
        params = load_params(snapshot_for_seed(config, snapshot, seed));
        check_compatible(params, *data);
      } else {
        params = init_params(data->target.dim(), config.hidden_dims, config.latent_dim,
                             data->sources.size(), data->n_classes, seed);
      }
      trainer.emplace(std::move(params), data->sources, data->target, options, oracle,
                      probe ? &*probe : nullptr);

      if (mode == TrainMode::domain_specific_baseline) {
        trainer->train_domain_specific_baseline();
        summary["warm_start_iterations"] = trainer->state().iteration;
      } else {
        if (snapshot) {
          trainer->resume_adaptation();
          summary["resumed_from"] = snapshot_for_seed(config, snapshot, seed).string();
        } else {
          trainer->warm_start();
          save_params(trainer->params(), dir / "warm_start.params");
          summary["warm_start_iterations"] = trainer->state().iteration;
        }
        summary["warm_start_agreement"] = agreement_rate(trainer->params(), data->target);
        put_optional(summary, "warm_start_target_accuracy", maybe_accuracy(trainer->params(), *data));
        trainer->adapt();
      }
      save_params(trainer->params(), dir / "final.params");

      const auto& state = trainer->state();
      summary["status"] = "completed";
      summary["iterations"] = state.iteration;
      summary["converged"] = state.converged;
      summary["final_agreement"] = agreement_rate(trainer->params(), data->target);
      put_optional(summary, "final_target_accuracy", maybe_accuracy(trainer->params(), *data));
      summary["source_updates"] = state.source_updates;
      summary["target_updates"] = state.target_updates;
      summary["pseudo_refreshes"] = state.pseudo_refreshes;
      summary["final_pseudo_set_size"] = state.last_pseudo_set_size;
      log << fmt::format("seed {}: {} completed after {} iterations\n", seed, to_string(mode),
                         state.iteration);
    } catch (const std::exception& e) {
      summary["error"] = e.what();
      log << fmt::format("seed {}: training aborted: {}\n", seed, e.what());
      status = kExitFailure;
    }
    // Logs are kept for aborted runs too.
    if (trainer) {
      std::ofstream metrics(dir / "metrics.csv", std::ios::binary);
      write_metrics_csv(metrics, trainer->state().metrics);
    }
    write_json(dir / "summary.json", summary);
  }

  try {
    const RunReport report = aggregate_runs(config.output_dir);
    write_text(config.output_dir / "summary.csv", report.csv());
    log << report.table();
  } catch (const DataError& e) {
    log << fmt::format("no aggregate summary: {}\n", e.what());
  }
  return status;
}

int cmd_eval(const RunConfig& config, const std::optional<fs::path>& snapshot, std::ostream& log) {
  config.validate();
  return for_each_seed(config, log, "eval", [&](std::uint64_t seed) {
    const RunData data = load_run_data(config, seed);
    const fs::path snap = snapshot_for_seed(config, snapshot, seed);
    const ModelParams params = load_params(snap);
    check_compatible(params, data);
    EvalSettings settings;
    settings.curriculum_bins = config.curriculum_bins;
    settings.seed = seed;
    settings.margin_mode = config.train.margin_mode;
    const EvalReport report =
        evaluate(params, data.sources, data.target,
                 data.target_labels ? &*data.target_labels : nullptr, settings);
    json j = report.to_json();
    j["snapshot"] = snap.string();
    j["seed"] = seed;
    const fs::path dir = seed_dir(config.output_dir, seed);
    fs::create_directories(dir);
    const fs::path out = dir / fmt::format("eval_{}.json", snap.stem().string());
    write_json(out, j);
    log << fmt::format("seed {}: A = {:.4f}, report in {}\n", seed, report.agreement_rate,
                       out.string());
  });
}

int cmd_export_features(const RunConfig& config, const std::optional<fs::path>& snapshot,
                        std::ostream& log) {
  config.validate();
  return for_each_seed(config, log, "export-features", [&](std::uint64_t seed) {
    const RunData data = load_run_data(config, seed);
    const fs::path snap = snapshot_for_seed(config, snapshot, seed);
    const ModelParams params = load_params(snap);
    check_compatible(params, data);
    std::vector<DomainDataset> all = data.sources;
    all.push_back(data.target);
    const fs::path dir = seed_dir(config.output_dir, seed);
    fs::create_directories(dir);
    const fs::path out = dir / fmt::format("features_{}.csv", snap.stem().string());
    export_features(params, all, out, data.target_labels ? &*data.target_labels : nullptr);
    log << fmt::format("seed {}: features in {}\n", seed, out.string());
  });
}

std::string RunReport::csv() const {
  std::string out = "metric,mean,stddev,n\n";
  for (const auto& m : metrics) {
    out += fmt::format("{},{:.10g},{:.10g},{}\n", m.name, m.mean, m.stddev, m.count);
  }
  return out;
}

std::string RunReport::table() const {
  std::size_t width = 6;
  for (const auto& m : metrics) width = std::max(width, m.name.size());
  std::string out = fmt::format("{:<{}}  {:>12}  {:>12}  {:>3}\n", "metric", width, "mean",
                                "stddev", "n");
  for (const auto& m : metrics) {
    out += fmt::format("{:<{}}  {:>12.6f}  {:>12.6f}  {:>3}\n", m.name, width, m.mean, m.stddev,
                       m.count);
  }
  auto seeds = [](const std::vector<std::uint64_t>& v) {
    std::string s;
    for (auto x : v) s += (s.empty() ? "" : ",") + std::to_string(x);
    return s.empty() ? std::string("none") : s;
  };
  out += fmt::format("completed seeds: {}\n", seeds(completed_seeds));
  if (!incomplete_seeds.empty()) out += fmt::format("incomplete seeds: {}\n", seeds(incomplete_seeds));
  return out;
}

RunReport aggregate_runs(const fs::path& run_dir) {
  if (!fs::is_directory(run_dir)) {
    throw DataError(fmt::format("'{}' is not a directory", run_dir.string()));
  }
  std::vector<fs::path> summaries;
  for (const auto& entry : fs::directory_iterator(run_dir)) {
    const auto name = entry.path().filename().string();
    if (entry.is_directory() && name.starts_with("seed_") &&
        fs::exists(entry.path() / "summary.json")) {
      summaries.push_back(entry.path() / "summary.json");
    }
  }
  std::sort(summaries.begin(), summaries.end());

  RunReport report;
  std::map<std::string, std::vector<double>> values;
  for (const auto& path : summaries) {
    std::ifstream in(path);
    json j;
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      throw DataError(fmt::format("{}: {}", path.string(), e.what()));
    }
    const std::uint64_t seed = j.value("seed", std::uint64_t{0});
    if (j.value("status", std::string()) != "completed") {
      report.incomplete_seeds.push_back(seed);
      continue;
    }
    report.completed_seeds.push_back(seed);
    for (const auto& [key, v] : j.items()) {
      if (key == "seed" || !v.is_number()) continue;
      values[key].push_back(v.get<double>());
    }
  }
  if (report.completed_seeds.empty()) {
    throw DataError(fmt::format("no completed runs under '{}'", run_dir.string()));
  }
  std::sort(report.completed_seeds.begin(), report.completed_seeds.end());
  std::sort(report.incomplete_seeds.begin(), report.incomplete_seeds.end());
  for (const auto& [name, xs] : values) {
    MetricSummary m{name, 0.0, 0.0, xs.size()};
    for (double x : xs) m.mean += x;
    m.mean /= static_cast<double>(xs.size());
    for (double x : xs) m.stddev += (x - m.mean) * (x - m.mean);
    m.stddev = std::sqrt(m.stddev / static_cast<double>(xs.size()));
    report.metrics.push_back(m);
  }
  return report;
}

int cmd_report(const fs::path& run_dir, std::ostream& out) {
  const RunReport report = aggregate_runs(run_dir);
  write_text(run_dir / "report.csv", report.csv());
  write_text(run_dir / "report.txt", report.table());
  out << report.table();
  return kExitOk;
}

}  // namespace simpal
