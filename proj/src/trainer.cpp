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

#include "simpal/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include <fmt/core.h>

#include "simpal/objective.hpp"

namespace simpal {

TrainMode parse_train_mode(const std::string& text) {
  if (text == "simpal") return TrainMode::simpal;
  if (text == "domain_specific_baseline") return TrainMode::domain_specific_baseline;
  if (text == "oracle") return TrainMode::oracle;
  throw std::invalid_argument(
      fmt::format("unknown mode '{}' (simpal|domain_specific_baseline|oracle)", text));
}

std::string to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::simpal: return "simpal";
    case TrainMode::domain_specific_baseline: return "domain_specific_baseline";
    case TrainMode::oracle: return "oracle";
  }
  return "unknown";
}

std::string to_string(Phase phase) {
  switch (phase) {
    case Phase::warm_start: return "warm_start";
    case Phase::adaptation: return "adaptation";
    case Phase::done: return "done";
  }
  return "unknown";
}

void TrainOptions::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be > 0");
  if (!(weight_decay >= 0.0)) throw std::invalid_argument("weight_decay must be >= 0");
  if (n_e < 1) throw std::invalid_argument("n_e must be >= 1");
  if (convergence_window < 2) throw std::invalid_argument("convergence window W must be >= 2");
  if (max_iterations < 1) throw std::invalid_argument("max_iterations must be >= 1");
  if (eval_every < 1) throw std::invalid_argument("eval_every must be >= 1");
  if (per_domain_batch < 1 || target_batch < 1) {
    throw std::invalid_argument("batch sizes must be >= 1");
  }
  if (!(convergence_tol > 0.0)) throw std::invalid_argument("convergence_tol must be > 0");
}

AdamConfig TrainOptions::adam() const {
  return {learning_rate, adam_beta1, adam_beta2, adam_eps, weight_decay};
}

TrainOptions TrainOptions::desk_preset(std::uint64_t seed) {
  TrainOptions o;
  o.learning_rate = 1e-3;
  o.seed = seed;
  return o;
}

bool has_converged(std::span<const double> history, std::size_t window, double tol) {
  if (window < 2) throw std::invalid_argument("has_converged needs W >= 2");
  if (history.size() < window) return false;
  const auto tail = history.subspan(history.size() - window);
  for (std::size_t i = 1; i < tail.size(); ++i)
    if (!(std::abs(tail[i] - tail[i - 1]) < tol)) return false;
  return true;
}

PseudoLabelSet build_pseudo_set(const ModelParams& params, const DomainDataset& target,
                                std::optional<double> margin_threshold, MarginMode mode) {
  PseudoLabelSet set;
  const auto verdicts = assess(params, target.features, mode);
  for (std::size_t i = 0; i < verdicts.size(); ++i) {
    const auto& v = verdicts[i];
    if (!v.agree) continue;
    if (margin_threshold && !(v.margin >= *margin_threshold)) continue;
    set.entries.push_back({i, static_cast<int>(v.prediction), v.margin});
  }
  std::sort(set.entries.begin(), set.entries.end(), [](const auto& a, const auto& b) {
    if (a.weight != b.weight) return a.weight > b.weight;
    return a.sample < b.sample;
  });
  return set;
}

std::vector<double> TrainingState::phase_agreements() const {
  std::vector<double> out;
  for (std::size_t i = phase_history_start; i < agreement_history.size(); ++i)
    out.push_back(agreement_history[i].agreement);
  return out;
}

Trainer::Trainer(ModelParams params, std::span<const DomainDataset> sources,
                 const DomainDataset& target, TrainOptions options,
                 const EvaluationLabels* oracle_labels, const CheckpointProbe* probe)
    : params_(std::move(params)),
      sources_(sources),
      target_(target),
      options_(options),
      oracle_labels_(oracle_labels),
      probe_(probe),
      optimizer_(options.adam()),
      batches_(sources, make_stream(options.seed, "batching")) {
  options_.validate();
  params_.validate();
  if (target_.labeled()) {
    throw std::invalid_argument("target dataset must be unlabeled; use the evaluation channel");
  }
  if (target_.size() == 0) throw std::invalid_argument("target dataset is empty");
  for (const auto& s : sources_) {
    if (s.dim() != params_.input_dim() || target_.dim() != params_.input_dim()) {
      throw ShapeError("dataset feature dimension does not match the model input");
    }
  }
  if (options_.mode == TrainMode::oracle) {
    if (!oracle_labels_ || oracle_labels_->labels.size() != target_.size()) {
      throw std::invalid_argument("oracle mode needs evaluation labels for every target sample");
    }
  } else if (oracle_labels_) {
    throw std::invalid_argument("evaluation labels are only accepted in oracle mode");
  }
  if (options_.mode == TrainMode::domain_specific_baseline &&
      params_.num_heads() != sources_.size()) {
    throw std::invalid_argument(fmt::format(
        "domain-specific baseline needs one head per source: {} heads, {} sources",
        params_.num_heads(), sources_.size()));
  }
}

void Trainer::apply(const ModelParams& gradients) {
  for (const Matrix* g : gradients.tensors()) {
    if (!g->all_finite()) throw TrainingAborted("non-finite gradient");
  }
  auto p = params_.tensors();
  auto g = gradients.tensors();
  optimizer_.step(p, g);
}

double Trainer::source_step(bool domain_specific) {
  const Batch batch = batches_.next(options_.per_domain_batch);
  LossAndGrad lg;
  try {
    lg = domain_specific ? domain_specific_loss_and_grad(params_, batch)
                         : source_loss_and_grad(params_, batch);
  } catch (const std::runtime_error& e) {
    throw TrainingAborted(fmt::format("iteration {}: {}", state_.iteration, e.what()));
  }
  apply(lg.gradients);
  ++state_.source_updates;
  source_loss_sum_ += lg.report.value;
  ++source_loss_count_;
  if (hooks_.on_update) hooks_.on_update(UpdateSource::source, {});
  return lg.report.value;
}

double Trainer::target_step(const PseudoLabelSet& set, std::size_t begin, std::size_t end) {
  const auto entries = std::span(set.entries).subspan(begin, end - begin);
  std::vector<std::size_t> rows;
  std::vector<int> labels;
  for (const auto& e : entries) {
    rows.push_back(e.sample);
    labels.push_back(options_.mode == TrainMode::oracle ? oracle_labels_->labels[e.sample]
                                                        : e.label);
  }
  const Matrix x = gather_rows(target_.features, rows);
  LossAndGrad lg;
  try {
    lg = target_loss_and_grad(params_, x, labels);
  } catch (const std::runtime_error& e) {
    throw TrainingAborted(fmt::format("iteration {}: {}", state_.iteration, e.what()));
  }
  apply(lg.gradients);
  ++state_.target_updates;
  target_loss_sum_ += lg.report.value;
  ++target_loss_count_;
  if (hooks_.on_update) hooks_.on_update(UpdateSource::target, entries);
  return lg.report.value;
}

bool Trainer::checkpoint(std::optional<std::size_t> dtprime_size) {
  const double a = agreement_rate(params_, target_);
  const Checkpoint cp{state_.iteration, a};
  state_.agreement_history.push_back(cp);
  MetricRow row;
  row.iteration = state_.iteration;
  row.phase = state_.phase;
  row.agreement = a;
  if (source_loss_count_ > 0) {
    row.source_loss = source_loss_sum_ / static_cast<double>(source_loss_count_);
    state_.loss_history.push_back(*row.source_loss);
  }
  if (target_loss_count_ > 0) {
    row.target_loss = target_loss_sum_ / static_cast<double>(target_loss_count_);
  }
  row.dtprime_size = dtprime_size;
  if (probe_) row.probe = probe_->read(params_);
  state_.metrics.push_back(row);
  source_loss_sum_ = target_loss_sum_ = 0.0;
  source_loss_count_ = target_loss_count_ = 0;
  if (hooks_.on_checkpoint) hooks_.on_checkpoint(params_, cp, state_.phase);
  return has_converged(state_.phase_agreements(), options_.convergence_window,
                       options_.convergence_tol);
}

void Trainer::run_source_phase(bool domain_specific) {
  state_.phase = Phase::warm_start;
  state_.phase_history_start = state_.agreement_history.size();
  state_.converged = false;
  for (std::size_t k = 1; k <= options_.max_iterations; ++k) {
    source_step(domain_specific);
    ++state_.iteration;
    if (k % options_.eval_every == 0) {
      const bool plateau = checkpoint(std::nullopt);
      if (plateau && !state_.converged) state_.converged = true;
      if (plateau && options_.stop_on_convergence) break;
    }
  }
}

const TrainingState& Trainer::warm_start() {
  if (state_.phase != Phase::warm_start || state_.iteration != 0) {
    throw std::logic_error("warm_start must run first and only once");
  }
  run_source_phase(options_.mode == TrainMode::domain_specific_baseline);
  state_.phase = options_.mode == TrainMode::domain_specific_baseline ? Phase::done
                                                                     : Phase::adaptation;
  return state_;
}

const TrainingState& Trainer::train_domain_specific_baseline() {
  if (options_.mode != TrainMode::domain_specific_baseline) {
    throw std::logic_error("train_domain_specific_baseline needs mode=domain_specific_baseline");
  }
  return warm_start();
}

void Trainer::resume_adaptation() {
  if (state_.iteration != 0 || state_.phase != Phase::warm_start) {
    throw std::logic_error("resume_adaptation only applies to a fresh trainer");
  }
  if (options_.mode == TrainMode::domain_specific_baseline) {
    throw std::logic_error("the domain-specific baseline has no adaptation phase");
  }
  state_.phase = Phase::adaptation;
}

PseudoLabelSet Trainer::rebuild_pseudo_set() {
  PseudoLabelSet set =
      build_pseudo_set(params_, target_, options_.margin_threshold, options_.margin_mode);
  set.built_at_iteration = state_.iteration;
  state_.last_pseudo_set_size = set.size();
  if (hooks_.on_pseudo_set) hooks_.on_pseudo_set(set);
  return set;
}

PseudoLabelSet Trainer::ensure_pseudo_set() {
  PseudoLabelSet set = rebuild_pseudo_set();
  if (!set.empty()) return set;
  // Empty D_t': one more convergence window of source-only updates, then one retry.
  const std::size_t extra = options_.convergence_window * options_.eval_every;
  for (std::size_t k = 1; k <= extra; ++k) {
    source_step(false);
    ++state_.iteration;
    if (k % options_.eval_every == 0) checkpoint(std::size_t{0});
  }
  set = rebuild_pseudo_set();
  if (set.empty()) {
    throw TrainingAborted(fmt::format(
        "no target sample passes the agreement filter at iteration {} (after a retry)",
        state_.iteration));
  }
  return set;
}

const TrainingState& Trainer::adapt() { return adapt(options_.max_iterations); }

const TrainingState& Trainer::adapt(std::size_t budget) {
  if (state_.phase != Phase::adaptation) {
    throw std::logic_error("adapt requires a completed warm start");
  }
  state_.phase_history_start = state_.agreement_history.size();
  state_.converged = false;
  if (budget == 0) {
    state_.phase = Phase::done;
    return state_;
  }
  source_loss_sum_ = target_loss_sum_ = 0.0;
  source_loss_count_ = target_loss_count_ = 0;

  PseudoLabelSet set = ensure_pseudo_set();
  std::size_t cursor = 0;
  std::size_t epochs = 0;
  for (std::size_t k = 1; k <= budget; ++k) {
    source_step(false);
    const std::size_t end = std::min(cursor + options_.target_batch, set.size());
    target_step(set, cursor, end);
    cursor = end;
    ++state_.iteration;
    if (cursor == set.size()) {
      cursor = 0;
      ++epochs;
      if (epochs % options_.n_e == 0) {
        set = ensure_pseudo_set();
        ++state_.pseudo_refreshes;
        state_.refresh_epochs.push_back(epochs);
      }
    }
    if (k % options_.eval_every == 0) {
      const bool plateau = checkpoint(set.size());
      if (plateau && !state_.converged) state_.converged = true;
      if (plateau && options_.stop_on_convergence) break;
    }
  }
  state_.phase = Phase::done;
  return state_;
}

namespace {

std::string cell(const std::optional<double>& v) {
  return v ? fmt::format("{:.10g}", *v) : std::string();
}

}  // namespace

void write_metrics_csv(std::ostream& out, std::span<const MetricRow> rows) {
  out << "iteration,phase,A,source_loss,target_loss,dtprime_size,target_acc,pl_acc_agree,"
         "pl_acc_disagree\n";
  for (const auto& r : rows) {
    out << r.iteration << ',' << to_string(r.phase) << ',' << fmt::format("{:.10g}", r.agreement)
        << ',' << cell(r.source_loss) << ',' << cell(r.target_loss) << ','
        << (r.dtprime_size ? std::to_string(*r.dtprime_size) : std::string()) << ','
        << cell(r.probe.target_acc) << ',' << cell(r.probe.pl_acc_agree) << ','
        << cell(r.probe.pl_acc_disagree) << '\n';
  }
}

std::string metrics_csv(std::span<const MetricRow> rows) {
  std::ostringstream out;
  write_metrics_csv(out, rows);
  return out.str();
}

}  // namespace simpal
