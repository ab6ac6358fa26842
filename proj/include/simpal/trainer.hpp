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
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "simpal/data.hpp"
#include "simpal/model.hpp"
#include "simpal/optimizer.hpp"

namespace simpal {

class TrainingAborted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class TrainMode { simpal, domain_specific_baseline, oracle };

TrainMode parse_train_mode(const std::string& text);
std::string to_string(TrainMode mode);

struct TrainOptions {
  double learning_rate = 1e-5;
  double weight_decay = 5e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t per_domain_batch = 32;
  std::size_t target_batch = 64;
  std::size_t n_e = 15;                // epochs over the pseudo-labeled set between refreshes
  std::size_t eval_every = 200;        // iterations between agreement-rate checkpoints
  std::size_t convergence_window = 5;  // W checkpoints
  double convergence_tol = 0.005;      // τ_A
  std::size_t max_iterations = 20000;  // per phase
  std::optional<double> margin_threshold;
  MarginMode margin_mode = MarginMode::ensemble;
  TrainMode mode = TrainMode::simpal;
  std::uint64_t seed = 0;
  // When false, phases run their whole budget; checkpoints are still logged.
  bool stop_on_convergence = true;

  void validate() const;
  AdamConfig adam() const;

  // Desk-scale settings: learning rate 1e-3 instead of 1e-5.
  static TrainOptions desk_preset(std::uint64_t seed);
};

// True iff the history holds at least `window` checkpoints and successive
// differences over the last `window` of them stay below `tol` in magnitude.
bool has_converged(std::span<const double> agreement_history, std::size_t window, double tol);

struct PseudoLabelEntry {
  std::size_t sample = 0;  // row in the target dataset
  int label = 0;
  double weight = 0.0;
};

// Agreement-filtered target samples sorted by margin, largest first.
struct PseudoLabelSet {
  std::vector<PseudoLabelEntry> entries;
  std::size_t built_at_iteration = 0;

  std::size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }
};

PseudoLabelSet build_pseudo_set(const ModelParams& params, const DomainDataset& target,
                                std::optional<double> margin_threshold,
                                MarginMode mode = MarginMode::ensemble);

enum class Phase { warm_start, adaptation, done };
std::string to_string(Phase phase);

struct Checkpoint {
  std::size_t iteration = 0;
  double agreement = 0.0;
};

// Accuracy columns of a checkpoint, filled only when evaluation labels exist.
struct ProbeReading {
  std::optional<double> target_acc;
  std::optional<double> pl_acc_agree;
  std::optional<double> pl_acc_disagree;
};

// Read-only view of a snapshot taken at each checkpoint.
class CheckpointProbe {
 public:
  virtual ~CheckpointProbe() = default;
  virtual ProbeReading read(const ModelParams& snapshot) const = 0;
};

struct MetricRow {
  std::size_t iteration = 0;
  Phase phase = Phase::warm_start;
  double agreement = 0.0;
  std::optional<double> source_loss;
  std::optional<double> target_loss;
  std::optional<std::size_t> dtprime_size;
  ProbeReading probe;
};

struct TrainingState {
  std::size_t iteration = 0;
  std::vector<Checkpoint> agreement_history;
  std::size_t phase_history_start = 0;  // first checkpoint of the current phase
  std::vector<double> loss_history;     // mean source loss per checkpoint
  bool converged = false;
  Phase phase = Phase::warm_start;
  std::vector<MetricRow> metrics;
  std::size_t source_updates = 0;
  std::size_t target_updates = 0;
  std::size_t pseudo_refreshes = 0;
  std::vector<std::size_t> refresh_epochs;  // epoch count over D_t' at each refresh
  std::size_t last_pseudo_set_size = 0;

  std::vector<double> phase_agreements() const;
};

enum class UpdateSource { source, target };

struct TrainHooks {
  // Called after each parameter update. `target_entries` is empty for source updates.
  std::function<void(UpdateSource, std::span<const PseudoLabelEntry> target_entries)> on_update;
  std::function<void(const PseudoLabelSet&)> on_pseudo_set;
  std::function<void(const ModelParams&, const Checkpoint&, Phase)> on_checkpoint;
};

// Single owner of the mutable parameters and optimizer state for one run.
// `sources`, `target`, `oracle_labels` and `probe` must outlive the trainer.
class Trainer {
 public:
  Trainer(ModelParams params, std::span<const DomainDataset> sources, const DomainDataset& target,
          TrainOptions options, const EvaluationLabels* oracle_labels = nullptr,
          const CheckpointProbe* probe = nullptr);

  // Source-only training until the agreement rate plateaus.
  const TrainingState& warm_start();
  // Alternating source / pseudo-labeled target updates until the agreement rate
  // plateaus again. Requires a completed warm start (or resume_adaptation()).
  const TrainingState& adapt();
  // Same with an explicit iteration budget; 0 only closes the phase.
  const TrainingState& adapt(std::size_t budget);
  // Per-domain heads: head i only learns from source i.
  const TrainingState& train_domain_specific_baseline();

  // Marks the warm start as done, e.g. when parameters come from a snapshot.
  void resume_adaptation();

  void set_hooks(TrainHooks hooks) { hooks_ = std::move(hooks); }

  const ModelParams& params() const { return params_; }
  const TrainingState& state() const { return state_; }
  const TrainOptions& options() const { return options_; }

 private:
  void run_source_phase(bool domain_specific);
  double source_step(bool domain_specific);
  double target_step(const PseudoLabelSet& set, std::size_t begin, std::size_t end);
  PseudoLabelSet rebuild_pseudo_set();
  PseudoLabelSet ensure_pseudo_set();
  // Logs a checkpoint; returns true when the current phase has converged.
  bool checkpoint(std::optional<std::size_t> dtprime_size);
  void apply(const ModelParams& gradients);

  ModelParams params_;
  std::span<const DomainDataset> sources_;
  const DomainDataset& target_;
  TrainOptions options_;
  const EvaluationLabels* oracle_labels_;
  const CheckpointProbe* probe_;
  Adam optimizer_;
  SourceBatchStream batches_;
  TrainingState state_;
  TrainHooks hooks_;
  double source_loss_sum_ = 0.0;
  std::size_t source_loss_count_ = 0;
  double target_loss_sum_ = 0.0;
  std::size_t target_loss_count_ = 0;
};

// `iteration,phase,A,source_loss,target_loss,dtprime_size,target_acc,pl_acc_agree,pl_acc_disagree`
void write_metrics_csv(std::ostream& out, std::span<const MetricRow> rows);
std::string metrics_csv(std::span<const MetricRow> rows);

}  // namespace simpal
