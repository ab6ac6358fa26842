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

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "doctest.h"
#include "simpal/eval.hpp"
#include "simpal/trainer.hpp"
#include "support.hpp"

using namespace simpal;

namespace {

const std::vector<std::size_t> kHidden{16};

ShiftConfig small_preset(std::uint64_t seed) {
  ShiftConfig c = ShiftConfig::desk_preset(seed);
  c.samples_per_class_per_domain = 60;
  return c;
}

TrainOptions fast_options(std::uint64_t seed) {
  TrainOptions o = TrainOptions::desk_preset(seed);
  o.eval_every = 25;
  o.convergence_window = 3;
  o.max_iterations = 400;
  o.n_e = 2;
  return o;
}

ModelParams fresh(const SyntheticDomains& d, std::uint64_t seed, std::size_t heads = 0) {
  return init_params(d.target.dim(), kHidden, 16, heads ? heads : d.sources.size(),
                     3, seed);
}

}  // namespace

TEST_CASE("has_converged") {
  const std::vector<double> plateau{0.2, 0.5, 0.8, 0.801, 0.802, 0.801, 0.802};
  CHECK(has_converged(plateau, 5, 0.005));
  std::vector<double> rising;
  for (int i = 0; i < 10; ++i) rising.push_back(0.5 + 0.01 * i);
  CHECK_FALSE(has_converged(rising, 5, 0.005));
  const std::vector<double> short_history{0.9, 0.9, 0.9};
  CHECK_FALSE(has_converged(short_history, 5, 0.005));
  // The jump into the plateau still sits inside the window.
  const std::vector<double> late{0.5, 0.8, 0.8, 0.8, 0.8};
  CHECK_FALSE(has_converged(late, 5, 0.005));
}

TEST_CASE("train options validation") {
  TrainOptions o;
  CHECK_NOTHROW(o.validate());
  o.max_iterations = 0;
  CHECK_THROWS(o.validate());
  o = TrainOptions{};
  o.convergence_window = 1;
  CHECK_THROWS(o.validate());
  o = TrainOptions{};
  o.n_e = 0;
  CHECK_THROWS(o.validate());
  o = TrainOptions{};
  o.learning_rate = 0.0;
  CHECK_THROWS(o.validate());
  CHECK(parse_train_mode("oracle") == TrainMode::oracle);
  CHECK_THROWS(parse_train_mode("fancy"));
}

TEST_CASE("build_pseudo_set") {
  const auto d = generate_domains(small_preset(0));
  SUBCASE("identical heads keep every sample") {
    ModelParams p = fresh(d, 0);
    p.heads[1] = p.heads[0];
    CHECK(build_pseudo_set(p, d.target, std::nullopt).size() == d.target.size());
  }
  SUBCASE("entries agree, are sorted by margin and respect the threshold") {
    // Near-copies of one head agree on most but not all samples.
    ModelParams p = fresh(d, 1);
    p.heads[1] = p.heads[0];
    p.heads[1].weight(0, 0) += 0.3;
    const auto verdicts = assess(p, d.target.features);
    const auto set = build_pseudo_set(p, d.target, std::nullopt);
    REQUIRE(set.size() > 10);
    for (std::size_t i = 0; i < set.size(); ++i) {
      const auto& e = set.entries[i];
      CHECK(verdicts[e.sample].agree);
      CHECK(e.label == static_cast<int>(verdicts[e.sample].prediction));
      CHECK(e.weight == verdicts[e.sample].margin);
      if (i > 0) CHECK(set.entries[i - 1].weight >= e.weight);
    }
    const double cut = set.entries[set.size() / 2].weight;
    const auto thresholded = build_pseudo_set(p, d.target, cut);
    CHECK(thresholded.size() < set.size());
    for (const auto& e : thresholded.entries) CHECK(e.weight >= cut);
    CHECK(build_pseudo_set(p, d.target, std::numeric_limits<double>::infinity()).empty());
  }
  SUBCASE("two samples with margins 3 and 1 come out largest first") {
    ModelParams p = init_params(2, {}, 2, 1, 2, 0);
    p.extractor[0].weight = Matrix::identity(2);
    p.extractor[0].bias = Matrix(1, 2);
    p.heads[0].weight = Matrix::identity(2);
    p.heads[0].bias = Matrix(1, 2);
    DomainDataset t{"t", Matrix::from_rows({{1, 0}, {3, 0}}), std::nullopt, {}};
    const auto set = build_pseudo_set(p, t, std::nullopt);
    REQUIRE(set.size() == 2);
    CHECK(set.entries[0].weight == doctest::Approx(3.0));
    CHECK(set.entries[0].sample == 1);
    CHECK(set.entries[1].weight == doctest::Approx(1.0));
  }
}

TEST_CASE("trainer rejects labeled targets and stray evaluation labels") {
  auto d = generate_domains(small_preset(0));
  DomainDataset labeled = d.target;
  labeled.labels = d.target_labels.labels;
  labeled.label_set = {0, 1, 2};
  CHECK_THROWS_AS(Trainer(fresh(d, 0), d.sources, labeled, fast_options(0)), std::invalid_argument);
  CHECK_THROWS_AS(Trainer(fresh(d, 0), d.sources, d.target, fast_options(0), &d.target_labels),
                  std::invalid_argument);
  TrainOptions oracle = fast_options(0);
  oracle.mode = TrainMode::oracle;
  CHECK_THROWS_AS(Trainer(fresh(d, 0), d.sources, d.target, oracle), std::invalid_argument);
  TrainOptions baseline = fast_options(0);
  baseline.mode = TrainMode::domain_specific_baseline;
  CHECK_THROWS_AS(Trainer(fresh(d, 0, 3), d.sources, d.target, baseline), std::invalid_argument);
}

TEST_CASE("warm start on unshifted data fits the sources") {
  ShiftConfig c = small_preset(3);
  c.rotation_per_domain = {0.0, 0.0, 0.0};
  const auto d = generate_domains(c);
  TrainOptions o = TrainOptions::desk_preset(3);
  Trainer t(fresh(d, 3), d.sources, d.target, o);
  const auto& s = t.warm_start();
  CHECK(s.phase == Phase::adaptation);
  for (const auto& src : d.sources) CHECK(accuracy(t.params(), src) > 0.95);
}

TEST_CASE("one head converges at the first full window") {
  const auto d = generate_domains(small_preset(1));
  std::vector<DomainDataset> one{d.sources[0]};
  const TrainOptions o = fast_options(1);
  Trainer t(fresh(d, 1, 1), one, d.target, o);
  const auto& s = t.warm_start();
  CHECK(s.converged);
  CHECK(s.iteration == o.eval_every * o.convergence_window);
  for (const auto& cp : s.agreement_history) CHECK(cp.agreement == 1.0);
}

TEST_CASE("agreement history is deterministic for a fixed seed") {
  const auto d = generate_domains(small_preset(2));
  auto run = [&] {
    Trainer t(fresh(d, 2), d.sources, d.target, fast_options(2));
    t.warm_start();
    t.adapt();
    std::ostringstream csv;
    write_metrics_csv(csv, t.state().metrics);
    return std::make_pair(t.params(), csv.str());
  };
  const auto a = run(), b = run();
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
}

TEST_CASE("adaptation alternates updates and follows the curriculum") {
  const auto d = generate_domains(small_preset(4));
  TrainOptions o = fast_options(4);
  o.target_batch = 32;
  o.stop_on_convergence = false;
  o.max_iterations = 150;
  Trainer t(fresh(d, 4), d.sources, d.target, o);
  t.warm_start();

  std::vector<UpdateSource> order;
  std::vector<std::size_t> sets_built;
  const PseudoLabelSet* current = nullptr;
  PseudoLabelSet last;
  std::size_t consumed = 0;
  bool entries_in_order = true;
  TrainHooks hooks;
  hooks.on_pseudo_set = [&](const PseudoLabelSet& set) {
    last = set;
    current = &last;
    consumed = 0;
    sets_built.push_back(set.size());
    const auto verdicts = assess(t.params(), d.target.features);
    for (const auto& e : set.entries) CHECK(verdicts[e.sample].agree);
  };
  hooks.on_update = [&](UpdateSource src, std::span<const PseudoLabelEntry> entries) {
    order.push_back(src);
    if (src != UpdateSource::target || !current) return;
    for (const auto& e : entries) {
      const auto& want = current->entries[consumed % current->size()];
      entries_in_order = entries_in_order && want.sample == e.sample && want.label == e.label;
      ++consumed;
    }
  };
  t.set_hooks(hooks);
  const auto& s = t.adapt();

  REQUIRE(order.size() == 2 * o.max_iterations);
  for (std::size_t i = 0; i < order.size(); ++i)
    CHECK(order[i] == (i % 2 == 0 ? UpdateSource::source : UpdateSource::target));
  CHECK(entries_in_order);
  CHECK(sets_built.size() == 1 + s.pseudo_refreshes);
  CHECK(s.pseudo_refreshes > 0);
  for (std::size_t i = 0; i < s.refresh_epochs.size(); ++i) {
    CHECK(s.refresh_epochs[i] % o.n_e == 0);
    CHECK(s.refresh_epochs[i] == o.n_e * (i + 1));
  }
  CHECK(s.phase == Phase::done);
}

TEST_CASE("checkpoints log the agreement rate and strictly increasing iterations") {
  const auto d = generate_domains(small_preset(5));
  Trainer t(fresh(d, 5), d.sources, d.target, fast_options(5));
  t.warm_start();
  t.adapt();
  const auto& s = t.state();
  for (std::size_t i = 0; i < s.agreement_history.size(); ++i) {
    CHECK(s.agreement_history[i].agreement >= 0.0);
    CHECK(s.agreement_history[i].agreement <= 1.0);
    if (i > 0) CHECK(s.agreement_history[i].iteration > s.agreement_history[i - 1].iteration);
  }
  CHECK(s.metrics.size() == s.agreement_history.size());
  if (s.converged) CHECK(has_converged(s.phase_agreements(), 3, 0.005));
  std::ostringstream csv;
  write_metrics_csv(csv, s.metrics);
  const std::string text = csv.str();
  CHECK(text.rfind("iteration,phase,A,source_loss,target_loss,dtprime_size,target_acc,", 0) == 0);
  CHECK(text.find("adaptation") != std::string::npos);
}

TEST_CASE("a zero adaptation budget only closes the phase") {
  const auto d = generate_domains(small_preset(6));
  Trainer t(fresh(d, 6), d.sources, d.target, fast_options(6));
  t.warm_start();
  const ModelParams before = t.params();
  const TrainingState snapshot = t.state();
  const auto& s = t.adapt(0);
  CHECK(s.phase == Phase::done);
  CHECK(t.params() == before);
  CHECK(s.iteration == snapshot.iteration);
  CHECK(s.metrics.size() == snapshot.metrics.size());
  CHECK(s.source_updates == snapshot.source_updates);
  CHECK(s.target_updates == 0);
}

TEST_CASE("adapt needs a warm start, resume skips it") {
  const auto d = generate_domains(small_preset(7));
  Trainer t(fresh(d, 7), d.sources, d.target, fast_options(7));
  CHECK_THROWS_AS(t.adapt(), std::logic_error);
  Trainer r(fresh(d, 7), d.sources, d.target, fast_options(7));
  r.resume_adaptation();
  const auto& s = r.adapt();
  CHECK(s.target_updates > 0);
  CHECK(s.phase == Phase::done);
}

TEST_CASE("an unattainable margin threshold exhausts the empty-set policy") {
  const auto d = generate_domains(small_preset(8));
  TrainOptions o = fast_options(8);
  o.margin_threshold = 1e9;
  Trainer t(fresh(d, 8), d.sources, d.target, o);
  t.warm_start();
  const std::size_t before = t.state().iteration;
  CHECK_THROWS_AS(t.adapt(), TrainingAborted);
  CHECK(t.state().iteration == before + o.convergence_window * o.eval_every);
}

TEST_CASE("non-finite parameters abort training") {
  const auto d = generate_domains(small_preset(9));
  ModelParams p = fresh(d, 9);
  p.heads[0].weight(0, 0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS(Trainer(p, d.sources, d.target, fast_options(9)).warm_start());
}

TEST_CASE("domain-specific baseline") {
  const auto d = generate_domains(small_preset(10));
  TrainOptions o = fast_options(10);
  o.mode = TrainMode::domain_specific_baseline;

  SUBCASE("runs without an adaptation phase") {
    Trainer t(fresh(d, 10), d.sources, d.target, o);
    const auto& s = t.train_domain_specific_baseline();
    CHECK(s.phase == Phase::done);
    CHECK(s.target_updates == 0);
    CHECK_THROWS_AS(t.adapt(), std::logic_error);
  }
  SUBCASE("a single source matches the warm start with one head") {
    std::vector<DomainDataset> one{d.sources[0]};
    Trainer baseline(fresh(d, 10, 1), one, d.target, o);
    baseline.train_domain_specific_baseline();
    TrainOptions plain = fast_options(10);
    Trainer warm(fresh(d, 10, 1), one, d.target, plain);
    warm.warm_start();
    CHECK(baseline.params() == warm.params());
  }
  SUBCASE("on unshifted data its source-source distance matches the agreement model") {
    ShiftConfig c = small_preset(10);
    c.rotation_per_domain = {0.0, 0.0, 0.0};
    const auto z = generate_domains(c);
    Trainer base(fresh(z, 10), z.sources, z.target, o);
    base.train_domain_specific_baseline();
    Trainer agree(fresh(z, 10), z.sources, z.target, fast_options(10));
    agree.warm_start();
    auto dist = [&](const ModelParams& p) {
      return proxy_a_distance(extract_features(p, z.sources[0].features),
                              extract_features(p, z.sources[1].features), 10);
    };
    CHECK(std::abs(dist(base.params()) - dist(agree.params())) < 0.3);
  }
}

TEST_CASE("oracle adaptation is at least as accurate as self-labeling") {
  // Paired comparison over seeds on the preset.
  int wins = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto d = generate_domains(ShiftConfig::desk_preset(seed));
    const ModelParams init = init_params(2, std::vector<std::size_t>{64}, 64, 2, 3, seed);
    auto final_acc = [&](TrainMode mode) {
      TrainOptions o = TrainOptions::desk_preset(seed);
      o.mode = mode;
      Trainer t(init, d.sources, d.target, o, mode == TrainMode::oracle ? &d.target_labels : nullptr);
      t.warm_start();
      t.adapt();
      return accuracy(t.params(), d.target.features, d.target_labels.labels);
    };
    if (final_acc(TrainMode::oracle) >= final_acc(TrainMode::simpal)) ++wins;
  }
  CHECK(wins >= 8);
}
