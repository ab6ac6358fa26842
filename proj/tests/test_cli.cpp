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

#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "simpal/commands.hpp"
#include "simpal/config.hpp"
#include "simpal/snapshot.hpp"
#include "support.hpp"

using namespace simpal;
namespace fs = std::filesystem;

namespace {

RunConfig quick_config(const fs::path& out) {
  RunConfig c = desk_preset_config();
  c.synthetic->samples_per_class_per_domain = 40;
  c.hidden_dims = {8};
  c.latent_dim = 8;
  c.train.eval_every = 20;
  c.train.convergence_window = 3;
  c.train.max_iterations = 200;
  c.output_dir = out;
  return c;
}

void write_summary(const fs::path& run, int seed, const std::string& status, double acc) {
  fs::create_directories(run / ("seed_" + std::to_string(seed)));
  nlohmann::json j{{"seed", seed}, {"status", status}, {"final_target_accuracy", acc}};
  testing::write_file(run / ("seed_" + std::to_string(seed)) / "summary.json", j.dump());
}

}  // namespace

TEST_CASE("angles and seed lists") {
  CHECK(parse_angle("0.25") == 0.25);
  CHECK(parse_angle("pi") == doctest::Approx(3.141592653589793));
  CHECK(parse_angle("-pi/6") == doctest::Approx(-3.141592653589793 / 6));
  CHECK(parse_angle("2*pi/3") == doctest::Approx(2 * 3.141592653589793 / 3));
  CHECK_THROWS_AS(parse_angle("pi*2"), ConfigError);
  CHECK(parse_seed_list("0, 3,7") == std::vector<std::uint64_t>{0, 3, 7});
  CHECK_THROWS_AS(parse_seed_list(""), ConfigError);
  CHECK_THROWS_AS(parse_seed_list("1,x"), ConfigError);
}

TEST_CASE("config parsing") {
  std::istringstream in(R"(
[experiment]
name = demo
seeds = 1,2
output = runs/demo

[synthetic]
n_source_domains = 2
n_classes = 4
samples_per_class = 50
noise = 0.2
rotations = -pi/6, pi/6, pi/3

[category_shift]
mode = overlap
overlap_count = 2

[model]
hidden_dims = 32, 16
latent_dim = 8

[train]
learning_rate = 0.001
n_e = 5
margin_threshold = 0.5
margin_mode = per_row
mode = oracle

[eval]
curriculum_bins = 5
)");
  const RunConfig c = parse_run_config(in, "/base");
  CHECK(c.name == "demo");
  CHECK(c.seeds == std::vector<std::uint64_t>{1, 2});
  CHECK(c.output_dir == fs::path("/base/runs/demo"));
  REQUIRE(c.synthetic.has_value());
  CHECK(c.synthetic->n_classes == 4);
  CHECK(c.synthetic->rotation_per_domain[2] == doctest::Approx(3.141592653589793 / 3));
  CHECK(c.synthetic->scale_per_domain == std::vector<double>{1, 1, 1});
  CHECK(c.category_shift == CategoryShift::overlap);
  CHECK(c.overlap_count == 2);
  CHECK(c.hidden_dims == std::vector<std::size_t>{32, 16});
  CHECK(c.train.n_e == 5);
  CHECK(c.train.margin_threshold == std::optional<double>(0.5));
  CHECK(c.train.margin_mode == MarginMode::per_row);
  CHECK(c.train.mode == TrainMode::oracle);
  CHECK(c.curriculum_bins == 5);
}

TEST_CASE("invalid configs are rejected") {
  auto rejects = [](const std::string& text) {
    CAPTURE(text);
    std::istringstream in(text);
    CHECK_THROWS_AS(parse_run_config(in), ConfigError);
  };
  rejects("[experiment]\nname = x\n");                              // neither data source
  rejects("[synthetic]\n[files]\nsources = a.csv\ntarget = b.csv\n");  // both
  rejects("[synthetic]\nn_classes = 1\n[category_shift]\nmode = disjoint\n");
  rejects("[synthetic]\nbogus = 1\n");
  rejects("[synthetic]\n[train]\nlearning_rate = fast\n");
  rejects("[synthetic]\n[train]\nmax_iterations = 0\n");
  rejects("[synthetic]\n[weird]\n");
  rejects("[synthetic]\nrotations = 0, 0\n");
}

TEST_CASE("gen-data writes files and a manifest, deterministically") {
  testing::TempDir dir;
  RunConfig c = quick_config(dir / "a");
  c.seeds = {5};
  std::ostringstream log;
  CHECK(cmd_gen_data(c, log) == kExitOk);
  const fs::path seed = dir / "a" / "seed_5";
  for (const char* f : {"source_0.csv", "source_1.csv", "target.csv", "manifest.json"})
    CHECK_MESSAGE(fs::exists(seed / f), f);
  CHECK(fs::exists(seed / "evaluation" / "target_labels.csv"));
  CHECK_FALSE(load_dataset(seed / "target.csv").labeled());

  c.output_dir = dir / "b";
  CHECK(cmd_gen_data(c, log) == kExitOk);
  for (const char* f : {"source_0.csv", "source_1.csv", "target.csv", "manifest.json"})
    CHECK(testing::read_file(seed / f) == testing::read_file(dir / "b" / "seed_5" / f));
}

TEST_CASE("gen-data rejects a bad config before writing") {
  testing::TempDir dir;
  RunConfig c = quick_config(dir / "out");
  c.synthetic->n_classes = 1;
  c.category_shift = CategoryShift::disjoint;
  std::ostringstream log;
  CHECK_THROWS_AS(cmd_gen_data(c, log), ConfigError);
  CHECK_FALSE(fs::exists(dir / "out"));
}

TEST_CASE("train, eval, export and report") {
  testing::TempDir dir;
  RunConfig c = quick_config(dir / "run");
  c.seeds = {0, 1, 2};
  std::ostringstream log;
  REQUIRE(cmd_train(c, std::nullopt, log) == kExitOk);
  for (int s = 0; s < 3; ++s) {
    const fs::path sd = dir / "run" / ("seed_" + std::to_string(s));
    for (const char* f : {"metrics.csv", "warm_start.params", "final.params", "summary.json"})
      CHECK_MESSAGE(fs::exists(sd / f), f);
    const auto j = nlohmann::json::parse(testing::read_file(sd / "summary.json"));
    CHECK(j["status"] == "completed");
  }
  CHECK(fs::exists(dir / "run" / "summary.csv"));

  c.seeds = {0};
  CHECK(cmd_eval(c, std::nullopt, log) == kExitOk);
  CHECK(cmd_eval(c, dir / "run" / "seed_{seed}" / "warm_start.params", log) == kExitOk);
  const fs::path sd = dir / "run" / "seed_0";
  const auto final_report = nlohmann::json::parse(testing::read_file(sd / "eval_final.json"));
  const auto warm_report = nlohmann::json::parse(testing::read_file(sd / "eval_warm_start.json"));
  CHECK(final_report.contains("target_accuracy"));
  CHECK(final_report["proxy_a_distance"].size() == 2);
  CHECK(warm_report.contains("agreement_rate"));

  CHECK(cmd_export_features(c, std::nullopt, log) == kExitOk);
  CHECK(fs::exists(sd / "features_final.csv"));

  std::ostringstream out;
  CHECK(cmd_report(dir / "run", out) == kExitOk);
  CHECK(fs::exists(dir / "run" / "report.csv"));
  CHECK(out.str().find("final_target_accuracy") != std::string::npos);
}

TEST_CASE("train rerun gives byte-identical metrics") {
  testing::TempDir dir;
  RunConfig c = quick_config(dir / "a");
  std::ostringstream log;
  REQUIRE(cmd_train(c, std::nullopt, log) == kExitOk);
  c.output_dir = dir / "b";
  REQUIRE(cmd_train(c, std::nullopt, log) == kExitOk);
  CHECK(testing::read_file(dir / "a/seed_0/metrics.csv") == testing::read_file(dir / "b/seed_0/metrics.csv"));
  CHECK(testing::read_file(dir / "a/seed_0/final.params") == testing::read_file(dir / "b/seed_0/final.params"));
}

TEST_CASE("baseline mode has no adaptation phase") {
  testing::TempDir dir;
  RunConfig c = quick_config(dir / "run");
  c.train.mode = TrainMode::domain_specific_baseline;
  std::ostringstream log;
  REQUIRE(cmd_train(c, std::nullopt, log) == kExitOk);
  const std::string metrics = testing::read_file(dir / "run/seed_0/metrics.csv");
  CHECK(metrics.find("adaptation") == std::string::npos);
  CHECK_FALSE(fs::exists(dir / "run/seed_0/warm_start.params"));
  const auto j = nlohmann::json::parse(testing::read_file(dir / "run/seed_0/summary.json"));
  CHECK(j["mode"] == "domain_specific_baseline");
  CHECK(j["target_updates"] == 0);
}

TEST_CASE("resuming from a warm-start snapshot skips the warm start") {
  testing::TempDir dir;
  RunConfig c = quick_config(dir / "first");
  std::ostringstream log;
  REQUIRE(cmd_train(c, std::nullopt, log) == kExitOk);
  const fs::path warm = dir / "first/seed_0/warm_start.params";
  c.output_dir = dir / "resumed";
  REQUIRE(cmd_train(c, warm, log) == kExitOk);
  const std::string metrics = testing::read_file(dir / "resumed/seed_0/metrics.csv");
  CHECK(metrics.find("warm_start") == std::string::npos);
  CHECK(metrics.find("adaptation") != std::string::npos);
  const auto j = nlohmann::json::parse(testing::read_file(dir / "resumed/seed_0/summary.json"));
  CHECK_FALSE(j.contains("warm_start_iterations"));
}

TEST_CASE("an aborted seed keeps its logs and fails the command") {
  testing::TempDir dir;
  RunConfig c = quick_config(dir / "run");
  c.train.margin_threshold = 1e12;
  std::ostringstream log;
  CHECK(cmd_train(c, std::nullopt, log) == kExitFailure);
  const auto j = nlohmann::json::parse(testing::read_file(dir / "run/seed_0/summary.json"));
  CHECK(j["status"] == "aborted");
  CHECK(j.contains("error"));
  CHECK(fs::exists(dir / "run/seed_0/metrics.csv"));
  CHECK(fs::exists(dir / "run/seed_0/warm_start.params"));
}

TEST_CASE("snapshot round trip and mismatch detection") {
  testing::TempDir dir;
  const auto p = init_params(2, std::vector<std::size_t>{4}, 3, 2, 3, 1);
  save_params(p, dir / "p.params");
  CHECK(load_params(dir / "p.params") == p);

  std::string bytes = encode_params(p);
  CHECK_THROWS_AS(decode_params(bytes.substr(0, bytes.size() - 3)), SnapshotError);
  CHECK_THROWS_AS(decode_params(bytes + "x"), SnapshotError);
  bytes[0] = 'X';
  CHECK_THROWS_AS(decode_params(bytes), SnapshotError);

  RunConfig c = quick_config(dir / "run");
  const RunData data = load_run_data(c, 0);
  CHECK_NOTHROW(check_compatible(p, data));
  CHECK_THROWS_AS(check_compatible(init_params(3, {}, 3, 2, 3, 0), data), DataError);
  CHECK_THROWS_AS(check_compatible(init_params(2, {}, 3, 3, 3, 0), data), DataError);
  CHECK_THROWS_AS(check_compatible(init_params(2, {}, 3, 2, 4, 0), data), DataError);
}

TEST_CASE("file datasets without evaluation labels") {
  testing::TempDir dir;
  RunConfig gen = quick_config(dir / "data");
  std::ostringstream log;
  REQUIRE(cmd_gen_data(gen, log) == kExitOk);
  std::istringstream in(R"(
[experiment]
output = out
[files]
sources = data/seed_0/source_0.csv, data/seed_0/source_1.csv
target = data/seed_0/target.csv
[model]
hidden_dims = 8
latent_dim = 8
[train]
learning_rate = 0.001
eval_every = 20
convergence_window = 3
max_iterations = 100
)");
  const RunConfig c = parse_run_config(in, dir.path());
  REQUIRE(cmd_train(c, std::nullopt, log) == kExitOk);
  REQUIRE(cmd_eval(c, std::nullopt, log) == kExitOk);
  const auto j = nlohmann::json::parse(testing::read_file(dir / "out/seed_0/eval_final.json"));
  CHECK(j.contains("agreement_rate"));
  CHECK(j.contains("proxy_a_distance"));
  CHECK_FALSE(j.contains("target_accuracy"));
  CHECK(j["uses_evaluation_labels"] == false);
}

TEST_CASE("report aggregates completed seeds") {
  testing::TempDir dir;
  write_summary(dir.path(), 0, "completed", 0.8);
  write_summary(dir.path(), 1, "completed", 0.9);
  write_summary(dir.path(), 2, "completed", 1.0);
  write_summary(dir.path(), 3, "aborted", 0.1);
  const RunReport r = aggregate_runs(dir.path());
  REQUIRE(r.metrics.size() == 1);
  CHECK(r.metrics[0].mean == doctest::Approx(0.9));
  CHECK(r.metrics[0].stddev == doctest::Approx(0.0816).epsilon(1e-3));
  CHECK(r.completed_seeds == std::vector<std::uint64_t>{0, 1, 2});
  CHECK(r.incomplete_seeds == std::vector<std::uint64_t>{3});
  CHECK(r.table().find("incomplete seeds: 3") != std::string::npos);

  testing::TempDir one;
  write_summary(one.path(), 4, "completed", 0.7);
  for (const auto& m : aggregate_runs(one.path()).metrics) CHECK(m.stddev == 0.0);

  testing::TempDir empty;
  CHECK_THROWS_AS(aggregate_runs(empty.path()), DataError);
}
