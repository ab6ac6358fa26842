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

#include "simpal/config.hpp"

#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <sstream>

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/core.h>

namespace simpal {
namespace {

namespace pt = boost::property_tree;

std::vector<std::string> split_list(const std::string& text, const char* delims) {
  std::vector<std::string> parts;
  boost::split(parts, text, boost::is_any_of(delims));
  for (auto& p : parts) boost::trim(p);
  std::erase_if(parts, [](const std::string& p) { return p.empty(); });
  return parts;
}

double parse_double(const std::string& key, const std::string& text) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || !std::isfinite(v)) {
    throw ConfigError(fmt::format("{}: '{}' is not a number", key, text));
  }
  return v;
}

std::size_t parse_count(const std::string& key, const std::string& text) {
  std::size_t used = 0;
  long long v = -1;
  try {
    v = std::stoll(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || v < 0) {
    throw ConfigError(fmt::format("{}: '{}' is not a non-negative integer", key, text));
  }
  return static_cast<std::size_t>(v);
}

class Section {
 public:
  Section(const pt::ptree* tree, std::string name) : tree_(tree), name_(std::move(name)) {
    if (tree_) {
      for (const auto& [key, _] : *tree_) unused_.push_back(key);
    }
  }

  bool present() const { return tree_ != nullptr; }

  std::optional<std::string> get(const std::string& key) {
    if (!tree_) return std::nullopt;
    auto v = tree_->get_optional<std::string>(pt::ptree::path_type(key, '\0'));
    if (!v) return std::nullopt;
    std::erase(unused_, key);
    std::string s = *v;
    boost::trim(s);
    return s;
  }

  std::string qualified(const std::string& key) const { return name_ + "." + key; }

  template <class T, class Parse>
  void read(const std::string& key, T& target, Parse parse) {
    if (auto v = get(key)) target = parse(qualified(key), *v);
  }

  void read_double(const std::string& key, double& target) { read(key, target, parse_double); }
  void read_count(const std::string& key, std::size_t& target) { read(key, target, parse_count); }

  void reject_unknown() const {
    if (!unused_.empty()) {
      throw ConfigError(fmt::format("unknown key '{}' in [{}]", unused_.front(), name_));
    }
  }

 private:
  const pt::ptree* tree_;
  std::string name_;
  std::vector<std::string> unused_;
};

// read_ini drops sections without keys, so headers are collected separately.
std::vector<std::string> section_headers(const std::string& text) {
  std::vector<std::string> names;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    boost::trim(line);
    if (line.size() > 2 && line.front() == '[' && line.back() == ']') {
      names.push_back(boost::trim_copy(line.substr(1, line.size() - 2)));
    }
  }
  return names;
}

const pt::ptree kEmptySection;

Section section(const pt::ptree& root, const std::vector<std::string>& headers,
                const std::string& name) {
  if (auto child = root.get_child_optional(name)) return Section(&*child, name);
  const bool declared = std::find(headers.begin(), headers.end(), name) != headers.end();
  return Section(declared ? &kEmptySection : nullptr, name);
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& text) {
  std::filesystem::path p(text);
  return p.is_relative() && !base.empty() ? base / p : p;
}

}  // namespace

double parse_angle(const std::string& raw) {
  std::string text = boost::algorithm::erase_all_copy(raw, " ");
  const auto pi_at = text.find("pi");
  if (pi_at == std::string::npos) return parse_double("angle", text);
  double sign = 1.0;
  std::string head = text.substr(0, pi_at);
  if (!head.empty() && (head.front() == '-' || head.front() == '+')) {
    if (head.front() == '-') sign = -1.0;
    head.erase(0, 1);
  }
  double factor = 1.0;
  if (!head.empty()) {
    if (head.back() != '*') throw ConfigError(fmt::format("malformed angle '{}'", raw));
    head.pop_back();
    factor = parse_double("angle", head);
  }
  std::string tail = text.substr(pi_at + 2);
  double divisor = 1.0;
  if (!tail.empty()) {
    if (tail.front() != '/') throw ConfigError(fmt::format("malformed angle '{}'", raw));
    divisor = parse_double("angle", tail.substr(1));
    if (divisor == 0.0) throw ConfigError(fmt::format("angle '{}' divides by zero", raw));
  }
  return sign * factor * std::numbers::pi / divisor;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  for (const auto& part : split_list(text, ",")) seeds.push_back(parse_count("seeds", part));
  if (seeds.empty()) throw ConfigError("seed list is empty");
  return seeds;
}

void RunConfig::validate() const {
  if (synthetic.has_value() == files.has_value()) {
    throw ConfigError("exactly one of [synthetic] or [files] must be given");
  }
  if (seeds.empty()) throw ConfigError("seed list is empty");
  if (latent_dim == 0) throw ConfigError("model.latent_dim must be >= 1");
  for (std::size_t h : hidden_dims)
    if (h == 0) throw ConfigError("model.hidden_dims entries must be >= 1");
  if (curriculum_bins < 2) throw ConfigError("eval.curriculum_bins must be >= 2");
  try {
    train.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(fmt::format("[train] {}", e.what()));
  }
  std::size_t n_sources = 0, n_classes = 0;
  if (synthetic) {
    try {
      synthetic->validate();
    } catch (const DataError& e) {
      throw ConfigError(fmt::format("[synthetic] {}", e.what()));
    }
    n_sources = synthetic->n_source_domains;
    n_classes = synthetic->n_classes;
  } else {
    if (files->sources.empty()) throw ConfigError("[files] needs at least one source");
    if (files->target.empty()) throw ConfigError("[files] needs a target");
  }
  if (synthetic) {
    try {
      category_partition(n_sources, n_classes, category_shift, overlap_count);
    } catch (const DataError& e) {
      throw ConfigError(fmt::format("[category_shift] {}", e.what()));
    }
  }
}

RunConfig parse_run_config(std::istream& in, const std::filesystem::path& base_dir) {
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::vector<std::string> headers = section_headers(text);
  pt::ptree root;
  try {
    std::istringstream ini(text);
    pt::read_ini(ini, root);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(fmt::format("config line {}: {}", e.line(), e.message()));
  }
  for (const auto& name : headers) {
    static const std::vector<std::string> known = {"experiment", "synthetic",      "files",
                                                   "model",      "category_shift", "train",
                                                   "eval"};
    if (std::find(known.begin(), known.end(), name) == known.end()) {
      throw ConfigError(fmt::format("unknown section [{}]", name));
    }
  }

  RunConfig cfg;
  {
    Section s = section(root, headers, "experiment");
    if (auto v = s.get("name")) cfg.name = *v;
    if (auto v = s.get("seeds")) cfg.seeds = parse_seed_list(*v);
    if (auto v = s.get("output")) cfg.output_dir = resolve(base_dir, *v);
    s.reject_unknown();
  }
  {
    Section s = section(root, headers, "synthetic");
    if (s.present()) {
      ShiftConfig sc;
      s.read_count("n_source_domains", sc.n_source_domains);
      s.read_count("n_classes", sc.n_classes);
      s.read_count("d_in", sc.d_in);
      s.read_count("samples_per_class", sc.samples_per_class_per_domain);
      s.read_double("noise", sc.cluster_noise_std);
      const std::size_t n = sc.n_source_domains + 1;
      sc.rotation_per_domain.assign(n, 0.0);
      sc.translation_per_domain.assign(n, {});
      sc.scale_per_domain.assign(n, 1.0);
      if (auto v = s.get("rotations")) {
        sc.rotation_per_domain.clear();
        for (const auto& part : split_list(*v, ",")) sc.rotation_per_domain.push_back(parse_angle(part));
      }
      if (auto v = s.get("scales")) {
        sc.scale_per_domain.clear();
        for (const auto& part : split_list(*v, ","))
          sc.scale_per_domain.push_back(parse_double("synthetic.scales", part));
      }
      if (auto v = s.get("translations")) {
        sc.translation_per_domain.clear();
        for (const auto& vec : split_list(*v, ";")) {
          std::vector<double> t;
          for (const auto& part : split_list(vec, " \t,"))
            t.push_back(parse_double("synthetic.translations", part));
          sc.translation_per_domain.push_back(std::move(t));
        }
      }
      s.reject_unknown();
      cfg.synthetic = std::move(sc);
    }
  }
  {
    Section s = section(root, headers, "files");
    if (s.present()) {
      DatasetFiles f;
      if (auto v = s.get("sources"))
        for (const auto& part : split_list(*v, ",")) f.sources.push_back(resolve(base_dir, part));
      if (auto v = s.get("target")) f.target = resolve(base_dir, *v);
      if (auto v = s.get("target_labels"); v && !v->empty()) f.target_labels = resolve(base_dir, *v);
      s.reject_unknown();
      cfg.files = std::move(f);
    }
  }
  {
    Section s = section(root, headers, "category_shift");
    if (auto v = s.get("mode")) {
      try {
        cfg.category_shift = parse_category_shift(*v);
      } catch (const DataError& e) {
        throw ConfigError(e.what());
      }
    }
    s.read_count("overlap_count", cfg.overlap_count);
    s.reject_unknown();
  }
  {
    Section s = section(root, headers, "model");
    if (auto v = s.get("hidden_dims")) {
      cfg.hidden_dims.clear();
      for (const auto& part : split_list(*v, ","))
        cfg.hidden_dims.push_back(parse_count("model.hidden_dims", part));
    }
    s.read_count("latent_dim", cfg.latent_dim);
    s.reject_unknown();
  }
  {
    Section s = section(root, headers, "train");
    auto& t = cfg.train;
    if (auto v = s.get("mode")) {
      try {
        t.mode = parse_train_mode(*v);
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
    }
    s.read_double("learning_rate", t.learning_rate);
    s.read_double("weight_decay", t.weight_decay);
    s.read_double("adam_beta1", t.adam_beta1);
    s.read_double("adam_beta2", t.adam_beta2);
    s.read_double("adam_eps", t.adam_eps);
    s.read_count("per_domain_batch", t.per_domain_batch);
    s.read_count("target_batch", t.target_batch);
    s.read_count("n_e", t.n_e);
    s.read_count("eval_every", t.eval_every);
    s.read_count("convergence_window", t.convergence_window);
    s.read_double("convergence_tol", t.convergence_tol);
    s.read_count("max_iterations", t.max_iterations);
    if (auto v = s.get("margin_threshold")) {
      if (*v == "none" || v->empty()) {
        t.margin_threshold.reset();
      } else {
        t.margin_threshold = parse_double("train.margin_threshold", *v);
      }
    }
    if (auto v = s.get("margin_mode")) {
      if (*v == "ensemble") {
        t.margin_mode = MarginMode::ensemble;
      } else if (*v == "per_row") {
        t.margin_mode = MarginMode::per_row;
      } else {
        throw ConfigError(fmt::format("train.margin_mode: '{}' (ensemble|per_row)", *v));
      }
    }
    if (auto v = s.get("stop_on_convergence")) {
      if (*v != "true" && *v != "false") {
        throw ConfigError("train.stop_on_convergence must be true or false");
      }
      t.stop_on_convergence = *v == "true";
    }
    s.reject_unknown();
  }
  {
    Section s = section(root, headers, "eval");
    s.read_count("curriculum_bins", cfg.curriculum_bins);
    s.reject_unknown();
  }
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open config '{}'", path.string()));
  return parse_run_config(in, path.parent_path());
}

RunConfig desk_preset_config() {
  RunConfig cfg;
  cfg.name = "desk";
  cfg.synthetic = ShiftConfig::desk_preset(0);
  cfg.hidden_dims = {64};
  cfg.latent_dim = 64;
  cfg.train = TrainOptions::desk_preset(0);
  return cfg;
}

}  // namespace simpal
