/*
 * Copyright 2026 The FairLens Authors.
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

// Run configuration documents: "[section]" headers followed by "key = value"
// lines, '#' starts a comment. Lists are comma separated; matrix-valued keys
// (spec.joint_table, spec.centers) separate rows with ';'. Unknown sections
// and keys are rejected.

#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fairlens/datagen.hpp"
#include "fairlens/error.hpp"
#include "fairlens/io.hpp"
#include "fairlens/metrics.hpp"
#include "fairlens/mine.hpp"

namespace fairlens::config {

inline const std::vector<std::string>& known_metrics() {
  static const std::vector<std::string> m{"rlb", "mi", "entropy", "dcor2", "probe", "ba", "cohort"};
  return m;
}

struct RunConfig {
  mine::MineConfig mine;
  metrics::ProbeConfig probe;
  std::optional<datagen::SyntheticSpec> spec;
  std::vector<std::string> metrics{"rlb"};
  std::vector<std::uint64_t> seeds;
  std::uint64_t seed = 0;
  io::MatrixFormat format = io::MatrixFormat::kText;
  std::optional<std::string> ba_train_counts;
  std::optional<std::string> ba_eval_counts;
  std::optional<std::string> cohort_scores;
  std::optional<std::string> cohort_labels;
  metrics::CohortMetric cohort_metric = metrics::CohortMetric::kAccuracy;

  void set_metrics(std::vector<std::string> list) {
    for (const auto& m : list) {
      if (std::find(known_metrics().begin(), known_metrics().end(), m) == known_metrics().end()) {
        throw ConfigError("unknown metric '" + m + "'");
      }
    }
    if (list.empty()) throw ConfigError("metric list is empty");
    metrics = std::move(list);
  }

  bool wants(const std::string& metric) const {
    return std::find(metrics.begin(), metrics.end(), metric) != metrics.end();
  }
};

namespace detail {

inline std::string_view trim(std::string_view s) { return io::detail::trim(s); }

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    const auto item = trim(s.substr(start, pos == std::string_view::npos ? s.npos : pos - start));
    if (!item.empty()) out.emplace_back(item);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <typename T>
T parse_number(std::string_view s, const std::string& where) {
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw ConfigError(where + ": cannot parse '" + std::string(s) + "' as a number");
  }
  return v;
}

template <typename T>
std::vector<T> parse_list(std::string_view s, const std::string& where) {
  std::vector<T> out;
  for (const auto& item : split(s, ',')) out.push_back(parse_number<T>(item, where));
  return out;
}

inline bool parse_bool(std::string_view s, const std::string& where) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError(where + ": expected true or false, got '" + std::string(s) + "'");
}

inline Eigen::MatrixXd parse_rows(std::string_view s, const std::string& where) {
  std::vector<std::vector<double>> rows;
  for (const auto& row : split(s, ';')) rows.push_back(parse_list<double>(row, where));
  if (rows.empty()) throw ConfigError(where + ": empty matrix");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows[0].size()) throw ConfigError(where + ": ragged matrix rows");
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
  }
  return m;
}

using Setter = std::function<void(RunConfig&, std::string_view, const std::string&)>;

inline datagen::SyntheticSpec& spec_of(RunConfig& c) {
  if (!c.spec) c.spec.emplace();
  return *c.spec;
}

inline const std::map<std::string, std::map<std::string, Setter>>& setters() {
  using S = std::string_view;
  using W = const std::string&;
  static const std::map<std::string, std::map<std::string, Setter>> table{
      {"mine",
       {
           {"batch_size", [](RunConfig& c, S v, W w) { c.mine.batch_size = parse_number<int>(v, w); }},
           {"ema_alpha", [](RunConfig& c, S v, W w) { c.mine.ema_alpha = parse_number<double>(v, w); }},
           {"learning_rate", [](RunConfig& c, S v, W w) { c.mine.learning_rate = parse_number<double>(v, w); }},
           {"max_iters", [](RunConfig& c, S v, W w) { c.mine.max_iters = parse_number<int>(v, w); }},
           {"convergence_window", [](RunConfig& c, S v, W w) { c.mine.convergence_window = parse_number<int>(v, w); }},
           {"convergence_tol", [](RunConfig& c, S v, W w) { c.mine.convergence_tol = parse_number<double>(v, w); }},
           {"map_dim", [](RunConfig& c, S v, W w) { c.mine.map_dim = parse_number<int>(v, w); }},
           {"stats_hidden", [](RunConfig& c, S v, W w) { c.mine.stats_hidden = parse_list<int>(v, w); }},
           {"use_mapping", [](RunConfig& c, S v, W w) { c.mine.use_mapping = parse_bool(v, w); }},
           {"holdout_fraction", [](RunConfig& c, S v, W w) { c.mine.holdout_fraction = parse_number<double>(v, w); }},
           {"eval_interval", [](RunConfig& c, S v, W w) { c.mine.eval_interval = parse_number<int>(v, w); }},
       }},
      {"probe",
       {
           {"hidden", [](RunConfig& c, S v, W w) { c.probe.hidden = parse_list<int>(v, w); }},
           {"epochs", [](RunConfig& c, S v, W w) { c.probe.epochs = parse_number<int>(v, w); }},
           {"batch_size", [](RunConfig& c, S v, W w) { c.probe.batch_size = parse_number<int>(v, w); }},
           {"learning_rate", [](RunConfig& c, S v, W w) { c.probe.learning_rate = parse_number<double>(v, w); }},
           {"holdout_fraction", [](RunConfig& c, S v, W w) { c.probe.holdout_fraction = parse_number<double>(v, w); }},
       }},
      {"spec",
       {
           {"kind", [](RunConfig& c, S v, W) { spec_of(c).kind = datagen::kind_from_string(std::string(v)); }},
           {"n", [](RunConfig& c, S v, W w) { spec_of(c).n = parse_number<int>(v, w); }},
           {"sigma", [](RunConfig& c, S v, W w) { spec_of(c).sigma = parse_number<double>(v, w); }},
           {"class_count", [](RunConfig& c, S v, W w) { spec_of(c).class_count = parse_number<int>(v, w); }},
           {"fractions", [](RunConfig& c, S v, W w) { spec_of(c).fractions = parse_list<double>(v, w); }},
           {"target_entropy", [](RunConfig& c, S v, W w) { spec_of(c).target_entropy = parse_number<double>(v, w); }},
           {"joint_table", [](RunConfig& c, S v, W w) { spec_of(c).joint_table = parse_rows(v, w); }},
           {"centers",
            [](RunConfig& c, S v, W w) {
              const auto m = parse_rows(v, w);
              if (m.cols() != 3) throw ConfigError(w + ": centers need 3 channels per row");
              auto& centers = spec_of(c).centers;
              centers.clear();
              for (Eigen::Index i = 0; i < m.rows(); ++i) centers.push_back({m(i, 0), m(i, 1), m(i, 2)});
            }},
           {"noise_dim", [](RunConfig& c, S v, W w) { spec_of(c).noise_dim = parse_number<int>(v, w); }},
           {"dependence", [](RunConfig& c, S v, W w) { spec_of(c).dependence = parse_number<double>(v, w); }},
           {"coupling", [](RunConfig& c, S v, W w) { spec_of(c).coupling = parse_number<double>(v, w); }},
           {"seed", [](RunConfig& c, S v, W w) { spec_of(c).seed = parse_number<std::uint64_t>(v, w); }},
       }},
      {"run",
       {
           {"metrics", [](RunConfig& c, S v, W) { c.set_metrics(split(v, ',')); }},
           {"seeds", [](RunConfig& c, S v, W w) { c.seeds = parse_list<std::uint64_t>(v, w); }},
           {"seed", [](RunConfig& c, S v, W w) { c.seed = parse_number<std::uint64_t>(v, w); }},
           {"format",
            [](RunConfig& c, S v, W w) {
              if (v == "text") c.format = io::MatrixFormat::kText;
              else if (v == "binary") c.format = io::MatrixFormat::kBinary;
              else throw ConfigError(w + ": format must be text or binary");
            }},
       }},
      {"ba",
       {
           {"train_counts", [](RunConfig& c, S v, W) { c.ba_train_counts = std::string(v); }},
           {"eval_counts", [](RunConfig& c, S v, W) { c.ba_eval_counts = std::string(v); }},
       }},
      {"cohort",
       {
           {"scores", [](RunConfig& c, S v, W) { c.cohort_scores = std::string(v); }},
           {"labels", [](RunConfig& c, S v, W) { c.cohort_labels = std::string(v); }},
           {"metric",
            [](RunConfig& c, S v, W w) {
              if (v == "accuracy") c.cohort_metric = metrics::CohortMetric::kAccuracy;
              else if (v == "average_precision") c.cohort_metric = metrics::CohortMetric::kAveragePrecision;
              else throw ConfigError(w + ": cohort metric must be accuracy or average_precision");
            }},
       }},
  };
  return table;
}

}  // namespace detail

inline RunConfig parse_run_config(std::string_view text, const std::string& name = "<config>") {
  RunConfig cfg;
  std::string section;
  const auto lines = io::detail::split_lines(text);
  for (std::size_t li = 0; li < lines.size(); ++li) {
    std::string_view line = lines[li];
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const std::string where = name + ":" + std::to_string(li + 1);
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + ": malformed section header");
      section = std::string(detail::trim(line.substr(1, line.size() - 2)));
      if (!detail::setters().contains(section)) throw ConfigError(where + ": unknown section [" + section + "]");
      if (section == "spec") detail::spec_of(cfg);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where + ": expected key = value");
    if (section.empty()) throw ConfigError(where + ": key outside of any section");
    const std::string key(detail::trim(line.substr(0, eq)));
    const auto value = detail::trim(line.substr(eq + 1));
    const auto& keys = detail::setters().at(section);
    const auto it = keys.find(key);
    if (it == keys.end()) throw ConfigError(where + ": unknown key '" + key + "' in [" + section + "]");
    it->second(cfg, value, where);
  }
  return cfg;
}

inline RunConfig load_run_config(const std::string& path) {
  return parse_run_config(io::read_file_bytes(path), path);
}

}  // namespace fairlens::config
