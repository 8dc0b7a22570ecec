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

// The assess / generate / perturb / compare commands. Each throws a
// fairlens::Error subclass on failure; exit_code_for() maps those onto the
// command-line contract: 0 success, 2 input or config error, 3 degenerate
// data, 4 numerical failure.

#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "fairlens/config.hpp"
#include "fairlens/datagen.hpp"
#include "fairlens/error.hpp"
#include "fairlens/io.hpp"
#include "fairlens/metrics.hpp"
#include "fairlens/mine.hpp"
#include "fairlens/report.hpp"

namespace fairlens::commands {

using report::Json;

inline int exit_code_for(const std::exception& e) {
  if (const auto* fe = dynamic_cast<const Error*>(&e)) return fe->exit_code();
  return 2;
}

// Effective config: file (if any) plus command-line overrides.
inline config::RunConfig resolve_config(const std::optional<std::string>& config_path,
                                        const std::optional<std::vector<std::string>>& metrics,
                                        const std::optional<std::uint64_t>& seed) {
  config::RunConfig cfg = config_path ? config::load_run_config(*config_path) : config::RunConfig{};
  if (metrics) cfg.set_metrics(*metrics);
  if (seed) cfg.seed = *seed;
  cfg.mine.seed = cfg.seed;
  cfg.probe.seed = cfg.seed;
  return cfg;
}

inline Json file_entry(const std::string& path) {
  return Json{{"path", path}, {"sha256", io::sha256_file(path)}};
}

namespace detail {

inline Json dataset_json(const RepresentationSet& data) {
  return Json{{"n", data.size()},
              {"d", data.dim()},
              {"classes", data.num_classes()},
              {"attribute_names", data.attribute_names}};
}

// Computes every requested metric on one dataset with cfg's seed.
inline metrics::BiasReport compute_metrics(const RepresentationSet& data, const config::RunConfig& cfg) {
  metrics::BiasReport r;
  if (cfg.wants("entropy") || cfg.wants("rlb")) r.entropy = metrics::empirical_entropy(data.attributes);
  if (cfg.wants("rlb")) {
    auto res = metrics::rlb(data, cfg.mine);
    r.mi = res.mi;
    r.rlb_raw = res.rlb_raw;
    r.rlb = res.rlb;
    r.trace = std::move(res.trace);
  } else if (cfg.wants("mi")) {
    auto est = mine::estimate_mi(data, cfg.mine);
    r.mi = est.mi;
    r.trace = std::move(est.trace);
  }
  if (cfg.wants("dcor2")) r.dcor2 = metrics::dcor2(data);
  if (cfg.wants("probe")) r.probe = metrics::logits_probe(data, cfg.probe);
  if (cfg.wants("ba")) {
    if (!cfg.ba_train_counts || !cfg.ba_eval_counts) {
      throw ConfigError("metric 'ba' needs [ba] train_counts and eval_counts in the config");
    }
    r.bias_amplification = metrics::bias_amplification(io::read_matrix(*cfg.ba_train_counts),
                                                       io::read_matrix(*cfg.ba_eval_counts));
  }
  if (cfg.wants("cohort")) {
    if (!cfg.cohort_scores || !cfg.cohort_labels) {
      throw ConfigError("metric 'cohort' needs [cohort] scores and labels in the config");
    }
    metrics::CohortEval eval;
    eval.scores = io::read_matrix(*cfg.cohort_scores);
    eval.labels = io::read_matrix(*cfg.cohort_labels);
    eval.attributes = data.attributes;
    eval.num_cohorts = data.num_classes();
    r.cohort = metrics::cohort_eval(eval, cfg.cohort_metric);
    r.cohort_metric = cfg.cohort_metric;
  }
  return r;
}

inline Json build_report(const std::string& command, const RepresentationSet& data,
                         const config::RunConfig& cfg, Json inputs, const metrics::BiasReport& r) {
  const Json cfg_json = report::to_json(cfg);
  Json j;
  j["schema_version"] = report::kSchemaVersion;
  j["tool"] = "fairlens";
  j["command"] = command;
  j["generated_at"] = report::utc_timestamp();
  j["seed"] = cfg.seed;
  j["inputs"] = std::move(inputs);
  j["dataset"] = dataset_json(data);
  j["config"] = cfg_json;
  j["config_fingerprint"] = io::sha256_hex(cfg_json.dump());
  j["estimator"] = Json{{"units", "nats"},
                        {"objective", report::kObjectiveReading},
                        {"final_mi", "running max of window-averaged held-out DV value, clamped at 0"},
                        {"entropy", "plug-in, no bias correction"}};
  j["metrics"] = report::metrics_json(r);
  j["trace"] = r.trace ? report::to_json(*r.trace) : Json(nullptr);
  return j;
}

inline std::string matrix_extension(io::MatrixFormat f) {
  return f == io::MatrixFormat::kBinary ? ".bin" : ".csv";
}

inline io::MatrixFormat detect_format(const std::string& path) {
  const auto bytes = io::read_file_bytes(path);
  return bytes.size() >= 8 && std::equal(io::kMatrixMagic.begin(), io::kMatrixMagic.end(), bytes.begin())
             ? io::MatrixFormat::kBinary
             : io::MatrixFormat::kText;
}

}  // namespace detail

struct AssessRequest {
  std::string representations;
  std::string attributes;
  std::optional<std::string> config;
  std::optional<std::vector<std::string>> metrics;
  std::optional<std::uint64_t> seed;
  std::string out;
};

inline Json assess(const AssessRequest& req) {
  const auto cfg = resolve_config(req.config, req.metrics, req.seed);
  const auto data = io::load_representation_set(req.representations, req.attributes);
  Json inputs{{"representations", file_entry(req.representations)},
              {"attributes", file_entry(req.attributes)}};
  if (req.config) inputs["config"] = file_entry(*req.config);
  if (cfg.wants("ba")) {
    if (cfg.ba_train_counts) inputs["ba_train_counts"] = file_entry(*cfg.ba_train_counts);
    if (cfg.ba_eval_counts) inputs["ba_eval_counts"] = file_entry(*cfg.ba_eval_counts);
  }
  if (cfg.wants("cohort")) {
    if (cfg.cohort_scores) inputs["cohort_scores"] = file_entry(*cfg.cohort_scores);
    if (cfg.cohort_labels) inputs["cohort_labels"] = file_entry(*cfg.cohort_labels);
  }
  metrics::BiasReport r;
  try {
    r = detail::compute_metrics(data, cfg);
  } catch (const mine::TrainingDivergedError& e) {
    Json dumpj{{"error", e.what()}, {"trace", report::to_json(e.trace())}};
    io::write_file_bytes(req.out + ".diverged.json", report::dump(dumpj));
    throw;
  }
  Json j = detail::build_report("assess", data, cfg, std::move(inputs), r);
  io::write_file_bytes(req.out, report::dump(j));
  return j;
}

struct GenerateRequest {
  std::string spec;  // config file with a [spec] section
  std::optional<std::uint64_t> seed;
  std::string out_prefix;
};

struct GeneratedFiles {
  std::string representations;
  std::string attributes;
  std::string sidecar;
};

inline GeneratedFiles generate(const GenerateRequest& req) {
  auto cfg = config::load_run_config(req.spec);
  if (!cfg.spec) throw ConfigError(req.spec + ": no [spec] section");
  if (req.seed) cfg.spec->seed = *req.seed;
  const auto g = datagen::generate(*cfg.spec);

  GeneratedFiles files{req.out_prefix + detail::matrix_extension(cfg.format), req.out_prefix + ".attr",
                       req.out_prefix + ".json"};
  io::write_matrix(files.representations, g.data.representations, cfg.format);
  io::write_attributes(files.attributes, g.data.attributes, g.data.attribute_names);
  Json side;
  side["schema_version"] = report::kSchemaVersion;
  side["command"] = "generate";
  side["spec"] = report::to_json(*cfg.spec);
  side["seed"] = cfg.spec->seed;
  side["fractions"] = g.fractions;
  side["true_mi"] = report::optional_number(g.true_mi);
  side["true_entropy"] = report::optional_number(g.true_entropy);
  side["effective_dependence"] = report::optional_number(g.effective_dependence);
  side["files"] = Json{{"representations", files.representations}, {"attributes", files.attributes}};
  io::write_file_bytes(files.sidecar, report::dump(side));
  return files;
}

struct PerturbRequest {
  std::string representations;
  std::string attributes;
  std::string mode;
  std::uint64_t seed = 0;
  std::string out_prefix;
};

inline GeneratedFiles perturb(const PerturbRequest& req) {
  const auto mode = datagen::mode_from_string(req.mode);
  const auto data = io::load_representation_set(req.representations, req.attributes);
  const auto out = datagen::perturb(data, mode, req.seed);
  const auto format = detail::detect_format(req.representations);
  GeneratedFiles files{req.out_prefix + detail::matrix_extension(format), req.out_prefix + ".attr",
                       req.out_prefix + ".json"};
  io::write_matrix(files.representations, out.representations, format);
  io::write_attributes(files.attributes, out.attributes, out.attribute_names);
  Json side;
  side["schema_version"] = report::kSchemaVersion;
  side["command"] = "perturb";
  side["mode"] = datagen::to_string(mode);
  side["seed"] = req.seed;
  side["inputs"] = Json{{"representations", file_entry(req.representations)},
                        {"attributes", file_entry(req.attributes)}};
  side["files"] = Json{{"representations", files.representations}, {"attributes", files.attributes}};
  io::write_file_bytes(files.sidecar, report::dump(side));
  return files;
}

// ---------------------------------------------------------------------------
// compare

struct DatasetSource {
  std::string name;
  std::optional<std::string> spec;            // generate from a [spec] config
  std::optional<std::string> representations;
  std::optional<std::string> attributes;
};

struct CompareRequest {
  std::vector<DatasetSource> datasets;
  std::optional<std::string> config;
  std::optional<std::vector<std::string>> metrics;
  std::vector<std::uint64_t> seeds;
  std::string out;  // CSV path; per-run reports go to <out>.runs/
  int threads = 0;  // 0: FAIRLENS_THREADS or hardware concurrency
};

struct Summary {
  double mean = 0, stddev = 0, min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
  std::size_t count = 0;
};

// Population std; quartiles by linear interpolation between order statistics.
inline Summary summarize(std::vector<double> v) {
  Summary s;
  s.count = v.size();
  if (v.empty()) return s;
  std::sort(v.begin(), v.end());
  double sum = 0.0;
  for (double x : v) sum += x;
  s.mean = sum / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - s.mean) * (x - s.mean);
  s.stddev = std::sqrt(ss / static_cast<double>(v.size()));
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
  };
  s.min = v.front();
  s.max = v.back();
  s.q1 = quantile(0.25);
  s.median = quantile(0.5);
  s.q3 = quantile(0.75);
  return s;
}

inline int thread_count(int requested) {
  if (requested > 0) return requested;
  int n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (const char* env = std::getenv("FAIRLENS_THREADS")) {
    const int cap = std::atoi(env);
    if (cap > 0) n = std::min(n, cap);
  }
  return n;
}

// Scalar value of `metric` in a report. The probe contributes its holdout
// loss (training loss when there is no holdout split).
inline double scalar_metric(const metrics::BiasReport& r, const std::string& metric) {
  if (metric == "rlb") return *r.rlb;
  if (metric == "mi") return *r.mi;
  if (metric == "entropy") return *r.entropy;
  if (metric == "dcor2") return *r.dcor2;
  if (metric == "probe") return r.probe->holdout_loss.value_or(r.probe->train_loss);
  throw ConfigError("metric '" + metric + "' has no per-seed scalar for compare");
}

struct CompareResult {
  std::string csv;
  std::vector<std::string> reports;
  int failures = 0;
  int exit_code = 0;
};

inline CompareResult compare(const CompareRequest& req) {
  if (req.datasets.empty()) throw ConfigError("compare needs at least one dataset");
  if (req.seeds.empty()) throw ConfigError("compare needs at least one seed");
  auto base = resolve_config(req.config, req.metrics, std::nullopt);
  for (const auto& m : base.metrics) {
    if (m == "ba" || m == "cohort") throw ConfigError("compare supports rlb, mi, entropy, dcor2 and probe");
  }

  struct Loaded {
    std::string name;
    RepresentationSet data;
    Json inputs;
  };
  std::vector<Loaded> datasets;
  for (const auto& src : req.datasets) {
    Loaded l;
    l.name = src.name;
    if (src.spec) {
      auto scfg = config::load_run_config(*src.spec);
      if (!scfg.spec) throw ConfigError(*src.spec + ": no [spec] section");
      l.data = datagen::generate(*scfg.spec).data;
      l.inputs = Json{{"spec", file_entry(*src.spec)}, {"generated", report::to_json(*scfg.spec)}};
    } else if (src.representations && src.attributes) {
      l.data = io::load_representation_set(*src.representations, *src.attributes);
      l.inputs = Json{{"representations", file_entry(*src.representations)},
                      {"attributes", file_entry(*src.attributes)}};
    } else {
      throw ConfigError("dataset '" + src.name + "' needs a spec or representation/attribute files");
    }
    datasets.push_back(std::move(l));
  }

  struct Cell {
    std::size_t dataset;
    std::uint64_t seed;
    std::optional<metrics::BiasReport> report;
    std::string error;
    int code = 0;
    Json json;
  };
  std::vector<Cell> cells;
  for (std::size_t d = 0; d < datasets.size(); ++d) {
    for (auto s : req.seeds) cells.push_back(Cell{d, s, std::nullopt, {}, 0, {}});
  }

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      auto& cell = cells[i];
      auto cfg = base;
      cfg.seed = cell.seed;
      cfg.mine.seed = cell.seed;
      cfg.probe.seed = cell.seed;
      try {
        cell.report = detail::compute_metrics(datasets[cell.dataset].data, cfg);
        cell.json = detail::build_report("compare", datasets[cell.dataset].data, cfg,
                                         datasets[cell.dataset].inputs, *cell.report);
      } catch (const std::exception& e) {
        cell.error = e.what();
        cell.code = exit_code_for(e);
      }
    }
  };
  const int nthreads = std::min<int>(thread_count(req.threads), static_cast<int>(cells.size()));
  std::vector<std::thread> pool;
  for (int t = 1; t < nthreads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  CompareResult result;
  const std::filesystem::path runs_dir = req.out + ".runs";
  std::filesystem::create_directories(runs_dir);
  std::string csv = "dataset,metric,row,seed,value,n,mean,std,min,q1,median,q3,max,status\n";
  auto quote = [](const std::string& s) {
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
  };
  for (std::size_t d = 0; d < datasets.size(); ++d) {
    for (const auto& metric : base.metrics) {
      std::vector<double> values;
      bool any_failed = false;
      for (const auto& cell : cells) {
        if (cell.dataset != d) continue;
        csv += datasets[d].name + "," + metric + ",value," + std::to_string(cell.seed) + ",";
        if (cell.report) {
          const double v = scalar_metric(*cell.report, metric);
          values.push_back(v);
          csv += io::format_double(v) + ",,,,,,,,,ok\n";
        } else {
          any_failed = true;
          csv += ",,,,,,,,," + quote("error: " + cell.error) + "\n";
        }
      }
      const auto s = summarize(values);
      csv += datasets[d].name + "," + metric + ",aggregate,,," + std::to_string(s.count) + ",";
      if (s.count > 0) {
        for (double v : {s.mean, s.stddev, s.min, s.q1, s.median, s.q3, s.max}) csv += io::format_double(v) + ",";
      } else {
        csv += ",,,,,,,";
      }
      csv += any_failed ? "partial\n" : "ok\n";
    }
  }
  for (const auto& cell : cells) {
    if (!cell.report) {
      ++result.failures;
      result.exit_code = std::max(result.exit_code, cell.code);
      continue;
    }
    const auto path = (runs_dir / (datasets[cell.dataset].name + "_seed" + std::to_string(cell.seed) + ".json")).string();
    io::write_file_bytes(path, report::dump(cell.json));
    result.reports.push_back(path);
  }
  io::write_file_bytes(req.out, csv);
  result.csv = std::move(csv);
  return result;
}

}  // namespace fairlens::commands
