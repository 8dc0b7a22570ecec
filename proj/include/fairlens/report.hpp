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

// JSON serialisation of configs, traces and bias reports. Objects keep
// insertion order so a report's byte layout is a function of its content.

#pragma once

#include <json.hpp>

#include <chrono>
#include <ctime>
#include <string>

#include "fairlens/config.hpp"
#include "fairlens/datagen.hpp"
#include "fairlens/io.hpp"
#include "fairlens/metrics.hpp"
#include "fairlens/mine.hpp"

namespace fairlens::report {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

// How the estimator reads the EMA-corrected objective. Recorded in every
// report that carries an MI value.
inline constexpr const char* kObjectiveReading =
    "L = -(mean(o_joint) - mean(exp(o_marginal)) / EMA), EMA tracks mean(exp(o_marginal)) "
    "and is held constant in the gradient";

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline Json optional_number(const std::optional<double>& v) {
  return v ? Json(*v) : Json(nullptr);
}

inline Json to_json(const mine::MineConfig& c) {
  return Json{{"batch_size", c.batch_size},
              {"ema_alpha", c.ema_alpha},
              {"learning_rate", c.learning_rate},
              {"max_iters", c.max_iters},
              {"convergence_window", c.convergence_window},
              {"convergence_tol", c.convergence_tol},
              {"map_dim", c.map_dim},
              {"stats_hidden", c.stats_hidden},
              {"use_mapping", c.use_mapping},
              {"holdout_fraction", c.holdout_fraction},
              {"eval_interval", c.eval_interval},
              {"seed", c.seed}};
}

inline Json to_json(const metrics::ProbeConfig& c) {
  return Json{{"hidden", c.hidden},
              {"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"learning_rate", c.learning_rate},
              {"holdout_fraction", c.holdout_fraction},
              {"seed", c.seed}};
}

inline Json to_json(const datagen::SyntheticSpec& s) {
  Json j{{"kind", datagen::to_string(s.kind)}, {"n", s.n}, {"seed", s.seed}};
  switch (s.kind) {
    case datagen::SyntheticKind::kColored: {
      j["sigma"] = s.sigma;
      j["class_count"] = s.class_count;
      Json centers = Json::array();
      for (const auto& c : s.centers) centers.push_back({c[0], c[1], c[2]});
      j["centers"] = centers;
      break;
    }
    case datagen::SyntheticKind::kEntropyTarget:
      j["target_entropy"] = s.target_entropy;
      j["class_count"] = s.class_count;
      j["dependence"] = s.dependence;
      j["coupling"] = s.coupling;
      break;
    case datagen::SyntheticKind::kPercentage:
      j["class_count"] = s.class_count;
      j["dependence"] = s.dependence;
      j["coupling"] = s.coupling;
      break;
    case datagen::SyntheticKind::kDiscreteJoint: {
      Json rows = Json::array();
      for (Eigen::Index r = 0; r < s.joint_table.rows(); ++r) {
        Json row = Json::array();
        for (Eigen::Index c = 0; c < s.joint_table.cols(); ++c) row.push_back(s.joint_table(r, c));
        rows.push_back(row);
      }
      j["joint_table"] = rows;
      break;
    }
  }
  j["fractions"] = s.fractions;
  j["noise_dim"] = s.noise_dim;
  return j;
}

inline Json to_json(const config::RunConfig& c) {
  Json j{{"mine", to_json(c.mine)}, {"probe", to_json(c.probe)}};
  j["spec"] = c.spec ? to_json(*c.spec) : Json(nullptr);
  j["run"] = Json{{"metrics", c.metrics},
                  {"seeds", c.seeds},
                  {"seed", c.seed},
                  {"format", c.format == io::MatrixFormat::kBinary ? "binary" : "text"}};
  j["ba"] = Json{{"train_counts", c.ba_train_counts ? Json(*c.ba_train_counts) : Json(nullptr)},
                 {"eval_counts", c.ba_eval_counts ? Json(*c.ba_eval_counts) : Json(nullptr)}};
  j["cohort"] = Json{{"scores", c.cohort_scores ? Json(*c.cohort_scores) : Json(nullptr)},
                     {"labels", c.cohort_labels ? Json(*c.cohort_labels) : Json(nullptr)},
                     {"metric", metrics::to_string(c.cohort_metric)}};
  return j;
}

inline Json to_json(const mine::TrainTrace& t) {
  Json heldout = Json::array();
  for (std::size_t i = 0; i < t.heldout_mi.size(); ++i) {
    heldout.push_back(Json::array({t.heldout_iters[i], t.heldout_mi[i]}));
  }
  Json estimates = Json::array();
  for (std::size_t i = 0; i < t.mi.size(); ++i) estimates.push_back(Json::array({i, t.mi[i]}));
  return Json{{"iterations", t.iterations()},
              {"converged_at", t.converged_at ? Json(*t.converged_at) : Json(nullptr)},
              {"final_mi", t.final_mi},
              {"estimates", estimates},
              {"heldout_estimates", heldout},
              {"loss", t.loss},
              {"ema", t.ema}};
}

inline Json to_json(const metrics::ProbeResult& p) {
  return Json{{"train_loss", p.train_loss},
              {"train_accuracy", p.train_accuracy},
              {"holdout_loss", optional_number(p.holdout_loss)},
              {"holdout_accuracy", optional_number(p.holdout_accuracy)},
              {"train_size", p.train_size},
              {"holdout_size", p.holdout_size}};
}

inline Json to_json(const metrics::CohortResult& c, metrics::CohortMetric metric) {
  Json per = Json::object();
  for (const auto& [cohort, value] : c.per_cohort) per[std::to_string(cohort)] = value;
  return Json{{"metric", metrics::to_string(metric)},
              {"per_cohort", per},
              {"overall", c.overall},
              {"std", c.stddev}};
}

// The "metrics" object of a report. Only requested members appear.
inline Json metrics_json(const metrics::BiasReport& r) {
  Json j = Json::object();
  if (r.mi) j["mi"] = *r.mi;
  if (r.entropy) j["entropy"] = *r.entropy;
  if (r.rlb_raw) j["rlb_raw"] = *r.rlb_raw;
  if (r.rlb) j["rlb"] = *r.rlb;
  if (r.dcor2) j["dcor2"] = *r.dcor2;
  if (r.probe) j["probe"] = to_json(*r.probe);
  if (r.bias_amplification) {
    j["bias_amplification"] = Json{{"value", r.bias_amplification->value},
                                   {"selected_pairs", r.bias_amplification->selected_pairs},
                                   {"aggregation", r.bias_amplification->aggregation}};
  }
  if (r.cohort) j["cohort"] = to_json(*r.cohort, r.cohort_metric.value_or(metrics::CohortMetric::kAccuracy));
  return j;
}

inline std::string dump(const Json& j) { return j.dump(2) + "\n"; }

}  // namespace fairlens::report
