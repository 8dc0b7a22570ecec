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

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fairlens/error.hpp"
#include "fairlens/mine.hpp"
#include "fairlens/nn.hpp"
#include "fairlens/random.hpp"
#include "fairlens/representation.hpp"

namespace fairlens::metrics {

using nn::Matrix;
using nn::Vector;

// Shannon entropy (nats) of a probability vector; zero cells contribute 0.
inline double entropy_of(std::span<const double> probs) {
  double h = 0.0;
  for (double p : probs) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

inline std::vector<double> empirical_frequencies(std::span<const int> labels) {
  if (labels.empty()) throw DataError("empirical frequencies of an empty label vector");
  int m = 0;
  for (int z : labels) {
    if (z < 0) throw DataError("attribute labels must be non-negative");
    m = std::max(m, z + 1);
  }
  std::vector<double> counts(static_cast<std::size_t>(m), 0.0);
  for (int z : labels) counts[static_cast<std::size_t>(z)] += 1.0;
  for (auto& c : counts) c /= static_cast<double>(labels.size());
  return counts;
}

// Plug-in entropy of the observed attribute distribution, natural log.
inline double empirical_entropy(std::span<const int> labels) {
  const auto freq = empirical_frequencies(labels);
  return entropy_of(freq);
}

// ---------------------------------------------------------------------------
// Representation-level bias

enum class RlbMode { kPerAttribute, kJoint };

struct RlbResult {
  double mi = 0.0;
  double entropy = 0.0;
  double rlb_raw = 0.0;
  double rlb = 0.0;  // rlb_raw clamped to [0, 1]
  mine::TrainTrace trace;
};

inline RlbResult rlb(const RepresentationSet& data, const mine::MineConfig& config) {
  data.validate();
  RlbResult out;
  out.entropy = empirical_entropy(data.attributes);
  if (!(out.entropy > 0.0)) {
    throw DegenerateAttributeError("bias w.r.t. a constant attribute is undefined");
  }
  auto est = mine::estimate_mi(data, config);
  out.mi = est.mi;
  out.trace = std::move(est.trace);
  out.rlb_raw = out.mi / out.entropy;
  out.rlb = std::clamp(out.rlb_raw, 0.0, 1.0);
  return out;
}

// Cartesian-product label over several attribute columns. Column j with m_j
// classes contributes digit z_j with place value prod_{i<j} m_i.
inline std::vector<int> joint_attribute(std::span<const std::vector<int>> columns,
                                        std::span<const int> class_counts) {
  if (columns.empty()) throw DataError("joint attribute needs at least one column");
  if (class_counts.size() != columns.size()) {
    throw DimensionError("joint attribute: one class count per column required");
  }
  const std::size_t n = columns.front().size();
  std::vector<int> out(n, 0);
  long long place = 1;
  for (std::size_t j = 0; j < columns.size(); ++j) {
    if (columns[j].size() != n) throw DimensionError("attribute columns differ in length");
    for (std::size_t i = 0; i < n; ++i) {
      if (columns[j][i] < 0 || columns[j][i] >= class_counts[j]) {
        throw DataError("attribute column " + std::to_string(j) + " row " + std::to_string(i) +
                        " out of range");
      }
      out[i] += static_cast<int>(place) * columns[j][i];
    }
    place *= class_counts[j];
    if (place > (1 << 20)) throw ConfigError("joint attribute alphabet too large");
  }
  return out;
}

// Per-attribute mode returns one result per column; joint mode returns a
// single result for the product label.
inline std::vector<RlbResult> rlb(const Matrix& representations,
                                  std::span<const std::vector<int>> attribute_columns,
                                  const mine::MineConfig& config, RlbMode mode) {
  std::vector<int> counts;
  for (const auto& col : attribute_columns) {
    int m = 0;
    for (int z : col) m = std::max(m, z + 1);
    counts.push_back(m);
  }
  std::vector<RlbResult> results;
  if (mode == RlbMode::kJoint) {
    auto label = joint_attribute(attribute_columns, counts);
    int total = 1;
    for (int c : counts) total *= c;
    RepresentationSet set = make_representation_set(representations, std::move(label));
    while (set.num_classes() < total) set.attribute_names.push_back(std::to_string(set.num_classes()));
    results.push_back(rlb(set, config));
  } else {
    for (const auto& col : attribute_columns) {
      results.push_back(rlb(make_representation_set(representations, col), config));
    }
  }
  return results;
}

// ---------------------------------------------------------------------------
// Distance correlation

// Squared distance correlation from double-centred Euclidean distance
// matrices. Streams over pairs, so memory is O(n).
inline double dcor2(const Matrix& x, const Matrix& y) {
  const Eigen::Index n = x.rows();
  if (n < 2) throw DataError("dcor2 needs at least 2 samples");
  if (y.rows() != n) throw DimensionError("dcor2: x and y row counts differ");
  if (!x.allFinite() || !y.allFinite()) throw DataError("dcor2: non-finite input");

  auto dist = [](const Matrix& m, Eigen::Index i, Eigen::Index j) {
    return (m.row(i) - m.row(j)).norm();
  };
  Vector row_a = Vector::Zero(n);
  Vector row_b = Vector::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double a = dist(x, i, j);
      const double b = dist(y, i, j);
      row_a(i) += a;
      row_a(j) += a;
      row_b(i) += b;
      row_b(j) += b;
    }
  }
  const double nd = static_cast<double>(n);
  row_a /= nd;
  row_b /= nd;
  const double grand_a = row_a.mean();
  const double grand_b = row_b.mean();

  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double a = -2.0 * row_a(i) + grand_a;
    const double b = -2.0 * row_b(i) + grand_b;
    sab += a * b;
    saa += a * a;
    sbb += b * b;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double ca = dist(x, i, j) - row_a(i) - row_a(j) + grand_a;
      const double cb = dist(y, i, j) - row_b(i) - row_b(j) + grand_b;
      sab += 2.0 * ca * cb;
      saa += 2.0 * ca * ca;
      sbb += 2.0 * cb * cb;
    }
  }
  const double denom = std::sqrt(saa * sbb);
  if (!(denom > 0.0)) return 0.0;
  return std::clamp(sab / denom, 0.0, 1.0);
}

inline double dcor2(const RepresentationSet& data) {
  data.validate();
  return dcor2(data.representations, nn::one_hot(data.attributes, data.num_classes()));
}

// ---------------------------------------------------------------------------
// Logits-level probe

struct ProbeConfig {
  std::vector<int> hidden = {64};
  int epochs = 50;
  int batch_size = 64;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  double holdout_fraction = 0.2;

  void validate() const {
    for (int h : hidden) {
      if (h < 1) throw ConfigError("probe.hidden widths must be positive");
    }
    if (epochs < 1) throw ConfigError("probe.epochs must be positive");
    if (batch_size < 1) throw ConfigError("probe.batch_size must be positive");
    if (!(learning_rate > 0.0)) throw ConfigError("probe.learning_rate must be positive");
    if (!(holdout_fraction >= 0.0 && holdout_fraction < 1.0)) {
      throw ConfigError("probe.holdout_fraction must be in [0, 1)");
    }
  }
};

struct ProbeResult {
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  std::optional<double> holdout_loss;
  std::optional<double> holdout_accuracy;
  std::size_t train_size = 0;
  std::size_t holdout_size = 0;
};

namespace detail {

struct SoftmaxEval {
  double loss = 0.0;
  double accuracy = 0.0;
  Matrix grad;  // d(mean loss)/d(logits)
};

inline SoftmaxEval softmax_cross_entropy(const Matrix& logits, std::span<const int> labels) {
  const Eigen::Index k = logits.rows();
  SoftmaxEval out;
  out.grad.resize(k, logits.cols());
  double correct = 0.0;
  for (Eigen::Index i = 0; i < k; ++i) {
    const double m = logits.row(i).maxCoeff();
    const Eigen::RowVectorXd e = (logits.row(i).array() - m).exp();
    const double sum = e.sum();
    const int z = labels[static_cast<std::size_t>(i)];
    out.loss += -(logits(i, z) - m - std::log(sum));
    out.grad.row(i) = e / sum;
    out.grad(i, z) -= 1.0;
    Eigen::Index arg = 0;
    logits.row(i).maxCoeff(&arg);
    if (arg == z) correct += 1.0;
  }
  out.loss /= static_cast<double>(k);
  out.accuracy = correct / static_cast<double>(k);
  out.grad /= static_cast<double>(k);
  return out;
}

inline Matrix gather_rows(const Matrix& m, std::span<const std::size_t> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

inline std::vector<int> gather(std::span<const int> v, std::span<const std::size_t> rows) {
  std::vector<int> out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) out[i] = v[rows[i]];
  return out;
}

}  // namespace detail

// Shallow classifier predicting Z from R with softmax cross-entropy.
inline ProbeResult logits_probe(const RepresentationSet& data, const ProbeConfig& config) {
  config.validate();
  data.validate();
  if (data.observed_classes() < 2) {
    throw DegenerateAttributeError("probe needs at least two attribute classes");
  }
  const auto n = static_cast<std::size_t>(data.size());
  Rng split_rng(derive_seed(config.seed, 11));
  const auto order = split_rng.sample_without_replacement(n, n);
  auto n_hold = static_cast<std::size_t>(std::floor(config.holdout_fraction * static_cast<double>(n)));
  n_hold = std::min(n_hold, n - 1);
  std::vector<std::size_t> hold_rows(order.begin(), order.begin() + static_cast<long>(n_hold));
  std::vector<std::size_t> train_rows(order.begin() + static_cast<long>(n_hold), order.end());

  const Matrix x_train = detail::gather_rows(data.representations, train_rows);
  const auto z_train = detail::gather(data.attributes, train_rows);

  std::vector<int> dims{static_cast<int>(data.dim())};
  dims.insert(dims.end(), config.hidden.begin(), config.hidden.end());
  dims.push_back(data.num_classes());
  nn::DenseNet net = nn::init_dense_net(std::span<const int>(dims), nn::Activation::kRelu,
                                        derive_seed(config.seed, 12));
  nn::AdamState adam = nn::init_adam(net, config.learning_rate);
  Rng rng(derive_seed(config.seed, 13));

  std::vector<std::size_t> perm(train_rows.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  const auto bs = static_cast<std::size_t>(config.batch_size);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(perm));
    for (std::size_t start = 0; start < perm.size(); start += bs) {
      const auto rows = std::span<const std::size_t>(perm).subspan(
          start, std::min(bs, perm.size() - start));
      const Matrix xb = detail::gather_rows(x_train, rows);
      const auto zb = detail::gather(z_train, rows);
      const auto fwd = nn::forward(net, xb);
      const auto ce = detail::softmax_cross_entropy(fwd.output, zb);
      if (!std::isfinite(ce.loss)) throw NumericalError("probe training diverged");
      const auto bwd = nn::backward(net, fwd.cache, ce.grad);
      nn::adam_step(net, adam, bwd.grads);
    }
  }

  ProbeResult out;
  out.train_size = train_rows.size();
  out.holdout_size = hold_rows.size();
  const auto train_eval = detail::softmax_cross_entropy(nn::predict(net, x_train), z_train);
  out.train_loss = train_eval.loss;
  out.train_accuracy = train_eval.accuracy;
  if (n_hold > 0) {
    const auto hold_eval = detail::softmax_cross_entropy(
        nn::predict(net, detail::gather_rows(data.representations, hold_rows)),
        detail::gather(data.attributes, hold_rows));
    out.holdout_loss = hold_eval.loss;
    out.holdout_accuracy = hold_eval.accuracy;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Bias amplification

struct BiasAmplification {
  double value = 0.0;
  std::size_t selected_pairs = 0;
  std::string aggregation = "mean over (o,z) with b_train(o,z) > 1/m of b_eval - b_train";
};

// Count tables are [outcomes x attribute values]. The bias score
// b(o,z) = count(o,z) / sum_z' count(o,z').
inline BiasAmplification bias_amplification(const Matrix& train_counts, const Matrix& eval_counts) {
  if (train_counts.rows() != eval_counts.rows() || train_counts.cols() != eval_counts.cols()) {
    throw DimensionError("bias amplification: train and eval tables differ in shape");
  }
  if (train_counts.cols() < 2) throw DataError("bias amplification needs at least 2 attribute values");
  if ((train_counts.array() < 0).any() || (eval_counts.array() < 0).any() ||
      !train_counts.allFinite() || !eval_counts.allFinite()) {
    throw DataError("bias amplification counts must be finite and non-negative");
  }
  const double threshold = 1.0 / static_cast<double>(train_counts.cols());
  BiasAmplification out;
  double total = 0.0;
  for (Eigen::Index o = 0; o < train_counts.rows(); ++o) {
    const double train_sum = train_counts.row(o).sum();
    if (!(train_sum > 0.0)) {
      throw DataError("outcome " + std::to_string(o) + " is absent from the training counts");
    }
    const double eval_sum = eval_counts.row(o).sum();
    if (!(eval_sum > 0.0)) continue;  // no evaluation evidence for this outcome
    for (Eigen::Index z = 0; z < train_counts.cols(); ++z) {
      const double b_train = train_counts(o, z) / train_sum;
      if (b_train > threshold) {
        total += eval_counts(o, z) / eval_sum - b_train;
        ++out.selected_pairs;
      }
    }
  }
  if (out.selected_pairs > 0) out.value = total / static_cast<double>(out.selected_pairs);
  return out;
}

// ---------------------------------------------------------------------------
// Cohort statistics

enum class CohortMetric { kAccuracy, kAveragePrecision };

inline std::string to_string(CohortMetric m) {
  return m == CohortMetric::kAccuracy ? "accuracy" : "average_precision";
}

struct CohortEval {
  Matrix scores;  // [n x c]
  // Either [n x 1] integer class labels, or [n x c] binary labels.
  Matrix labels;
  std::vector<int> attributes;
  int num_cohorts = 0;  // 0: max(attribute) + 1
};

struct CohortResult {
  std::map<int, double> per_cohort;
  double overall = 0.0;
  double stddev = 0.0;  // population std across cohorts
};

// AP of one ranking: mean precision at each positive, scores descending, ties
// in input order.
inline std::optional<double> average_precision(std::span<const double> scores,
                                               std::span<const int> positives) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double hits = 0.0, sum = 0.0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if (positives[order[rank]] != 0) {
      hits += 1.0;
      sum += hits / static_cast<double>(rank + 1);
    }
  }
  if (hits == 0.0) return std::nullopt;
  return sum / hits;
}

namespace detail {

inline Matrix binary_label_matrix(const CohortEval& e) {
  if (e.labels.cols() == e.scores.cols()) return e.labels;
  if (e.labels.cols() != 1) throw DimensionError("cohort labels must have 1 or c columns");
  if (e.scores.cols() == 1) return e.labels;
  Matrix out = Matrix::Zero(e.labels.rows(), e.scores.cols());
  for (Eigen::Index i = 0; i < e.labels.rows(); ++i) {
    const auto c = static_cast<Eigen::Index>(std::llround(e.labels(i, 0)));
    if (c < 0 || c >= e.scores.cols()) throw DataError("class label out of range in cohort labels");
    out(i, c) = 1.0;
  }
  return out;
}

inline double accuracy_of(const CohortEval& e, std::span<const std::size_t> rows) {
  double correct = 0.0, total = 0.0;
  const bool class_labels = e.labels.cols() == 1 && e.scores.cols() > 1;
  for (std::size_t r : rows) {
    const auto i = static_cast<Eigen::Index>(r);
    if (class_labels) {
      Eigen::Index arg = 0;
      e.scores.row(i).maxCoeff(&arg);
      correct += (arg == std::llround(e.labels(i, 0))) ? 1.0 : 0.0;
      total += 1.0;
    } else {
      for (Eigen::Index c = 0; c < e.scores.cols(); ++c) {
        const bool pred = e.scores(i, c) >= 0.5;
        const bool truth = e.labels(i, c) >= 0.5;
        correct += (pred == truth) ? 1.0 : 0.0;
        total += 1.0;
      }
    }
  }
  return correct / total;
}

inline double mean_ap_of(const CohortEval& e, const Matrix& binary, std::span<const std::size_t> rows) {
  double sum = 0.0;
  int classes = 0;
  std::vector<double> s(rows.size());
  std::vector<int> p(rows.size());
  for (Eigen::Index c = 0; c < e.scores.cols(); ++c) {
    for (std::size_t j = 0; j < rows.size(); ++j) {
      s[j] = e.scores(static_cast<Eigen::Index>(rows[j]), c);
      p[j] = binary(static_cast<Eigen::Index>(rows[j]), c) >= 0.5 ? 1 : 0;
    }
    if (auto ap = average_precision(s, p)) {
      sum += *ap;
      ++classes;
    }
  }
  if (classes == 0) throw DataError("average precision undefined: no positive labels in cohort");
  return sum / classes;
}

}  // namespace detail

inline CohortResult cohort_eval(const CohortEval& e, CohortMetric metric) {
  const Eigen::Index n = e.scores.rows();
  if (n < 1) throw DataError("cohort evaluation on an empty set");
  if (e.labels.rows() != n || static_cast<Eigen::Index>(e.attributes.size()) != n) {
    throw DimensionError("cohort evaluation: scores, labels and attributes differ in rows");
  }
  if (!e.scores.allFinite() || !e.labels.allFinite()) throw DataError("cohort evaluation: non-finite input");
  int cohorts = e.num_cohorts;
  for (int z : e.attributes) {
    if (z < 0) throw DataError("cohort ids must be non-negative");
    if (e.num_cohorts == 0) cohorts = std::max(cohorts, z + 1);
    else if (z >= e.num_cohorts) throw DataError("cohort id out of range");
  }
  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(cohorts));
  for (std::size_t i = 0; i < e.attributes.size(); ++i) {
    members[static_cast<std::size_t>(e.attributes[i])].push_back(i);
  }
  const Matrix binary = metric == CohortMetric::kAveragePrecision ? detail::binary_label_matrix(e) : Matrix{};
  auto evaluate = [&](std::span<const std::size_t> rows) {
    return metric == CohortMetric::kAccuracy ? detail::accuracy_of(e, rows)
                                             : detail::mean_ap_of(e, binary, rows);
  };

  CohortResult out;
  std::vector<double> values;
  for (int c = 0; c < cohorts; ++c) {
    const auto& rows = members[static_cast<std::size_t>(c)];
    if (rows.empty()) throw DataError("cohort " + std::to_string(c) + " is empty");
    const double v = evaluate(rows);
    out.per_cohort[c] = v;
    values.push_back(v);
  }
  std::vector<std::size_t> all(static_cast<std::size_t>(n));
  std::iota(all.begin(), all.end(), std::size_t{0});
  out.overall = evaluate(all);
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / values.size();
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  out.stddev = std::sqrt(var / static_cast<double>(values.size()));
  return out;
}

// ---------------------------------------------------------------------------

// Everything `assess` can compute for one dataset. Optional members are
// present only when requested.
struct BiasReport {
  std::optional<double> mi;
  std::optional<double> entropy;
  std::optional<double> rlb_raw;
  std::optional<double> rlb;
  std::optional<double> dcor2;
  std::optional<ProbeResult> probe;
  std::optional<BiasAmplification> bias_amplification;
  std::optional<CohortResult> cohort;
  std::optional<CohortMetric> cohort_metric;
  std::optional<mine::TrainTrace> trace;
};

}  // namespace fairlens::metrics
