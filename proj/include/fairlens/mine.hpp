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

// Mutual-information lower-bound estimation with a Donsker-Varadhan critic.
//
// Representations r and one-hot attributes z are each projected by a single
// linear mapping layer (f_r, f_z) into a shared space, and the statistics
// network g scores the concatenated pair. Per minibatch of k aligned rows
//
//   I = mean_i g(f_r(r_i), f_z(z_i)) - log mean_i exp(g(f_r(r'_i), f_z(z_i)))
//
// where r'_i is an independent draw of k rows (the attribute half of the
// marginal batch is the joint batch's attributes). Training minimises
//
//   L = -(mean(o_joint) - mean(exp(o_marginal)) / ema)
//
// with ema an exponential moving average of mean(exp(o_marginal)), held
// constant when differentiating. The gradient flows through g and both
// mapping layers.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fairlens/error.hpp"
#include "fairlens/nn.hpp"
#include "fairlens/random.hpp"
#include "fairlens/representation.hpp"

namespace fairlens::mine {

using nn::Matrix;
using nn::Vector;

struct MineConfig {
  int batch_size = 256;
  double ema_alpha = 0.01;
  double learning_rate = 1e-3;
  int max_iters = 5000;
  int convergence_window = 200;
  double convergence_tol = 1e-3;
  int map_dim = 64;
  std::vector<int> stats_hidden = {128, 128};
  // When false the statistics network consumes [r, one_hot(z)] directly
  // (the plain MINE baseline without mapping layers).
  bool use_mapping = true;
  // Fraction of rows withheld from training and used to track the estimate.
  double holdout_fraction = 0.2;
  int eval_interval = 10;
  std::uint64_t seed = 0;

  void validate() const {
    if (batch_size < 1) throw ConfigError("mine.batch_size must be positive");
    if (!(ema_alpha > 0.0 && ema_alpha <= 1.0)) throw ConfigError("mine.ema_alpha must be in (0, 1]");
    if (!(learning_rate > 0.0)) throw ConfigError("mine.learning_rate must be positive");
    if (max_iters < 1) throw ConfigError("mine.max_iters must be positive");
    if (convergence_window < 1) throw ConfigError("mine.convergence_window must be positive");
    if (convergence_window >= max_iters) {
      throw ConfigError("mine.convergence_window must be smaller than mine.max_iters");
    }
    if (!(holdout_fraction >= 0.0 && holdout_fraction < 1.0)) {
      throw ConfigError("mine.holdout_fraction must be in [0, 1)");
    }
    if (eval_interval < 1) throw ConfigError("mine.eval_interval must be positive");
    if (!(convergence_tol > 0.0)) throw ConfigError("mine.convergence_tol must be positive");
    if (map_dim < 1) throw ConfigError("mine.map_dim must be positive");
    for (int h : stats_hidden) {
      if (h < 1) throw ConfigError("mine.stats_hidden widths must be positive");
    }
  }
};

struct MineModel {
  std::optional<nn::DenseNet> map_r;  // d -> map_dim, linear
  std::optional<nn::DenseNet> map_z;  // m -> map_dim, linear
  nn::DenseNet stats_net;             // critic input -> 1
  int map_dim = 0;
  int num_classes = 0;
  Eigen::Index rep_dim = 0;

  std::optional<nn::AdamState> map_r_opt;
  std::optional<nn::AdamState> map_z_opt;
  nn::AdamState stats_opt;

  bool uses_mapping() const { return map_r.has_value(); }
  std::uint64_t steps() const { return stats_opt.step; }
};

inline MineModel init_mine_model(Eigen::Index rep_dim, int num_classes, const MineConfig& config) {
  config.validate();
  if (rep_dim < 1 || num_classes < 1) throw ConfigError("MINE model needs d >= 1 and m >= 1");
  MineModel model;
  model.map_dim = config.map_dim;
  model.num_classes = num_classes;
  model.rep_dim = rep_dim;

  int critic_in = 0;
  if (config.use_mapping) {
    model.map_r = nn::init_dense_net({static_cast<int>(rep_dim), config.map_dim},
                                     nn::Activation::kIdentity, derive_seed(config.seed, 1));
    model.map_z = nn::init_dense_net({num_classes, config.map_dim}, nn::Activation::kIdentity,
                                     derive_seed(config.seed, 2));
    model.map_r_opt = nn::init_adam(*model.map_r, config.learning_rate);
    model.map_z_opt = nn::init_adam(*model.map_z, config.learning_rate);
    critic_in = 2 * config.map_dim;
  } else {
    critic_in = static_cast<int>(rep_dim) + num_classes;
  }
  std::vector<int> dims{critic_in};
  dims.insert(dims.end(), config.stats_hidden.begin(), config.stats_hidden.end());
  dims.push_back(1);
  model.stats_net = nn::init_dense_net(std::span<const int>(dims), nn::Activation::kRelu,
                                       derive_seed(config.seed, 3));
  model.stats_opt = nn::init_adam(model.stats_net, config.learning_rate);
  return model;
}

// Row indices and gathered data for one estimation step.
struct Batch {
  std::vector<std::size_t> joint_rows;
  std::vector<std::size_t> marginal_rows;
  Matrix joint_r;             // [k x d]
  Matrix marginal_r;          // [k x d], independent rows
  std::vector<int> joint_z;   // [k], reused by the marginal term

  std::size_t size() const { return joint_rows.size(); }
};

inline Batch sample_joint_and_marginal(const RepresentationSet& data, std::size_t k, Rng& rng) {
  const auto n = static_cast<std::size_t>(data.size());
  if (k < 1 || k > n) {
    throw ConfigError("batch size " + std::to_string(k) + " must be in [1, n=" +
                      std::to_string(n) + "]");
  }
  Batch b;
  b.joint_rows = rng.sample_without_replacement(n, k);
  b.marginal_rows = rng.sample_without_replacement(n, k);
  b.joint_r.resize(static_cast<Eigen::Index>(k), data.dim());
  b.marginal_r.resize(static_cast<Eigen::Index>(k), data.dim());
  b.joint_z.resize(k);
  for (std::size_t i = 0; i < k; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    b.joint_r.row(row) = data.representations.row(static_cast<Eigen::Index>(b.joint_rows[i]));
    b.marginal_r.row(row) =
        data.representations.row(static_cast<Eigen::Index>(b.marginal_rows[i]));
    b.joint_z[i] = data.attributes[b.joint_rows[i]];
  }
  return b;
}

// log(mean(exp(v))) with max subtraction.
inline double log_mean_exp(const Vector& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().mean());
}

inline double log_add_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

struct BatchEstimate {
  double mi = 0.0;
  double log_marginal_mean = 0.0;  // log mean(exp(o_marginal))
  Vector joint_out;
  Vector marginal_out;
};

namespace detail {

struct CriticPass {
  std::optional<nn::ForwardResult> map_r_fwd;  // over [joint_r; marginal_r]
  std::optional<nn::ForwardResult> map_z_fwd;  // over one_hot(joint_z)
  nn::ForwardResult stats_fwd;                 // over stacked critic inputs
  BatchEstimate estimate;
};

inline CriticPass critic_forward(const MineModel& model, const Batch& batch) {
  const auto k = static_cast<Eigen::Index>(batch.size());
  if (batch.joint_r.cols() != model.rep_dim || batch.marginal_r.cols() != model.rep_dim) {
    throw DimensionError("MINE batch dimension " + std::to_string(batch.joint_r.cols()) +
                         " != model representation dimension " + std::to_string(model.rep_dim));
  }
  if (batch.marginal_r.rows() != k || static_cast<Eigen::Index>(batch.joint_z.size()) != k) {
    throw DimensionError("MINE batch halves differ in size");
  }
  const Matrix z_onehot = nn::one_hot(batch.joint_z, model.num_classes);
  Matrix stacked_r(2 * k, model.rep_dim);
  stacked_r << batch.joint_r, batch.marginal_r;

  CriticPass pass;
  Matrix critic_in;
  if (model.uses_mapping()) {
    pass.map_r_fwd = nn::forward(*model.map_r, stacked_r);
    pass.map_z_fwd = nn::forward(*model.map_z, z_onehot);
    const Matrix& w = pass.map_r_fwd->output;
    const Matrix& s = pass.map_z_fwd->output;
    if (!w.allFinite() || !s.allFinite()) throw NumericalError("mapping network produced non-finite values");
    critic_in.resize(2 * k, w.cols() + s.cols());
    critic_in << w, Matrix(s.replicate(2, 1));
  } else {
    critic_in.resize(2 * k, model.rep_dim + model.num_classes);
    critic_in << stacked_r, Matrix(z_onehot.replicate(2, 1));
  }
  pass.stats_fwd = nn::forward(model.stats_net, critic_in);
  const Matrix& o = pass.stats_fwd.output;
  pass.estimate.joint_out = o.col(0).head(k);
  pass.estimate.marginal_out = o.col(0).tail(k);
  pass.estimate.log_marginal_mean = log_mean_exp(pass.estimate.marginal_out);
  pass.estimate.mi = pass.estimate.joint_out.mean() - pass.estimate.log_marginal_mean;
  return pass;
}

}  // namespace detail

inline BatchEstimate mi_estimate_batch(const MineModel& model, const Batch& batch) {
  return detail::critic_forward(model, batch).estimate;
}

struct LossEvaluation {
  double loss = 0.0;
  BatchEstimate estimate;
  std::optional<nn::ParamBuffers> grad_map_r;
  std::optional<nn::ParamBuffers> grad_map_z;
  nn::ParamBuffers grad_stats;
};

namespace detail {

inline LossEvaluation loss_and_gradients(const MineModel& model, const CriticPass& pass,
                                         double log_ema) {
  const auto& est = pass.estimate;
  const auto k = est.joint_out.size();
  LossEvaluation out;
  out.estimate = est;
  out.loss = -(est.joint_out.mean() - std::exp(est.log_marginal_mean - log_ema));

  Matrix grad_o(2 * k, 1);
  grad_o.col(0).head(k).setConstant(-1.0 / static_cast<double>(k));
  grad_o.col(0).tail(k) =
      (est.marginal_out.array() - log_ema).exp().matrix() / static_cast<double>(k);

  auto stats_bwd = nn::backward(model.stats_net, pass.stats_fwd.cache, grad_o);
  out.grad_stats = std::move(stats_bwd.grads);
  if (model.uses_mapping()) {
    const Eigen::Index md = model.map_dim;
    const Matrix grad_w = stats_bwd.input_grad.leftCols(md);
    const Matrix grad_s =
        stats_bwd.input_grad.rightCols(md).topRows(k) + stats_bwd.input_grad.rightCols(md).bottomRows(k);
    out.grad_map_r = nn::backward(*model.map_r, pass.map_r_fwd->cache, grad_w).grads;
    out.grad_map_z = nn::backward(*model.map_z, pass.map_z_fwd->cache, grad_s).grads;
  }
  return out;
}

}  // namespace detail

// Loss and parameter gradients for a fixed EMA value (given in log space).
inline LossEvaluation mine_loss(const MineModel& model, const Batch& batch, double log_ema) {
  return detail::loss_and_gradients(model, detail::critic_forward(model, batch), log_ema);
}

struct TrainTrace {
  std::vector<double> mi;             // DV estimate per iteration, before the update
  std::vector<double> loss;
  std::vector<double> ema;            // EMA of mean(exp(o_marginal))
  std::vector<double> marginal_mean;  // mean(exp(o_marginal)) of the batch
  std::vector<std::size_t> heldout_iters;  // iterations at which the held-out value was taken
  std::vector<double> heldout_mi;          // full held-out DV value at those iterations
  std::optional<std::size_t> converged_at;
  double final_mi = 0.0;
  double log_ema = 0.0;  // current EMA in log space

  std::size_t iterations() const { return mi.size(); }
};

class TrainingDivergedError : public NumericalError {
 public:
  TrainingDivergedError(const std::string& what, TrainTrace trace)
      : NumericalError(what), trace_(std::move(trace)) {}
  const TrainTrace& trace() const noexcept { return trace_; }

 private:
  TrainTrace trace_;
};

inline void mine_train_step(MineModel& model, const MineConfig& config, const Batch& batch,
                            TrainTrace& trace) {
  if (trace.iterations() != model.steps()) {
    throw UsageError("trace length " + std::to_string(trace.iterations()) +
                     " does not match the model's step count " + std::to_string(model.steps()));
  }
  const std::string where = "MINE training diverged at iteration " + std::to_string(trace.iterations());
  std::optional<detail::CriticPass> maybe_pass;
  try {
    maybe_pass = detail::critic_forward(model, batch);
  } catch (const NumericalError& e) {
    throw TrainingDivergedError(where + ": " + e.what(), trace);
  }
  const auto& pass = *maybe_pass;
  const double log_a = pass.estimate.log_marginal_mean;
  double log_ema = log_a;
  if (trace.iterations() > 0) {
    log_ema = log_add_exp(std::log(config.ema_alpha) + log_a,
                          std::log1p(-config.ema_alpha) + trace.log_ema);
  }
  auto eval = detail::loss_and_gradients(model, pass, log_ema);

  trace.mi.push_back(eval.estimate.mi);
  trace.loss.push_back(eval.loss);
  trace.marginal_mean.push_back(std::exp(log_a));
  trace.ema.push_back(std::exp(log_ema));
  trace.log_ema = log_ema;
  if (!std::isfinite(eval.loss) || !std::isfinite(eval.estimate.mi) ||
      !std::isfinite(log_ema)) {
    throw TrainingDivergedError(where, trace);
  }

  nn::adam_step(model.stats_net, model.stats_opt, eval.grad_stats);
  if (model.uses_mapping()) {
    nn::adam_step(*model.map_r, *model.map_r_opt, *eval.grad_map_r);
    nn::adam_step(*model.map_z, *model.map_z_opt, *eval.grad_map_z);
  }
}

struct MiEstimate {
  double mi = 0.0;
  TrainTrace trace;
};

namespace detail {

inline RepresentationSet subset(const RepresentationSet& data, std::span<const std::size_t> rows) {
  RepresentationSet out;
  out.representations.resize(static_cast<Eigen::Index>(rows.size()), data.dim());
  out.attributes.resize(rows.size());
  out.attribute_names = data.attribute_names;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.representations.row(static_cast<Eigen::Index>(i)) =
        data.representations.row(static_cast<Eigen::Index>(rows[i]));
    out.attributes[i] = data.attributes[rows[i]];
  }
  return out;
}

}  // namespace detail

// Critic score g(f_r(r_i), f_z(z_i)) for every row of `r`.
inline Vector score_pairs(const MineModel& model, const Matrix& r, std::span<const int> z) {
  if (r.cols() != model.rep_dim || static_cast<Eigen::Index>(z.size()) != r.rows()) {
    throw DimensionError("score_pairs: representation/attribute shape mismatch");
  }
  const Matrix z_onehot = nn::one_hot(z, model.num_classes);
  Matrix critic_in;
  if (model.uses_mapping()) {
    const Matrix w = nn::predict(*model.map_r, r);
    const Matrix s = nn::predict(*model.map_z, z_onehot);
    if (!w.allFinite() || !s.allFinite()) throw NumericalError("mapping network produced non-finite values");
    critic_in.resize(r.rows(), w.cols() + s.cols());
    critic_in << w, s;
  } else {
    critic_in.resize(r.rows(), r.cols() + z_onehot.cols());
    critic_in << r, z_onehot;
  }
  return nn::predict(model.stats_net, critic_in).col(0);
}

// DV value over a whole evaluation set. The product-of-marginals expectation
// is taken exactly over the empirical marginals: every row paired with every
// attribute value, weighted by that value's frequency.
inline double dv_estimate_full(const MineModel& model, const RepresentationSet& data) {
  const auto n = static_cast<double>(data.size());
  const Vector joint = score_pairs(model, data.representations, data.attributes);
  std::vector<double> freq(static_cast<std::size_t>(model.num_classes), 0.0);
  for (int z : data.attributes) freq[static_cast<std::size_t>(z)] += 1.0 / n;

  double log_marginal = -std::numeric_limits<double>::infinity();
  std::vector<int> fixed(data.attributes.size());
  for (int z = 0; z < model.num_classes; ++z) {
    if (freq[static_cast<std::size_t>(z)] == 0.0) continue;
    std::fill(fixed.begin(), fixed.end(), z);
    const Vector scores = score_pairs(model, data.representations, fixed);
    log_marginal =
        log_add_exp(log_marginal, std::log(freq[static_cast<std::size_t>(z)]) + log_mean_exp(scores));
  }
  return joint.mean() - log_marginal;
}

// Trains the critic on a training split while tracking the DV value on a
// held-out split every eval_interval iterations. The reported value is the
// running maximum of the window-averaged held-out value. Training stops once
// that maximum has moved by less than convergence_tol (relative, floored at
// 0.1 nats) across one window, or at max_iters. With holdout_fraction = 0
// the training-batch estimates are tracked instead.
inline MiEstimate estimate_mi(const RepresentationSet& data, const MineConfig& config) {
  config.validate();
  data.validate();
  if (data.observed_classes() < 2) {
    throw DegenerateAttributeError("protected attribute takes a single value; MI is undefined");
  }
  if (static_cast<Eigen::Index>(config.batch_size) > data.size()) {
    throw ConfigError("mine.batch_size " + std::to_string(config.batch_size) +
                      " exceeds the sample count " + std::to_string(data.size()));
  }

  const auto n = static_cast<std::size_t>(data.size());
  Rng split_rng(derive_seed(config.seed, 5));
  const auto order = split_rng.sample_without_replacement(n, n);
  auto n_eval = static_cast<std::size_t>(std::floor(config.holdout_fraction * static_cast<double>(n)));
  n_eval = std::min(n_eval, n - 1);
  const std::span<const std::size_t> rows(order);
  const RepresentationSet train = detail::subset(data, rows.subspan(n_eval));
  const RepresentationSet eval = detail::subset(data, rows.first(n_eval));
  const std::size_t k_train = std::min<std::size_t>(config.batch_size, n - n_eval);
  const bool use_heldout = n_eval > 0;

  MineModel model = init_mine_model(data.dim(), data.num_classes(), config);
  Rng rng(derive_seed(config.seed, 4));
  TrainTrace trace;

  const auto interval = static_cast<std::size_t>(use_heldout ? config.eval_interval : 1);
  const std::size_t window = std::max<std::size_t>(1, config.convergence_window / interval);
  std::vector<double> tracked;
  std::vector<double> prefix{0.0};
  std::vector<double> best_history;
  double best = -std::numeric_limits<double>::infinity();

  auto record = [&](double value) {
    tracked.push_back(value);
    prefix.push_back(prefix.back() + value);
    const std::size_t j = tracked.size();
    if (j >= window) {
      best = std::max(best, (prefix[j] - prefix[j - window]) / static_cast<double>(window));
    }
    best_history.push_back(best);
    if (j >= 2 * window) {
      const double before = best_history[j - 1 - window];
      return best - before < config.convergence_tol * std::max(std::abs(before), 0.1);
    }
    return false;
  };

  for (int t = 0; t < config.max_iters; ++t) {
    bool converged = false;
    if (use_heldout && static_cast<std::size_t>(t) % interval == 0) {
      double value = std::numeric_limits<double>::quiet_NaN();
      try {
        value = dv_estimate_full(model, eval);
      } catch (const NumericalError&) {
      }
      trace.heldout_iters.push_back(static_cast<std::size_t>(t));
      trace.heldout_mi.push_back(value);
      if (!std::isfinite(value)) {
        throw TrainingDivergedError(
            "held-out MINE estimate is non-finite at iteration " + std::to_string(t), trace);
      }
      converged = record(value);
    }
    if (converged) {
      trace.converged_at = static_cast<std::size_t>(t);
      break;
    }
    const Batch batch = sample_joint_and_marginal(train, k_train, rng);
    mine_train_step(model, config, batch, trace);
    if (!use_heldout && record(trace.mi.back())) {
      trace.converged_at = static_cast<std::size_t>(t);
      break;
    }
  }
  if (tracked.size() < window) {
    best = (prefix.back() - prefix.front()) / static_cast<double>(tracked.size());
  }
  trace.final_mi = std::max(0.0, best);
  return {trace.final_mi, std::move(trace)};
}

}  // namespace fairlens::mine
