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

#include "fairlens/mine.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "fairlens/datagen.hpp"
#include "test_util.hpp"

namespace fairlens::mine {
namespace {

using nn::Matrix;
using nn::Vector;
using testing::independent_dataset;
using testing::one_hot_dataset;

// Critic without mapping whose output is the first representation column.
MineModel passthrough_model(int d, int m) {
  MineConfig cfg;
  cfg.use_mapping = false;
  cfg.stats_hidden = {};
  MineModel model = init_mine_model(d, m, cfg);
  auto layers = model.stats_net.mutable_layers();
  layers[0].weight.setZero();
  layers[0].weight(0, 0) = 1.0;
  layers[0].bias.setZero();
  return model;
}

Batch manual_batch(const Matrix& joint_r, const Matrix& marginal_r, std::vector<int> z) {
  Batch b;
  b.joint_r = joint_r;
  b.marginal_r = marginal_r;
  b.joint_z = std::move(z);
  b.joint_rows.resize(b.joint_z.size());
  b.marginal_rows.resize(b.joint_z.size());
  return b;
}

TEST(MineConfig, RejectsInvalidValues) {
  MineConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.convergence_window = cfg.max_iters;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = MineConfig{};
  cfg.ema_alpha = 0.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg.ema_alpha = 1.0;
  EXPECT_NO_THROW(cfg.validate());
  cfg.batch_size = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(InitMineModel, ShapesMatchDataAndMapping) {
  MineConfig cfg;
  const auto model = init_mine_model(5, 3, cfg);
  ASSERT_TRUE(model.uses_mapping());
  EXPECT_EQ(model.map_r->input_dim(), 5);
  EXPECT_EQ(model.map_z->input_dim(), 3);
  EXPECT_EQ(model.map_r->output_dim(), cfg.map_dim);
  EXPECT_EQ(model.map_z->output_dim(), cfg.map_dim);
  EXPECT_EQ(model.stats_net.input_dim(), 2 * cfg.map_dim);
  EXPECT_EQ(model.stats_net.output_dim(), 1);
  EXPECT_EQ(model.map_r->num_layers(), 1u);
  EXPECT_EQ(model.map_r->layers()[0].activation, nn::Activation::kIdentity);

  cfg.use_mapping = false;
  const auto plain = init_mine_model(5, 3, cfg);
  EXPECT_FALSE(plain.uses_mapping());
  EXPECT_EQ(plain.stats_net.input_dim(), 8);
}

TEST(SampleJointAndMarginal, ExhaustiveDrawIsPermutation) {
  Rng rng(1);
  Matrix r(4, 1);
  r << 0, 1, 2, 3;
  const auto data = make_representation_set(r, {0, 1, 0, 1});
  const auto b = sample_joint_and_marginal(data, 4, rng);
  auto rows = b.joint_rows;
  std::sort(rows.begin(), rows.end());
  EXPECT_EQ(rows, (std::vector<std::size_t>{0, 1, 2, 3}));
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(b.joint_r(static_cast<Eigen::Index>(i), 0), static_cast<double>(b.joint_rows[i]));
    EXPECT_EQ(b.joint_z[i], data.attributes[b.joint_rows[i]]);
  }
}

TEST(SampleJointAndMarginal, MarginalTermReusesJointAttributes) {
  const auto data = independent_dataset(300, 3, 5);
  MineConfig cfg;
  const auto model = init_mine_model(3, 2, cfg);
  Rng rng(2);
  for (int t = 0; t < 50; ++t) {
    const auto b = sample_joint_and_marginal(data, 64, rng);
    ASSERT_EQ(b.joint_z.size(), 64u);
    for (std::size_t i = 0; i < b.size(); ++i) {
      EXPECT_EQ(b.joint_z[i], data.attributes[b.joint_rows[i]]);
      EXPECT_EQ(b.marginal_r.row(static_cast<Eigen::Index>(i)),
                data.representations.row(static_cast<Eigen::Index>(b.marginal_rows[i])));
    }
    auto unique = b.marginal_rows;
    std::sort(unique.begin(), unique.end());
    EXPECT_EQ(std::unique(unique.begin(), unique.end()), unique.end());
  }
  (void)model;
}

TEST(SampleJointAndMarginal, DeterministicUnderSeed) {
  const auto data = independent_dataset(100, 2, 5);
  Rng a(9), b(9);
  const auto x = sample_joint_and_marginal(data, 10, a);
  const auto y = sample_joint_and_marginal(data, 10, b);
  EXPECT_EQ(x.joint_rows, y.joint_rows);
  EXPECT_EQ(x.marginal_rows, y.marginal_rows);
}

TEST(SampleJointAndMarginal, BatchLargerThanDataIsConfigError) {
  const auto data = independent_dataset(10, 2, 5);
  Rng rng(1);
  EXPECT_THROW(sample_joint_and_marginal(data, 11, rng), ConfigError);
}

TEST(MiEstimateBatch, ConstantCriticGivesZero) {
  MineConfig cfg;
  auto model = init_mine_model(3, 2, cfg);
  for (auto& layer : model.stats_net.mutable_layers()) {
    layer.weight.setZero();
    layer.bias.setZero();
  }
  model.stats_net.mutable_layers().back().bias(0) = 2.5;
  const auto data = independent_dataset(50, 3, 1);
  Rng rng(1);
  const auto est = mi_estimate_batch(model, sample_joint_and_marginal(data, 20, rng));
  EXPECT_NEAR(est.mi, 0.0, 1e-15);
}

TEST(MiEstimateBatch, HandValue) {
  const auto model = passthrough_model(1, 2);
  const auto b = manual_batch(Matrix::Constant(2, 1, 1.0), Matrix::Zero(2, 1), {0, 1});
  const auto est = mi_estimate_batch(model, b);
  EXPECT_DOUBLE_EQ(est.mi, 1.0);
  EXPECT_EQ(est.joint_out, Vector::Constant(2, 1.0));
  EXPECT_EQ(est.marginal_out, Vector::Zero(2));
}

TEST(MiEstimateBatch, LargeMarginalOutputStaysFinite) {
  const auto model = passthrough_model(1, 2);
  Matrix marg(2, 1);
  marg << 700.0, 0.0;
  const auto est = mi_estimate_batch(model, manual_batch(Matrix::Constant(2, 1, 1.0), marg, {0, 1}));
  ASSERT_TRUE(std::isfinite(est.mi));
  // Extended-precision reference: exp(700) is representable in long double.
  const long double ref = 1.0L - std::log((std::exp(700.0L) + 1.0L) / 2.0L);
  EXPECT_NEAR(est.mi, static_cast<double>(ref), 1e-12);
}

TEST(MiEstimateBatch, DimensionMismatch) {
  const auto model = passthrough_model(2, 2);
  EXPECT_THROW(mi_estimate_batch(model, manual_batch(Matrix::Zero(2, 3), Matrix::Zero(2, 3), {0, 1})),
               DimensionError);
}

TEST(LogHelpers, MatchDirectEvaluation) {
  Vector v(3);
  v << -1.0, 0.5, 2.0;
  EXPECT_NEAR(log_mean_exp(v), std::log((std::exp(-1.0) + std::exp(0.5) + std::exp(2.0)) / 3), 1e-15);
  EXPECT_NEAR(log_add_exp(1.0, 2.0), std::log(std::exp(1.0) + std::exp(2.0)), 1e-15);
  EXPECT_EQ(log_add_exp(-std::numeric_limits<double>::infinity(), 3.0), 3.0);
}

// The EMA is a constant under differentiation, so the oracle perturbs each
// parameter and re-evaluates the loss at the same log_ema.
TEST(MineLoss, GradientsMatchFiniteDifferences) {
  for (int trial = 0; trial < 10; ++trial) {
    for (bool mapping : {true, false}) {
      Rng rng(300 + trial);
      MineConfig cfg;
      cfg.use_mapping = mapping;
      cfg.map_dim = 2 + static_cast<int>(rng.below(4));
      cfg.stats_hidden = {2 + static_cast<int>(rng.below(6)), 2 + static_cast<int>(rng.below(6))};
      cfg.seed = 400 + trial;
      const int d = 1 + static_cast<int>(rng.below(4));
      const int m = 2 + static_cast<int>(rng.below(3));
      auto model = init_mine_model(d, m, cfg);
      testing::randomize_biases(model.stats_net, rng);
      if (mapping) {
        testing::randomize_biases(*model.map_r, rng);
        testing::randomize_biases(*model.map_z, rng);
      }
      std::vector<int> z(6);
      for (auto& v : z) v = static_cast<int>(rng.below(static_cast<std::uint64_t>(m)));
      const auto batch = manual_batch(testing::random_matrix(6, d, rng),
                                      testing::random_matrix(6, d, rng), z);
      const double log_ema = 0.3 * rng.normal();
      const auto eval = mine_loss(model, batch, log_ema);
      auto loss = [&] { return mine_loss(model, batch, log_ema).loss; };
      EXPECT_LT(testing::worst_fd_error(model.stats_net, eval.grad_stats, loss), 1e-4);
      if (mapping) {
        EXPECT_LT(testing::worst_fd_error(*model.map_r, *eval.grad_map_r, loss), 1e-4);
        EXPECT_LT(testing::worst_fd_error(*model.map_z, *eval.grad_map_z, loss), 1e-4);
      }
    }
  }
}

TEST(MineTrainStep, FirstEmaEqualsBatchMarginalMean) {
  const auto data = one_hot_dataset(200, 3);
  MineConfig cfg;
  auto model = init_mine_model(2, 2, cfg);
  Rng rng(4);
  TrainTrace trace;
  mine_train_step(model, cfg, sample_joint_and_marginal(data, 32, rng), trace);
  ASSERT_EQ(trace.iterations(), 1u);
  EXPECT_EQ(trace.ema[0], trace.marginal_mean[0]);
}

TEST(MineTrainStep, EmaFollowsRecursion) {
  const auto data = one_hot_dataset(200, 3);
  MineConfig cfg;
  cfg.ema_alpha = 0.2;
  auto model = init_mine_model(2, 2, cfg);
  Rng rng(4);
  TrainTrace trace;
  for (int t = 0; t < 20; ++t) mine_train_step(model, cfg, sample_joint_and_marginal(data, 32, rng), trace);
  for (std::size_t t = 1; t < trace.iterations(); ++t) {
    const double expected = 0.2 * trace.marginal_mean[t] + 0.8 * trace.ema[t - 1];
    EXPECT_NEAR(trace.ema[t], expected, 1e-12 * expected);
  }
}

TEST(MineTrainStep, AlphaOneTracksBatchMean) {
  const auto data = one_hot_dataset(200, 3);
  MineConfig cfg;
  cfg.ema_alpha = 1.0;
  auto model = init_mine_model(2, 2, cfg);
  Rng rng(4);
  TrainTrace trace;
  for (int t = 0; t < 10; ++t) mine_train_step(model, cfg, sample_joint_and_marginal(data, 32, rng), trace);
  for (std::size_t t = 0; t < trace.iterations(); ++t) {
    EXPECT_NEAR(trace.ema[t], trace.marginal_mean[t], 1e-12 * trace.marginal_mean[t]);
  }
}

TEST(MineTrainStep, UpdatesAllThreeNetworks) {
  const auto data = one_hot_dataset(200, 3);
  MineConfig cfg;
  auto model = init_mine_model(2, 2, cfg);
  const auto before = model;
  Rng rng(4);
  TrainTrace trace;
  mine_train_step(model, cfg, sample_joint_and_marginal(data, 32, rng), trace);
  EXPECT_FALSE(model.stats_net == before.stats_net);
  EXPECT_FALSE(*model.map_r == *before.map_r);
  EXPECT_FALSE(*model.map_z == *before.map_z);
}

TEST(MineTrainStep, InconsistentTraceIsUsageError) {
  const auto data = one_hot_dataset(200, 3);
  MineConfig cfg;
  auto model = init_mine_model(2, 2, cfg);
  Rng rng(4);
  TrainTrace trace;
  trace.mi.push_back(0.0);
  EXPECT_THROW(mine_train_step(model, cfg, sample_joint_and_marginal(data, 32, rng), trace), UsageError);
}

TEST(MineTrainStep, NonFiniteLossRaisesWithTrace) {
  const auto data = one_hot_dataset(200, 3);
  MineConfig cfg;
  auto model = init_mine_model(2, 2, cfg);
  model.stats_net.mutable_layers().back().bias(0) = 1e308;
  model.stats_net.mutable_layers().back().weight.setConstant(1e308);
  Rng rng(4);
  TrainTrace trace;
  try {
    mine_train_step(model, cfg, sample_joint_and_marginal(data, 32, rng), trace);
    FAIL() << "expected divergence";
  } catch (const TrainingDivergedError& e) {
    EXPECT_EQ(e.trace().iterations(), 1u);
    EXPECT_EQ(e.exit_code(), 4);
  } catch (const DataError&) {
    // Overflow may already surface as a non-finite forward output.
    SUCCEED();
  }
}

TEST(EstimateMi, SingleClassIsDegenerate) {
  Matrix r = Matrix::Random(50, 2);
  const auto data = make_representation_set(r, std::vector<int>(50, 0), {"a", "b"});
  EXPECT_THROW(estimate_mi(data, MineConfig{}), DegenerateAttributeError);
}

TEST(EstimateMi, BatchLargerThanDataIsConfigError) {
  const auto data = independent_dataset(100, 2, 1);
  EXPECT_THROW(estimate_mi(data, MineConfig{}), ConfigError);
}

TEST(EstimateMi, IndependentNoiseIsNearZero) {
  const auto data = independent_dataset(2000, 8, 17);
  const auto est = estimate_mi(data, MineConfig{});
  EXPECT_GE(est.mi, 0.0);
  EXPECT_LE(est.mi, 0.02);
}

TEST(EstimateMi, OneHotAttributeApproachesLn2FromBelow) {
  const auto data = one_hot_dataset(2000, 21);
  const auto est = estimate_mi(data, MineConfig{});
  EXPECT_GE(est.mi, 0.62);
  EXPECT_LE(est.mi, 0.6932);
  ASSERT_TRUE(est.trace.converged_at.has_value());
  EXPECT_LE(est.trace.iterations(), 5000u);
}

TEST(EstimateMi, SmoothedHeldOutTraceIsNonDecreasingUpToTolerance) {
  const auto data = one_hot_dataset(2000, 21);
  MineConfig cfg;
  const auto est = estimate_mi(data, cfg);
  const auto& h = est.trace.heldout_mi;
  const std::size_t w = static_cast<std::size_t>(cfg.convergence_window / cfg.eval_interval);
  ASSERT_GT(h.size(), w);
  double best = -1e300;
  for (std::size_t j = w; j <= h.size(); ++j) {
    const double avg = std::accumulate(h.begin() + static_cast<long>(j - w), h.begin() + static_cast<long>(j), 0.0) /
                       static_cast<double>(w);
    EXPECT_GE(avg, best - 0.05) << "window ending at evaluation " << j;
    best = std::max(best, avg);
  }
}

TEST(EstimateMi, BreakingThePairingRemovesDependence) {
  auto data = one_hot_dataset(2000, 21);
  Rng rng(5);
  rng.shuffle(std::span<int>(data.attributes));
  const auto est = estimate_mi(data, MineConfig{});
  EXPECT_LE(est.mi, 0.02);
}

TEST(EstimateMi, DiscreteJointWithinToleranceOfPlugInMi) {
  datagen::SyntheticSpec spec;
  spec.kind = datagen::SyntheticKind::kDiscreteJoint;
  spec.n = 10000;
  spec.joint_table = Matrix{{0.375, 0.125}, {0.125, 0.375}};
  spec.seed = 3;
  const auto gen = datagen::generate(spec);
  // Closed form for a symmetric binary channel with flip 0.25.
  const double truth = std::log(2.0) + 0.25 * std::log(0.25) + 0.75 * std::log(0.75);
  const auto est = estimate_mi(gen.data, MineConfig{});
  EXPECT_LE(std::abs(est.mi - truth), std::max(0.1 * truth, 0.05));
  EXPECT_LE(est.mi, truth + 0.05);
}

TEST(EstimateMi, DeterministicUnderSeed) {
  const auto data = one_hot_dataset(600, 2);
  MineConfig cfg;
  cfg.max_iters = 300;
  cfg.convergence_window = 100;
  cfg.batch_size = 64;
  cfg.seed = 42;
  const auto a = estimate_mi(data, cfg);
  const auto b = estimate_mi(data, cfg);
  EXPECT_EQ(a.mi, b.mi);
  EXPECT_EQ(a.trace.mi, b.trace.mi);
  EXPECT_EQ(a.trace.heldout_mi, b.trace.heldout_mi);
  cfg.seed = 43;
  EXPECT_NE(estimate_mi(data, cfg).trace.mi, a.trace.mi);
}

TEST(EstimateMi, TraceSequencesHaveEqualLength) {
  const auto data = one_hot_dataset(600, 2);
  MineConfig cfg;
  cfg.max_iters = 120;
  cfg.convergence_window = 50;
  cfg.batch_size = 64;
  const auto est = estimate_mi(data, cfg);
  EXPECT_LE(est.trace.iterations(), 120u);
  EXPECT_EQ(est.trace.mi.size(), est.trace.loss.size());
  EXPECT_EQ(est.trace.mi.size(), est.trace.ema.size());
  EXPECT_EQ(est.trace.heldout_iters.size(), est.trace.heldout_mi.size());
  EXPECT_EQ(est.trace.final_mi, est.mi);
}

TEST(EstimateMi, WithoutHoldoutUsesTrainingEstimates) {
  const auto data = one_hot_dataset(600, 2);
  MineConfig cfg;
  cfg.max_iters = 400;
  cfg.convergence_window = 100;
  cfg.batch_size = 64;
  cfg.holdout_fraction = 0.0;
  const auto est = estimate_mi(data, cfg);
  EXPECT_TRUE(est.trace.heldout_mi.empty());
  EXPECT_GT(est.mi, 0.3);
}

}  // namespace
}  // namespace fairlens::mine
