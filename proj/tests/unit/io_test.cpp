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

#include "fairlens/io.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <string>

#include "fairlens/config.hpp"
#include "fairlens/report.hpp"
#include "test_util.hpp"

namespace fairlens {
namespace {

using Eigen::MatrixXd;

MatrixXd awkward_matrix() {
  Rng rng(5);
  MatrixXd m = testing::random_matrix(7, 4, rng);
  m(0, 0) = 0.1;
  m(0, 1) = -0.0;
  m(0, 2) = 1e-300;
  m(0, 3) = std::numeric_limits<double>::max();
  m(1, 0) = std::numeric_limits<double>::denorm_min();
  m(1, 1) = 1.0 / 3.0;
  return m;
}

TEST(BinaryMatrix, RoundTripIsBitExact) {
  const MatrixXd m = awkward_matrix();
  const MatrixXd back = io::parse_matrix_binary(io::matrix_to_binary(m), "m.bin");
  ASSERT_EQ(back.rows(), m.rows());
  ASSERT_EQ(back.cols(), m.cols());
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    EXPECT_EQ(std::bit_cast<std::uint64_t>(back.data()[i]), std::bit_cast<std::uint64_t>(m.data()[i]));
  }
}

TEST(BinaryMatrix, LayoutIsMagicVersionShapeThenRowMajorValues) {
  MatrixXd m(2, 3);
  m << 1, 2, 3, 4, 5, 6;
  const std::string bytes = io::matrix_to_binary(m);
  ASSERT_EQ(bytes.size(), 8u + 24u + 48u);
  EXPECT_EQ(bytes.substr(0, 8), "FLENSMAT");
  EXPECT_EQ(static_cast<unsigned char>(bytes[8]), 1);
  EXPECT_EQ(static_cast<unsigned char>(bytes[16]), 2);
  EXPECT_EQ(static_cast<unsigned char>(bytes[24]), 3);
  double second = 0;
  std::memcpy(&second, bytes.data() + 40, 8);
  EXPECT_EQ(second, 2.0);
}

TEST(BinaryMatrix, RejectsTruncatedOrInconsistentPayload) {
  MatrixXd m = MatrixXd::Ones(3, 2);
  std::string bytes = io::matrix_to_binary(m);
  EXPECT_THROW(io::parse_matrix_binary(bytes.substr(0, bytes.size() - 8), "m.bin"), ParseError);
  EXPECT_THROW(io::parse_matrix_binary(bytes.substr(0, 20), "m.bin"), ParseError);
  std::string bad_version = bytes;
  bad_version[8] = 2;
  EXPECT_THROW(io::parse_matrix_binary(bad_version, "m.bin"), ParseError);
}

TEST(BinaryMatrix, RejectsNonFiniteValues) {
  MatrixXd m = MatrixXd::Ones(2, 2);
  m(1, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(io::parse_matrix_binary(io::matrix_to_binary(m), "m.bin"), ParseError);
}

TEST(TextMatrix, RoundTripWithinTolerance) {
  const MatrixXd m = awkward_matrix();
  const MatrixXd back = io::parse_matrix_text(io::matrix_to_text(m), "m.csv");
  ASSERT_EQ(back.rows(), m.rows());
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    EXPECT_LE(std::abs(back.data()[i] - m.data()[i]), 1e-12 * std::max(1.0, std::abs(m.data()[i])));
  }
}

TEST(TextMatrix, HeaderThenCommaSeparatedRows) {
  MatrixXd m(2, 2);
  m << 0.5, -1, 2, 3;
  EXPECT_EQ(io::matrix_to_text(m), "f0,f1\n0.5,-1\n2,3\n");
  EXPECT_EQ(io::matrix_to_text(m, {"x", "y"}), "x,y\n0.5,-1\n2,3\n");
}

TEST(TextMatrix, ParseErrorNamesFileAndLine) {
  try {
    io::parse_matrix_text("a,b\n1,2\n3,oops\n", "reps.csv");
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("reps.csv"), std::string::npos) << what;
    EXPECT_NE(what.find(":3"), std::string::npos) << what;
    EXPECT_EQ(e.exit_code(), 2);
  }
  EXPECT_THROW(io::parse_matrix_text("a,b\n1,2,3\n", "r.csv"), ParseError);
  EXPECT_THROW(io::parse_matrix_text("", "r.csv"), ParseError);
  EXPECT_THROW(io::parse_matrix_text("a\nnan\n", "r.csv"), ParseError);
}

TEST(TextMatrix, ToleratesCarriageReturnsAndBlankLines) {
  const MatrixXd m = io::parse_matrix_text("a,b\r\n1, 2\r\n\r\n3,4\r\n", "r.csv");
  ASSERT_EQ(m.rows(), 2);
  EXPECT_EQ(m(1, 1), 4.0);
}

TEST(ReadMatrix, DetectsFormatFromContent) {
  testing::TempDir dir("io");
  const MatrixXd m = awkward_matrix();
  io::write_matrix(dir.file("a.bin"), m, io::MatrixFormat::kBinary);
  io::write_matrix(dir.file("a.csv"), m, io::MatrixFormat::kText);
  EXPECT_EQ(io::read_matrix(dir.file("a.bin")), m);
  EXPECT_NEAR((io::read_matrix(dir.file("a.csv")) - m).cwiseAbs().maxCoeff() / m.cwiseAbs().maxCoeff(), 0.0, 1e-12);
  EXPECT_THROW(io::read_matrix(dir.file("missing.csv")), DataError);
}

TEST(Attributes, ParsesLabelsAndNameComments) {
  const auto a = io::parse_attributes("# 0=female\n# 1=male\n0\n1\n1\n", "z.txt");
  EXPECT_EQ(a.labels, (std::vector<int>{0, 1, 1}));
  EXPECT_EQ(a.names.at(0), "female");
  EXPECT_EQ(a.names.at(1), "male");
}

TEST(Attributes, RejectsBadLabels) {
  EXPECT_THROW(io::parse_attributes("0\n-1\n", "z.txt"), ParseError);
  EXPECT_THROW(io::parse_attributes("0\nx\n", "z.txt"), ParseError);
  EXPECT_THROW(io::parse_attributes("", "z.txt"), ParseError);
  try {
    io::parse_attributes("0\n1\n2.5\n", "z.txt");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("z.txt:3"), std::string::npos) << e.what();
  }
}

TEST(Attributes, WriteReadRoundTrip) {
  testing::TempDir dir("attr");
  io::write_attributes(dir.file("z.txt"), {2, 0, 1}, {"a", "b", "c"});
  const auto a = io::read_attributes(dir.file("z.txt"));
  EXPECT_EQ(a.labels, (std::vector<int>{2, 0, 1}));
  EXPECT_EQ(a.names.at(2), "c");
}

TEST(LoadRepresentationSet, ChecksRowAgreementAndFillsNames) {
  testing::TempDir dir("set");
  io::write_matrix(dir.file("r.csv"), MatrixXd::Ones(3, 2), io::MatrixFormat::kText);
  io::write_attributes(dir.file("z.txt"), {0, 1, 0}, {"f", "m"});
  const auto set = io::load_representation_set(dir.file("r.csv"), dir.file("z.txt"));
  EXPECT_EQ(set.size(), 3);
  EXPECT_EQ(set.attribute_names, (std::vector<std::string>{"f", "m"}));
  io::write_attributes(dir.file("short.txt"), {0, 1});
  EXPECT_THROW(io::load_representation_set(dir.file("r.csv"), dir.file("short.txt")), DimensionError);
}

TEST(Sha256, KnownVectors) {
  EXPECT_EQ(io::sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(io::sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

// ----- config

TEST(RunConfig, ParsesAllSections) {
  const auto cfg = config::parse_run_config(R"(
# comment
[mine]
batch_size = 128
ema_alpha = 0.05
stats_hidden = 32, 32
use_mapping = false
[probe]
hidden = 256
holdout_fraction = 0
[spec]
kind = discrete_joint
n = 500
joint_table = 0.5, 0 ; 0, 0.5
[run]
metrics = rlb, dcor2
seeds = 1, 2, 3
format = binary
[cohort]
metric = average_precision
)");
  EXPECT_EQ(cfg.mine.batch_size, 128);
  EXPECT_EQ(cfg.mine.ema_alpha, 0.05);
  EXPECT_EQ(cfg.mine.stats_hidden, (std::vector<int>{32, 32}));
  EXPECT_FALSE(cfg.mine.use_mapping);
  EXPECT_EQ(cfg.probe.hidden, (std::vector<int>{256}));
  EXPECT_EQ(cfg.probe.holdout_fraction, 0.0);
  ASSERT_TRUE(cfg.spec.has_value());
  EXPECT_EQ(cfg.spec->kind, datagen::SyntheticKind::kDiscreteJoint);
  EXPECT_EQ(cfg.spec->joint_table, (MatrixXd{{0.5, 0.0}, {0.0, 0.5}}));
  EXPECT_EQ(cfg.metrics, (std::vector<std::string>{"rlb", "dcor2"}));
  EXPECT_EQ(cfg.seeds, (std::vector<std::uint64_t>{1, 2, 3}));
  EXPECT_EQ(cfg.format, io::MatrixFormat::kBinary);
  EXPECT_EQ(cfg.cohort_metric, metrics::CohortMetric::kAveragePrecision);
}

TEST(RunConfig, DefaultsMatchEstimatorDefaults) {
  const auto cfg = config::parse_run_config("");
  const mine::MineConfig defaults;
  EXPECT_EQ(cfg.mine.batch_size, defaults.batch_size);
  EXPECT_EQ(cfg.mine.map_dim, 64);
  EXPECT_EQ(cfg.mine.stats_hidden, (std::vector<int>{128, 128}));
  EXPECT_EQ(cfg.metrics, (std::vector<std::string>{"rlb"}));
  EXPECT_FALSE(cfg.spec.has_value());
}

TEST(RunConfig, UnknownKeysAndSectionsAreRejectedWithLocation) {
  try {
    config::parse_run_config("[mine]\nbatch_size = 4\nbatchsize = 5\n", "run.cfg");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("run.cfg:3"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("batchsize"), std::string::npos) << e.what();
  }
  EXPECT_THROW(config::parse_run_config("[extra]\n"), ConfigError);
  EXPECT_THROW(config::parse_run_config("batch_size = 3\n"), ConfigError);
  EXPECT_THROW(config::parse_run_config("[mine]\nbatch_size\n"), ConfigError);
  EXPECT_THROW(config::parse_run_config("[mine]\nbatch_size = many\n"), ConfigError);
  EXPECT_THROW(config::parse_run_config("[run]\nmetrics = rlb, accuracy\n"), ConfigError);
  EXPECT_THROW(config::parse_run_config("[spec]\njoint_table = 1, 0; 1\n"), ConfigError);
}

// ----- report serialisation

TEST(Report, DoublesRoundTripExactly) {
  const double values[] = {0.1, 1.0 / 3.0, 0.69314718055994529, 1e-300, 123456789.123456789};
  for (double v : values) {
    const report::Json j = v;
    EXPECT_EQ(report::Json::parse(j.dump()).get<double>(), v);
  }
}

TEST(Report, TraceSerialisesIterationPairs) {
  mine::TrainTrace t;
  t.mi = {0.1, 0.2};
  t.loss = {-0.1, -0.2};
  t.ema = {1.0, 1.0};
  t.heldout_iters = {0};
  t.heldout_mi = {0.05};
  t.final_mi = 0.05;
  const auto j = report::to_json(t);
  EXPECT_EQ(j.at("iterations"), 2);
  EXPECT_EQ(j.at("estimates")[1][0], 1);
  EXPECT_EQ(j.at("estimates")[1][1], 0.2);
  EXPECT_EQ(j.at("heldout_estimates")[0][1], 0.05);
  EXPECT_TRUE(j.at("converged_at").is_null());
}

TEST(Report, MineConfigEchoMatchesFields) {
  mine::MineConfig c;
  c.batch_size = 77;
  const auto j = report::to_json(c);
  EXPECT_EQ(j.at("batch_size"), 77);
  EXPECT_EQ(j.at("map_dim"), 64);
  EXPECT_EQ(j.at("stats_hidden"), (std::vector<int>{128, 128}));
}

}  // namespace
}  // namespace fairlens
