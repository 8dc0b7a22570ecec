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
#include <array>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "fairlens/error.hpp"
#include "fairlens/metrics.hpp"
#include "fairlens/nn.hpp"
#include "fairlens/random.hpp"
#include "fairlens/representation.hpp"

namespace fairlens::datagen {

using nn::Matrix;

enum class SyntheticKind { kColored, kPercentage, kEntropyTarget, kDiscreteJoint };

inline std::string to_string(SyntheticKind k) {
  switch (k) {
    case SyntheticKind::kColored: return "colored";
    case SyntheticKind::kPercentage: return "percentage";
    case SyntheticKind::kEntropyTarget: return "entropy_target";
    case SyntheticKind::kDiscreteJoint: return "discrete_joint";
  }
  return "unknown";
}

inline SyntheticKind kind_from_string(const std::string& s) {
  if (s == "colored") return SyntheticKind::kColored;
  if (s == "percentage") return SyntheticKind::kPercentage;
  if (s == "entropy_target") return SyntheticKind::kEntropyTarget;
  if (s == "discrete_joint") return SyntheticKind::kDiscreteJoint;
  throw ConfigError("unknown synthetic kind '" + s + "'");
}

using Rgb = std::array<double, 3>;

// Default class centres: a ramp from blue to red in steps of 0.1 on the red
// and blue channels. Neighbours are 0.1 apart per channel, so a spread of
// sigma > 0.05 makes adjacent classes overlap.
inline const std::array<Rgb, 10>& default_centers() {
  static const std::array<Rgb, 10> centers = [] {
    std::array<Rgb, 10> c{};
    for (int i = 0; i < 10; ++i) c[i] = {0.05 + 0.1 * i, 0.5, 0.95 - 0.1 * i};
    return c;
  }();
  return centers;
}

struct SyntheticSpec {
  SyntheticKind kind = SyntheticKind::kColored;
  int n = 1000;
  double sigma = 0.0;                 // colored: half-width of the per-channel spread
  int class_count = 2;
  std::vector<double> fractions;      // per-class probabilities; empty = uniform
  std::vector<Rgb> centers;           // colored: empty = default_centers()
  double target_entropy = 0.0;        // entropy_target
  Matrix joint_table;                 // discrete_joint: rows = feature value, cols = attribute
  int noise_dim = 0;                  // standard-normal distractor columns
  double dependence = 1.0;            // percentage: encoding strength before coupling
  double coupling = 2.0;              // percentage: imbalance-to-dependence constant
  std::uint64_t seed = 0;
};

struct Generated {
  RepresentationSet data;
  std::vector<double> fractions;      // class probabilities used for sampling
  std::optional<double> true_mi;      // discrete_joint only
  std::optional<double> true_entropy; // discrete_joint only
  std::optional<double> effective_dependence;  // percentage / entropy_target
};

inline void check_probabilities(std::span<const double> p, const std::string& what) {
  if (p.empty()) throw ConfigError(what + " is empty");
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError(what + " has a negative or non-finite entry");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-12) throw ConfigError(what + " does not sum to 1");
}

namespace detail {

inline std::vector<double> class_fractions(const SyntheticSpec& spec) {
  if (spec.fractions.empty()) {
    if (spec.class_count < 1) throw ConfigError("class_count must be positive");
    return std::vector<double>(static_cast<std::size_t>(spec.class_count), 1.0 / spec.class_count);
  }
  check_probabilities(spec.fractions, "fractions");
  return spec.fractions;
}

inline void append_distractors(Matrix& rep, Eigen::Index first_col, Rng& rng) {
  for (Eigen::Index i = 0; i < rep.rows(); ++i) {
    for (Eigen::Index j = first_col; j < rep.cols(); ++j) rep(i, j) = rng.normal();
  }
}

}  // namespace detail

// Each sample gets its class centre colour jittered uniformly by +-sigma per
// channel (clamped to [0,1]), followed by noise_dim distractor features.
inline Generated gen_colored(const SyntheticSpec& spec) {
  if (spec.n < 2) throw ConfigError("n must be at least 2");
  if (!(spec.sigma >= 0.0)) throw ConfigError("sigma must be non-negative");
  if (spec.noise_dim < 0) throw ConfigError("noise_dim must be non-negative");
  std::vector<Rgb> centers = spec.centers;
  if (centers.empty()) centers.assign(default_centers().begin(), default_centers().end());
  const auto fractions = detail::class_fractions(spec);
  const int m = static_cast<int>(fractions.size());
  if (m > static_cast<int>(centers.size())) {
    throw ConfigError("class_count " + std::to_string(m) + " exceeds the " +
                      std::to_string(centers.size()) + " available centre colours");
  }
  Rng rng(derive_seed(spec.seed, 21));
  Matrix rep(spec.n, 3 + spec.noise_dim);
  std::vector<int> z(static_cast<std::size_t>(spec.n));
  for (int i = 0; i < spec.n; ++i) {
    z[i] = static_cast<int>(rng.categorical(fractions));
    for (int c = 0; c < 3; ++c) {
      const double jitter = spec.sigma > 0.0 ? rng.uniform(-spec.sigma, spec.sigma) : 0.0;
      rep(i, c) = std::clamp(centers[z[i]][c] + jitter, 0.0, 1.0);
    }
  }
  detail::append_distractors(rep, 3, rng);
  std::vector<std::string> names;
  for (int c = 0; c < m; ++c) names.push_back(std::to_string(c));
  Generated g;
  g.data = make_representation_set(std::move(rep), std::move(z), std::move(names));
  g.fractions = fractions;
  return g;
}

// Total-variation distance of `p` from the uniform distribution.
inline double imbalance(std::span<const double> p) {
  const double u = 1.0 / static_cast<double>(p.size());
  double tv = 0.0;
  for (double v : p) tv += std::abs(v - u);
  return 0.5 * tv;
}

// representation = d_eff * one_hot(z) + (1 - d_eff) * noise, where
// d_eff = min(1, dependence * (1 + coupling * imbalance)).
inline Generated gen_percentage(const SyntheticSpec& spec) {
  if (spec.n < 2) throw ConfigError("n must be at least 2");
  if (!(spec.dependence >= 0.0 && spec.dependence <= 1.0)) {
    throw ConfigError("dependence must be in [0, 1]");
  }
  if (!(spec.coupling >= 0.0)) throw ConfigError("coupling must be non-negative");
  if (spec.noise_dim < 0) throw ConfigError("noise_dim must be non-negative");
  const auto fractions = detail::class_fractions(spec);
  const int m = static_cast<int>(fractions.size());
  const double d_eff = std::min(1.0, spec.dependence * (1.0 + spec.coupling * imbalance(fractions)));

  Rng rng(derive_seed(spec.seed, 22));
  Matrix rep(spec.n, m + spec.noise_dim);
  std::vector<int> z(static_cast<std::size_t>(spec.n));
  for (int i = 0; i < spec.n; ++i) {
    z[i] = static_cast<int>(rng.categorical(fractions));
    for (int c = 0; c < m; ++c) {
      rep(i, c) = d_eff * (c == z[i] ? 1.0 : 0.0) + (1.0 - d_eff) * rng.normal();
    }
  }
  detail::append_distractors(rep, m, rng);
  std::vector<std::string> names;
  for (int c = 0; c < m; ++c) names.push_back(std::to_string(c));
  Generated g;
  g.data = make_representation_set(std::move(rep), std::move(z), std::move(names));
  g.fractions = fractions;
  g.effective_dependence = d_eff;
  return g;
}

// Targets within this distance of ln(m) are treated as the balance point, so
// rounded inputs such as 0.6931 or 1.386 select the uniform distribution.
inline constexpr double kEntropySnapTolerance = 5e-4;

// Class probabilities with the requested entropy from the one-vs-rest family
// (p, (1-p)/(m-1), ...), p in [1/m, 1], found by bisection.
inline std::vector<double> fractions_for_entropy(double target, int classes) {
  if (classes < 2) throw ConfigError("entropy target needs class_count >= 2");
  const double h_max = std::log(static_cast<double>(classes));
  if (!(target >= 0.0)) throw ConfigError("target_entropy must be non-negative");
  if (target > h_max + kEntropySnapTolerance) {
    throw ConfigError("target_entropy " + std::to_string(target) + " exceeds ln(" +
                      std::to_string(classes) + ") = " + std::to_string(h_max));
  }
  const double rest = static_cast<double>(classes - 1);
  auto family = [&](double p) {
    std::vector<double> f(static_cast<std::size_t>(classes), (1.0 - p) / rest);
    f[0] = p;
    return f;
  };
  if (h_max - target <= kEntropySnapTolerance) return family(1.0 / classes);
  if (target == 0.0) return family(1.0);

  double lo = 1.0 / classes;  // entropy h_max
  double hi = 1.0;            // entropy 0
  for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (metrics::entropy_of(family(mid)) > target) lo = mid;
    else hi = mid;
  }
  auto f = family(0.5 * (lo + hi));
  // Restore an exact unit sum after rounding.
  f[0] = 1.0 - rest * f[1];
  return f;
}

inline Generated gen_entropy_target(const SyntheticSpec& spec) {
  SyntheticSpec inner = spec;
  inner.kind = SyntheticKind::kPercentage;
  inner.fractions = fractions_for_entropy(spec.target_entropy, spec.class_count);
  return gen_percentage(inner);
}

struct JointTruth {
  double mi = 0.0;
  double entropy_z = 0.0;
};

inline JointTruth joint_truth(const Matrix& table) {
  const Eigen::VectorXd pc = table.rowwise().sum();
  const Eigen::RowVectorXd pz = table.colwise().sum();
  JointTruth t;
  for (Eigen::Index c = 0; c < table.rows(); ++c) {
    for (Eigen::Index z = 0; z < table.cols(); ++z) {
      const double p = table(c, z);
      if (p > 0.0) t.mi += p * std::log(p / (pc(c) * pz(z)));
    }
  }
  for (Eigen::Index z = 0; z < table.cols(); ++z) {
    if (pz(z) > 0.0) t.entropy_z -= pz(z) * std::log(pz(z));
  }
  return t;
}

// Samples (c, z) from the table; representation = one_hot(c) followed by
// noise_dim distractors.
inline Generated gen_discrete_joint(const SyntheticSpec& spec) {
  if (spec.n < 2) throw ConfigError("n must be at least 2");
  if (spec.noise_dim < 0) throw ConfigError("noise_dim must be non-negative");
  const Matrix& table = spec.joint_table;
  if (table.rows() < 1 || table.cols() < 1) throw ConfigError("joint_table is empty");
  std::vector<double> flat;
  for (Eigen::Index c = 0; c < table.rows(); ++c) {
    for (Eigen::Index z = 0; z < table.cols(); ++z) flat.push_back(table(c, z));
  }
  check_probabilities(flat, "joint_table");

  Rng rng(derive_seed(spec.seed, 23));
  const auto rows = table.rows();
  const auto cols = table.cols();
  Matrix rep = Matrix::Zero(spec.n, rows + spec.noise_dim);
  std::vector<int> z(static_cast<std::size_t>(spec.n));
  for (int i = 0; i < spec.n; ++i) {
    const auto cell = static_cast<Eigen::Index>(rng.categorical(flat));
    rep(i, cell / cols) = 1.0;
    z[i] = static_cast<int>(cell % cols);
  }
  detail::append_distractors(rep, rows, rng);
  std::vector<std::string> names;
  for (Eigen::Index c = 0; c < cols; ++c) names.push_back(std::to_string(c));
  const auto truth = joint_truth(table);
  Generated g;
  g.data = make_representation_set(std::move(rep), std::move(z), std::move(names));
  g.fractions.assign(static_cast<std::size_t>(cols), 0.0);
  for (Eigen::Index zc = 0; zc < cols; ++zc) g.fractions[zc] = table.col(zc).sum();
  g.true_mi = truth.mi;
  g.true_entropy = truth.entropy_z;
  return g;
}

inline Generated generate(const SyntheticSpec& spec) {
  switch (spec.kind) {
    case SyntheticKind::kColored: return gen_colored(spec);
    case SyntheticKind::kPercentage: return gen_percentage(spec);
    case SyntheticKind::kEntropyTarget: return gen_entropy_target(spec);
    case SyntheticKind::kDiscreteJoint: return gen_discrete_joint(spec);
  }
  throw ConfigError("unknown synthetic kind");
}

// ---------------------------------------------------------------------------
// Spurious perturbations

enum class PerturbationMode {
  kShuffleFeatures,        // R_S: permute each row's entries
  kUnpairedRepresentations,// R_G: rows re-assigned by a derangement
  kShuffleAttributes,      // Z_S: one permutation of the attribute vector
  kResampleAttributes,     // Z_G: i.i.d. draws from the empirical marginal
};

inline std::string to_string(PerturbationMode m) {
  switch (m) {
    case PerturbationMode::kShuffleFeatures: return "R_S";
    case PerturbationMode::kUnpairedRepresentations: return "R_G";
    case PerturbationMode::kShuffleAttributes: return "Z_S";
    case PerturbationMode::kResampleAttributes: return "Z_G";
  }
  return "unknown";
}

inline PerturbationMode mode_from_string(const std::string& s) {
  if (s == "R_S") return PerturbationMode::kShuffleFeatures;
  if (s == "R_G") return PerturbationMode::kUnpairedRepresentations;
  if (s == "Z_S") return PerturbationMode::kShuffleAttributes;
  if (s == "Z_G") return PerturbationMode::kResampleAttributes;
  throw ConfigError("unknown perturbation mode '" + s + "' (expected R_S, R_G, Z_S or Z_G)");
}

// Uniformly random permutation with no fixed point, by rejection.
inline std::vector<std::size_t> random_derangement(std::size_t n, Rng& rng) {
  if (n < 2) throw DataError("a derangement needs at least 2 elements");
  std::vector<std::size_t> p(n);
  for (;;) {
    std::iota(p.begin(), p.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(p));
    bool ok = true;
    for (std::size_t i = 0; i < n && ok; ++i) ok = p[i] != i;
    if (ok) return p;
  }
}

inline RepresentationSet perturb(const RepresentationSet& data, PerturbationMode mode,
                                 std::uint64_t seed) {
  data.validate();
  RepresentationSet out = data;
  Rng rng(derive_seed(seed, 31));
  const auto n = static_cast<std::size_t>(data.size());
  switch (mode) {
    case PerturbationMode::kShuffleFeatures: {
      std::vector<double> row(static_cast<std::size_t>(data.dim()));
      for (Eigen::Index i = 0; i < out.size(); ++i) {
        for (Eigen::Index j = 0; j < out.dim(); ++j) row[j] = out.representations(i, j);
        rng.shuffle(std::span<double>(row));
        for (Eigen::Index j = 0; j < out.dim(); ++j) out.representations(i, j) = row[j];
      }
      break;
    }
    case PerturbationMode::kUnpairedRepresentations: {
      const auto p = random_derangement(n, rng);
      for (std::size_t i = 0; i < n; ++i) {
        out.representations.row(static_cast<Eigen::Index>(i)) =
            data.representations.row(static_cast<Eigen::Index>(p[i]));
      }
      break;
    }
    case PerturbationMode::kShuffleAttributes:
      rng.shuffle(std::span<int>(out.attributes));
      break;
    case PerturbationMode::kResampleAttributes: {
      std::vector<double> freq(static_cast<std::size_t>(data.num_classes()), 0.0);
      for (int z : data.attributes) freq[static_cast<std::size_t>(z)] += 1.0 / static_cast<double>(n);
      for (auto& z : out.attributes) z = static_cast<int>(rng.categorical(freq));
      break;
    }
  }
  return out;
}

}  // namespace fairlens::datagen
