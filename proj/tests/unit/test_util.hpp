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

#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <unistd.h>

#include "fairlens/nn.hpp"
#include "fairlens/random.hpp"
#include "fairlens/representation.hpp"

namespace fairlens::testing {

inline double rel_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
}

// Central finite difference of `loss` over every parameter of `net`.
// Returns the worst relative error against `grads`.
inline double worst_fd_error(nn::DenseNet& net, const nn::ParamBuffers& grads,
                             const std::function<double()>& loss, double h = 1e-4) {
  double worst = 0.0;
  auto layers = net.mutable_layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    auto probe = [&](double& p, double analytic) {
      const double saved = p;
      p = saved + h;
      const double up = loss();
      p = saved - h;
      const double down = loss();
      p = saved;
      worst = std::max(worst, rel_error(analytic, (up - down) / (2 * h)));
    };
    for (Eigen::Index i = 0; i < layers[l].weight.size(); ++i) {
      probe(layers[l].weight.data()[i], grads.weight[l].data()[i]);
    }
    for (Eigen::Index i = 0; i < layers[l].bias.size(); ++i) {
      probe(layers[l].bias.data()[i], grads.bias[l].data()[i]);
    }
  }
  return worst;
}

// Zero-initialised biases put rows that a ReLU layer silences exactly on the
// next layer's kink, where central differences are one-sided. Random
// instances therefore get random biases bounded away from zero.
inline void randomize_biases(nn::DenseNet& net, Rng& rng) {
  for (auto& layer : net.mutable_layers()) {
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) {
      const double mag = 0.1 + 0.5 * std::abs(rng.normal());
      layer.bias(i) = rng.below(2) == 0 ? mag : -mag;
    }
  }
}

inline Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

// R = one_hot(Z) for balanced-ish binary Z.
inline RepresentationSet one_hot_dataset(int n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<int> z(static_cast<std::size_t>(n));
  for (auto& v : z) v = static_cast<int>(rng.below(2));
  return make_representation_set(nn::one_hot(z, 2), z);
}

// R standard normal, Z fair coin, drawn independently.
inline RepresentationSet independent_dataset(int n, int d, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<int> z(static_cast<std::size_t>(n));
  for (auto& v : z) v = static_cast<int>(rng.below(2));
  return make_representation_set(random_matrix(n, d, rng), z);
}

// Spearman rank correlation for distinct values.
inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  auto ranks = [](const std::vector<double>& v) {
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      double rank = 0;
      for (std::size_t j = 0; j < v.size(); ++j) rank += v[j] < v[i] ? 1 : 0;
      r[i] = rank;
    }
    return r;
  };
  const auto ra = ranks(a), rb = ranks(b);
  const double n = static_cast<double>(a.size());
  double d2 = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d2 += (ra[i] - rb[i]) * (ra[i] - rb[i]);
  return 1.0 - 6.0 * d2 / (n * (n * n - 1.0));
}

// Fresh scratch directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("fairlens_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

}  // namespace fairlens::testing
