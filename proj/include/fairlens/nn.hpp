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
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fairlens/error.hpp"
#include "fairlens/random.hpp"

namespace fairlens::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation { kIdentity, kRelu };

inline std::string to_string(Activation a) {
  return a == Activation::kRelu ? "relu" : "identity";
}

inline Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::kRelu;
  if (s == "identity") return Activation::kIdentity;
  throw ConfigError("unknown activation '" + s + "'");
}

// y = act(x W^T + b), samples in rows.
struct Layer {
  Matrix weight;  // [out x in]
  Vector bias;    // [out]
  Activation activation = Activation::kIdentity;

  Eigen::Index in_dim() const { return weight.cols(); }
  Eigen::Index out_dim() const { return weight.rows(); }
};

// Parameter-shaped buffers. Used for gradients and Adam moments.
struct ParamBuffers {
  std::vector<Matrix> weight;
  std::vector<Vector> bias;

  void set_zero() {
    for (auto& w : weight) w.setZero();
    for (auto& b : bias) b.setZero();
  }

  bool all_zero() const {
    for (const auto& w : weight) if (!w.isZero(0.0)) return false;
    for (const auto& b : bias) if (!b.isZero(0.0)) return false;
    return true;
  }

  ParamBuffers& operator+=(const ParamBuffers& other) {
    if (other.weight.size() != weight.size()) {
      throw DimensionError("gradient accumulation over mismatched nets");
    }
    for (std::size_t i = 0; i < weight.size(); ++i) {
      weight[i] += other.weight[i];
      bias[i] += other.bias[i];
    }
    return *this;
  }
};

class DenseNet {
 public:
  DenseNet() = default;

  explicit DenseNet(std::vector<Layer> layers) : layers_(std::move(layers)) {
    if (layers_.empty()) throw ConfigError("a dense net needs at least one layer");
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const auto& l = layers_[i];
      if (l.bias.size() != l.out_dim()) {
        throw DimensionError("layer " + std::to_string(i) + ": bias size != output dim");
      }
      if (i > 0 && layers_[i - 1].out_dim() != l.in_dim()) {
        throw DimensionError("layer " + std::to_string(i) + ": input dim does not chain");
      }
      if (!l.weight.allFinite() || !l.bias.allFinite()) {
        throw DataError("layer " + std::to_string(i) + ": non-finite parameters");
      }
    }
  }

  Eigen::Index input_dim() const { return layers_.front().in_dim(); }
  Eigen::Index output_dim() const { return layers_.back().out_dim(); }
  std::size_t num_layers() const { return layers_.size(); }

  std::span<const Layer> layers() const { return layers_; }
  std::span<Layer> mutable_layers() {
    ++version_;
    return layers_;
  }

  std::size_t num_parameters() const {
    std::size_t total = 0;
    for (const auto& l : layers_) total += l.weight.size() + l.bias.size();
    return total;
  }

  ParamBuffers zeros_like() const {
    ParamBuffers p;
    for (const auto& l : layers_) {
      p.weight.push_back(Matrix::Zero(l.out_dim(), l.in_dim()));
      p.bias.push_back(Vector::Zero(l.out_dim()));
    }
    return p;
  }

  bool same_shape(const ParamBuffers& p) const {
    if (p.weight.size() != layers_.size() || p.bias.size() != layers_.size()) return false;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      if (p.weight[i].rows() != layers_[i].out_dim() ||
          p.weight[i].cols() != layers_[i].in_dim() ||
          p.bias[i].size() != layers_[i].out_dim()) {
        return false;
      }
    }
    return true;
  }

  // Incremented on every parameter mutation; forward caches record it.
  std::uint64_t version() const { return version_; }

  bool operator==(const DenseNet& other) const {
    if (layers_.size() != other.layers_.size()) return false;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const auto& a = layers_[i];
      const auto& b = other.layers_[i];
      if (a.activation != b.activation || a.weight.rows() != b.weight.rows() ||
          a.weight.cols() != b.weight.cols() || a.weight != b.weight || a.bias != b.bias) {
        return false;
      }
    }
    return true;
  }

 private:
  std::vector<Layer> layers_;
  std::uint64_t version_ = 0;
};

// Glorot-uniform weights, zero biases. Hidden layers use `hidden`, the last
// layer uses `output`.
inline DenseNet init_dense_net(std::span<const int> layer_dims, Activation hidden,
                               std::uint64_t seed,
                               Activation output = Activation::kIdentity) {
  if (layer_dims.size() < 2) throw ConfigError("layer_dims needs at least two entries");
  for (int d : layer_dims) {
    if (d < 1) throw ConfigError("layer dimensions must be positive");
  }
  Rng rng(seed);
  std::vector<Layer> layers;
  for (std::size_t i = 0; i + 1 < layer_dims.size(); ++i) {
    const int in = layer_dims[i];
    const int out = layer_dims[i + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    Layer l;
    l.weight.resize(out, in);
    for (Eigen::Index r = 0; r < out; ++r) {
      for (Eigen::Index c = 0; c < in; ++c) l.weight(r, c) = rng.uniform(-limit, limit);
    }
    l.bias = Vector::Zero(out);
    l.activation = (i + 2 == layer_dims.size()) ? output : hidden;
    layers.push_back(std::move(l));
  }
  return DenseNet(std::move(layers));
}

inline DenseNet init_dense_net(std::initializer_list<int> layer_dims, Activation hidden,
                               std::uint64_t seed,
                               Activation output = Activation::kIdentity) {
  std::vector<int> dims(layer_dims);
  return init_dense_net(std::span<const int>(dims), hidden, seed, output);
}

struct ForwardCache {
  const DenseNet* net = nullptr;
  std::uint64_t version = 0;
  std::vector<Matrix> inputs;       // input to each layer
  std::vector<Matrix> preactivations;
};

struct ForwardResult {
  Matrix output;
  ForwardCache cache;
};

inline ForwardResult forward(const DenseNet& net, const Matrix& batch) {
  if (net.num_layers() == 0) throw UsageError("forward on an empty net");
  if (batch.cols() != net.input_dim()) {
    throw DimensionError("forward: batch has " + std::to_string(batch.cols()) +
                         " columns, net expects " + std::to_string(net.input_dim()));
  }
  if (!batch.allFinite()) throw DataError("forward: non-finite input");

  ForwardResult result;
  result.cache.net = &net;
  result.cache.version = net.version();
  Matrix activ = batch;
  for (const auto& layer : net.layers()) {
    Matrix pre = activ * layer.weight.transpose();
    pre.rowwise() += layer.bias.transpose();
    result.cache.inputs.push_back(std::move(activ));
    activ = layer.activation == Activation::kRelu ? Matrix(pre.cwiseMax(0.0)) : pre;
    result.cache.preactivations.push_back(std::move(pre));
  }
  result.output = std::move(activ);
  return result;
}

// Output-only convenience for inference.
inline Matrix predict(const DenseNet& net, const Matrix& batch) {
  return forward(net, batch).output;
}

struct BackwardResult {
  ParamBuffers grads;
  Matrix input_grad;  // dL/d(batch), for chaining into upstream nets
};

inline BackwardResult backward(const DenseNet& net, const ForwardCache& cache,
                               const Matrix& output_grad) {
  if (cache.net != &net || cache.version != net.version() ||
      cache.inputs.size() != net.num_layers()) {
    throw UsageError("backward: forward cache does not belong to this net state");
  }
  if (output_grad.rows() != cache.inputs.front().rows() ||
      output_grad.cols() != net.output_dim()) {
    throw DimensionError("backward: output gradient shape mismatch");
  }
  BackwardResult result;
  result.grads.weight.resize(net.num_layers());
  result.grads.bias.resize(net.num_layers());
  Matrix g = output_grad;
  for (std::size_t i = net.num_layers(); i-- > 0;) {
    const auto& layer = net.layers()[i];
    if (layer.activation == Activation::kRelu) {
      g = g.cwiseProduct((cache.preactivations[i].array() > 0.0).cast<double>().matrix());
    }
    result.grads.weight[i] = g.transpose() * cache.inputs[i];
    result.grads.bias[i] = g.colwise().sum().transpose();
    g = g * layer.weight;
  }
  result.input_grad = std::move(g);
  return result;
}

struct AdamState {
  ParamBuffers first_moment;
  ParamBuffers second_moment;
  std::uint64_t step = 0;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

inline AdamState init_adam(const DenseNet& net, double learning_rate = 1e-3, double beta1 = 0.9,
                           double beta2 = 0.999, double epsilon = 1e-8) {
  if (!(learning_rate > 0) || !(beta1 > 0) || !(beta2 > 0) || !(epsilon > 0) || beta1 >= 1 ||
      beta2 >= 1) {
    throw ConfigError("Adam hyperparameters out of range");
  }
  AdamState s;
  s.first_moment = net.zeros_like();
  s.second_moment = net.zeros_like();
  s.learning_rate = learning_rate;
  s.beta1 = beta1;
  s.beta2 = beta2;
  s.epsilon = epsilon;
  return s;
}

// One bias-corrected Adam update, in place.
inline void adam_step(DenseNet& net, AdamState& state, const ParamBuffers& grads) {
  if (!net.same_shape(grads) || !net.same_shape(state.first_moment) ||
      !net.same_shape(state.second_moment)) {
    throw DimensionError("adam_step: gradient or moment shapes do not match the net");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  const double lr = state.learning_rate;
  const double eps = state.epsilon;

  auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g.cwiseProduct(g);
    param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  };

  auto layers = net.mutable_layers();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    update(layers[i].weight, state.first_moment.weight[i], state.second_moment.weight[i],
           grads.weight[i]);
    update(layers[i].bias, state.first_moment.bias[i], state.second_moment.bias[i],
           grads.bias[i]);
  }
}

inline Matrix one_hot(std::span<const int> labels, int num_classes) {
  if (num_classes < 1) throw ConfigError("one_hot: num_classes must be positive");
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(labels.size()), num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes) {
      throw DataError("one_hot: label " + std::to_string(labels[i]) + " at row " +
                      std::to_string(i) + " outside [0, " + std::to_string(num_classes) + ")");
    }
    out(static_cast<Eigen::Index>(i), labels[i]) = 1.0;
  }
  return out;
}

}  // namespace fairlens::nn
