// Copyright 2026 The dsv Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "dsv/core/types.hpp"

namespace dsv::nn {

// Activations are T x D matrices (rows are frames). After a temporal pool
// the sequence has a single row.
using Tensor = Matrix;
using ParameterMap = std::map<std::string, Matrix>;

enum class LayerKind { affine, relu, sigmoid, time_delay, temporal_mean_pool };

inline std::string to_string(LayerKind k) {
  switch (k) {
    case LayerKind::affine: return "affine";
    case LayerKind::relu: return "relu";
    case LayerKind::sigmoid: return "sigmoid";
    case LayerKind::time_delay: return "time_delay";
    case LayerKind::temporal_mean_pool: return "temporal_mean_pool";
  }
  return "?";
}

inline LayerKind parse_layer_kind(const std::string& s) {
  for (auto k : {LayerKind::affine, LayerKind::relu, LayerKind::sigmoid, LayerKind::time_delay,
                 LayerKind::temporal_mean_pool})
    if (to_string(k) == s) return k;
  throw FormatError("unknown layer kind '" + s + "'");
}

// One entry of the fixed layer vocabulary.
//  - affine: y = x W + b, parameters "<name>.W" (in x out) and "<name>.b" (1 x out)
//  - time_delay: row t of the output concatenates input rows t+o for each
//    offset o, clamped to the sequence (edge replication); no parameters
//  - temporal_mean_pool: T x D -> 1 x D
struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  std::string name;
  int input_dim = 0;
  int output_dim = 0;
  std::vector<int> offsets;

  static LayerSpec affine(std::string name, int in, int out) {
    return {LayerKind::affine, std::move(name), in, out, {}};
  }
  static LayerSpec relu() { return {LayerKind::relu, "", 0, 0, {}}; }
  static LayerSpec sigmoid() { return {LayerKind::sigmoid, "", 0, 0, {}}; }
  static LayerSpec time_delay(std::vector<int> offsets) {
    return {LayerKind::time_delay, "", 0, 0, std::move(offsets)};
  }
  static LayerSpec splice(int context) {
    std::vector<int> offs;
    for (int j = -context; j <= context; ++j) offs.push_back(j);
    return time_delay(std::move(offs));
  }
  static LayerSpec mean_pool() { return {LayerKind::temporal_mean_pool, "", 0, 0, {}}; }

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

enum class Mode { train, infer };

struct ForwardCache {
  std::vector<Tensor> inputs;   // input to each executed layer
  std::vector<Tensor> outputs;  // output of each executed layer
  std::uint64_t generation = 0;
  bool valid = false;
};

struct Gradients {
  ParameterMap params;
  Tensor input;
};

// A named-parameter view used by the optimizer and the gradient checker.
struct ParamRef {
  std::string name;
  Matrix* value;
};

class Network {
 public:
  Network() = default;

  // Validates shapes, then draws affine weights uniformly in +-sqrt(6 / fan_in)
  // when a relu follows (He) and +-sqrt(6 / (fan_in + fan_out)) otherwise
  // (Glorot). Biases start at zero.
  Network(int input_dim, std::vector<LayerSpec> layers, std::uint64_t seed)
      : input_dim_(input_dim), layers_(std::move(layers)), seed_(seed) {
    validate_shapes();
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const auto& l = layers_[i];
      if (l.kind != LayerKind::affine) continue;
      const bool rectified = i + 1 < layers_.size() && layers_[i + 1].kind == LayerKind::relu;
      const double limit = std::sqrt(6.0 / (rectified ? l.input_dim : l.input_dim + l.output_dim));
      std::uniform_real_distribution<double> dist(-limit, limit);
      Matrix w(l.input_dim, l.output_dim);
      for (Eigen::Index i = 0; i < w.rows(); ++i)
        for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = dist(rng);
      params_[l.name + ".W"] = std::move(w);
      params_[l.name + ".b"] = Matrix::Zero(1, l.output_dim);
    }
  }

  // Rebuilds a network from persisted specs and parameters.
  static Network from_parameters(int input_dim, std::vector<LayerSpec> layers, ParameterMap params,
                                 std::uint64_t seed) {
    Network net;
    net.input_dim_ = input_dim;
    net.layers_ = std::move(layers);
    net.seed_ = seed;
    net.validate_shapes();
    for (const auto& l : net.layers_) {
      if (l.kind != LayerKind::affine) continue;
      for (auto [suffix, rows] : {std::pair{".W", l.input_dim}, std::pair{".b", 1}}) {
        auto it = params.find(l.name + suffix);
        if (it == params.end()) throw FormatError("missing parameter '" + l.name + suffix + "'");
        if (it->second.rows() != rows || it->second.cols() != l.output_dim)
          throw FormatError("parameter '" + l.name + suffix + "' has the wrong shape");
      }
    }
    for (const auto& [name, value] : params) {
      if (!value.allFinite()) throw FormatError("parameter '" + name + "' is not finite");
    }
    net.params_ = std::move(params);
    return net;
  }

  int input_dim() const { return input_dim_; }
  int output_dim() const { return output_dim_at(layers_.size()); }
  std::uint64_t seed() const { return seed_; }
  const std::vector<LayerSpec>& layers() const { return layers_; }
  const ParameterMap& parameters() const { return params_; }
  std::uint64_t generation() const { return generation_; }

  // Width of the activations after the first `count` layers.
  int output_dim_at(std::size_t count) const {
    int d = input_dim_;
    for (std::size_t i = 0; i < count && i < layers_.size(); ++i) d = propagate_dim(layers_[i], d);
    return d;
  }

  // Mutable access invalidates outstanding forward caches.
  std::vector<ParamRef> parameter_refs() {
    ++generation_;
    std::vector<ParamRef> refs;
    for (auto& [name, value] : params_) refs.push_back({name, &value});
    return refs;
  }

  std::size_t num_parameters() const {
    std::size_t n = 0;
    for (const auto& [name, value] : params_) n += static_cast<std::size_t>(value.size());
    return n;
  }

  // Runs layers [0, end_layer). Fills `cache` for a later backward() when
  // given; the result is deterministic in (parameters, input).
  Tensor forward(const Tensor& input, Mode mode = Mode::infer, ForwardCache* cache = nullptr,
                 std::size_t end_layer = static_cast<std::size_t>(-1)) const {
    (void)mode;  // no stochastic layers; train and infer agree
    end_layer = std::min(end_layer, layers_.size());
    if (input.cols() != input_dim_)
      throw ConfigError("network input width " + std::to_string(input.cols()) + " != expected " +
                        std::to_string(input_dim_));
    if (input.rows() < 1) throw UsageError("network input has no frames");
    if (cache) {
      cache->inputs.clear();
      cache->outputs.clear();
      cache->generation = generation_;
      cache->valid = true;
    }
    Tensor x = input;
    for (std::size_t i = 0; i < end_layer; ++i) {
      Tensor y = apply(layers_[i], x);
      if (cache) {
        cache->inputs.push_back(std::move(x));
        cache->outputs.push_back(y);
      }
      x = std::move(y);
    }
    return x;
  }

  // Backpropagates `output_grad` through the layers recorded in `cache`.
  // The returned map has an entry for every parameter (zero for layers the
  // cached forward pass did not reach).
  Gradients backward(const Tensor& output_grad, const ForwardCache& cache) const {
    if (!cache.valid || cache.generation != generation_)
      throw UsageError("stale forward cache: parameters changed since the forward pass");
    Gradients g;
    for (const auto& [name, value] : params_) g.params[name] = Matrix::Zero(value.rows(), value.cols());
    Tensor grad = output_grad;
    for (std::size_t i = cache.inputs.size(); i-- > 0;) {
      const auto& l = layers_[i];
      const Tensor& in = cache.inputs[i];
      const Tensor& out = cache.outputs[i];
      if (grad.rows() != out.rows() || grad.cols() != out.cols())
        throw UsageError("gradient shape does not match layer output");
      switch (l.kind) {
        case LayerKind::affine: {
          const Matrix& w = params_.at(l.name + ".W");
          g.params[l.name + ".W"].noalias() = in.transpose() * grad;
          g.params[l.name + ".b"] = grad.colwise().sum();
          Tensor next = grad * w.transpose();
          grad = std::move(next);
          break;
        }
        case LayerKind::relu:
          grad = (in.array() > 0.0).select(grad, 0.0);
          break;
        case LayerKind::sigmoid:
          grad = (grad.array() * out.array() * (1.0 - out.array())).matrix();
          break;
        case LayerKind::time_delay: {
          const Eigen::Index t_count = in.rows();
          const Eigen::Index d = in.cols();
          Tensor next = Tensor::Zero(t_count, d);
          for (Eigen::Index t = 0; t < t_count; ++t)
            for (std::size_t j = 0; j < l.offsets.size(); ++j) {
              const auto src = std::clamp<Eigen::Index>(t + l.offsets[j], 0, t_count - 1);
              next.row(src) += grad.block(t, static_cast<Eigen::Index>(j) * d, 1, d);
            }
          grad = std::move(next);
          break;
        }
        case LayerKind::temporal_mean_pool: {
          Tensor next = grad.replicate(in.rows(), 1) / static_cast<double>(in.rows());
          grad = std::move(next);
          break;
        }
      }
    }
    g.input = std::move(grad);
    return g;
  }

 private:
  static int propagate_dim(const LayerSpec& l, int d) {
    switch (l.kind) {
      case LayerKind::affine: return l.output_dim;
      case LayerKind::time_delay: return d * static_cast<int>(l.offsets.size());
      default: return d;
    }
  }

  void validate_shapes() const {
    if (input_dim_ <= 0) throw ConfigError("network input width must be positive");
    std::set<std::string> names;
    int d = input_dim_;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const auto& l = layers_[i];
      const std::string where = "layer " + std::to_string(i) + " (" + to_string(l.kind) + ")";
      if (l.kind == LayerKind::affine) {
        if (l.input_dim <= 0 || l.output_dim <= 0) throw ConfigError(where + ": affine dims must be positive");
        if (l.input_dim != d)
          throw ConfigError(where + ": expects width " + std::to_string(l.input_dim) + ", receives " +
                            std::to_string(d));
        if (l.name.empty() || !names.insert(l.name).second)
          throw ConfigError(where + ": affine layers need unique non-empty names");
      }
      if (l.kind == LayerKind::time_delay) {
        if (l.offsets.empty()) throw ConfigError(where + ": no offsets");
        for (std::size_t j = 1; j < l.offsets.size(); ++j)
          if (l.offsets[j] <= l.offsets[j - 1]) throw ConfigError(where + ": offsets must be strictly increasing");
      }
      d = propagate_dim(l, d);
    }
  }

  Tensor apply(const LayerSpec& l, const Tensor& x) const {
    switch (l.kind) {
      case LayerKind::affine: {
        Tensor y = x * params_.at(l.name + ".W");
        y.rowwise() += params_.at(l.name + ".b").row(0);
        return y;
      }
      case LayerKind::relu:
        return x.cwiseMax(0.0);
      case LayerKind::sigmoid:
        return x.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
      case LayerKind::time_delay: {
        const Eigen::Index t_count = x.rows();
        const Eigen::Index d = x.cols();
        Tensor y(t_count, d * static_cast<Eigen::Index>(l.offsets.size()));
        for (Eigen::Index t = 0; t < t_count; ++t)
          for (std::size_t j = 0; j < l.offsets.size(); ++j) {
            const auto src = std::clamp<Eigen::Index>(t + l.offsets[j], 0, t_count - 1);
            y.block(t, static_cast<Eigen::Index>(j) * d, 1, d) = x.row(src);
          }
        return y;
      }
      case LayerKind::temporal_mean_pool:
        return x.colwise().mean();
    }
    return x;
  }

  int input_dim_ = 0;
  std::vector<LayerSpec> layers_;
  ParameterMap params_;
  std::uint64_t seed_ = 0;
  std::uint64_t generation_ = 0;
};

// Frame offsets that can influence output frame t: the Minkowski sum of the
// offset sets of every time_delay layer before the first pooling layer,
// restricted to the first `count` layers.
inline std::vector<int> dependency_offsets(const std::vector<LayerSpec>& layers,
                                           std::size_t count = static_cast<std::size_t>(-1)) {
  std::set<int> reach{0};
  for (std::size_t i = 0; i < layers.size() && i < count; ++i) {
    const auto& l = layers[i];
    if (l.kind == LayerKind::temporal_mean_pool) break;
    if (l.kind != LayerKind::time_delay) continue;
    std::set<int> next;
    for (int r : reach)
      for (int o : l.offsets) next.insert(r + o);
    reach = std::move(next);
  }
  return {reach.begin(), reach.end()};
}

// Span of the receptive field in frames (max - min + 1 of the dependency set).
inline int receptive_field(const std::vector<LayerSpec>& layers, std::size_t count = static_cast<std::size_t>(-1)) {
  auto deps = dependency_offsets(layers, count);
  return deps.back() - deps.front() + 1;
}

}  // namespace dsv::nn
