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

#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "dsv/nn/network.hpp"

namespace dsv::nn {

struct TrainerConfig {
  double learning_rate = 0.01;
  double lr_decay = 0.5;   // multiplied in every `decay_every` epochs
  int decay_every = 1000;  // epochs
  double momentum = 0.9;
  int max_epochs = 10;
  int batch_size = 16;
  double clip_norm = 5.0;  // global gradient norm; <= 0 disables clipping
  std::uint64_t seed = 1;

  void validate() const {
    if (!(learning_rate > 0)) throw ConfigError("trainer: learning_rate must be positive");
    if (momentum < 0 || momentum >= 1) throw ConfigError("trainer: momentum must be in [0, 1)");
    if (!(lr_decay > 0) || lr_decay > 1) throw ConfigError("trainer: lr_decay must be in (0, 1]");
    if (decay_every < 1) throw ConfigError("trainer: decay_every must be >= 1");
    if (max_epochs < 1) throw ConfigError("trainer: max_epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("trainer: batch_size must be >= 1");
  }

  double learning_rate_at(int epoch) const {
    return learning_rate * std::pow(lr_decay, epoch / decay_every);
  }
};

inline double global_norm(const ParameterMap& grads) {
  double sq = 0;
  for (const auto& [name, g] : grads) sq += g.squaredNorm();
  return std::sqrt(sq);
}

// SGD with classical momentum: v <- m v - lr g; w <- w + v. Gradients are
// rescaled to `clip_norm` first when their global norm exceeds it.
class Sgd {
 public:
  explicit Sgd(TrainerConfig cfg) : cfg_(cfg) { cfg_.validate(); }

  const TrainerConfig& config() const { return cfg_; }

  // Returns the pre-clipping global gradient norm.
  double step(std::span<const ParamRef> params, const ParameterMap& grads, double lr, long step_index = 0) {
    for (const auto& p : params) {
      auto it = grads.find(p.name);
      if (it == grads.end()) throw UsageError("no gradient for parameter '" + p.name + "'");
      if (!it->second.allFinite())
        throw TrainingDiverged("non-finite gradient for '" + p.name + "'", p.name, step_index);
      if (it->second.rows() != p.value->rows() || it->second.cols() != p.value->cols())
        throw UsageError("gradient shape mismatch for '" + p.name + "'");
    }
    double norm = 0;
    for (const auto& p : params) norm += grads.at(p.name).squaredNorm();
    norm = std::sqrt(norm);
    const double scale = (cfg_.clip_norm > 0 && norm > cfg_.clip_norm) ? cfg_.clip_norm / norm : 1.0;
    for (const auto& p : params) {
      const Matrix& g = grads.at(p.name);
      auto [it, inserted] = velocity_.try_emplace(p.name, Matrix::Zero(g.rows(), g.cols()));
      Matrix& v = it->second;
      v = cfg_.momentum * v - (lr * scale) * g;
      *p.value += v;
    }
    return norm;
  }

  double step(Network& net, const ParameterMap& grads, double lr, long step_index = 0) {
    auto refs = net.parameter_refs();
    return step(refs, grads, lr, step_index);
  }

 private:
  TrainerConfig cfg_;
  std::map<std::string, Matrix> velocity_;
};

}  // namespace dsv::nn
