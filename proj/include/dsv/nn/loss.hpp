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
#include <span>
#include <string>

#include "dsv/nn/network.hpp"

namespace dsv::nn {

struct LossAndGrad {
  double loss = 0.0;
  Tensor grad;
};

// -log softmax(logits)[label] for a single row of logits; gradient is
// softmax(logits) - one_hot(label). Max-subtracted for stability.
inline LossAndGrad softmax_xent(const RowVector& logits, int label) {
  if (label < 0 || label >= logits.size())
    throw UsageError("label " + std::to_string(label) + " out of range for " + std::to_string(logits.size()) +
                     " classes");
  const double m = logits.maxCoeff();
  RowVector e = (logits.array() - m).exp().matrix();
  const double z = e.sum();
  LossAndGrad out;
  out.loss = std::log(z) - (logits(label) - m);
  out.grad = e / z;
  out.grad(0, label) -= 1.0;
  return out;
}

// Mean cross-entropy over the rows [first, first + count) of a T x C logit
// matrix, each row labelled `labels[row - first]`. Rows outside the range
// receive zero gradient.
inline LossAndGrad softmax_xent_rows(const Tensor& logits, std::span<const int> labels, Eigen::Index first = 0) {
  const auto count = static_cast<Eigen::Index>(labels.size());
  if (count == 0 || first < 0 || first + count > logits.rows()) throw UsageError("bad label range");
  LossAndGrad out;
  out.grad = Tensor::Zero(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < count; ++i) {
    auto r = softmax_xent(logits.row(first + i), labels[static_cast<std::size_t>(i)]);
    out.loss += r.loss;
    out.grad.row(first + i) = r.grad.row(0);
  }
  out.loss /= static_cast<double>(count);
  out.grad /= static_cast<double>(count);
  return out;
}

}  // namespace dsv::nn
