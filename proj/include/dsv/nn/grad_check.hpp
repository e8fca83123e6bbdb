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
#include <functional>
#include <map>
#include <span>
#include <string>

#include "dsv/nn/network.hpp"

namespace dsv::nn {

struct GradCheckReport {
  // Per parameter: ||analytic - numeric|| / max(||analytic||, ||numeric||).
  std::map<std::string, double> relative_error;
  // Per parameter: largest entry-wise absolute difference.
  std::map<std::string, double> max_abs_error;

  double worst() const {
    double w = 0;
    for (const auto& [name, e] : relative_error) w = std::max(w, e);
    return w;
  }
  bool passed(double tolerance) const { return !relative_error.empty() && worst() < tolerance; }
};

// Compares `analytic` against central differences of `loss` with respect
// to every referenced parameter entry. `loss` must be a pure function of
// the current parameter values.
inline GradCheckReport grad_check(std::span<const ParamRef> params, const ParameterMap& analytic,
                                  const std::function<double()>& loss, double step = 1e-4) {
  GradCheckReport report;
  for (const auto& p : params) {
    auto it = analytic.find(p.name);
    if (it == analytic.end()) throw UsageError("analytic gradient missing for '" + p.name + "'");
    const Matrix& a = it->second;
    Matrix numeric(p.value->rows(), p.value->cols());
    for (Eigen::Index i = 0; i < p.value->rows(); ++i)
      for (Eigen::Index j = 0; j < p.value->cols(); ++j) {
        double& w = (*p.value)(i, j);
        const double saved = w;
        w = saved + step;
        const double up = loss();
        w = saved - step;
        const double down = loss();
        w = saved;
        numeric(i, j) = (up - down) / (2.0 * step);
      }
    const double denom = std::max({a.norm(), numeric.norm(), 1e-300});
    report.relative_error[p.name] = (a - numeric).norm() / denom;
    report.max_abs_error[p.name] = (a - numeric).cwiseAbs().maxCoeff();
  }
  return report;
}

// Checks a network's parameter gradients for a loss computed from its
// output. `head` maps the output to (loss, d loss / d output).
inline GradCheckReport grad_check(Network& net, const Tensor& input,
                                  const std::function<std::pair<double, Tensor>(const Tensor&)>& head,
                                  double step = 1e-4) {
  ForwardCache cache;
  Tensor out = net.forward(input, Mode::train, &cache);
  auto [loss_value, out_grad] = head(out);
  (void)loss_value;
  auto grads = net.backward(out_grad, cache);
  auto refs = net.parameter_refs();
  return grad_check(refs, grads.params, [&] { return head(net.forward(input, Mode::train)).first; }, step);
}

}  // namespace dsv::nn
