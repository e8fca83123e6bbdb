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
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "dsv/core/types.hpp"

namespace dsv::backend {

// Dense 0..K-1 class indices for string labels, in first-appearance order.
inline std::vector<int> encode_labels(std::span<const std::string> labels, int* num_classes = nullptr) {
  std::map<std::string, int> idx;
  std::vector<int> out;
  out.reserve(labels.size());
  for (const auto& l : labels) out.push_back(idx.emplace(l, static_cast<int>(idx.size())).first->second);
  if (num_classes) *num_classes = static_cast<int>(idx.size());
  return out;
}

struct ClassStats {
  int num_classes = 0;
  std::vector<int> counts;
  Matrix class_means;  // K x D
  RowVector mean;
  Matrix within;   // (1/N) sum over samples of (x - mu_c)(x - mu_c)'
  Matrix between;  // (1/N) sum over classes of n_c (mu_c - mu)(mu_c - mu)'
};

inline ClassStats class_stats(const Matrix& x, std::span<const int> labels) {
  if (static_cast<std::size_t>(x.rows()) != labels.size()) throw UsageError("one label per vector is required");
  ClassStats s;
  s.num_classes = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
  if (*std::min_element(labels.begin(), labels.end()) < 0) throw UsageError("negative class label");
  s.counts.assign(static_cast<std::size_t>(s.num_classes), 0);
  s.class_means = Matrix::Zero(s.num_classes, x.cols());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    ++s.counts[static_cast<std::size_t>(labels[i])];
    s.class_means.row(labels[i]) += x.row(static_cast<Eigen::Index>(i));
  }
  for (int c = 0; c < s.num_classes; ++c) {
    if (s.counts[static_cast<std::size_t>(c)] == 0) throw UsageError("class labels must be dense");
    s.class_means.row(c) /= s.counts[static_cast<std::size_t>(c)];
  }
  const auto n = static_cast<double>(x.rows());
  s.mean = x.colwise().mean();
  Matrix centered(x.rows(), x.cols());
  for (std::size_t i = 0; i < labels.size(); ++i)
    centered.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(i)) - s.class_means.row(labels[i]);
  s.within = centered.transpose() * centered / n;
  Matrix dm = s.class_means.rowwise() - s.mean;
  for (int c = 0; c < s.num_classes; ++c) dm.row(c) *= std::sqrt(static_cast<double>(s.counts[static_cast<std::size_t>(c)]));
  s.between = dm.transpose() * dm / n;
  return s;
}

struct LdaTransform {
  RowVector mean;
  Matrix W;  // D x d, columns ordered by decreasing eigenvalue
  Vector eigenvalues;
  bool regularized = false;
  double epsilon = 0;

  int input_dim() const { return static_cast<int>(W.rows()); }
  int output_dim() const { return static_cast<int>(W.cols()); }

  Matrix apply(const Matrix& x) const {
    if (x.cols() != W.rows()) throw UsageError("LDA input has the wrong dimension");
    return (x.rowwise() - mean) * W;
  }
  Vector apply(const Vector& v) const { return apply(Matrix(v.transpose())).row(0).transpose(); }
};

// Solves S_b w = lambda S_w w and keeps the top `target_dim` directions,
// scaled so that W' S_w W = I. S_w gets eps * I (eps = 1e-6 tr(S_w) / D)
// only when it is numerically singular.
inline LdaTransform fit_lda(const Matrix& x, std::span<const int> labels, int target_dim) {
  auto s = class_stats(x, labels);
  if (s.num_classes < 2) throw UsageError("LDA needs at least two classes");
  for (int c : s.counts)
    if (c < 2) throw UsageError("LDA needs at least two vectors per class");
  const auto d = static_cast<int>(x.cols());
  if (target_dim < 1 || target_dim > std::min(d, s.num_classes - 1))
    throw UsageError("LDA target dimension " + std::to_string(target_dim) + " exceeds min(D, classes - 1) = " +
                     std::to_string(std::min(d, s.num_classes - 1)));

  LdaTransform t;
  t.mean = s.mean;
  Matrix sw = s.within;
  Eigen::SelfAdjointEigenSolver<Matrix> sw_eig(sw, Eigen::EigenvaluesOnly);
  const double top = sw_eig.eigenvalues().maxCoeff();
  if (!(top > 0)) throw UsageError("within-class scatter is zero");
  if (sw_eig.eigenvalues().minCoeff() < 1e-10 * top) {
    t.regularized = true;
    t.epsilon = 1e-6 * sw.trace() / d;
    sw.diagonal().array() += t.epsilon;
  }
  Eigen::LLT<Matrix> llt(sw);
  if (llt.info() != Eigen::Success) throw UsageError("within-class scatter is not positive definite");
  // M = L^-1 S_b L^-T is symmetric with the same eigenvalues as S_w^-1 S_b
  const Matrix l_inv = llt.matrixL().solve(Matrix::Identity(d, d));
  Matrix m = l_inv * s.between * l_inv.transpose();
  m = 0.5 * (m + m.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(m);
  t.W.resize(d, target_dim);
  t.eigenvalues.resize(target_dim);
  for (int k = 0; k < target_dim; ++k) {
    const int col = d - 1 - k;  // ascending order from the solver
    Vector w = l_inv.transpose() * eig.eigenvectors().col(col);
    Eigen::Index arg;
    w.cwiseAbs().maxCoeff(&arg);
    if (w(arg) < 0) w = -w;
    t.W.col(k) = w;
    t.eigenvalues(k) = eig.eigenvalues()(col);
  }
  return t;
}

}  // namespace dsv::backend
