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
#include <functional>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "dsv/backend/lda.hpp"

namespace dsv::backend {

// Two-covariance model: x = y + e, y ~ N(mu, phi_b), e ~ N(0, phi_w).
struct PldaModel {
  Vector mean;
  Matrix phi_b;
  Matrix phi_w;
  bool regularized = false;

  // LLR(e, t) = e'Qe/2 + t'Qt/2 + e'Pt + c on centered vectors
  Matrix Q;
  Matrix P;
  double c = 0;

  int dim() const { return static_cast<int>(mean.size()); }
};

inline double log_det_spd(const Matrix& a) {
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success) throw UsageError("matrix is not positive definite");
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

// Fills the scoring terms from mean, phi_b, phi_w.
inline void prepare_scoring(PldaModel& m) {
  const auto d = m.mean.size();
  if (m.phi_b.rows() != d || m.phi_w.rows() != d) throw UsageError("PLDA covariance dimension mismatch");
  const Matrix total = m.phi_b + m.phi_w;
  Matrix joint(2 * d, 2 * d);
  joint << total, m.phi_b, m.phi_b, total;
  Eigen::LLT<Matrix> joint_llt(joint);
  Eigen::LLT<Matrix> total_llt(total);
  if (joint_llt.info() != Eigen::Success || total_llt.info() != Eigen::Success)
    throw UsageError("PLDA covariances are not positive definite");
  const Matrix joint_inv = joint_llt.solve(Matrix::Identity(2 * d, 2 * d));
  const Matrix total_inv = total_llt.solve(Matrix::Identity(d, d));
  const Matrix a = 0.5 * (joint_inv.topLeftCorner(d, d) + joint_inv.bottomRightCorner(d, d));
  const Matrix b = joint_inv.topRightCorner(d, d);
  m.Q = total_inv - a;
  m.Q = 0.5 * (m.Q + m.Q.transpose()).eval();
  m.P = -0.5 * (b + b.transpose());
  m.c = -0.5 * log_det_spd(joint) + log_det_spd(total);
}

inline double plda_score(const PldaModel& m, const Vector& enroll, const Vector& test) {
  if (enroll.size() != m.dim() || test.size() != m.dim()) throw UsageError("PLDA input has the wrong dimension");
  const Vector e = enroll - m.mean, t = test - m.mean;
  return 0.5 * e.dot(m.Q * e) + 0.5 * t.dot(m.Q * t) + e.dot(m.P * t) + m.c;
}

inline double gaussian_log_density(const Vector& x, const Vector& mean, const Matrix& cov) {
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success) throw UsageError("covariance is not positive definite");
  const Vector z = llt.matrixL().solve(x - mean);
  return -0.5 * (static_cast<double>(x.size()) * std::log(2.0 * std::numbers::pi) + log_det_spd(cov) + z.squaredNorm());
}

struct PldaFitOptions {
  int iterations = 10;
  bool require_normalized = true;  // inputs must be unit length
};

// Marginal log-likelihood of the data under the model, summed over classes.
// For one class, log p(X) = log p(X | y) + log p(y) - log p(y | X) at any y;
// the posterior mean is used.
inline double plda_log_likelihood(const PldaModel& m, const Matrix& x, std::span<const int> labels) {
  auto s = class_stats(x, labels);
  const Eigen::LLT<Matrix> b_llt(m.phi_b), w_llt(m.phi_w);
  const auto d = m.dim();
  const Matrix b_inv = b_llt.solve(Matrix::Identity(d, d));
  const Matrix w_inv = w_llt.solve(Matrix::Identity(d, d));
  double total = 0;
  std::vector<std::vector<Eigen::Index>> members(static_cast<std::size_t>(s.num_classes));
  for (std::size_t i = 0; i < labels.size(); ++i)
    members[static_cast<std::size_t>(labels[i])].push_back(static_cast<Eigen::Index>(i));
  for (int c = 0; c < s.num_classes; ++c) {
    const auto& rows = members[static_cast<std::size_t>(c)];
    const double n = static_cast<double>(rows.size());
    const Matrix post_cov = (b_inv + n * w_inv).inverse();
    const Vector post_mean = post_cov * (b_inv * m.mean + n * w_inv * s.class_means.row(c).transpose());
    for (auto r : rows) total += gaussian_log_density(x.row(r).transpose(), post_mean, m.phi_w);
    total += gaussian_log_density(post_mean, m.mean, m.phi_b);
    total += 0.5 * (static_cast<double>(d) * std::log(2.0 * std::numbers::pi) + log_det_spd(post_cov));
  }
  return total;
}

// EM for the two-covariance model with the mean fixed to the data mean.
// `on_iteration` receives (iteration, log-likelihood after the update).
inline PldaModel fit_plda(const Matrix& x, std::span<const int> labels, const PldaFitOptions& opts = {},
                          const std::function<void(int, double)>& on_iteration = {}) {
  if (opts.iterations < 0) throw UsageError("PLDA iterations must be >= 0");
  auto s = class_stats(x, labels);
  if (s.num_classes < 2) throw UsageError("PLDA needs at least two classes");
  for (int c : s.counts)
    if (c < 2) throw UsageError("PLDA needs at least two vectors per class");
  if (opts.require_normalized) {
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      if (std::abs(x.row(i).norm() - 1.0) > 1e-6)
        throw UsageError("PLDA input must be centered and length-normalized (row " + std::to_string(i) + ")");
  }
  const auto d = x.cols();
  PldaModel m;
  m.mean = s.mean.transpose();
  m.phi_w = s.within;
  m.phi_b = s.between;
  auto regularize = [&](Matrix& cov) {
    cov = 0.5 * (cov + cov.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Matrix> eig(cov, Eigen::EigenvaluesOnly);
    const double top = std::max(eig.eigenvalues().maxCoeff(), 1e-300);
    if (eig.eigenvalues().minCoeff() < 1e-10 * top) {
      cov.diagonal().array() += 1e-6 * std::max(cov.trace(), 1e-12) / static_cast<double>(d);
      m.regularized = true;
    }
  };
  regularize(m.phi_w);
  regularize(m.phi_b);

  std::vector<std::vector<Eigen::Index>> members(static_cast<std::size_t>(s.num_classes));
  for (std::size_t i = 0; i < labels.size(); ++i)
    members[static_cast<std::size_t>(labels[i])].push_back(static_cast<Eigen::Index>(i));

  for (int it = 0; it < opts.iterations; ++it) {
    const Matrix b_inv = m.phi_b.llt().solve(Matrix::Identity(d, d));
    const Matrix w_inv = m.phi_w.llt().solve(Matrix::Identity(d, d));
    Matrix new_b = Matrix::Zero(d, d), new_w = Matrix::Zero(d, d);
    for (int c = 0; c < s.num_classes; ++c) {
      const auto& rows = members[static_cast<std::size_t>(c)];
      const double n = static_cast<double>(rows.size());
      const Matrix post_cov = (b_inv + n * w_inv).inverse();
      const Vector post_mean = post_cov * (b_inv * m.mean + n * w_inv * s.class_means.row(c).transpose());
      const Vector dy = post_mean - m.mean;
      new_b += dy * dy.transpose() + post_cov;
      for (auto r : rows) {
        const Vector e = x.row(r).transpose() - post_mean;
        new_w += e * e.transpose() + post_cov;
      }
    }
    m.phi_b = new_b / s.num_classes;
    m.phi_w = new_w / static_cast<double>(x.rows());
    regularize(m.phi_w);
    regularize(m.phi_b);
    if (on_iteration) on_iteration(it, plda_log_likelihood(m, x, labels));
  }
  prepare_scoring(m);
  return m;
}

}  // namespace dsv::backend
