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

#include <optional>
#include <span>
#include <string>

#include "dsv/backend/cosine.hpp"
#include "dsv/backend/lda.hpp"
#include "dsv/backend/plda.hpp"
#include "dsv/core/bundle.hpp"

namespace dsv::backend {

enum class BackendKind { lda, plda };

inline std::string to_string(BackendKind k) { return k == BackendKind::lda ? "lda" : "plda"; }

inline BackendKind parse_backend_kind(const std::string& s) {
  if (s == "lda") return BackendKind::lda;
  if (s == "plda") return BackendKind::plda;
  throw UsageError("unknown back-end '" + s + "' (expected lda or plda)");
}

// Scoring chain applied to raw d-vectors:
//   lda:  center + length-normalize, LDA, cosine
//   plda: center + length-normalize, LDA, center + length-normalize, PLDA
struct Backend {
  BackendKind kind = BackendKind::lda;
  Vector center;
  LdaTransform lda;
  Vector plda_center;
  std::optional<PldaModel> plda;

  Vector project(const Vector& raw) const {
    Vector v = lda.apply(center_and_length_normalize_vector(raw, center));
    return kind == BackendKind::plda ? center_and_length_normalize_vector(v, plda_center) : v;
  }

  double score(const Vector& enroll, const Vector& test) const {
    const Vector e = project(enroll), t = project(test);
    return kind == BackendKind::plda ? plda_score(*plda, e, t) : cosine_score(e, t);
  }
};

struct BackendOptions {
  int lda_dim = 150;  // clipped to min(D, classes - 1)
  int plda_iterations = 10;
};

inline Backend fit_backend(BackendKind kind, const Matrix& vectors, std::span<const int> labels,
                           const BackendOptions& opts = {}) {
  int classes = 0;
  for (int l : labels) classes = std::max(classes, l + 1);
  Backend b;
  b.kind = kind;
  b.center = vectors.colwise().mean().transpose();
  const Matrix normed = center_and_length_normalize(vectors, b.center.transpose());
  const int dim = std::min({opts.lda_dim, static_cast<int>(vectors.cols()), classes - 1});
  b.lda = fit_lda(normed, labels, dim);
  if (kind == BackendKind::plda) {
    const Matrix projected = b.lda.apply(normed);
    b.plda_center = projected.colwise().mean().transpose();
    b.plda = fit_plda(center_and_length_normalize(projected, b.plda_center.transpose()), labels,
                      {.iterations = opts.plda_iterations, .require_normalized = true});
  }
  return b;
}

inline Bundle to_bundle(const Backend& b) {
  Bundle out;
  out.kind = to_string(b.kind);
  out.meta["lda_regularized"] = b.lda.regularized;
  out.meta["lda_epsilon"] = b.lda.epsilon;
  out.arrays["center"] = b.center.transpose();
  out.arrays["lda/mean"] = b.lda.mean;
  out.arrays["lda/W"] = b.lda.W;
  out.arrays["lda/eigenvalues"] = b.lda.eigenvalues.transpose();
  if (b.plda) {
    out.meta["plda_regularized"] = b.plda->regularized;
    out.arrays["plda/center"] = b.plda_center.transpose();
    out.arrays["plda/mean"] = b.plda->mean.transpose();
    out.arrays["plda/phi_b"] = b.plda->phi_b;
    out.arrays["plda/phi_w"] = b.plda->phi_w;
  }
  return out;
}

inline Backend backend_from_bundle(const Bundle& in) {
  Backend b;
  b.kind = parse_backend_kind(in.kind);
  b.center = in.array("center").row(0).transpose();
  b.lda.mean = in.array("lda/mean").row(0);
  b.lda.W = in.array("lda/W");
  b.lda.eigenvalues = in.array("lda/eigenvalues").row(0).transpose();
  b.lda.regularized = in.meta.value("lda_regularized", false);
  b.lda.epsilon = in.meta.value("lda_epsilon", 0.0);
  if (b.center.size() != b.lda.W.rows() || b.lda.mean.size() != b.lda.W.rows())
    throw FormatError("LDA shapes are inconsistent");
  if (b.kind == BackendKind::plda) {
    PldaModel m;
    b.plda_center = in.array("plda/center").row(0).transpose();
    m.mean = in.array("plda/mean").row(0).transpose();
    m.phi_b = in.array("plda/phi_b");
    m.phi_w = in.array("plda/phi_w");
    m.regularized = in.meta.value("plda_regularized", false);
    if (m.mean.size() != b.lda.W.cols() || b.plda_center.size() != m.mean.size())
      throw FormatError("PLDA shapes are inconsistent with the LDA projection");
    try {
      prepare_scoring(m);
    } catch (const UsageError& e) {
      throw FormatError(std::string("stored PLDA model is invalid: ") + e.what());
    }
    b.plda = std::move(m);
  }
  return b;
}

}  // namespace dsv::backend
