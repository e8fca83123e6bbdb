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
#include <string>

#include "dsv/core/types.hpp"

namespace dsv::backend {

inline double cosine_score(const Vector& a, const Vector& b) {
  if (a.size() != b.size())
    throw UsageError("cosine of vectors with " + std::to_string(a.size()) + " and " + std::to_string(b.size()) +
                     " dimensions");
  const double na = a.norm(), nb = b.norm();
  if (na == 0 || nb == 0) throw UsageError("cosine of a zero vector");
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

// Rows of `vectors` minus `mean`, scaled to unit length.
inline Matrix center_and_length_normalize(const Matrix& vectors, const RowVector& mean) {
  if (mean.size() != vectors.cols()) throw UsageError("centering mean has the wrong dimension");
  Matrix out = vectors.rowwise() - mean;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double n = out.row(i).norm();
    if (!(n > 1e-12)) throw UsageError("degenerate vector: row " + std::to_string(i) + " coincides with the mean");
    out.row(i) /= n;
  }
  return out;
}

inline Vector center_and_length_normalize_vector(const Vector& v, const Vector& mean) {
  Matrix row = v.transpose();
  return center_and_length_normalize(row, mean.transpose()).row(0).transpose();
}

}  // namespace dsv::backend
