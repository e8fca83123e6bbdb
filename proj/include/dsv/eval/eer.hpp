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
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "dsv/core/error.hpp"

namespace dsv::eval {

struct EerResult {
  double eer = 0;        // percent
  double threshold = 0;  // accept when score >= threshold
  std::size_t targets = 0;
  std::size_t nontargets = 0;
};

// One operating point per distinct score plus +inf. Miss rate counts targets
// strictly below the threshold, false-accept rate nontargets at or above it.
// The miss curve rises and the false-accept curve falls; the EER is read off
// the straight segment joining the last point where misses < false accepts
// and the first where they are not.
inline EerResult compute_eer(std::span<const double> target, std::span<const double> nontarget) {
  if (target.empty() && nontarget.empty()) throw UsageError("no trials to score");
  if (target.empty()) throw UsageError("no target trials: EER is undefined for a single-class score set");
  if (nontarget.empty()) throw UsageError("no nontarget trials: EER is undefined for a single-class score set");
  for (double s : target)
    if (!std::isfinite(s)) throw UsageError("non-finite target score");
  for (double s : nontarget)
    if (!std::isfinite(s)) throw UsageError("non-finite nontarget score");

  std::vector<double> tar(target.begin(), target.end()), non(nontarget.begin(), nontarget.end());
  std::sort(tar.begin(), tar.end());
  std::sort(non.begin(), non.end());
  std::vector<double> thresholds;
  thresholds.reserve(tar.size() + non.size() + 1);
  std::merge(tar.begin(), tar.end(), non.begin(), non.end(), std::back_inserter(thresholds));
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  thresholds.push_back(std::numeric_limits<double>::infinity());

  const double nt = static_cast<double>(tar.size()), nn = static_cast<double>(non.size());
  auto frr = [&](double th) { return static_cast<double>(std::lower_bound(tar.begin(), tar.end(), th) - tar.begin()) / nt; };
  auto far = [&](double th) { return static_cast<double>(non.end() - std::lower_bound(non.begin(), non.end(), th)) / nn; };

  double prev_frr = frr(thresholds[0]), prev_far = far(thresholds[0]);
  for (std::size_t k = 1; k < thresholds.size(); ++k) {
    const double fr = frr(thresholds[k]), fa = far(thresholds[k]);
    if (fr >= fa) {
      const double d0 = prev_far - prev_frr, d1 = fr - fa;
      const double t = d0 / (d0 + d1);
      EerResult r;
      r.eer = 100.0 * (prev_frr + t * (fr - prev_frr));
      r.threshold = std::isinf(thresholds[k]) ? thresholds[k - 1]
                                              : thresholds[k - 1] + t * (thresholds[k] - thresholds[k - 1]);
      r.targets = tar.size();
      r.nontargets = non.size();
      return r;
    }
    prev_frr = fr;
    prev_far = fa;
  }
  throw Error("EER sweep did not cross");  // unreachable: the last point has misses 1, false accepts 0
}

}  // namespace dsv::eval
