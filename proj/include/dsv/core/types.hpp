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

#include <Eigen/Dense>

#include <string>
#include <string_view>

#include "dsv/core/error.hpp"

namespace dsv {

// Rows are time frames (or samples), columns are feature dimensions.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

enum class Gender { female, male };

inline std::string_view to_string(Gender g) { return g == Gender::female ? "f" : "m"; }

inline Gender parse_gender(std::string_view s) {
  if (s == "f" || s == "female") return Gender::female;
  if (s == "m" || s == "male") return Gender::male;
  throw FormatError("unknown gender tag '" + std::string(s) + "'");
}

}  // namespace dsv
