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
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "dsv/core/text_format.hpp"
#include "dsv/eval/eer.hpp"
#include "dsv/eval/trials.hpp"

namespace dsv::eval {

struct ReportCell {
  std::string system;
  std::string scoring;
  std::string condition;
  EerResult result;
};

inline ReportCell make_cell(const ScoreSet& s) { return {s.system, s.scoring, s.condition, compute_eer(s)}; }

namespace detail {
template <class T>
void add_unique(std::vector<T>& v, const T& x) {
  if (std::find(v.begin(), v.end(), x) == v.end()) v.push_back(x);
}
}  // namespace detail

// Rows are (system, scoring), columns conditions, both in first-seen order.
inline std::string format_report_table(const std::vector<ReportCell>& cells) {
  std::vector<std::pair<std::string, std::string>> rows;
  std::vector<std::string> cols;
  for (const auto& c : cells) {
    detail::add_unique(rows, {c.system, c.scoring});
    detail::add_unique(cols, c.condition);
  }
  std::size_t w_sys = 7, w_sc = 7, w_col = 8;
  for (const auto& [s, sc] : rows) {
    w_sys = std::max(w_sys, s.size());
    w_sc = std::max(w_sc, sc.size());
  }
  for (const auto& c : cols) w_col = std::max(w_col, c.size());

  std::ostringstream out;
  auto pad = [](const std::string& s, std::size_t w) { return s + std::string(w > s.size() ? w - s.size() : 0, ' '); };
  auto rpad = [](const std::string& s, std::size_t w) { return std::string(w > s.size() ? w - s.size() : 0, ' ') + s; };
  out << "EER (%)\n";
  out << pad("System", w_sys) << "  " << pad("Scoring", w_sc);
  for (const auto& c : cols) out << "  " << rpad(c, w_col);
  out << '\n' << std::string(w_sys + 2 + w_sc + cols.size() * (w_col + 2), '-') << '\n';
  for (const auto& [sys, sc] : rows) {
    out << pad(sys, w_sys) << "  " << pad(sc, w_sc);
    for (const auto& col : cols) {
      auto it = std::find_if(cells.begin(), cells.end(), [&](const ReportCell& c) {
        return c.system == sys && c.scoring == sc && c.condition == col;
      });
      std::string v = "-";
      if (it != cells.end()) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.2f", it->result.eer);
        v = buf;
      }
      out << "  " << rpad(v, w_col);
    }
    out << '\n';
  }
  return out.str();
}

inline std::string format_report_tsv(const std::vector<ReportCell>& cells) {
  std::ostringstream out;
  out << text::version_line("report") << '\n';
  out << "system\tscoring\tcondition\teer_percent\tthreshold\ttargets\tnontargets\n";
  for (const auto& c : cells)
    out << c.system << '\t' << c.scoring << '\t' << c.condition << '\t' << format_double(c.result.eer) << '\t'
        << format_double(c.result.threshold) << '\t' << c.result.targets << '\t' << c.result.nontargets << '\n';
  return out.str();
}

}  // namespace dsv::eval
