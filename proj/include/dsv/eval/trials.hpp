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
#include <cstdio>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "dsv/core/binary_io.hpp"
#include "dsv/core/text_format.hpp"
#include "dsv/core/types.hpp"
#include "dsv/eval/eer.hpp"
#include "dsv/frontend/features.hpp"

namespace dsv::eval {

struct UttInfo {
  std::string id;
  std::string speaker;
  Gender gender = Gender::female;
  long num_frames = 0;
};

// A run of frames [start, start + frames) taken from one utterance.
struct Piece {
  std::string utt;
  long start = 0;
  long frames = 0;
};

struct Segment {
  std::string id;
  std::string speaker;
  Gender gender = Gender::female;
  std::vector<Piece> pieces;

  long total_frames() const {
    long n = 0;
    for (const auto& p : pieces) n += p.frames;
    return n;
  }
};

enum class TrialLabel { target, nontarget };

inline std::string_view to_string(TrialLabel l) { return l == TrialLabel::target ? "target" : "nontarget"; }

inline TrialLabel parse_label(std::string_view s) {
  if (s == "target") return TrialLabel::target;
  if (s == "nontarget") return TrialLabel::nontarget;
  throw FormatError("unknown trial label '" + std::string(s) + "'");
}

struct Trial {
  std::string enroll_id;
  std::string test_id;
  TrialLabel label = TrialLabel::nontarget;
  Gender gender = Gender::female;
};

struct ConditionSpec {
  std::string name;
  double enroll_seconds = 4;
  double test_seconds = 4;
};

struct TrialList {
  ConditionSpec condition;
  double frame_period = 0.01;
  std::vector<Segment> enrollments;
  std::vector<Segment> tests;
  std::vector<Trial> trials;
  std::vector<std::string> warnings;

  std::size_t num_targets() const {
    return static_cast<std::size_t>(std::count_if(trials.begin(), trials.end(),
                                                  [](const Trial& t) { return t.label == TrialLabel::target; }));
  }
  std::size_t num_nontargets() const { return trials.size() - num_targets(); }
};

inline long seconds_to_frames(double seconds, double frame_period) {
  if (!(seconds > 0) || !(frame_period > 0)) throw UsageError("segment durations must be positive");
  return std::lround(seconds / frame_period);
}

// Per speaker (utterances sorted by id) the first half is the enrollment
// pool and the rest the test pool. Enrollment entries concatenate pool
// utterances in order until the duration is reached, cutting the last one;
// leftovers are dropped and no utterance feeds two entries. Each test-pool
// utterance long enough gives one test segment (its leading frames).
// Trials are every gender-matched (entry, test) pair.
inline TrialList build_condition(std::span<const UttInfo> utts, const ConditionSpec& cond, double frame_period = 0.01) {
  TrialList list;
  list.condition = cond;
  list.frame_period = frame_period;
  const long enroll_frames = seconds_to_frames(cond.enroll_seconds, frame_period);
  const long test_frames = seconds_to_frames(cond.test_seconds, frame_period);

  std::map<std::string, std::vector<const UttInfo*>> by_speaker;
  std::set<std::string> seen;
  for (const auto& u : utts) {
    if (!seen.insert(u.id).second) throw UsageError("duplicate utterance id '" + u.id + "'");
    auto& v = by_speaker[u.speaker];
    if (!v.empty() && v.front()->gender != u.gender)
      throw UsageError("speaker '" + u.speaker + "' has utterances with different gender tags");
    v.push_back(&u);
  }

  for (auto& [spk, v] : by_speaker) {
    std::sort(v.begin(), v.end(), [](const UttInfo* a, const UttInfo* b) { return a->id < b->id; });
    const std::size_t half = v.size() / 2;
    std::vector<Segment> entries, tests;

    Segment cur{spk + "-e" + std::to_string(entries.size()), spk, v.front()->gender, {}};
    long have = 0;
    for (std::size_t i = 0; i < half; ++i) {
      const long take = std::min(v[i]->num_frames, enroll_frames - have);
      if (take <= 0) continue;
      cur.pieces.push_back({v[i]->id, 0, take});
      have += take;
      if (have == enroll_frames) {
        entries.push_back(cur);
        cur = Segment{spk + "-e" + std::to_string(entries.size()), spk, v.front()->gender, {}};
        have = 0;
      }
    }
    for (std::size_t i = half; i < v.size(); ++i)
      if (v[i]->num_frames >= test_frames) tests.push_back({v[i]->id, spk, v[i]->gender, {{v[i]->id, 0, test_frames}}});

    if (entries.empty() || tests.empty()) {
      list.warnings.push_back("speaker " + spk + " excluded from " + cond.name + ": " +
                              (entries.empty() ? "not enough enrollment audio" : "no test utterance long enough"));
      continue;
    }
    for (auto& e : entries) list.enrollments.push_back(std::move(e));
    for (auto& t : tests) list.tests.push_back(std::move(t));
  }

  for (const auto& e : list.enrollments)
    for (const auto& t : list.tests)
      if (e.gender == t.gender)
        list.trials.push_back(
            {e.id, t.id, e.speaker == t.speaker ? TrialLabel::target : TrialLabel::nontarget, e.gender});
  return list;
}

inline std::vector<TrialList> build_conditions(std::span<const UttInfo> utts, std::span<const ConditionSpec> conds,
                                               double frame_period = 0.01) {
  std::vector<TrialList> out;
  for (const auto& c : conds) out.push_back(build_condition(utts, c, frame_period));
  return out;
}

// Frames of a segment, pieces concatenated in order.
inline frontend::FeatureMatrix segment_features(const Segment& seg,
                                                const std::map<std::string, const frontend::FeatureMatrix*>& feats) {
  if (seg.pieces.empty()) throw UsageError("segment " + seg.id + " is empty");
  frontend::FeatureMatrix out;
  Matrix frames(seg.total_frames(), 0);
  long row = 0;
  for (const auto& p : seg.pieces) {
    auto it = feats.find(p.utt);
    if (it == feats.end()) throw UsageError("segment " + seg.id + " needs features of unknown utterance " + p.utt);
    const auto& f = *it->second;
    if (p.start < 0 || p.start + p.frames > f.num_frames())
      throw UsageError("segment " + seg.id + " reads past the end of " + p.utt);
    if (row == 0) {
      frames.resize(seg.total_frames(), f.dim());
      out.kind = f.kind;
      out.frame_period = f.frame_period;
    } else if (f.kind != out.kind) {
      throw UsageError("segment " + seg.id + " mixes feature kinds");
    }
    frames.middleRows(row, p.frames) = f.frames.middleRows(p.start, p.frames);
    row += p.frames;
  }
  out.frames = std::move(frames);
  return out;
}

// ---- text artifacts ----

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::map<std::string, std::string> condition_attrs(const ConditionSpec& c) {
  return {{"condition", c.name}, {"enroll_seconds", format_double(c.enroll_seconds)},
          {"test_seconds", format_double(c.test_seconds)}};
}

inline ConditionSpec condition_from(const text::VersionHeader& h, const std::string& origin) {
  ConditionSpec c;
  c.name = h.attr("condition");
  if (c.name.empty()) throw FormatError(origin + ": header lacks condition=");
  try {
    c.enroll_seconds = std::stod(h.attr("enroll_seconds"));
    c.test_seconds = std::stod(h.attr("test_seconds"));
  } catch (const std::exception&) {
    throw FormatError(origin + ": header lacks segment durations");
  }
  return c;
}

inline std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> f;
  std::size_t pos = 0;
  while (true) {
    auto tab = line.find('\t', pos);
    f.push_back(line.substr(pos, tab - pos));
    if (tab == std::string::npos) break;
    pos = tab + 1;
  }
  return f;
}

// Trial file: enroll_id, test_id, label, gender.
inline std::string format_trials(const TrialList& list) {
  std::ostringstream out;
  out << text::version_line("trials", condition_attrs(list.condition)) << '\n';
  for (const auto& t : list.trials)
    out << t.enroll_id << '\t' << t.test_id << '\t' << to_string(t.label) << '\t' << to_string(t.gender) << '\n';
  return out.str();
}

// Segment file: role (enroll|test), id, speaker, gender, frame_period and
// comma-separated utt:start:frames pieces.
inline std::string format_segments(const TrialList& list) {
  std::ostringstream out;
  auto attrs = condition_attrs(list.condition);
  attrs["frame_period"] = format_double(list.frame_period);
  out << text::version_line("segments", attrs) << '\n';
  auto put = [&](const char* role, const Segment& s) {
    out << role << '\t' << s.id << '\t' << s.speaker << '\t' << to_string(s.gender) << '\t';
    for (std::size_t i = 0; i < s.pieces.size(); ++i)
      out << (i ? "," : "") << s.pieces[i].utt << ':' << s.pieces[i].start << ':' << s.pieces[i].frames;
    out << '\n';
  };
  for (const auto& s : list.enrollments) put("enroll", s);
  for (const auto& s : list.tests) put("test", s);
  return out.str();
}

inline void write_trial_list(const std::filesystem::path& trials_path, const std::filesystem::path& segments_path,
                             const TrialList& list) {
  io::write_file_atomic(segments_path, format_segments(list));
  io::write_file_atomic(trials_path, format_trials(list));
}

inline TrialList parse_trial_list(const std::string& trials_text, const std::string& segments_text,
                                  const std::string& origin = "trials") {
  TrialList list;
  std::istringstream seg_in(segments_text);
  std::string line;
  if (!std::getline(seg_in, line)) throw FormatError(origin + " segments: empty file");
  const auto sh = text::parse_version_line(line, "segments", origin + " segments");
  list.condition = condition_from(sh, origin + " segments");
  try {
    list.frame_period = std::stod(sh.attr("frame_period"));
  } catch (const std::exception&) {
    throw FormatError(origin + " segments: header lacks frame_period=");
  }
  std::set<std::string> enroll_ids, test_ids;
  int n = 1;
  while (std::getline(seg_in, line)) {
    ++n;
    if (line.empty()) continue;
    auto f = split_tabs(line);
    const std::string where = origin + " segments line " + std::to_string(n);
    if (f.size() != 5) throw FormatError(where + ": expected 5 fields");
    Segment s{f[1], f[2], parse_gender(f[3]), {}};
    std::stringstream pieces(f[4]);
    std::string p;
    while (std::getline(pieces, p, ',')) {
      auto c2 = p.rfind(':');
      auto c1 = c2 == std::string::npos || c2 == 0 ? std::string::npos : p.rfind(':', c2 - 1);
      if (c1 == std::string::npos) throw FormatError(where + ": bad piece '" + p + "'");
      try {
        s.pieces.push_back({p.substr(0, c1), std::stol(p.substr(c1 + 1, c2 - c1 - 1)), std::stol(p.substr(c2 + 1))});
      } catch (const std::exception&) {
        throw FormatError(where + ": bad piece '" + p + "'");
      }
    }
    if (s.pieces.empty()) throw FormatError(where + ": segment has no pieces");
    if (f[0] == "enroll") {
      if (!enroll_ids.insert(s.id).second) throw FormatError(where + ": duplicate enrollment id " + s.id);
      list.enrollments.push_back(std::move(s));
    } else if (f[0] == "test") {
      if (!test_ids.insert(s.id).second) throw FormatError(where + ": duplicate test id " + s.id);
      list.tests.push_back(std::move(s));
    } else {
      throw FormatError(where + ": unknown role '" + f[0] + "'");
    }
  }

  std::istringstream tr_in(trials_text);
  if (!std::getline(tr_in, line)) throw FormatError(origin + ": empty file");
  const auto th = text::parse_version_line(line, "trials", origin);
  if (th.attr("condition") != list.condition.name)
    throw FormatError(origin + ": trial and segment files describe different conditions");
  std::set<std::pair<std::string, std::string>> pairs;
  n = 1;
  while (std::getline(tr_in, line)) {
    ++n;
    if (line.empty()) continue;
    auto f = split_tabs(line);
    const std::string where = origin + " line " + std::to_string(n);
    if (f.size() != 4) throw FormatError(where + ": expected 4 fields");
    if (!enroll_ids.count(f[0]) || !test_ids.count(f[1])) throw FormatError(where + ": trial names an unknown segment");
    if (!pairs.emplace(f[0], f[1]).second) throw FormatError(where + ": duplicate trial");
    list.trials.push_back({f[0], f[1], parse_label(f[2]), parse_gender(f[3])});
  }
  return list;
}

inline TrialList read_trial_list(const std::filesystem::path& trials_path, const std::filesystem::path& segments_path) {
  return parse_trial_list(io::read_file(trials_path), io::read_file(segments_path), trials_path.string());
}

// ---- scores ----

struct ScoredTrial {
  std::string enroll_id;
  std::string test_id;
  double score = 0;
  TrialLabel label = TrialLabel::nontarget;
};

struct ScoreSet {
  std::string system;
  std::string scoring;
  std::string condition;
  std::vector<ScoredTrial> records;
};

// Score file: enroll_id, test_id, score, label.
inline std::string format_scores(const ScoreSet& s) {
  std::ostringstream out;
  out << text::version_line("scores", {{"system", s.system}, {"scoring", s.scoring}, {"condition", s.condition}})
      << '\n';
  for (const auto& r : s.records) {
    if (!std::isfinite(r.score)) throw UsageError("non-finite score for trial " + r.enroll_id + " " + r.test_id);
    out << r.enroll_id << '\t' << r.test_id << '\t' << format_double(r.score) << '\t' << to_string(r.label) << '\n';
  }
  return out.str();
}

inline ScoreSet parse_scores(const std::string& content, const std::string& origin = "scores") {
  std::istringstream in(content);
  std::string line;
  if (!std::getline(in, line)) throw FormatError(origin + ": empty file");
  const auto h = text::parse_version_line(line, "scores", origin);
  ScoreSet s{h.attr("system"), h.attr("scoring"), h.attr("condition"), {}};
  std::set<std::pair<std::string, std::string>> pairs;
  int n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    auto f = split_tabs(line);
    const std::string where = origin + " line " + std::to_string(n);
    if (f.size() != 4) throw FormatError(where + ": expected 4 fields");
    double v = 0;
    try {
      std::size_t used = 0;
      v = std::stod(f[2], &used);
      if (used != f[2].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw FormatError(where + ": bad score '" + f[2] + "'");
    }
    if (!std::isfinite(v)) throw FormatError(where + ": non-finite score");
    if (!pairs.emplace(f[0], f[1]).second) throw FormatError(where + ": duplicate trial");
    s.records.push_back({f[0], f[1], v, parse_label(f[3])});
  }
  return s;
}

inline void write_scores(const std::filesystem::path& path, const ScoreSet& s) {
  io::write_file_atomic(path, format_scores(s));
}

inline ScoreSet read_scores(const std::filesystem::path& path) { return parse_scores(io::read_file(path), path.string()); }

inline EerResult compute_eer(const ScoreSet& s) {
  std::vector<double> tar, non;
  for (const auto& r : s.records) (r.label == TrialLabel::target ? tar : non).push_back(r.score);
  return compute_eer(tar, non);
}

}  // namespace dsv::eval
