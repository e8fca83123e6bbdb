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
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dsv/core/binary_io.hpp"
#include "dsv/core/text_format.hpp"
#include "dsv/core/types.hpp"

namespace dsv::datagen {

struct UtteranceEntry {
  std::string id;
  std::string speaker_id;
  Gender gender = Gender::female;
  std::string path;  // relative paths resolve against the manifest's directory
  double duration_seconds = 0.0;
};

// Tab-delimited text with a header line:
//   utterance_id  speaker_id  gender  path  duration_seconds
struct Manifest {
  std::vector<UtteranceEntry> utterances;
  std::filesystem::path base_dir;

  std::filesystem::path resolve(const UtteranceEntry& u) const {
    std::filesystem::path p(u.path);
    return p.is_absolute() ? p : base_dir / p;
  }

  // Speaker ids in first-appearance order.
  std::vector<std::string> speakers() const {
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (const auto& u : utterances)
      if (seen.insert(u.speaker_id).second) out.push_back(u.speaker_id);
    return out;
  }
};

inline constexpr char kManifestHeader[] = "utterance_id\tspeaker_id\tgender\tpath\tduration_seconds";

inline std::string format_manifest(const Manifest& m) {
  std::ostringstream out;
  out << text::version_line("manifest") << '\n' << kManifestHeader << '\n';
  char dur[64];
  for (const auto& u : m.utterances) {
    std::snprintf(dur, sizeof dur, "%.6f", u.duration_seconds);
    out << u.id << '\t' << u.speaker_id << '\t' << to_string(u.gender) << '\t' << u.path << '\t' << dur << '\n';
  }
  return out.str();
}

inline void write_manifest(const std::filesystem::path& path, const Manifest& m) {
  io::write_file_atomic(path, format_manifest(m));
}

inline Manifest parse_manifest(const std::string& text, const std::filesystem::path& base_dir = {}) {
  Manifest m;
  m.base_dir = base_dir;
  std::istringstream in(text);
  std::string line;
  std::set<std::string> ids;
  const std::string origin = base_dir.empty() ? "manifest" : (base_dir / "manifest").string();
  if (!std::getline(in, line)) throw FormatError(origin + ": empty file");
  text::parse_version_line(line, "manifest", origin);
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line_no == 2 && line == kManifestHeader) continue;
    std::istringstream fields(line);
    UtteranceEntry u;
    std::string gender;
    if (!std::getline(fields, u.id, '\t') || !std::getline(fields, u.speaker_id, '\t') ||
        !std::getline(fields, gender, '\t') || !std::getline(fields, u.path, '\t') || !(fields >> u.duration_seconds))
      throw FormatError("manifest line " + std::to_string(line_no) + " is malformed");
    u.gender = parse_gender(gender);
    if (!ids.insert(u.id).second) throw FormatError("duplicate utterance id '" + u.id + "' in manifest");
    m.utterances.push_back(std::move(u));
  }
  return m;
}

inline Manifest read_manifest(const std::filesystem::path& path) {
  return parse_manifest(io::read_file(path), path.parent_path());
}

// Speaker-disjoint split. Speakers of each gender are shuffled with `seed`
// and interleaved (f, m, f, m, ...) so both halves stay gender-balanced when
// possible; the first `train_speakers` go to training, the next
// `eval_speakers` to evaluation.
inline std::pair<Manifest, Manifest> split_train_eval(const Manifest& m, int train_speakers, int eval_speakers,
                                                      std::uint64_t seed) {
  const auto all = m.speakers();
  if (train_speakers < 0 || eval_speakers < 0 ||
      static_cast<std::size_t>(train_speakers + eval_speakers) > all.size())
    throw UsageError("split asks for " + std::to_string(train_speakers + eval_speakers) + " speakers, corpus has " +
                     std::to_string(all.size()));
  std::map<std::string, Gender> gender;
  for (const auto& u : m.utterances) gender.emplace(u.speaker_id, u.gender);
  std::vector<std::string> female, male;
  for (const auto& s : all) (gender[s] == Gender::female ? female : male).push_back(s);
  std::mt19937_64 rng(seed);
  std::shuffle(female.begin(), female.end(), rng);
  std::shuffle(male.begin(), male.end(), rng);
  std::vector<std::string> order;
  for (std::size_t i = 0; i < std::max(female.size(), male.size()); ++i) {
    if (i < female.size()) order.push_back(female[i]);
    if (i < male.size()) order.push_back(male[i]);
  }
  std::set<std::string> train_set(order.begin(), order.begin() + train_speakers);
  std::set<std::string> eval_set(order.begin() + train_speakers, order.begin() + train_speakers + eval_speakers);

  Manifest train, eval;
  train.base_dir = eval.base_dir = m.base_dir;
  for (const auto& u : m.utterances) {
    if (train_set.count(u.speaker_id)) train.utterances.push_back(u);
    if (eval_set.count(u.speaker_id)) eval.utterances.push_back(u);
  }
  return {std::move(train), std::move(eval)};
}

}  // namespace dsv::datagen
