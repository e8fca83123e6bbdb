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

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "dsv/datagen/corpus.hpp"
#include "dsv/frontend/feature_io.hpp"
#include "dsv/frontend/features.hpp"

namespace dsv::frontend {

// Features of one utterance together with its labels.
struct LabeledFeatures {
  std::string utt_id;
  std::string speaker_id;
  Gender gender = Gender::female;
  FeatureMatrix feat;
};

inline std::filesystem::path feature_path(const std::filesystem::path& dir, const std::string& utt_id) {
  return dir / (utt_id + ".feat");
}

// Reads <dir>/<utt>.feat for every manifest entry, in manifest order.
inline std::vector<LabeledFeatures> load_feature_set(const datagen::Manifest& m, const std::filesystem::path& dir) {
  std::vector<LabeledFeatures> out;
  out.reserve(m.utterances.size());
  for (const auto& u : m.utterances) {
    auto archive = read_features(feature_path(dir, u.id));
    out.push_back({u.id, u.speaker_id, u.gender, std::move(archive.features)});
  }
  return out;
}

// Dense class indices for the speakers, in first-appearance order.
inline std::map<std::string, int> speaker_index(const std::vector<LabeledFeatures>& set) {
  std::map<std::string, int> idx;
  for (const auto& u : set) idx.emplace(u.speaker_id, static_cast<int>(idx.size()));
  return idx;
}

}  // namespace dsv::frontend
