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

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dsv/core/binary_io.hpp"
#include "dsv/frontend/features.hpp"

namespace dsv::frontend {

// Feature container, little-endian:
//   "DSVF" | u32 version | string kind | u64 T | u64 D | f64 frame_period |
//   T*D f32 row-major | u64 id_count | id_count strings
// A string is a u32 byte length followed by the bytes. id_count is either 0
// (plain feature file) or T (one id per row, used for d-vectors/embeddings).
inline constexpr char kFeatureMagic[] = "DSVF";
inline constexpr std::uint32_t kFeatureVersion = 1;

struct FeatureArchive {
  FeatureMatrix features;
  std::vector<std::string> row_ids;
};

inline std::string encode_features(const FeatureMatrix& feat, const std::vector<std::string>& row_ids = {}) {
  if (!row_ids.empty() && static_cast<Eigen::Index>(row_ids.size()) != feat.frames.rows())
    throw UsageError("id table size must match row count");
  io::ByteWriter w;
  w.put_bytes(std::string_view(kFeatureMagic, 4));
  w.put<std::uint32_t>(kFeatureVersion);
  w.put_string(feat.kind.tag());
  w.put<std::uint64_t>(static_cast<std::uint64_t>(feat.frames.rows()));
  w.put<std::uint64_t>(static_cast<std::uint64_t>(feat.frames.cols()));
  w.put<double>(feat.frame_period);
  for (Eigen::Index t = 0; t < feat.frames.rows(); ++t)
    for (Eigen::Index d = 0; d < feat.frames.cols(); ++d) w.put<float>(static_cast<float>(feat.frames(t, d)));
  w.put<std::uint64_t>(row_ids.size());
  for (const auto& id : row_ids) w.put_string(id);
  return w.bytes();
}

inline FeatureArchive decode_features(std::string bytes, const std::string& origin = {}) {
  io::ByteReader r(std::move(bytes), origin);
  if (r.remaining() < 8 || r.get_bytes(4) != std::string_view(kFeatureMagic, 4))
    throw FormatError("not a feature container: '" + origin + "'");
  const auto version = r.get<std::uint32_t>();
  if (version != kFeatureVersion)
    throw FormatError("feature container '" + origin + "' has version " + std::to_string(version) +
                      ", expected " + std::to_string(kFeatureVersion));
  FeatureArchive a;
  a.features.kind = FeatureKind::parse(r.get_string());
  const auto rows = r.get<std::uint64_t>();
  const auto cols = r.get<std::uint64_t>();
  a.features.frame_period = r.get<double>();
  if (rows * cols * sizeof(float) > r.remaining()) throw FormatError("truncated feature data in '" + origin + "'");
  if (a.features.kind.base_dim == 0) a.features.kind.base_dim = static_cast<int>(cols);
  a.features.frames.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::uint64_t t = 0; t < rows; ++t)
    for (std::uint64_t d = 0; d < cols; ++d) a.features.frames(t, d) = r.get<float>();
  const auto ids = r.get<std::uint64_t>();
  if (ids != 0 && ids != rows) throw FormatError("id table size mismatch in '" + origin + "'");
  a.row_ids.reserve(ids);
  for (std::uint64_t i = 0; i < ids; ++i) a.row_ids.push_back(r.get_string());
  if (!r.at_end()) throw FormatError("trailing bytes in '" + origin + "'");
  return a;
}

inline void write_features(const std::filesystem::path& path, const FeatureMatrix& feat,
                           const std::vector<std::string>& row_ids = {}) {
  io::write_file_atomic(path, encode_features(feat, row_ids));
}

inline FeatureArchive read_features(const std::filesystem::path& path) {
  return decode_features(io::read_file(path), path.string());
}

}  // namespace dsv::frontend
