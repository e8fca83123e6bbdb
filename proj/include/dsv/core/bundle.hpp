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
#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "dsv/core/binary_io.hpp"
#include "dsv/core/types.hpp"

namespace dsv {

// Versioned container shared by models and back-ends, little-endian:
//   "DSVB" | u32 version | string kind | string metadata (JSON) |
//   u64 array count | per array: string name | u64 rows | u64 cols | f64 row-major
// Arrays are stored at full precision so a reload reproduces scores exactly.
inline constexpr char kBundleMagic[] = "DSVB";
inline constexpr std::uint32_t kBundleVersion = 1;

struct Bundle {
  std::string kind;
  nlohmann::json meta = nlohmann::json::object();
  std::map<std::string, Matrix> arrays;

  const Matrix& array(const std::string& name) const {
    auto it = arrays.find(name);
    if (it == arrays.end()) throw FormatError(kind + " bundle lacks array '" + name + "'");
    return it->second;
  }
};

inline std::string encode_bundle(const Bundle& b) {
  io::ByteWriter w;
  w.put_bytes(std::string_view(kBundleMagic, 4));
  w.put<std::uint32_t>(kBundleVersion);
  w.put_string(b.kind);
  w.put_string(b.meta.dump());
  w.put<std::uint64_t>(b.arrays.size());
  for (const auto& [name, m] : b.arrays) {
    w.put_string(name);
    w.put<std::uint64_t>(static_cast<std::uint64_t>(m.rows()));
    w.put<std::uint64_t>(static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) w.put<double>(m(i, j));
  }
  return w.bytes();
}

inline Bundle decode_bundle(std::string bytes, const std::string& origin = {}) {
  io::ByteReader r(std::move(bytes), origin);
  if (r.remaining() < 8 || r.get_bytes(4) != std::string_view(kBundleMagic, 4))
    throw FormatError("not a model/back-end container: '" + origin + "'");
  const auto version = r.get<std::uint32_t>();
  if (version != kBundleVersion)
    throw FormatError("container '" + origin + "' has version " + std::to_string(version) + ", expected " +
                      std::to_string(kBundleVersion));
  Bundle b;
  b.kind = r.get_string();
  try {
    b.meta = nlohmann::json::parse(r.get_string());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("bad metadata in '" + origin + "': " + e.what());
  }
  const auto count = r.get<std::uint64_t>();
  for (std::uint64_t k = 0; k < count; ++k) {
    std::string name = r.get_string();
    const auto rows = r.get<std::uint64_t>();
    const auto cols = r.get<std::uint64_t>();
    if (rows * cols * sizeof(double) > r.remaining()) throw FormatError("truncated array '" + name + "'");
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::uint64_t i = 0; i < rows; ++i)
      for (std::uint64_t j = 0; j < cols; ++j) m(i, j) = r.get<double>();
    b.arrays.emplace(std::move(name), std::move(m));
  }
  if (!r.at_end()) throw FormatError("trailing bytes in '" + origin + "'");
  return b;
}

inline void write_bundle(const std::filesystem::path& path, const Bundle& b) {
  io::write_file_atomic(path, encode_bundle(b));
}

inline Bundle read_bundle(const std::filesystem::path& path, const std::string& expected_kind = {}) {
  Bundle b = decode_bundle(io::read_file(path), path.string());
  if (!expected_kind.empty() && b.kind != expected_kind)
    throw FormatError("'" + path.string() + "' holds a " + b.kind + " container, expected " + expected_kind);
  return b;
}

}  // namespace dsv
