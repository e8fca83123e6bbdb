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

#include <map>
#include <sstream>
#include <string>
#include <string_view>

#include "dsv/core/error.hpp"

namespace dsv::text {

// Every delimited text artifact starts with a line
//   #dsv-<kind> v<version> [key=value ...]
inline constexpr int kTextVersion = 1;

struct VersionHeader {
  std::string kind;
  int version = 0;
  std::map<std::string, std::string> attrs;

  std::string attr(const std::string& key) const {
    auto it = attrs.find(key);
    return it == attrs.end() ? std::string() : it->second;
  }
};

inline std::string version_line(std::string_view kind, const std::map<std::string, std::string>& attrs = {}) {
  std::string out = "#dsv-" + std::string(kind) + " v" + std::to_string(kTextVersion);
  for (const auto& [k, v] : attrs) {
    if (k.find_first_of(" =\t\n") != std::string::npos || v.find_first_of(" \t\n") != std::string::npos)
      throw UsageError("header attribute '" + k + "' must not contain whitespace");
    out += " " + k + "=" + v;
  }
  return out;
}

inline VersionHeader parse_version_line(const std::string& line, std::string_view expected_kind,
                                        const std::string& origin = {}) {
  const std::string where = origin.empty() ? std::string(expected_kind) + " file" : origin;
  std::istringstream in(line);
  std::string tag, ver;
  if (!(in >> tag >> ver) || tag.rfind("#dsv-", 0) != 0 || ver.size() < 2 || ver[0] != 'v')
    throw FormatError(where + ": missing '#dsv-" + std::string(expected_kind) + " v" + std::to_string(kTextVersion) +
                      "' header");
  VersionHeader h;
  h.kind = tag.substr(5);
  if (h.kind != expected_kind) throw FormatError(where + ": expected a " + std::string(expected_kind) + " file, found " + h.kind);
  try {
    h.version = std::stoi(ver.substr(1));
  } catch (const std::exception&) {
    throw FormatError(where + ": unreadable version '" + ver + "'");
  }
  if (h.version != kTextVersion)
    throw FormatError(where + ": unsupported " + h.kind + " version " + std::to_string(h.version) + " (this build reads v" +
                      std::to_string(kTextVersion) + ")");
  std::string kv;
  while (in >> kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw FormatError(where + ": bad header attribute '" + kv + "'");
    h.attrs[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  return h;
}

}  // namespace dsv::text
