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

#include <string>
#include <vector>

#include "dsv/core/bundle.hpp"
#include "dsv/nn/network.hpp"

namespace dsv::nn {

inline nlohmann::json layers_to_json(const std::vector<LayerSpec>& layers) {
  auto arr = nlohmann::json::array();
  for (const auto& l : layers) {
    nlohmann::json j;
    j["kind"] = to_string(l.kind);
    if (l.kind == LayerKind::affine) {
      j["name"] = l.name;
      j["in"] = l.input_dim;
      j["out"] = l.output_dim;
    }
    if (l.kind == LayerKind::time_delay) j["offsets"] = l.offsets;
    arr.push_back(std::move(j));
  }
  return arr;
}

inline std::vector<LayerSpec> layers_from_json(const nlohmann::json& arr) {
  std::vector<LayerSpec> layers;
  try {
    for (const auto& j : arr) {
      LayerSpec l;
      l.kind = parse_layer_kind(j.at("kind").get<std::string>());
      if (l.kind == LayerKind::affine) {
        l.name = j.at("name").get<std::string>();
        l.input_dim = j.at("in").get<int>();
        l.output_dim = j.at("out").get<int>();
      }
      if (l.kind == LayerKind::time_delay) l.offsets = j.at("offsets").get<std::vector<int>>();
      layers.push_back(std::move(l));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad layer description: ") + e.what());
  }
  return layers;
}

// Stores the network under meta["network"] and its parameters as arrays
// prefixed with `prefix`.
inline void store_network(Bundle& b, const Network& net, const std::string& prefix = "net/") {
  b.meta["network"] = {{"input_dim", net.input_dim()},
                       {"seed", net.seed()},
                       {"layers", layers_to_json(net.layers())},
                       {"prefix", prefix}};
  for (const auto& [name, value] : net.parameters()) b.arrays[prefix + name] = value;
}

inline Network load_network(const Bundle& b) {
  if (!b.meta.contains("network")) throw FormatError(b.kind + " container has no network");
  const auto& n = b.meta["network"];
  try {
    const auto prefix = n.at("prefix").get<std::string>();
    ParameterMap params;
    for (const auto& [name, value] : b.arrays)
      if (name.rfind(prefix, 0) == 0) params[name.substr(prefix.size())] = value;
    return Network::from_parameters(n.at("input_dim").get<int>(), layers_from_json(n.at("layers")),
                                    std::move(params), n.at("seed").get<std::uint64_t>());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad network description: ") + e.what());
  }
}

}  // namespace dsv::nn
