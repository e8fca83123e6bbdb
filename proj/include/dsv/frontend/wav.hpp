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
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dsv/core/binary_io.hpp"
#include "dsv/core/types.hpp"

namespace dsv::frontend {

struct AudioClip {
  std::vector<double> samples;  // in [-1, 1]
  int sample_rate = 16000;
  std::string id;
  std::string speaker_id;
  Gender gender = Gender::female;

  double duration_seconds() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

// Encodes a clip as 16-bit PCM mono WAV. Samples outside [-1, 1] are clipped.
inline std::string encode_wav(const AudioClip& clip) {
  if (clip.sample_rate <= 0) throw UsageError("sample_rate must be positive");
  const auto data_bytes = static_cast<std::uint32_t>(clip.samples.size() * 2);
  io::ByteWriter w;
  w.put_bytes("RIFF");
  w.put<std::uint32_t>(36 + data_bytes);
  w.put_bytes("WAVE");
  w.put_bytes("fmt ");
  w.put<std::uint32_t>(16);
  w.put<std::uint16_t>(1);  // PCM
  w.put<std::uint16_t>(1);  // mono
  w.put<std::uint32_t>(static_cast<std::uint32_t>(clip.sample_rate));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(clip.sample_rate) * 2);
  w.put<std::uint16_t>(2);
  w.put<std::uint16_t>(16);
  w.put_bytes("data");
  w.put<std::uint32_t>(data_bytes);
  for (double s : clip.samples) {
    double scaled = std::round(std::clamp(s, -1.0, 1.0) * 32767.0);
    w.put<std::int16_t>(static_cast<std::int16_t>(scaled));
  }
  return w.bytes();
}

inline void write_wav(const std::filesystem::path& path, const AudioClip& clip) {
  io::write_file_atomic(path, encode_wav(clip));
}

inline AudioClip decode_wav(std::string bytes, const std::string& origin = {}) {
  io::ByteReader r(std::move(bytes), origin);
  auto bad = [&](const std::string& why) {
    return FormatError("malformed WAV" + (origin.empty() ? "" : " '" + origin + "'") + ": " + why);
  };
  if (r.remaining() < 12) throw bad("missing RIFF header");
  if (r.get_bytes(4) != "RIFF") throw bad("missing RIFF tag");
  r.get<std::uint32_t>();
  if (r.get_bytes(4) != "WAVE") throw bad("missing WAVE tag");

  AudioClip clip;
  bool have_fmt = false;
  while (r.remaining() >= 8) {
    std::string tag = r.get_bytes(4);
    auto size = r.get<std::uint32_t>();
    if (tag == "fmt ") {
      if (size < 16) throw bad("fmt chunk too small");
      auto format = r.get<std::uint16_t>();
      auto channels = r.get<std::uint16_t>();
      auto rate = r.get<std::uint32_t>();
      r.get<std::uint32_t>();
      r.get<std::uint16_t>();
      auto bits = r.get<std::uint16_t>();
      if (size > 16) r.get_bytes(size - 16);
      if (format != 1) throw FormatError("unsupported WAV encoding (only PCM is accepted)");
      if (channels != 1)
        throw FormatError("unsupported WAV: " + std::to_string(channels) + " channels, expected mono");
      if (bits != 16) throw FormatError("unsupported WAV: " + std::to_string(bits) + "-bit samples");
      if (rate == 0) throw bad("zero sample rate");
      clip.sample_rate = static_cast<int>(rate);
      have_fmt = true;
    } else if (tag == "data") {
      if (!have_fmt) throw bad("data chunk before fmt chunk");
      if (size % 2 != 0 || size > r.remaining()) throw bad("bad data chunk size");
      clip.samples.resize(size / 2);
      for (auto& s : clip.samples) s = r.get<std::int16_t>() / 32768.0;
      return clip;
    } else {
      if (size > r.remaining()) throw bad("chunk overruns file");
      r.get_bytes(std::min<std::size_t>(size + (size & 1), r.remaining()));
    }
  }
  throw bad("no data chunk");
}

inline AudioClip read_wav(const std::filesystem::path& path) {
  AudioClip clip = decode_wav(io::read_file(path), path.string());
  clip.id = path.stem().string();
  return clip;
}

}  // namespace dsv::frontend
