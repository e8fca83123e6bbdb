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
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "dsv/datagen/corpus.hpp"
#include "dsv/frontend/wav.hpp"

namespace dsv::datagen {

struct SyntheticSpec {
  int num_speakers = 10;
  int utterances_per_speaker = 5;
  double min_seconds = 2.0;
  double max_seconds = 3.0;
  int sample_rate = 16000;
  double separability = 1.0;  // (0, 1]; scales how far speakers deviate from the average voice
  double noise_level = 0.05;  // aspiration noise relative to the pulse excitation
  int num_resonances = 4;     // 3..5
  std::uint64_t seed = 1;

  void validate() const {
    if (num_speakers < 2) throw ConfigError("datagen: num_speakers must be >= 2");
    if (utterances_per_speaker < 1) throw ConfigError("datagen: utterances_per_speaker must be >= 1");
    if (!(min_seconds > 0) || max_seconds < min_seconds) throw ConfigError("datagen: bad utterance duration bounds");
    if (sample_rate < 4000) throw ConfigError("datagen: sample_rate must be >= 4000");
    if (!(separability > 0) || separability > 1) throw ConfigError("datagen: separability must be in (0, 1]");
    if (noise_level < 0) throw ConfigError("datagen: noise_level must be non-negative");
    if (num_resonances < 3 || num_resonances > 5) throw ConfigError("datagen: num_resonances must be in [3, 5]");
  }
};

// The per-speaker trait: a bank of resonators plus a pitch centre.
struct SpeakerVoiceModel {
  std::vector<double> centers_hz;
  std::vector<double> bandwidths_hz;
  std::vector<double> gains;
  double f0_hz = 150.0;
  Gender gender = Gender::female;
};

inline std::string speaker_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "spk%03d", index);
  return buf;
}

inline std::string utterance_name(int speaker, int utt) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "spk%03d-u%03d", speaker, utt);
  return buf;
}

// Even speaker indices are female, odd are male; the two genders draw
// pitch from disjoint ranges.
inline Gender speaker_gender(int index) { return index % 2 == 0 ? Gender::female : Gender::male; }

inline SpeakerVoiceModel draw_voice(const SyntheticSpec& spec, int speaker) {
  std::seed_seq seq{static_cast<std::uint32_t>(spec.seed), static_cast<std::uint32_t>(spec.seed >> 32), 0x766f6963u,
                    static_cast<std::uint32_t>(speaker)};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> z(0.0, 1.0);
  const double sep = spec.separability;
  const double nyquist = 0.5 * spec.sample_rate;
  const double spacing = std::min(1000.0, 0.9 * nyquist / spec.num_resonances);

  SpeakerVoiceModel v;
  v.gender = speaker_gender(speaker);
  for (int k = 0; k < spec.num_resonances; ++k) {
    const double base = spacing * (k + 0.5);
    v.centers_hz.push_back(std::clamp(base * std::exp(sep * 0.3 * z(rng)), 150.0, 0.92 * nyquist));
    v.bandwidths_hz.push_back(std::clamp(90.0 * std::exp(sep * 0.5 * z(rng)), 40.0, 400.0));
    v.gains.push_back(std::exp(sep * 0.6 * z(rng)));
  }
  const double lo = v.gender == Gender::female ? 165.0 : 85.0;
  const double hi = v.gender == Gender::female ? 255.0 : 150.0;
  const double mid = std::sqrt(lo * hi);
  v.f0_hz = std::clamp(mid * std::exp(sep * 0.15 * z(rng)), lo, hi);
  return v;
}

namespace detail {

// Two-pole resonator y[n] = (1 - r) x[n] + 2 r cos(theta) y[n-1] - r^2 y[n-2].
struct Resonator {
  double a1 = 0, a2 = 0, g = 0;
  double y1 = 0, y2 = 0;

  void tune(double center_hz, double bandwidth_hz, int rate) {
    const double r = std::exp(-std::numbers::pi * bandwidth_hz / rate);
    a1 = 2.0 * r * std::cos(2.0 * std::numbers::pi * center_hz / rate);
    a2 = -r * r;
    g = 1.0 - r;
  }

  double step(double x) {
    const double y = g * x + a1 * y1 + a2 * y2;
    y2 = y1;
    y1 = y;
    return y;
  }
};

}  // namespace detail

// Pulse-train plus noise excitation through the speaker's resonators. Each
// 60-200 ms segment re-draws pitch jitter, resonance gains and small centre
// shifts, standing in for phonetic content. Output is RMS-normalized.
inline frontend::AudioClip synthesize_utterance(const SyntheticSpec& spec, const SpeakerVoiceModel& voice, int speaker,
                                                int utt) {
  std::seed_seq seq{static_cast<std::uint32_t>(spec.seed), static_cast<std::uint32_t>(spec.seed >> 32), 0x75747472u,
                    static_cast<std::uint32_t>(speaker), static_cast<std::uint32_t>(utt)};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);

  const int rate = spec.sample_rate;
  const double seconds = spec.min_seconds + (spec.max_seconds - spec.min_seconds) * u01(rng);
  const auto n = static_cast<std::size_t>(std::lround(seconds * rate));
  const auto k_count = voice.centers_hz.size();

  // Session-level drift shared by the whole utterance.
  std::vector<double> session(k_count);
  for (auto& s : session) s = std::exp(0.02 * z(rng));

  std::vector<detail::Resonator> bank(k_count);
  std::vector<double> seg_gain(k_count);
  frontend::AudioClip clip;
  clip.sample_rate = rate;
  clip.samples.resize(n);
  clip.id = utterance_name(speaker, utt);
  clip.speaker_id = speaker_name(speaker);
  clip.gender = voice.gender;

  std::size_t seg_end = 0;
  double period = rate / voice.f0_hz;
  double phase = u01(rng) * period;
  for (std::size_t i = 0; i < n; ++i) {
    if (i == seg_end) {
      seg_end = i + static_cast<std::size_t>((0.06 + 0.14 * u01(rng)) * rate);
      period = rate / (voice.f0_hz * std::exp(0.06 * z(rng)));
      for (std::size_t k = 0; k < k_count; ++k) {
        const double center = std::min(voice.centers_hz[k] * session[k] * std::exp(0.03 * z(rng)), 0.95 * 0.5 * rate);
        bank[k].tune(center, voice.bandwidths_hz[k], rate);
        seg_gain[k] = voice.gains[k] * std::exp(0.7 * z(rng));
      }
    }
    double excitation = spec.noise_level * z(rng);
    phase += 1.0;
    if (phase >= period) {
      phase -= period;
      excitation += 1.0;
    }
    double y = 0;
    for (std::size_t k = 0; k < k_count; ++k) y += seg_gain[k] * bank[k].step(excitation);
    clip.samples[i] = y;
  }

  double energy = 0;
  for (double s : clip.samples) energy += s * s;
  const double rms = std::sqrt(energy / static_cast<double>(std::max<std::size_t>(n, 1)));
  const double scale = rms > 0 ? 0.1 / rms : 0.0;
  for (auto& s : clip.samples) s = std::clamp(s * scale, -1.0, 1.0);
  return clip;
}

// Writes <out_dir>/wav/<utt>.wav for every utterance plus
// <out_dir>/manifest.tsv. Output bytes depend only on `spec`.
inline Manifest generate_corpus(const SyntheticSpec& spec, const std::filesystem::path& out_dir) {
  spec.validate();
  Manifest m;
  m.base_dir = out_dir;
  std::filesystem::create_directories(out_dir / "wav");
  for (int s = 0; s < spec.num_speakers; ++s) {
    const auto voice = draw_voice(spec, s);
    for (int u = 0; u < spec.utterances_per_speaker; ++u) {
      auto clip = synthesize_utterance(spec, voice, s, u);
      const std::string rel = "wav/" + clip.id + ".wav";
      frontend::write_wav(out_dir / rel, clip);
      m.utterances.push_back({clip.id, clip.speaker_id, clip.gender, rel, clip.duration_seconds()});
    }
  }
  write_manifest(out_dir / "manifest.tsv", m);
  return m;
}

}  // namespace dsv::datagen
