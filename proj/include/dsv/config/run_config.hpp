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

#include <CLI11.hpp>

#include <charconv>
#include <cstdint>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dsv/backend/backend.hpp"
#include "dsv/core/error.hpp"
#include "dsv/core/text_format.hpp"
#include "dsv/datagen/synth.hpp"
#include "dsv/dvector/dvector.hpp"
#include "dsv/e2e/e2e.hpp"
#include "dsv/eval/trials.hpp"
#include "dsv/frontend/features.hpp"
#include "dsv/nn/sgd.hpp"

namespace dsv::config {

struct RunConfig {
  // 50 training plus 20 evaluation speakers, 20 utterances each.
  static datagen::SyntheticSpec default_corpus() {
    datagen::SyntheticSpec s;
    s.num_speakers = 70;
    s.utterances_per_speaker = 20;
    s.min_seconds = 4.2;
    s.max_seconds = 5.0;
    s.separability = 0.8;
    return s;
  }

  std::uint64_t seed = 1;
  std::string out_dir = "dsv_out";

  datagen::SyntheticSpec datagen = default_corpus();
  int train_speakers = 50;
  int eval_speakers = 20;

  frontend::FrontendConfig frontend;

  dvector::DVectorConfig dvector;
  dvector::DVectorTrainOptions dvector_train;
  nn::TrainerConfig trainer;

  e2e::E2EConfig e2e;
  e2e::E2ETrainOptions e2e_train;
  nn::TrainerConfig e2e_trainer;

  backend::BackendOptions backends;

  std::vector<eval::ConditionSpec> conditions{{"C(4-4)", 4, 4}, {"C(40-4)", 40, 4}};
  bool random_control = true;

  // Copies the run seed and the front-end width into every component and
  // checks the result.
  void finalize() {
    datagen.seed = seed;
    dvector.seed = seed;
    e2e.seed = seed;
    trainer.seed = seed;
    e2e_trainer.seed = seed;
    dvector.input_dim = frontend.num_mel_bins;
    e2e.input_dim = frontend.num_mel_bins;
    validate();
  }

  void validate() const {
    datagen.validate();
    frontend.validate();
    trainer.validate();
    e2e_trainer.validate();
    e2e_train.validate();
    e2e.validate();
    if (dvector_train.chunk_frames < 1) throw ConfigError("dvector: chunk_frames must be >= 1");
    if (dvector_train.max_chunks_per_epoch < 0) throw ConfigError("dvector: max_chunks_per_epoch must be >= 0");
    if (train_speakers < 2) throw ConfigError("datagen: train_speakers must be >= 2");
    if (eval_speakers < 2) throw ConfigError("datagen: eval_speakers must be >= 2");
    if (train_speakers + eval_speakers > datagen.num_speakers)
      throw ConfigError("datagen: train_speakers + eval_speakers exceeds num_speakers");
    if (backends.lda_dim < 1 || backends.plda_iterations < 1) throw ConfigError("backends: values must be >= 1");
    if (conditions.empty()) throw ConfigError("eval: at least one condition is required");
    for (const auto& c : conditions)
      if (!(c.enroll_seconds > 0) || !(c.test_seconds > 0)) throw ConfigError("eval: condition durations must be positive");
  }
};

namespace detail {

inline std::string fmt(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline std::string where(const std::string& s, const std::string& k) { return s + "." + k; }

template <class T>
T parse_number(const std::string& v, const std::string& key) {
  T out{};
  const char* end = v.data() + v.size();
  const char* begin = v.data();
  if (!v.empty() && v[0] == '+') ++begin;
  auto r = std::from_chars(begin, end, out);
  if (r.ec != std::errc() || r.ptr != end) throw ConfigError(key + ": cannot read '" + v + "' as a number");
  return out;
}

inline bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

inline std::vector<std::string> words(const std::string& v) {
  std::istringstream in(v);
  std::vector<std::string> out;
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

inline std::vector<int> parse_ints(const std::string& v, const std::string& key) {
  std::vector<int> out;
  for (const auto& w : words(v)) out.push_back(parse_number<int>(w, key));
  return out;
}

inline std::string fmt_ints(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + std::to_string(v[i]);
  return s;
}

// Offset groups separated by '|': "-3 0 3 | -2 0 2".
inline std::vector<std::vector<int>> parse_groups(const std::string& v, const std::string& key) {
  std::vector<std::vector<int>> out(1);
  for (const auto& w : words(v)) {
    if (w == "|") {
      out.emplace_back();
    } else {
      out.back().push_back(parse_number<int>(w, key));
    }
  }
  for (const auto& g : out)
    if (g.empty()) throw ConfigError(key + ": empty offset group in '" + v + "'");
  return out;
}

inline std::string fmt_groups(const std::vector<std::vector<int>>& g) {
  std::string s;
  for (std::size_t i = 0; i < g.size(); ++i) s += (i ? " | " : "") + fmt_ints(g[i]);
  return s;
}

// name:enroll_seconds:test_seconds, space separated.
inline std::vector<eval::ConditionSpec> parse_conditions(const std::string& v, const std::string& key) {
  std::vector<eval::ConditionSpec> out;
  for (const auto& w : words(v)) {
    auto c2 = w.rfind(':');
    auto c1 = c2 == std::string::npos || c2 == 0 ? std::string::npos : w.rfind(':', c2 - 1);
    if (c1 == std::string::npos || c1 == 0) throw ConfigError(key + ": expected name:enroll:test, got '" + w + "'");
    out.push_back({w.substr(0, c1), parse_number<double>(w.substr(c1 + 1, c2 - c1 - 1), key),
                   parse_number<double>(w.substr(c2 + 1), key)});
  }
  return out;
}

inline std::string fmt_conditions(const std::vector<eval::ConditionSpec>& cs) {
  std::string s;
  for (std::size_t i = 0; i < cs.size(); ++i)
    s += (i ? " " : "") + cs[i].name + ":" + fmt(cs[i].enroll_seconds) + ":" + fmt(cs[i].test_seconds);
  return s;
}

struct Binding {
  std::string section;
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

// Accessor-based bindings keep the table short.
#define DSV_NUM(SEC, KEY, EXPR, T)                                                                        \
  Binding {                                                                                              \
    SEC, #KEY, [](const RunConfig& c) { return fmt(static_cast<double>(c.EXPR)); },                       \
        [](RunConfig& c, const std::string& v) { c.EXPR = parse_number<T>(v, where(SEC, #KEY)); }          \
  }
#define DSV_INT(SEC, KEY, EXPR, T)                                                                         \
  Binding {                                                                                               \
    SEC, #KEY, [](const RunConfig& c) { return std::to_string(c.EXPR); },                                   \
        [](RunConfig& c, const std::string& v) { c.EXPR = parse_number<T>(v, where(SEC, #KEY)); }           \
  }

inline const std::vector<Binding>& bindings() {
  static const std::vector<Binding> table = [] {
    std::vector<Binding> t{
        DSV_INT("run", seed, seed, std::uint64_t),
        Binding{"run", "out_dir", [](const RunConfig& c) { return c.out_dir; },
                [](RunConfig& c, const std::string& v) { c.out_dir = v; }},

        DSV_INT("datagen", num_speakers, datagen.num_speakers, int),
        DSV_INT("datagen", utterances_per_speaker, datagen.utterances_per_speaker, int),
        DSV_NUM("datagen", min_seconds, datagen.min_seconds, double),
        DSV_NUM("datagen", max_seconds, datagen.max_seconds, double),
        DSV_INT("datagen", sample_rate, datagen.sample_rate, int),
        DSV_NUM("datagen", separability, datagen.separability, double),
        DSV_NUM("datagen", noise_level, datagen.noise_level, double),
        DSV_INT("datagen", num_resonances, datagen.num_resonances, int),
        DSV_INT("datagen", train_speakers, train_speakers, int),
        DSV_INT("datagen", eval_speakers, eval_speakers, int),

        DSV_NUM("frontend", frame_length_ms, frontend.frame_length_ms, double),
        DSV_NUM("frontend", frame_shift_ms, frontend.frame_shift_ms, double),
        DSV_INT("frontend", num_mel_bins, frontend.num_mel_bins, int),
        DSV_INT("frontend", num_cepstra, frontend.num_cepstra, int),
        DSV_NUM("frontend", low_freq_hz, frontend.low_freq_hz, double),
        DSV_NUM("frontend", pre_emphasis, frontend.pre_emphasis, double),
        DSV_NUM("frontend", dither, frontend.dither, double),
        Binding{"frontend", "cmvn",
                [](const RunConfig& c) {
                  return std::string(c.frontend.cmvn_mode == frontend::CmvnMode::per_utterance ? "per_utterance" : "none");
                },
                [](RunConfig& c, const std::string& v) {
                  if (v == "per_utterance") {
                    c.frontend.cmvn_mode = frontend::CmvnMode::per_utterance;
                  } else if (v == "none") {
                    c.frontend.cmvn_mode = frontend::CmvnMode::none;
                  } else {
                    throw ConfigError("frontend.cmvn: expected per_utterance or none, got '" + v + "'");
                  }
                }},

        DSV_INT("dvector", splice_context, dvector.splice_context, int),
        Binding{"dvector", "conv_channels", [](const RunConfig& c) { return fmt_ints(c.dvector.conv_channels); },
                [](RunConfig& c, const std::string& v) { c.dvector.conv_channels = parse_ints(v, "dvector.conv_channels"); }},
        Binding{"dvector", "conv_kernels", [](const RunConfig& c) { return fmt_ints(c.dvector.conv_kernels); },
                [](RunConfig& c, const std::string& v) { c.dvector.conv_kernels = parse_ints(v, "dvector.conv_kernels"); }},
        DSV_INT("dvector", bottleneck_dim, dvector.bottleneck_dim, int),
        Binding{"dvector", "td_offsets", [](const RunConfig& c) { return fmt_groups(c.dvector.td_offsets); },
                [](RunConfig& c, const std::string& v) { c.dvector.td_offsets = parse_groups(v, "dvector.td_offsets"); }},
        Binding{"dvector", "td_dims", [](const RunConfig& c) { return fmt_ints(c.dvector.td_dims); },
                [](RunConfig& c, const std::string& v) { c.dvector.td_dims = parse_ints(v, "dvector.td_dims"); }},
        DSV_INT("dvector", feature_dim, dvector.feature_dim, int),
        DSV_INT("dvector", chunk_frames, dvector_train.chunk_frames, int),
        DSV_INT("dvector", max_chunks_per_epoch, dvector_train.max_chunks_per_epoch, int),

        DSV_NUM("trainer", learning_rate, trainer.learning_rate, double),
        DSV_NUM("trainer", lr_decay, trainer.lr_decay, double),
        DSV_INT("trainer", decay_every, trainer.decay_every, int),
        DSV_NUM("trainer", momentum, trainer.momentum, double),
        DSV_INT("trainer", max_epochs, trainer.max_epochs, int),
        DSV_INT("trainer", batch_size, trainer.batch_size, int),
        DSV_NUM("trainer", clip_norm, trainer.clip_norm, double),

        DSV_INT("e2e", splice_context, e2e.splice_context, int),
        DSV_INT("e2e", lift_dim, e2e.lift_dim, int),
        Binding{"e2e", "td_offsets", [](const RunConfig& c) { return fmt_groups(c.e2e.td_offsets); },
                [](RunConfig& c, const std::string& v) { c.e2e.td_offsets = parse_groups(v, "e2e.td_offsets"); }},
        DSV_INT("e2e", nin_hidden, e2e.nin_hidden, int),
        DSV_INT("e2e", nin_output, e2e.nin_output, int),
        DSV_INT("e2e", pool_dim, e2e.pool_dim, int),
        DSV_INT("e2e", embedding_dim, e2e.embedding_dim, int),
        DSV_INT("e2e", expected_context, e2e.expected_context, int),
        DSV_NUM("e2e", scorer_init, e2e.scorer_init, double),

        DSV_NUM("e2e_trainer", learning_rate, e2e_trainer.learning_rate, double),
        DSV_NUM("e2e_trainer", lr_decay, e2e_trainer.lr_decay, double),
        DSV_INT("e2e_trainer", decay_every, e2e_trainer.decay_every, int),
        DSV_NUM("e2e_trainer", momentum, e2e_trainer.momentum, double),
        DSV_INT("e2e_trainer", max_epochs, e2e_trainer.max_epochs, int),
        DSV_NUM("e2e_trainer", clip_norm, e2e_trainer.clip_norm, double),
        DSV_INT("e2e_trainer", speakers_per_batch, e2e_train.speakers_per_batch, int),
        Binding{"e2e_trainer", "k",
                [](const RunConfig& c) { return c.e2e_train.k ? fmt(*c.e2e_train.k) : std::string("auto"); },
                [](RunConfig& c, const std::string& v) {
                  if (v == "auto") {
                    c.e2e_train.k.reset();
                  } else {
                    c.e2e_train.k = parse_number<double>(v, "e2e_trainer.k");
                  }
                }},
        DSV_INT("e2e_trainer", min_chunk, e2e_train.min_chunk, int),
        DSV_INT("e2e_trainer", max_chunk, e2e_train.max_chunk, int),
        DSV_INT("e2e_trainer", batches_per_epoch, e2e_train.batches_per_epoch, int),

        DSV_INT("backends", lda_dim, backends.lda_dim, int),
        DSV_INT("backends", plda_iterations, backends.plda_iterations, int),

        Binding{"eval", "conditions", [](const RunConfig& c) { return fmt_conditions(c.conditions); },
                [](RunConfig& c, const std::string& v) { c.conditions = parse_conditions(v, "eval.conditions"); }},
        Binding{"eval", "random_control", [](const RunConfig& c) { return std::string(c.random_control ? "true" : "false"); },
                [](RunConfig& c, const std::string& v) { c.random_control = parse_bool(v, "eval.random_control"); }},
    };
    return t;
  }();
  return table;
}

#undef DSV_NUM
#undef DSV_INT

}  // namespace detail

inline void set_value(RunConfig& c, const std::string& section, const std::string& key, const std::string& value) {
  for (const auto& b : detail::bindings())
    if (b.section == section && b.key == key) {
      b.set(c, value);
      return;
    }
  bool known_section = false;
  for (const auto& b : detail::bindings()) known_section |= b.section == section;
  if (!known_section) throw ConfigError("unknown config section [" + section + "]");
  throw ConfigError("unknown config key '" + key + "' in [" + section + "]");
}

// "section.key=value", as given to --set.
inline void apply_override(RunConfig& c, const std::string& assignment) {
  const auto eq = assignment.find('=');
  const auto dot = assignment.find('.');
  if (eq == std::string::npos || dot == std::string::npos || dot > eq)
    throw ConfigError("override '" + assignment + "' is not of the form section.key=value");
  set_value(c, assignment.substr(0, dot), assignment.substr(dot + 1, eq - dot - 1), assignment.substr(eq + 1));
}

// Applies an INI text on top of `base`. Keys outside a section are refused.
// A leading "#dsv-config vN" line (as written by format_run_config) is
// version-checked; hand-written files may omit it.
inline RunConfig parse_run_config(const std::string& text, RunConfig base = {}, const std::string& origin = "config") {
  if (text.rfind("#dsv-", 0) == 0) text::parse_version_line(text.substr(0, text.find('\n')), "config", origin);
  std::istringstream in(text);
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigINI().from_config(in);
  } catch (const CLI::Error& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  for (const auto& it : items) {
    if (it.name == "++" || it.name == "--") continue;
    if (it.parents.size() != 1)
      throw ConfigError(origin + ": key '" + it.name + "' must sit inside exactly one [section]");
    std::string value;
    for (std::size_t i = 0; i < it.inputs.size(); ++i) value += (i ? " " : "") + it.inputs[i];
    try {
      set_value(base, it.parents[0], it.name, value);
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ": " + e.what());
    }
  }
  return base;
}

inline RunConfig read_run_config(const std::filesystem::path& path, RunConfig base = {}) {
  return parse_run_config(io::read_file(path), std::move(base), path.string());
}

// Every key, grouped by section, in a form parse_run_config reads back.
inline std::string format_run_config(const RunConfig& c) {
  std::ostringstream out;
  out << text::version_line("config") << '\n';
  std::string section;
  for (const auto& b : detail::bindings()) {
    if (b.section != section) {
      out << '\n' << '[' << b.section << "]\n";
      section = b.section;
    }
    out << b.key << " = " << b.get(c) << '\n';
  }
  return out.str();
}

}  // namespace dsv::config
