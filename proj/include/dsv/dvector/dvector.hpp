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
#include <functional>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dsv/core/bundle.hpp"
#include "dsv/frontend/feature_set.hpp"
#include "dsv/nn/loss.hpp"
#include "dsv/nn/model_io.hpp"
#include "dsv/nn/sgd.hpp"

namespace dsv::dvector {

// Layer sizes of the convolutional/time-delay speaker classifier. The
// convolution stages run over time: a stage with kernel k sees input frames
// t .. t+k-1 (a kernel of 1 is a per-frame projection). With the defaults
// the receptive field is 9 (splice) + 1 (conv) + 6 + 4 (time-delay) = 20.
struct DVectorConfig {
  int input_dim = 40;
  int splice_context = 4;
  std::vector<int> conv_channels{256, 256};
  std::vector<int> conv_kernels{2, 1};
  int bottleneck_dim = 256;
  std::vector<std::vector<int>> td_offsets{{-3, 0, 3}, {-2, 0, 2}};
  std::vector<int> td_dims{512, 512};
  int feature_dim = 400;
  int num_speakers = 5000;
  std::uint64_t seed = 1;

  static constexpr int kStandardContext = 20;

  void validate() const {
    if (input_dim < 1) throw ConfigError("dvector: input_dim must be positive");
    if (splice_context < 0) throw ConfigError("dvector: splice_context must be >= 0");
    if (conv_channels.size() != conv_kernels.size()) throw ConfigError("dvector: one kernel per conv stage");
    for (int k : conv_kernels)
      if (k < 1) throw ConfigError("dvector: conv kernels must be >= 1");
    for (int c : conv_channels)
      if (c < 1) throw ConfigError("dvector: conv channels must be positive");
    if (td_offsets.size() != td_dims.size()) throw ConfigError("dvector: one width per time-delay stage");
    if (bottleneck_dim < 1 || feature_dim < 1) throw ConfigError("dvector: layer widths must be positive");
    if (num_speakers < 2) throw ConfigError("dvector: num_speakers must be >= 2");
  }
};

struct DVectorModel {
  DVectorConfig config;
  nn::Network net;
  std::size_t feature_end = 0;  // layers [0, feature_end) produce the feature layer
  std::vector<std::string> warnings;
  std::vector<std::string> speakers;  // output class order, when trained
};

inline std::vector<nn::LayerSpec> dvector_layers(const DVectorConfig& cfg, std::size_t* feature_end = nullptr) {
  using nn::LayerSpec;
  std::vector<LayerSpec> layers;
  int d = cfg.input_dim;
  layers.push_back(LayerSpec::splice(cfg.splice_context));
  d *= 2 * cfg.splice_context + 1;
  for (std::size_t i = 0; i < cfg.conv_channels.size(); ++i) {
    if (cfg.conv_kernels[i] > 1) {
      std::vector<int> offs(cfg.conv_kernels[i]);
      for (int j = 0; j < cfg.conv_kernels[i]; ++j) offs[j] = j;
      layers.push_back(LayerSpec::time_delay(offs));
      d *= cfg.conv_kernels[i];
    }
    layers.push_back(LayerSpec::affine("conv" + std::to_string(i + 1), d, cfg.conv_channels[i]));
    layers.push_back(LayerSpec::relu());
    d = cfg.conv_channels[i];
  }
  layers.push_back(LayerSpec::affine("bottleneck", d, cfg.bottleneck_dim));
  d = cfg.bottleneck_dim;
  for (std::size_t i = 0; i < cfg.td_offsets.size(); ++i) {
    layers.push_back(LayerSpec::time_delay(cfg.td_offsets[i]));
    d *= static_cast<int>(cfg.td_offsets[i].size());
    layers.push_back(LayerSpec::affine("td" + std::to_string(i + 1), d, cfg.td_dims[i]));
    layers.push_back(LayerSpec::relu());
    d = cfg.td_dims[i];
  }
  layers.push_back(LayerSpec::affine("feature", d, cfg.feature_dim));
  if (feature_end) *feature_end = layers.size();
  layers.push_back(LayerSpec::affine("output", cfg.feature_dim, cfg.num_speakers));
  return layers;
}

// Receptive field of the feature layer in frames.
inline int effective_context(const DVectorConfig& cfg) {
  std::size_t end = 0;
  auto layers = dvector_layers(cfg, &end);
  return nn::receptive_field(layers, end);
}

inline int effective_context(const DVectorModel& model) { return nn::receptive_field(model.net.layers(), model.feature_end); }

// Frame offsets (relative to t) that feed feature-layer frame t.
inline std::pair<int, int> context_extent(const DVectorModel& model) {
  auto deps = nn::dependency_offsets(model.net.layers(), model.feature_end);
  return {deps.front(), deps.back()};
}

// Splice -> conv stages -> linear bottleneck -> time-delay stages -> linear
// feature layer -> speaker softmax. A receptive field other than 20 frames
// is allowed but recorded in `warnings`.
inline DVectorModel build_dvector_net(const DVectorConfig& cfg) {
  cfg.validate();
  DVectorModel model;
  model.config = cfg;
  auto layers = dvector_layers(cfg, &model.feature_end);
  model.net = nn::Network(cfg.input_dim, std::move(layers), cfg.seed);
  const int context = effective_context(model);
  if (context != DVectorConfig::kStandardContext)
    model.warnings.push_back("receptive field is " + std::to_string(context) + " frames, not " +
                             std::to_string(DVectorConfig::kStandardContext));
  return model;
}

// --- extraction ---

struct FrameFeatureSeq {
  Matrix frames;  // T x feature_dim
  std::string utt_id;
};

struct DVector {
  Vector values;
  std::string utt_id;
  std::string speaker_id;
};

inline void check_input_kind(const DVectorModel& model, const frontend::FeatureMatrix& feat) {
  if (feat.kind.base != "fbank" || feat.kind.splice != 0 || feat.dim() != model.config.input_dim)
    throw UsageError("d-vector network expects unspliced fbank" + std::to_string(model.config.input_dim) +
                     " features, got " + feat.kind.tag());
  if (feat.num_frames() < 1) throw UsageError("empty feature matrix");
}

// Feature-layer activations for every frame; the softmax layer is bypassed.
inline FrameFeatureSeq extract_frame_features(const DVectorModel& model, const frontend::FeatureMatrix& feat,
                                              std::string utt_id = {}) {
  check_input_kind(model, feat);
  return {model.net.forward(feat.frames, nn::Mode::infer, nullptr, model.feature_end), std::move(utt_id)};
}

inline DVector pool_dvector(const FrameFeatureSeq& seq) {
  if (seq.frames.rows() < 1) throw UsageError("cannot pool an empty frame sequence");
  return {seq.frames.colwise().mean().transpose(), seq.utt_id, {}};
}

inline DVector compute_dvector(const DVectorModel& model, const frontend::FeatureMatrix& feat, std::string utt_id = {}) {
  return pool_dvector(extract_frame_features(model, feat, std::move(utt_id)));
}

// --- training ---

struct DVectorTrainOptions {
  int chunk_frames = 32;          // frames scored per chunk
  int max_chunks_per_epoch = 0;   // 0 = every chunk of every utterance
};

struct EpochStats {
  int epoch = 0;
  double loss = 0;
  double accuracy = 0;
  double learning_rate = 0;
  long frames = 0;
};

namespace detail {

struct ChunkRef {
  int utt = 0;
  int start = 0;
  int length = 0;
};

}  // namespace detail

// Per-frame speaker classification. Each chunk is forwarded with enough
// surrounding context that its scored frames see the same input as during
// whole-utterance extraction. Chunk order is shuffled per epoch from the
// trainer seed, so runs are reproducible bit for bit.
inline DVectorModel train_dvector(std::span<const frontend::LabeledFeatures> corpus, DVectorConfig cfg,
                                  const nn::TrainerConfig& trainer, const DVectorTrainOptions& opts = {},
                                  const std::function<void(const EpochStats&)>& on_epoch = {}) {
  trainer.validate();
  if (opts.chunk_frames < 1) throw ConfigError("dvector: chunk_frames must be >= 1");
  std::map<std::string, int> labels;
  for (const auto& u : corpus) {
    if (u.speaker_id.empty()) throw UsageError("utterance '" + u.utt_id + "' has no speaker label");
    labels.emplace(u.speaker_id, 0);
  }
  if (labels.size() < 2) throw UsageError("d-vector training needs at least two speakers");
  int next = 0;
  for (auto& [spk, idx] : labels) idx = next++;
  cfg.num_speakers = static_cast<int>(labels.size());

  DVectorModel model = build_dvector_net(cfg);
  for (const auto& [spk, idx] : labels) model.speakers.push_back(spk);
  const auto [left, right] = context_extent(model);

  std::vector<detail::ChunkRef> chunks;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    check_input_kind(model, corpus[i].feat);
    const int t_count = static_cast<int>(corpus[i].feat.num_frames());
    for (int s = 0; s < t_count; s += opts.chunk_frames)
      chunks.push_back({static_cast<int>(i), s, std::min(opts.chunk_frames, t_count - s)});
  }

  nn::Sgd sgd(trainer);
  std::mt19937_64 rng(trainer.seed);
  long step = 0;
  for (int epoch = 0; epoch < trainer.max_epochs; ++epoch) {
    std::shuffle(chunks.begin(), chunks.end(), rng);
    const std::size_t count = opts.max_chunks_per_epoch > 0
                                  ? std::min<std::size_t>(chunks.size(), static_cast<std::size_t>(opts.max_chunks_per_epoch))
                                  : chunks.size();
    const double lr = trainer.learning_rate_at(epoch);
    EpochStats stats;
    stats.epoch = epoch;
    stats.learning_rate = lr;
    long correct = 0;
    double loss_sum = 0;
    for (std::size_t b = 0; b < count; b += static_cast<std::size_t>(trainer.batch_size)) {
      const std::size_t end = std::min(count, b + static_cast<std::size_t>(trainer.batch_size));
      nn::ParameterMap grads;
      for (std::size_t c = b; c < end; ++c) {
        const auto& ch = chunks[c];
        const auto& frames = corpus[static_cast<std::size_t>(ch.utt)].feat.frames;
        const int t_count = static_cast<int>(frames.rows());
        const int lo = std::max(0, ch.start + left);
        const int hi = std::min(t_count, ch.start + ch.length + right);
        Matrix window = frames.middleRows(lo, hi - lo);
        nn::ForwardCache cache;
        Matrix logits = model.net.forward(window, nn::Mode::train, &cache);
        std::vector<int> y(static_cast<std::size_t>(ch.length),
                           labels.at(corpus[static_cast<std::size_t>(ch.utt)].speaker_id));
        auto lg = nn::softmax_xent_rows(logits, y, ch.start - lo);
        if (!std::isfinite(lg.loss)) throw TrainingDiverged("non-finite training loss in epoch " + std::to_string(epoch), "loss", step);
        loss_sum += lg.loss * ch.length;
        for (int r = 0; r < ch.length; ++r) {
          Eigen::Index arg;
          logits.row(ch.start - lo + r).maxCoeff(&arg);
          correct += arg == y[0];
        }
        stats.frames += ch.length;
        auto g = model.net.backward(lg.grad, cache);
        for (auto& [name, value] : g.params) {
          auto [it, inserted] = grads.try_emplace(name, value);
          if (!inserted) it->second += value;
        }
      }
      const double inv = 1.0 / static_cast<double>(end - b);
      for (auto& [name, value] : grads) value *= inv;
      sgd.step(model.net, grads, lr, step++);
    }
    stats.loss = loss_sum / static_cast<double>(std::max<long>(stats.frames, 1));
    stats.accuracy = static_cast<double>(correct) / static_cast<double>(std::max<long>(stats.frames, 1));
    if (!std::isfinite(stats.loss)) throw TrainingDiverged("non-finite loss in epoch " + std::to_string(epoch), "loss", step);
    if (on_epoch) on_epoch(stats);
  }
  return model;
}

// --- persistence ---

inline nlohmann::json config_to_json(const DVectorConfig& c) {
  return {{"input_dim", c.input_dim},         {"splice_context", c.splice_context},
          {"conv_channels", c.conv_channels}, {"conv_kernels", c.conv_kernels},
          {"bottleneck_dim", c.bottleneck_dim}, {"td_offsets", c.td_offsets},
          {"td_dims", c.td_dims},             {"feature_dim", c.feature_dim},
          {"num_speakers", c.num_speakers},   {"seed", c.seed}};
}

inline DVectorConfig config_from_json(const nlohmann::json& j) {
  DVectorConfig c;
  try {
    c.input_dim = j.at("input_dim");
    c.splice_context = j.at("splice_context");
    c.conv_channels = j.at("conv_channels").get<std::vector<int>>();
    c.conv_kernels = j.at("conv_kernels").get<std::vector<int>>();
    c.bottleneck_dim = j.at("bottleneck_dim");
    c.td_offsets = j.at("td_offsets").get<std::vector<std::vector<int>>>();
    c.td_dims = j.at("td_dims").get<std::vector<int>>();
    c.feature_dim = j.at("feature_dim");
    c.num_speakers = j.at("num_speakers");
    c.seed = j.at("seed");
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad d-vector config: ") + e.what());
  }
  return c;
}

inline constexpr char kDVectorModelKind[] = "dvector_model";

inline Bundle to_bundle(const DVectorModel& m, const nlohmann::json& training = nlohmann::json::object()) {
  Bundle b;
  b.kind = kDVectorModelKind;
  b.meta["config"] = config_to_json(m.config);
  b.meta["feature_end"] = m.feature_end;
  b.meta["warnings"] = m.warnings;
  b.meta["speakers"] = m.speakers;
  b.meta["training"] = training;
  nn::store_network(b, m.net);
  return b;
}

inline DVectorModel dvector_from_bundle(const Bundle& b) {
  if (b.kind != kDVectorModelKind) throw FormatError("expected a d-vector model, found " + b.kind);
  DVectorModel m;
  m.config = config_from_json(b.meta.at("config"));
  m.feature_end = b.meta.at("feature_end").get<std::size_t>();
  m.warnings = b.meta.value("warnings", std::vector<std::string>{});
  m.speakers = b.meta.value("speakers", std::vector<std::string>{});
  m.net = nn::load_network(b);
  if (m.feature_end > m.net.layers().size()) throw FormatError("feature layer index out of range");
  return m;
}

}  // namespace dsv::dvector
