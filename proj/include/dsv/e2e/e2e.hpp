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
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dsv/core/bundle.hpp"
#include "dsv/frontend/feature_set.hpp"
#include "dsv/nn/model_io.hpp"
#include "dsv/nn/sgd.hpp"

namespace dsv::e2e {

// Time-delay NIN embedding network. Each NIN block is three affine+relu
// stages (in -> hidden -> hidden -> out) applied per frame.
struct E2EConfig {
  int input_dim = 40;
  int splice_context = 1;
  int lift_dim = 150;  // 0 disables the initial projection of the spliced input
  std::vector<std::vector<int>> td_offsets{{-3, 0, 3}, {-2, 0, 2}, {-2, 0, 2}};
  int nin_hidden = 1000;
  int nin_output = 500;
  int pool_dim = 150;
  int embedding_dim = 200;
  int expected_context = 17;  // 0 skips the receptive-field check
  // S starts as s0 * I. With s0 = 1/2 the initial logit is b - |x - y|^2 / 2.
  double scorer_init = 0.5;
  std::uint64_t seed = 1;

  void validate() const {
    if (input_dim < 1 || splice_context < 0 || lift_dim < 0) throw ConfigError("e2e: bad input geometry");
    if (td_offsets.empty()) throw ConfigError("e2e: at least one time-delay NIN layer is required");
    if (nin_hidden < 1 || nin_output < 1 || pool_dim < 1 || embedding_dim < 1)
      throw ConfigError("e2e: layer widths must be positive");
    if (expected_context < 0) throw ConfigError("e2e: expected_context must be >= 0");
  }
};

// ---- scorer ----

// L(x, y) = x'y - x'Sx - y'Sy + b, S kept symmetric.
struct BilinearScorer {
  Matrix S;
  Matrix b = Matrix::Zero(1, 1);

  BilinearScorer() = default;
  explicit BilinearScorer(int dim) : S(Matrix::Zero(dim, dim)) {}

  int dim() const { return static_cast<int>(S.rows()); }
  double bias() const { return b(0, 0); }

  void check(const Vector& x, const Vector& y) const {
    if (x.size() != S.rows() || y.size() != S.rows())
      throw UsageError("embedding width " + std::to_string(x.size()) + "/" + std::to_string(y.size()) +
                       " does not match scorer width " + std::to_string(S.rows()));
  }

  double score(const Vector& x, const Vector& y) const {
    check(x, y);
    // the quadratic terms are summed first so that swapping x and y is exact
    return x.dot(y) - (x.dot(S * x) + y.dot(S * y)) + b(0, 0);
  }

  void symmetrize() {
    Matrix sym = 0.5 * (S + S.transpose());
    S = std::move(sym);
  }
};

inline double pair_probability(double logit) {
  return logit >= 0 ? 1.0 / (1.0 + std::exp(-logit)) : std::exp(logit) / (1.0 + std::exp(logit));
}

// log(1 + e^z) without overflow.
inline double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

// ---- network ----

struct E2EModel {
  E2EConfig config;
  nn::Network net;
  BilinearScorer scorer;
};

inline void add_nin(std::vector<nn::LayerSpec>& layers, const std::string& name, int in, int hidden, int out) {
  using nn::LayerSpec;
  layers.push_back(LayerSpec::affine(name + ".1", in, hidden));
  layers.push_back(LayerSpec::relu());
  layers.push_back(LayerSpec::affine(name + ".2", hidden, hidden));
  layers.push_back(LayerSpec::relu());
  layers.push_back(LayerSpec::affine(name + ".3", hidden, out));
  layers.push_back(LayerSpec::relu());
}

inline std::vector<nn::LayerSpec> e2e_layers(const E2EConfig& cfg) {
  using nn::LayerSpec;
  std::vector<LayerSpec> layers;
  int d = cfg.input_dim * (2 * cfg.splice_context + 1);
  layers.push_back(LayerSpec::splice(cfg.splice_context));
  if (cfg.lift_dim > 0) {
    layers.push_back(LayerSpec::affine("lift", d, cfg.lift_dim));
    d = cfg.lift_dim;
  }
  for (std::size_t i = 0; i < cfg.td_offsets.size(); ++i) {
    layers.push_back(LayerSpec::time_delay(cfg.td_offsets[i]));
    add_nin(layers, "nin" + std::to_string(i + 1), d * static_cast<int>(cfg.td_offsets[i].size()), cfg.nin_hidden,
            cfg.nin_output);
    d = cfg.nin_output;
  }
  layers.push_back(LayerSpec::affine("prepool", d, cfg.pool_dim));
  layers.push_back(LayerSpec::mean_pool());
  add_nin(layers, "postpool", cfg.pool_dim, cfg.nin_hidden, cfg.nin_output);
  layers.push_back(LayerSpec::affine("embedding", cfg.nin_output, cfg.embedding_dim));
  return layers;
}

inline int effective_context(const E2EConfig& cfg) { return nn::receptive_field(e2e_layers(cfg)); }

inline E2EModel build_e2e_net(const E2EConfig& cfg) {
  cfg.validate();
  auto layers = e2e_layers(cfg);
  const int context = nn::receptive_field(layers);
  if (cfg.expected_context > 0 && context != cfg.expected_context)
    throw ConfigError("e2e: receptive field is " + std::to_string(context) + " frames, expected " +
                      std::to_string(cfg.expected_context));
  E2EModel m;
  m.config = cfg;
  m.net = nn::Network(cfg.input_dim, std::move(layers), cfg.seed);
  m.scorer = BilinearScorer(cfg.embedding_dim);
  m.scorer.S.diagonal().setConstant(cfg.scorer_init);
  return m;
}

inline Vector embed(const E2EModel& m, const Matrix& frames) {
  if (frames.rows() < 1) throw UsageError("cannot embed an empty chunk");
  return m.net.forward(frames).row(0).transpose();
}

inline Vector embed(const E2EModel& m, const frontend::FeatureMatrix& feat) {
  if (feat.kind.base != "fbank" || feat.kind.splice != 0 || feat.dim() != m.config.input_dim)
    throw UsageError("e2e network expects unspliced fbank" + std::to_string(m.config.input_dim) + " features, got " +
                     feat.kind.tag());
  return embed(m, feat.frames);
}

inline double verify_pair(const E2EModel& m, const frontend::FeatureMatrix& enroll,
                          const frontend::FeatureMatrix& test) {
  return m.scorer.score(embed(m, enroll), embed(m, test));
}

// ---- pair loss ----

struct PairIndex {
  int a = 0;
  int b = 0;
};

struct PairLoss {
  double loss = 0;       // same + K * diff
  double same_loss = 0;  // sum over same pairs of -ln P
  double diff_loss = 0;  // sum over diff pairs of -ln(1 - P)
  Matrix d_embeddings;   // one row per embedding row
  Matrix dS;
  double db = 0;
  int same_correct = 0;
  int diff_correct = 0;
};

// E = -sum_same ln P(L) - K sum_diff ln(1 - P(L)), evaluated as softplus
// terms so saturated logits stay finite.
inline PairLoss pair_loss(const BilinearScorer& scorer, const Matrix& embeddings, std::span<const PairIndex> same,
                          std::span<const PairIndex> diff, double k) {
  if (!(k > 0)) throw UsageError("pair loss weight K must be positive");
  if (embeddings.cols() != scorer.dim()) throw UsageError("embedding width does not match the scorer");
  PairLoss out;
  out.d_embeddings = Matrix::Zero(embeddings.rows(), embeddings.cols());
  out.dS = Matrix::Zero(scorer.dim(), scorer.dim());
  const Matrix sx = embeddings * scorer.S;  // row i = (S x_i)' since S is symmetric
  Vector weight = Vector::Zero(embeddings.rows());  // sum of dE/dL over the pairs touching each row
  auto accumulate = [&](const PairIndex& p, bool target) {
    if (p.a < 0 || p.b < 0 || p.a >= embeddings.rows() || p.b >= embeddings.rows())
      throw UsageError("pair index out of range");
    const auto x = embeddings.row(p.a);
    const auto y = embeddings.row(p.b);
    const double l = x.dot(y) - (x.dot(sx.row(p.a)) + y.dot(sx.row(p.b))) + scorer.bias();
    double dl;
    if (target) {
      out.same_loss += softplus(-l);
      dl = -pair_probability(-l);
      out.same_correct += l > 0;
    } else {
      out.diff_loss += softplus(l);
      dl = k * pair_probability(l);
      out.diff_correct += l < 0;
    }
    out.d_embeddings.row(p.a) += dl * (y - 2.0 * sx.row(p.a));
    out.d_embeddings.row(p.b) += dl * (x - 2.0 * sx.row(p.b));
    weight(p.a) += dl;
    weight(p.b) += dl;
    out.db += dl;
  };
  for (const auto& p : same) accumulate(p, true);
  for (const auto& p : diff) accumulate(p, false);
  // dL/dS = -(xx' + yy') for every pair
  out.dS.noalias() = -(embeddings.transpose() * weight.asDiagonal() * embeddings);
  out.loss = out.same_loss + k * out.diff_loss;
  return out;
}

// ---- sampling ----

inline int sample_chunk_length(std::mt19937_64& rng, int min_frames = 50, int max_frames = 300) {
  if (min_frames < 1 || max_frames < min_frames) throw UsageError("bad chunk length range");
  std::uniform_real_distribution<double> u(std::log(static_cast<double>(min_frames)),
                                           std::log(static_cast<double>(max_frames) + 1.0));
  return std::clamp(static_cast<int>(std::floor(std::exp(u(rng)))), min_frames, max_frames);
}

struct Chunk {
  int utt = 0;  // index into the corpus
  int start = 0;
  int length = 0;
  std::string speaker_id;
};

// Chunks 2i and 2i+1 come from speaker i. Same pairs are (2i, 2i+1);
// different pairs are (2i, 2j+1) for every i != j.
struct PairBatch {
  int n = 0;
  int chunk_length = 0;
  std::vector<Chunk> chunks;
  std::vector<PairIndex> same;
  std::vector<PairIndex> diff;
};

// Speaker -> utterance indices, speakers in lexical order.
inline std::map<std::string, std::vector<int>> utterances_by_speaker(std::span<const frontend::LabeledFeatures> corpus) {
  std::map<std::string, std::vector<int>> by;
  for (std::size_t i = 0; i < corpus.size(); ++i) by[corpus[i].speaker_id].push_back(static_cast<int>(i));
  return by;
}

inline PairBatch sample_pair_batch(std::span<const frontend::LabeledFeatures> corpus,
                                   const std::map<std::string, std::vector<int>>& by_speaker, int n,
                                   int chunk_length, std::mt19937_64& rng) {
  if (n < 2) throw SamplingError("a pair batch needs N >= 2 speakers");
  if (static_cast<int>(by_speaker.size()) < n)
    throw SamplingError("pair batch of " + std::to_string(n) + " speakers requested but the corpus has " +
                        std::to_string(by_speaker.size()));
  std::vector<const std::pair<const std::string, std::vector<int>>*> speakers;
  for (const auto& kv : by_speaker) speakers.push_back(&kv);
  for (int i = 0; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(i), speakers.size() - 1);
    std::swap(speakers[static_cast<std::size_t>(i)], speakers[pick(rng)]);
  }

  PairBatch batch;
  batch.n = n;
  batch.chunk_length = chunk_length;
  auto cut = [&](int utt, const std::string& spk) {
    const int t_count = static_cast<int>(corpus[static_cast<std::size_t>(utt)].feat.num_frames());
    const int len = std::min(chunk_length, t_count);
    std::uniform_int_distribution<int> start(0, t_count - len);
    return Chunk{utt, start(rng), len, spk};
  };
  for (int i = 0; i < n; ++i) {
    const auto& [spk, utts] = *speakers[static_cast<std::size_t>(i)];
    std::uniform_int_distribution<std::size_t> pick(0, utts.size() - 1);
    const std::size_t first = pick(rng);
    std::size_t second = first;
    if (utts.size() > 1) {
      std::uniform_int_distribution<std::size_t> other(0, utts.size() - 2);
      second = other(rng);
      if (second >= first) ++second;
    }
    batch.chunks.push_back(cut(utts[first], spk));
    batch.chunks.push_back(cut(utts[second], spk));
  }
  for (int i = 0; i < n; ++i) {
    batch.same.push_back({2 * i, 2 * i + 1});
    for (int j = 0; j < n; ++j)
      if (j != i) batch.diff.push_back({2 * i, 2 * j + 1});
  }
  return batch;
}

inline PairBatch sample_pair_batch(std::span<const frontend::LabeledFeatures> corpus, int n, std::mt19937_64& rng) {
  const int len = sample_chunk_length(rng);
  return sample_pair_batch(corpus, utterances_by_speaker(corpus), n, len, rng);
}

// ---- training ----

struct E2ETrainOptions {
  int speakers_per_batch = 64;  // N
  std::optional<double> k;      // defaults to 1 / (N - 1)
  int min_chunk = 50;
  int max_chunk = 300;
  int batches_per_epoch = 100;

  double resolved_k() const { return k.value_or(1.0 / (speakers_per_batch - 1)); }

  void validate() const {
    if (speakers_per_batch < 2) throw ConfigError("e2e: speakers_per_batch must be >= 2");
    if (k && !(*k > 0)) throw ConfigError("e2e: K must be positive");
    if (min_chunk < 1 || max_chunk < min_chunk) throw ConfigError("e2e: bad chunk length range");
    if (batches_per_epoch < 1) throw ConfigError("e2e: batches_per_epoch must be >= 1");
  }
};

struct IterationStats {
  long iteration = 0;
  int epoch = 0;
  int chunk_length = 0;
  double learning_rate = 0;
  double loss = 0;  // E / N
  double same_loss = 0;
  double diff_loss = 0;
  double same_accuracy = 0;
  double diff_accuracy = 0;
  double grad_norm = 0;
};

// Forward + backward for one batch. Returns the parameter gradients of E
// (unscaled) under "net" names and "scorer/S", "scorer/b".
inline std::pair<PairLoss, nn::ParameterMap> batch_gradients(const E2EModel& m,
                                                             std::span<const frontend::LabeledFeatures> corpus,
                                                             const PairBatch& batch, double k) {
  const auto count = static_cast<Eigen::Index>(batch.chunks.size());
  Matrix emb(count, m.config.embedding_dim);
  std::vector<nn::ForwardCache> caches(static_cast<std::size_t>(count));
  for (Eigen::Index c = 0; c < count; ++c) {
    const auto& ch = batch.chunks[static_cast<std::size_t>(c)];
    const auto& frames = corpus[static_cast<std::size_t>(ch.utt)].feat.frames;
    emb.row(c) = m.net.forward(frames.middleRows(ch.start, ch.length), nn::Mode::train,
                               &caches[static_cast<std::size_t>(c)]);
  }
  PairLoss pl = pair_loss(m.scorer, emb, batch.same, batch.diff, k);
  nn::ParameterMap grads;
  for (Eigen::Index c = 0; c < count; ++c) {
    auto g = m.net.backward(pl.d_embeddings.row(c), caches[static_cast<std::size_t>(c)]);
    for (auto& [name, value] : g.params) {
      auto [it, inserted] = grads.try_emplace(name, std::move(value));
      if (!inserted) it->second += value;
    }
  }
  grads["scorer/S"] = pl.dS;
  grads["scorer/b"] = Matrix::Constant(1, 1, pl.db);
  return {std::move(pl), std::move(grads)};
}

inline std::vector<nn::ParamRef> trainable_refs(E2EModel& m) {
  auto refs = m.net.parameter_refs();
  refs.push_back({"scorer/S", &m.scorer.S});
  refs.push_back({"scorer/b", &m.scorer.b});
  return refs;
}

// Pairwise training: every iteration draws one chunk length, then a pair
// batch of N speakers, and takes one SGD step on E / N.
inline E2EModel train_e2e(std::span<const frontend::LabeledFeatures> corpus, const E2EConfig& cfg,
                          const E2ETrainOptions& opts, const nn::TrainerConfig& trainer,
                          const std::function<void(const IterationStats&)>& on_iteration = {}) {
  opts.validate();
  trainer.validate();
  E2EModel m = build_e2e_net(cfg);
  for (const auto& u : corpus) {
    if (u.speaker_id.empty()) throw UsageError("utterance '" + u.utt_id + "' has no speaker label");
    if (u.feat.dim() != cfg.input_dim || u.feat.num_frames() < 1)
      throw UsageError("utterance '" + u.utt_id + "' does not match the network input");
  }
  const auto by_speaker = utterances_by_speaker(corpus);
  if (static_cast<int>(by_speaker.size()) < opts.speakers_per_batch)
    throw UsageError("e2e training needs at least " + std::to_string(opts.speakers_per_batch) + " speakers, corpus has " +
                     std::to_string(by_speaker.size()));
  const double k = opts.resolved_k();
  const double inv_n = 1.0 / opts.speakers_per_batch;
  nn::Sgd sgd(trainer);
  std::mt19937_64 rng(trainer.seed);
  long iteration = 0;
  for (int epoch = 0; epoch < trainer.max_epochs; ++epoch) {
    const double lr = trainer.learning_rate_at(epoch);
    for (int it = 0; it < opts.batches_per_epoch; ++it, ++iteration) {
      const int len = sample_chunk_length(rng, opts.min_chunk, opts.max_chunk);
      auto batch = sample_pair_batch(corpus, by_speaker, opts.speakers_per_batch, len, rng);
      auto [pl, grads] = batch_gradients(m, corpus, batch, k);
      if (!std::isfinite(pl.loss)) throw TrainingDiverged("non-finite pair loss", "loss", iteration);
      for (auto& [name, g] : grads) g *= inv_n;
      auto refs = trainable_refs(m);
      const double norm = sgd.step(refs, grads, lr, iteration);
      m.scorer.symmetrize();
      if (on_iteration) {
        IterationStats s;
        s.iteration = iteration;
        s.epoch = epoch;
        s.chunk_length = len;
        s.learning_rate = lr;
        s.loss = pl.loss * inv_n;
        s.same_loss = pl.same_loss;
        s.diff_loss = pl.diff_loss;
        s.same_accuracy = static_cast<double>(pl.same_correct) / static_cast<double>(batch.same.size());
        s.diff_accuracy = static_cast<double>(pl.diff_correct) / static_cast<double>(batch.diff.size());
        s.grad_norm = norm;
        on_iteration(s);
      }
    }
  }
  return m;
}

// ---- persistence ----

inline nlohmann::json config_to_json(const E2EConfig& c) {
  return {{"input_dim", c.input_dim},   {"splice_context", c.splice_context}, {"lift_dim", c.lift_dim},
          {"td_offsets", c.td_offsets}, {"nin_hidden", c.nin_hidden},         {"nin_output", c.nin_output},
          {"pool_dim", c.pool_dim},     {"embedding_dim", c.embedding_dim},   {"expected_context", c.expected_context},
          {"scorer_init", c.scorer_init}, {"seed", c.seed}};
}

inline E2EConfig config_from_json(const nlohmann::json& j) {
  E2EConfig c;
  try {
    c.input_dim = j.at("input_dim");
    c.splice_context = j.at("splice_context");
    c.lift_dim = j.at("lift_dim");
    c.td_offsets = j.at("td_offsets").get<std::vector<std::vector<int>>>();
    c.nin_hidden = j.at("nin_hidden");
    c.nin_output = j.at("nin_output");
    c.pool_dim = j.at("pool_dim");
    c.embedding_dim = j.at("embedding_dim");
    c.expected_context = j.at("expected_context");
    c.scorer_init = j.at("scorer_init");
    c.seed = j.at("seed");
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad e2e config: ") + e.what());
  }
  return c;
}

inline constexpr char kE2EModelKind[] = "e2e_model";

inline Bundle to_bundle(const E2EModel& m, const nlohmann::json& training = nlohmann::json::object()) {
  Bundle b;
  b.kind = kE2EModelKind;
  b.meta["config"] = config_to_json(m.config);
  b.meta["training"] = training;
  nn::store_network(b, m.net);
  b.arrays["scorer/S"] = m.scorer.S;
  b.arrays["scorer/b"] = m.scorer.b;
  return b;
}

inline E2EModel e2e_from_bundle(const Bundle& b) {
  if (b.kind != kE2EModelKind) throw FormatError("expected an e2e model, found " + b.kind);
  E2EModel m;
  m.config = config_from_json(b.meta.at("config"));
  m.net = nn::load_network(b);
  m.scorer.S = b.array("scorer/S");
  m.scorer.b = b.array("scorer/b");
  if (m.scorer.S.rows() != m.net.output_dim() || m.scorer.S.cols() != m.net.output_dim() || m.scorer.b.size() != 1)
    throw FormatError("scorer shape does not match the embedding network");
  if (!m.scorer.S.allFinite() || !m.scorer.b.allFinite()) throw FormatError("scorer is not finite");
  return m;
}

}  // namespace dsv::e2e
