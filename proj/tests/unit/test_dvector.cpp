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

#include <gtest/gtest.h>

#include <limits>

#include "dsv/datagen/synth.hpp"
#include "dsv/dvector/dvector.hpp"
#include "test_util.hpp"

namespace dsv::dvector {
namespace {

using testing::random_matrix;

DVectorConfig narrow_config(int speakers = 2) {
  DVectorConfig c;
  c.conv_channels = {48, 48};
  c.bottleneck_dim = 32;
  c.td_dims = {48, 48};
  c.feature_dim = 32;
  c.num_speakers = speakers;
  return c;
}

frontend::FeatureMatrix fbank_of(Matrix frames) {
  frontend::FeatureMatrix f;
  f.kind.base_dim = static_cast<int>(frames.cols());
  f.frames = std::move(frames);
  return f;
}

TEST(DVectorNet, DefaultGeometry) {
  DVectorConfig cfg;
  EXPECT_EQ(effective_context(cfg), 20);
  auto model = build_dvector_net(cfg);
  EXPECT_TRUE(model.warnings.empty());
  EXPECT_EQ(model.net.output_dim_at(1), 360);
  EXPECT_EQ(model.net.output_dim(), 5000);
  EXPECT_EQ(model.net.output_dim_at(model.feature_end), 400);
  EXPECT_EQ(context_extent(model), (std::pair<int, int>{-9, 10}));
}

TEST(DVectorNet, OtherContextIsFlagged) {
  auto cfg = narrow_config();
  cfg.conv_kernels = {2, 2};
  auto model = build_dvector_net(cfg);
  EXPECT_EQ(effective_context(model), 21);
  ASSERT_EQ(model.warnings.size(), 1u);
  EXPECT_NE(model.warnings[0].find("21"), std::string::npos);
  cfg.num_speakers = 1;
  EXPECT_THROW(build_dvector_net(cfg), ConfigError);
}

TEST(DVectorNet, PerturbationMatchesReceptiveField) {
  auto model = build_dvector_net(narrow_config());
  Matrix x = random_matrix(64, 40, 3);
  const int t0 = 30;
  Matrix base = extract_frame_features(model, fbank_of(x)).frames;
  for (int o = -16; o <= 16; ++o) {
    Matrix y = x;
    y.row(t0 + o).array() += 1.0;
    const double change = (extract_frame_features(model, fbank_of(y)).frames.row(t0) - base.row(t0)).cwiseAbs().maxCoeff();
    if (o >= -9 && o <= 10) {
      EXPECT_GT(change, 0.0) << "offset " << o;
    } else {
      EXPECT_EQ(change, 0.0) << "offset " << o;
    }
  }
}

TEST(DVectorNet, SingleFrameInput) {
  auto model = build_dvector_net(narrow_config());
  auto seq = extract_frame_features(model, fbank_of(random_matrix(1, 40, 1)));
  EXPECT_EQ(seq.frames.rows(), 1);
  EXPECT_EQ(seq.frames.cols(), 32);
  EXPECT_TRUE(seq.frames.allFinite());
}

TEST(DVectorNet, RejectsWrongFeatureKind) {
  auto model = build_dvector_net(narrow_config());
  auto f = fbank_of(random_matrix(10, 40, 1));
  f.kind.splice = 1;
  EXPECT_THROW(extract_frame_features(model, f), UsageError);
  EXPECT_THROW(extract_frame_features(model, fbank_of(random_matrix(10, 20, 1))), UsageError);
}

TEST(Pooling, MeanOverTime) {
  FrameFeatureSeq same{Matrix(RowVector::LinSpaced(5, 0, 1).replicate(7, 1)), "u"};
  EXPECT_LT((pool_dvector(same).values.transpose() - same.frames.row(0)).norm(), 1e-15);

  Matrix a = random_matrix(3, 4, 1), b = random_matrix(5, 4, 2);
  Matrix ab(8, 4);
  ab << a, b;
  Vector expect = (3 * a.colwise().mean() + 5 * b.colwise().mean()).transpose() / 8.0;
  EXPECT_LT((pool_dvector({ab, "ab"}).values - expect).norm(), 1e-14);

  Matrix shuffled = ab.colwise().reverse();
  EXPECT_LT((pool_dvector({shuffled, ""}).values - pool_dvector({ab, ""}).values).norm(), 1e-14);
  EXPECT_THROW(pool_dvector({Matrix(0, 4), ""}), UsageError);
}

std::vector<frontend::LabeledFeatures> synthetic_corpus(int speakers, int utts, double seconds, std::uint64_t seed) {
  datagen::SyntheticSpec spec;
  spec.num_speakers = speakers;
  spec.utterances_per_speaker = utts;
  spec.min_seconds = spec.max_seconds = seconds;
  spec.seed = seed;
  frontend::FrontendConfig fcfg;
  std::vector<frontend::LabeledFeatures> out;
  for (int s = 0; s < speakers; ++s) {
    auto voice = datagen::draw_voice(spec, s);
    for (int u = 0; u < utts; ++u) {
      auto clip = datagen::synthesize_utterance(spec, voice, s, u);
      out.push_back({clip.id, clip.speaker_id, clip.gender, frontend::extract_model_features(clip, fcfg)});
    }
  }
  return out;
}

nn::TrainerConfig quick_trainer(int epochs) {
  nn::TrainerConfig t;
  t.learning_rate = 0.02;
  t.momentum = 0.9;
  t.max_epochs = epochs;
  t.batch_size = 4;
  t.seed = 3;
  return t;
}

TEST(DVectorTraining, SeparatesTwoSpeakers) {
  auto corpus = synthetic_corpus(2, 10, 3.0, 21);  // 30 s per speaker
  std::vector<EpochStats> log;
  auto model = train_dvector(corpus, narrow_config(), quick_trainer(5), {},
                             [&](const EpochStats& s) { log.push_back(s); });
  ASSERT_EQ(log.size(), 5u);
  for (const auto& s : log) std::printf("epoch %d loss %.4f acc %.4f\n", s.epoch, s.loss, s.accuracy);
  EXPECT_GT(log.back().accuracy, 0.95);
  EXPECT_EQ(model.speakers, (std::vector<std::string>{"spk000", "spk001"}));
}

TEST(DVectorTraining, SameSeedSameParameters) {
  auto corpus = synthetic_corpus(2, 2, 0.5, 4);
  auto a = train_dvector(corpus, narrow_config(), quick_trainer(2));
  auto b = train_dvector(corpus, narrow_config(), quick_trainer(2));
  for (const auto& [name, value] : a.net.parameters()) EXPECT_EQ(value, b.net.parameters().at(name)) << name;
}

TEST(DVectorTraining, RejectsSingleSpeaker) {
  auto corpus = synthetic_corpus(2, 2, 0.5, 4);
  corpus.resize(2);
  EXPECT_THROW(train_dvector(corpus, narrow_config(), quick_trainer(1)), UsageError);
}

TEST(DVectorTraining, NonFiniteInputDiverges) {
  auto corpus = synthetic_corpus(2, 2, 0.5, 4);
  corpus[1].feat.frames(3, 3) = std::numeric_limits<double>::quiet_NaN();
  try {
    train_dvector(corpus, narrow_config(), quick_trainer(2));
    FAIL() << "expected divergence";
  } catch (const TrainingDiverged& e) {
    EXPECT_NE(std::string(e.what()).find("epoch 0"), std::string::npos);
  }
}

// Full-batch gradient descent on ten frames: the epoch loss never rises and
// the frames end up memorised.
TEST(DVectorTraining, MemorisesTenFrames) {
  std::vector<frontend::LabeledFeatures> corpus;
  for (int s = 0; s < 2; ++s)
    corpus.push_back({"u" + std::to_string(s), "s" + std::to_string(s), Gender::female,
                      fbank_of(random_matrix(5, 40, 50 + static_cast<std::uint64_t>(s)))});
  nn::TrainerConfig t;
  t.learning_rate = 0.02;
  t.momentum = 0;
  t.clip_norm = 0;
  t.max_epochs = 300;
  t.batch_size = 8;
  std::vector<double> losses;
  train_dvector(corpus, narrow_config(), t, {.chunk_frames = 5},
                [&](const EpochStats& s) { losses.push_back(s.loss); });
  for (std::size_t i = 1; i < losses.size(); ++i) EXPECT_LE(losses[i], losses[i - 1] + 1e-12) << "epoch " << i;
  EXPECT_LT(losses.back(), 0.01);
}

TEST(DVectorModelIo, RoundTrip) {
  auto model = build_dvector_net(narrow_config(3));
  model.speakers = {"a", "b", "c"};
  auto back = dvector_from_bundle(decode_bundle(encode_bundle(to_bundle(model))));
  auto f = fbank_of(random_matrix(12, 40, 6));
  EXPECT_EQ(compute_dvector(back, f).values, compute_dvector(model, f).values);
  EXPECT_EQ(back.feature_end, model.feature_end);
  EXPECT_EQ(back.speakers, model.speakers);
  Bundle wrong = to_bundle(model);
  wrong.kind = "plda";
  EXPECT_THROW(dvector_from_bundle(wrong), FormatError);
}

}  // namespace
}  // namespace dsv::dvector
