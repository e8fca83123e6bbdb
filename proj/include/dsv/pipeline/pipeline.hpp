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
#include <cctype>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dsv/backend/backend.hpp"
#include "dsv/config/run_config.hpp"
#include "dsv/core/bundle.hpp"
#include "dsv/core/text_format.hpp"
#include "dsv/datagen/corpus.hpp"
#include "dsv/datagen/synth.hpp"
#include "dsv/dvector/dvector.hpp"
#include "dsv/e2e/e2e.hpp"
#include "dsv/eval/report.hpp"
#include "dsv/eval/trials.hpp"
#include "dsv/frontend/feature_set.hpp"
#include "dsv/frontend/wav.hpp"
#include "dsv/nn/grad_check.hpp"
#include "dsv/nn/loss.hpp"

namespace dsv::pipeline {

namespace fs = std::filesystem;

// Default artifact locations below an output directory.
struct Layout {
  fs::path root;

  fs::path corpus() const { return root / "corpus"; }
  fs::path manifest() const { return corpus() / "manifest.tsv"; }
  fs::path train_manifest() const { return corpus() / "train.tsv"; }
  fs::path eval_manifest() const { return corpus() / "eval.tsv"; }
  fs::path features() const { return root / "features"; }
  fs::path models() const { return root / "models"; }
  fs::path vectors() const { return root / "vectors"; }
  fs::path trials() const { return root / "trials"; }
  fs::path scores() const { return root / "scores"; }
  fs::path dvector_model() const { return models() / "dvector.model"; }
  fs::path e2e_model() const { return models() / "e2e.model"; }
  fs::path backend(backend::BackendKind k) const { return models() / (std::string(to_string(k)) + ".backend"); }
  fs::path report_text() const { return root / "report.txt"; }
  fs::path report_tsv() const { return root / "report.tsv"; }
};

// "C(40-4)" -> "c40-4"
inline std::string slug(const std::string& name) {
  std::string s;
  for (char ch : name) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      s += static_cast<char>(std::tolower(c));
    } else if (ch == '-' || ch == '_' || ch == '.') {
      s += ch;
    }
  }
  if (s.empty()) throw UsageError("condition name '" + name + "' has no usable characters");
  return s;
}

inline void note(const std::string& msg) { std::cerr << "dsv: " << msg << std::endl; }

inline void write_resolved_config(const fs::path& dir, const std::string& step, const config::RunConfig& cfg) {
  fs::create_directories(dir);
  io::write_file_atomic(dir / (step + ".config.ini"), config::format_run_config(cfg));
}

// Append-only tab-separated log: version line, column header, then rows
// flushed as they arrive so a running job can be watched.
class TsvLog {
 public:
  TsvLog(const fs::path& path, const std::string& kind, const std::map<std::string, std::string>& attrs,
         const std::string& columns) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    out_.open(path, std::ios::trunc);
    if (!out_) throw IoError("cannot write " + path.string());
    out_ << text::version_line(kind, attrs) << '\n' << columns << '\n';
    out_.flush();
  }

  template <class... T>
  void row(const T&... fields) {
    std::size_t i = 0;
    ((out_ << (i++ ? "\t" : "") << cell(fields)), ...);
    out_ << '\n';
    out_.flush();
  }

 private:
  static std::string cell(double v) { return eval::format_double(v); }
  template <class T>
  static std::string cell(const T& v) {
    if constexpr (std::is_integral_v<T>) {
      return std::to_string(v);
    } else {
      return std::string(v);
    }
  }
  std::ofstream out_;
};

// ---- corpus and features ----

struct CorpusSplit {
  datagen::Manifest all, train, eval;
};

inline CorpusSplit gen_data(const config::RunConfig& cfg, const fs::path& dir) {
  CorpusSplit c;
  c.all = datagen::generate_corpus(cfg.datagen, dir);
  std::tie(c.train, c.eval) = datagen::split_train_eval(c.all, cfg.train_speakers, cfg.eval_speakers, cfg.seed);
  datagen::write_manifest(dir / "train.tsv", c.train);
  datagen::write_manifest(dir / "eval.tsv", c.eval);
  return c;
}

inline void featurize(const config::RunConfig& cfg, const datagen::Manifest& m, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  for (const auto& u : m.utterances) {
    auto clip = frontend::read_wav(m.resolve(u));
    frontend::write_features(frontend::feature_path(out_dir, u.id), frontend::extract_model_features(clip, cfg.frontend));
  }
}

// ---- training ----

inline nlohmann::json trainer_json(const nn::TrainerConfig& t) {
  return {{"learning_rate", t.learning_rate}, {"lr_decay", t.lr_decay}, {"decay_every", t.decay_every},
          {"momentum", t.momentum},           {"max_epochs", t.max_epochs}, {"batch_size", t.batch_size},
          {"clip_norm", t.clip_norm},         {"seed", t.seed}};
}

inline dvector::DVectorModel train_dvector(const config::RunConfig& cfg, std::span<const frontend::LabeledFeatures> train,
                                           const fs::path& model_path, const fs::path& log_path) {
  TsvLog log(log_path, "trainlog", {{"system", "dvector"}}, "epoch\tloss\taccuracy\tlearning_rate\tframes");
  auto model = dvector::train_dvector(train, cfg.dvector, cfg.trainer, cfg.dvector_train, [&](const dvector::EpochStats& s) {
    log.row(s.epoch, s.loss, s.accuracy, s.learning_rate, s.frames);
    note("dvector epoch " + std::to_string(s.epoch) + " loss " + eval::format_double(s.loss).substr(0, 8) + " accuracy " +
         eval::format_double(s.accuracy).substr(0, 6));
  });
  for (const auto& w : model.warnings) note("warning: " + w);
  auto training = trainer_json(cfg.trainer);
  training["chunk_frames"] = cfg.dvector_train.chunk_frames;
  training["max_chunks_per_epoch"] = cfg.dvector_train.max_chunks_per_epoch;
  fs::create_directories(model_path.parent_path());
  write_bundle(model_path, dvector::to_bundle(model, training));
  return model;
}

inline e2e::E2EModel train_e2e(const config::RunConfig& cfg, std::span<const frontend::LabeledFeatures> train,
                               const fs::path& model_path, const fs::path& log_path) {
  TsvLog log(log_path, "trainlog", {{"system", "e2e"}},
             "iteration\tepoch\tchunk_length\tlearning_rate\tloss\tsame_loss\tdiff_loss\tsame_accuracy\tdiff_accuracy\tgrad_norm");
  double epoch_loss = 0;
  int in_epoch = 0;
  auto model = e2e::train_e2e(train, cfg.e2e, cfg.e2e_train, cfg.e2e_trainer, [&](const e2e::IterationStats& s) {
    log.row(s.iteration, s.epoch, s.chunk_length, s.learning_rate, s.loss, s.same_loss, s.diff_loss, s.same_accuracy,
            s.diff_accuracy, s.grad_norm);
    epoch_loss += s.loss;
    if (++in_epoch == cfg.e2e_train.batches_per_epoch) {
      note("e2e epoch " + std::to_string(s.epoch) + " mean loss " + eval::format_double(epoch_loss / in_epoch).substr(0, 8));
      epoch_loss = 0;
      in_epoch = 0;
    }
  });
  auto training = trainer_json(cfg.e2e_trainer);
  training["speakers_per_batch"] = cfg.e2e_train.speakers_per_batch;
  training["k"] = cfg.e2e_train.resolved_k();
  training["min_chunk"] = cfg.e2e_train.min_chunk;
  training["max_chunk"] = cfg.e2e_train.max_chunk;
  training["batches_per_epoch"] = cfg.e2e_train.batches_per_epoch;
  fs::create_directories(model_path.parent_path());
  write_bundle(model_path, e2e::to_bundle(model, training));
  return model;
}

// ---- systems: whatever maps a feature matrix to a vector ----

struct System {
  std::string name;  // "dvector" or "e2e"
  std::optional<dvector::DVectorModel> dvector;
  std::optional<e2e::E2EModel> e2e;

  Vector represent(const frontend::FeatureMatrix& f) const {
    if (dvector) return dvector::compute_dvector(*dvector, f).values;
    return e2e::embed(*e2e, f);
  }
  std::string vector_kind() const { return dvector ? "dvector" : "embedding"; }
};

inline System load_system(const fs::path& model_path) {
  Bundle b = read_bundle(model_path);
  System s;
  if (b.kind == dvector::kDVectorModelKind) {
    s.name = "dvector";
    s.dvector = dvector::dvector_from_bundle(b);
  } else if (b.kind == e2e::kE2EModelKind) {
    s.name = "e2e";
    s.e2e = e2e::e2e_from_bundle(b);
  } else {
    throw FormatError(model_path.string() + " holds a " + b.kind + ", not a speaker model");
  }
  return s;
}

// One row per utterance, ids kept in the archive.
inline frontend::FeatureArchive extract_vectors(const System& sys, std::span<const frontend::LabeledFeatures> set) {
  if (set.empty()) throw UsageError("nothing to extract");
  frontend::FeatureArchive a;
  std::vector<Vector> rows;
  for (const auto& u : set) {
    rows.push_back(sys.represent(u.feat));
    a.row_ids.push_back(u.utt_id);
  }
  a.features.frames.resize(static_cast<Eigen::Index>(rows.size()), rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i) a.features.frames.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  a.features.kind = frontend::FeatureKind::parse(sys.vector_kind());
  a.features.kind.base_dim = static_cast<int>(rows[0].size());
  a.features.frame_period = 0;
  return a;
}

inline backend::Backend fit_backend(const config::RunConfig& cfg, backend::BackendKind kind,
                                    const frontend::FeatureArchive& vectors, const datagen::Manifest& labels) {
  std::map<std::string, std::string> spk;
  for (const auto& u : labels.utterances) spk[u.id] = u.speaker_id;
  std::vector<std::string> names;
  for (const auto& id : vectors.row_ids) {
    auto it = spk.find(id);
    if (it == spk.end()) throw UsageError("vector '" + id + "' has no speaker in the manifest");
    names.push_back(it->second);
  }
  if (names.empty()) throw UsageError("vector archive carries no utterance ids");
  int classes = 0;
  auto idx = backend::encode_labels(names, &classes);
  return backend::fit_backend(kind, vectors.features.frames, idx, cfg.backends);
}

// ---- trials and scoring ----

inline std::vector<eval::UttInfo> utterance_info(std::span<const frontend::LabeledFeatures> set) {
  std::vector<eval::UttInfo> out;
  for (const auto& u : set) out.push_back({u.utt_id, u.speaker_id, u.gender, u.feat.num_frames()});
  return out;
}

inline double frame_period_of(std::span<const frontend::LabeledFeatures> set) {
  if (set.empty()) throw UsageError("empty evaluation set");
  return set.front().feat.frame_period;
}

struct TrialFiles {
  fs::path trials, segments;
};

inline TrialFiles trial_files(const fs::path& dir, const eval::ConditionSpec& c) {
  return {dir / (slug(c.name) + ".trials"), dir / (slug(c.name) + ".segments")};
}

inline std::vector<eval::TrialList> make_trials(const config::RunConfig& cfg, std::span<const frontend::LabeledFeatures> eval_set,
                                                const fs::path& dir) {
  auto info = utterance_info(eval_set);
  auto lists = eval::build_conditions(info, cfg.conditions, frame_period_of(eval_set));
  fs::create_directories(dir);
  for (const auto& l : lists) {
    for (const auto& w : l.warnings) note("warning: " + w);
    if (l.trials.empty()) note("warning: condition " + l.condition.name + " has no trials");
    auto files = trial_files(dir, l.condition);
    eval::write_trial_list(files.trials, files.segments, l);
  }
  return lists;
}

// scoring: "cosine", "lda", "plda" (d-vector), "bilinear" (e2e), "random".
struct ScoringSpec {
  std::string scoring;
  const System* system = nullptr;
  const backend::Backend* backend = nullptr;
  std::uint64_t seed = 1;
};

inline eval::ScoreSet score_trials(const ScoringSpec& spec, const eval::TrialList& list,
                                   std::span<const frontend::LabeledFeatures> eval_set) {
  eval::ScoreSet out;
  out.condition = list.condition.name;
  out.scoring = spec.scoring;
  if (spec.scoring == "random") {
    out.system = "control";
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (const auto& t : list.trials) out.records.push_back({t.enroll_id, t.test_id, u(rng), t.label});
    return out;
  }
  if (!spec.system) throw UsageError("scoring '" + spec.scoring + "' needs a model");
  const System& sys = *spec.system;
  out.system = sys.name;
  const bool bilinear = spec.scoring == "bilinear";
  if (bilinear != (sys.name == "e2e")) throw UsageError("scoring '" + spec.scoring + "' does not apply to " + sys.name);
  if ((spec.scoring == "lda" || spec.scoring == "plda") &&
      (!spec.backend || std::string(to_string(spec.backend->kind)) != spec.scoring))
    throw UsageError("scoring '" + spec.scoring + "' needs a " + spec.scoring + " back-end");
  if (!bilinear && spec.scoring != "cosine" && spec.scoring != "lda" && spec.scoring != "plda")
    throw UsageError("unknown scoring '" + spec.scoring + "'");

  std::map<std::string, const frontend::FeatureMatrix*> feats;
  for (const auto& u : eval_set) feats[u.utt_id] = &u.feat;
  std::map<std::string, Vector> rep;
  for (const auto* group : {&list.enrollments, &list.tests})
    for (const auto& seg : *group) {
      Vector v = sys.represent(eval::segment_features(seg, feats));
      if (spec.backend) v = spec.backend->project(v);
      rep[seg.id] = std::move(v);
    }
  for (const auto& t : list.trials) {
    const Vector& e = rep.at(t.enroll_id);
    const Vector& x = rep.at(t.test_id);
    double s = 0;
    if (bilinear) {
      s = sys.e2e->scorer.score(e, x);
    } else if (spec.scoring == "plda") {
      s = backend::plda_score(*spec.backend->plda, e, x);
    } else {
      s = backend::cosine_score(e, x);
    }
    out.records.push_back({t.enroll_id, t.test_id, s, t.label});
  }
  return out;
}

inline fs::path score_file(const fs::path& dir, const eval::ScoreSet& s) {
  return dir / (s.system + "-" + s.scoring + "-" + slug(s.condition) + ".scores");
}

inline std::vector<eval::ReportCell> write_report(const std::vector<eval::ScoreSet>& sets, const fs::path& text_path,
                                                  const fs::path& tsv_path) {
  std::vector<eval::ReportCell> cells;
  for (const auto& s : sets) {
    if (s.records.empty()) throw UsageError("no trials in score set " + s.system + "/" + s.scoring + "/" + s.condition);
    cells.push_back(eval::make_cell(s));
  }
  io::write_file_atomic(text_path, eval::format_report_table(cells));
  io::write_file_atomic(tsv_path, eval::format_report_tsv(cells));
  return cells;
}

// ---- gradient check at reduced size ----

// The full graphs hold thousands of relu units; at a step of 1e-4 a few
// pre-activations sit close enough to zero that the difference quotient
// straddles the kink. 1e-6 keeps rounding error near 1e-8 relative.
inline constexpr double kFullGradCheckStep = 1e-6;

struct GradCheckResult {
  std::string system;
  nn::GradCheckReport report;
};

inline dvector::DVectorConfig reduced_dvector() {
  dvector::DVectorConfig c;
  c.input_dim = 8;
  c.conv_channels = {16, 16};
  c.bottleneck_dim = 16;
  c.td_dims = {24, 24};
  c.feature_dim = 16;
  c.num_speakers = 4;
  return c;
}

inline e2e::E2EConfig reduced_e2e() {
  e2e::E2EConfig c;
  c.input_dim = 8;
  c.lift_dim = 12;
  c.nin_hidden = 16;
  c.nin_output = 12;
  c.pool_dim = 12;
  c.embedding_dim = 16;
  return c;
}

inline Matrix gaussian_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

// Frame cross-entropy through the whole classifier.
inline GradCheckResult gradcheck_dvector(std::uint64_t seed, double step = kFullGradCheckStep) {
  auto cfg = reduced_dvector();
  cfg.seed = seed;
  auto model = dvector::build_dvector_net(cfg);
  std::mt19937_64 rng(seed);
  Matrix x = gaussian_matrix(30, cfg.input_dim, rng);
  std::vector<int> labels(static_cast<std::size_t>(x.rows()));
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(rng() % static_cast<std::uint64_t>(cfg.num_speakers));
  auto head = [&](const Matrix& out) {
    auto lg = nn::softmax_xent_rows(out, labels);
    return std::pair<double, Matrix>{lg.loss, lg.grad};
  };
  return {"dvector", nn::grad_check(model.net, x, head, step)};
}

// Pair loss through chunks, network and scorer.
inline GradCheckResult gradcheck_e2e(std::uint64_t seed, double step = kFullGradCheckStep) {
  auto cfg = reduced_e2e();
  cfg.seed = seed;
  auto m = e2e::build_e2e_net(cfg);
  std::mt19937_64 rng(seed);
  Matrix a = gaussian_matrix(cfg.embedding_dim, cfg.embedding_dim, rng);
  m.scorer.S = 0.5 * Matrix::Identity(cfg.embedding_dim, cfg.embedding_dim) + 0.02 * (a + a.transpose());
  m.scorer.b(0, 0) = 0.1;
  std::vector<frontend::LabeledFeatures> corpus;
  for (int u = 0; u < 6; ++u) {
    frontend::FeatureMatrix f;
    f.kind.base_dim = cfg.input_dim;
    f.frames = gaussian_matrix(24, cfg.input_dim, rng);
    corpus.push_back({"u" + std::to_string(u), "s" + std::to_string(u / 2), Gender::female, f});
  }
  auto batch = e2e::sample_pair_batch(corpus, e2e::utterances_by_speaker(corpus), 3, 20, rng);
  const double k = 0.5;
  auto [pl, grads] = e2e::batch_gradients(m, corpus, batch, k);
  auto loss = [&] {
    Matrix emb(static_cast<Eigen::Index>(batch.chunks.size()), cfg.embedding_dim);
    for (std::size_t c = 0; c < batch.chunks.size(); ++c) {
      const auto& ch = batch.chunks[c];
      emb.row(static_cast<Eigen::Index>(c)) =
          e2e::embed(m, Matrix(corpus[static_cast<std::size_t>(ch.utt)].feat.frames.middleRows(ch.start, ch.length))).transpose();
    }
    return e2e::pair_loss(m.scorer, emb, batch.same, batch.diff, k).loss;
  };
  auto refs = e2e::trainable_refs(m);
  return {"e2e", nn::grad_check(refs, grads, loss, step)};
}

inline std::string format_gradcheck(const std::vector<GradCheckResult>& results, double tolerance) {
  std::ostringstream out;
  out << text::version_line("gradcheck", {{"tolerance", eval::format_double(tolerance)}}) << '\n';
  out << "system\tparameter\trelative_error\tmax_abs_error\n";
  for (const auto& r : results)
    for (const auto& [name, e] : r.report.relative_error)
      out << r.system << '\t' << name << '\t' << eval::format_double(e) << '\t'
          << eval::format_double(r.report.max_abs_error.at(name)) << '\n';
  for (const auto& r : results)
    out << "# " << r.system << " worst " << eval::format_double(r.report.worst()) << ' '
        << (r.report.passed(tolerance) ? "PASS" : "FAIL") << '\n';
  return out.str();
}

}  // namespace dsv::pipeline
