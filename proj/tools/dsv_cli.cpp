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

// dsv: command-line driver for the speaker-verification pipeline.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "dsv/pipeline/pipeline.hpp"

namespace fs = std::filesystem;
using namespace dsv;

namespace {

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  std::string out_dir;

  void attach(CLI::App* sub) {
    sub->add_option("--config", config_path, "INI run configuration")->check(CLI::ExistingFile);
    sub->add_option("--set", overrides, "section.key=value override (repeatable)");
    sub->add_option("--seed", seed, "run seed (overrides the config)");
    sub->add_option("--out-dir", out_dir, "run directory (overrides the config)");
  }

  // defaults < config file < --set < --seed/--out-dir
  config::RunConfig resolve(const CLI::App& sub) const {
    config::RunConfig cfg;
    if (!config_path.empty()) cfg = config::read_run_config(config_path);
    for (const auto& o : overrides) config::apply_override(cfg, o);
    if (sub.count("--seed")) cfg.seed = seed;
    if (sub.count("--out-dir")) cfg.out_dir = out_dir;
    cfg.finalize();
    return cfg;
  }
};

// Optional path flag with a layout default.
struct PathFlag {
  std::string value;
  fs::path or_default(const fs::path& d) const { return value.empty() ? d : fs::path(value); }
};

std::vector<frontend::LabeledFeatures> load_set(const fs::path& manifest, const fs::path& features) {
  return frontend::load_feature_set(datagen::read_manifest(manifest), features);
}

const eval::ConditionSpec& find_condition(const config::RunConfig& cfg, const std::string& name) {
  for (const auto& c : cfg.conditions)
    if (c.name == name || pipeline::slug(c.name) == name) return c;
  throw UsageError("condition '" + name + "' is not in the configuration");
}

// Table order: d-vector rows first (cosine, LDA, PLDA), then e2e, then the
// random control; conditions in configuration order.
void order_score_sets(std::vector<eval::ScoreSet>& sets, const config::RunConfig& cfg) {
  static const std::map<std::string, int> system_rank{{"dvector", 0}, {"e2e", 1}, {"control", 2}};
  static const std::map<std::string, int> scoring_rank{{"cosine", 0}, {"lda", 1}, {"plda", 2}, {"bilinear", 3}, {"random", 4}};
  auto rank = [](const std::map<std::string, int>& m, const std::string& k) {
    auto it = m.find(k);
    return it == m.end() ? 99 : it->second;
  };
  auto cond_rank = [&](const std::string& c) {
    for (std::size_t i = 0; i < cfg.conditions.size(); ++i)
      if (cfg.conditions[i].name == c) return static_cast<int>(i);
    return 99;
  };
  std::stable_sort(sets.begin(), sets.end(), [&](const eval::ScoreSet& a, const eval::ScoreSet& b) {
    auto ka = std::make_tuple(rank(system_rank, a.system), a.system, rank(scoring_rank, a.scoring), a.scoring,
                              cond_rank(a.condition), a.condition);
    auto kb = std::make_tuple(rank(system_rank, b.system), b.system, rank(scoring_rank, b.scoring), b.scoring,
                              cond_rank(b.condition), b.condition);
    return ka < kb;
  });
}

std::vector<std::string> scorings_for(const std::string& system) {
  if (system == "dvector") return {"cosine", "lda", "plda"};
  return {"bilinear"};
}

eval::ScoreSet score_condition(const config::RunConfig& cfg, const std::string& scoring,
                               const pipeline::System* sys, const backend::Backend* be, const eval::ConditionSpec& cond,
                               const fs::path& trials_dir, std::span<const frontend::LabeledFeatures> eval_set,
                               const fs::path& scores_dir) {
  auto files = pipeline::trial_files(trials_dir, cond);
  auto list = eval::read_trial_list(files.trials, files.segments);
  if (list.trials.empty()) throw UsageError("no trials in " + files.trials.string());
  auto scores = pipeline::score_trials({scoring, sys, be, cfg.seed}, list, eval_set);
  fs::create_directories(scores_dir);
  const auto path = pipeline::score_file(scores_dir, scores);
  eval::write_scores(path, scores);
  pipeline::note("wrote " + path.string());
  return scores;
}

int run_pipeline(const config::RunConfig& cfg) {
  const pipeline::Layout lay{cfg.out_dir};
  pipeline::write_resolved_config(lay.root, "run", cfg);
  pipeline::note("generating corpus");
  auto corpus = pipeline::gen_data(cfg, lay.corpus());
  pipeline::note("extracting features");
  pipeline::featurize(cfg, corpus.all, lay.features());
  const auto train = frontend::load_feature_set(corpus.train, lay.features());
  const auto eval_set = frontend::load_feature_set(corpus.eval, lay.features());

  pipeline::note("training d-vector network");
  pipeline::System dv{"dvector", pipeline::train_dvector(cfg, train, lay.dvector_model(), lay.models() / "dvector_train.tsv"), {}};
  pipeline::note("training end-to-end network");
  pipeline::System ee{"e2e", {}, pipeline::train_e2e(cfg, train, lay.e2e_model(), lay.models() / "e2e_train.tsv")};

  {
    auto vec = pipeline::extract_vectors(dv, train);
    fs::create_directories(lay.vectors());
    frontend::write_features(lay.vectors() / "dvector-train.vec", vec.features, vec.row_ids);
  }
  // Back-ends are fitted on the stored (single precision) vectors so that
  // fit-backend run by hand gives the same bytes.
  const auto vec = frontend::read_features(lay.vectors() / "dvector-train.vec");
  std::map<std::string, backend::Backend> backends;
  for (auto kind : {backend::BackendKind::lda, backend::BackendKind::plda}) {
    auto be = pipeline::fit_backend(cfg, kind, vec, corpus.train);
    write_bundle(lay.backend(kind), backend::to_bundle(be));
    backends.emplace(std::string(to_string(kind)), std::move(be));
  }

  pipeline::make_trials(cfg, eval_set, lay.trials());
  std::vector<eval::ScoreSet> sets;
  for (const auto& cond : cfg.conditions) {
    for (const auto& sc : scorings_for("dvector")) {
      auto it = backends.find(sc);
      sets.push_back(score_condition(cfg, sc, &dv, it == backends.end() ? nullptr : &it->second, cond, lay.trials(),
                                     eval_set, lay.scores()));
    }
    sets.push_back(score_condition(cfg, "bilinear", &ee, nullptr, cond, lay.trials(), eval_set, lay.scores()));
    if (cfg.random_control)
      sets.push_back(score_condition(cfg, "random", nullptr, nullptr, cond, lay.trials(), eval_set, lay.scores()));
  }
  order_score_sets(sets, cfg);
  auto cells = pipeline::write_report(sets, lay.report_text(), lay.report_tsv());
  std::cout << eval::format_report_table(cells);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dsv: d-vector and end-to-end speaker verification on synthetic corpora"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "dsv 1.0");

  Common common;
  PathFlag manifest, features, model, output, vectors, backend_path, trials_dir, scores_dir;
  std::string kind, scoring, condition, which = "both";
  std::vector<std::string> score_files;
  double tolerance = 1e-4, step = pipeline::kFullGradCheckStep;

  auto* gen = app.add_subcommand("gen-data", "synthesize the corpus and its train/eval split");
  gen->add_option("--corpus-dir", output.value, "corpus directory (default <out-dir>/corpus)");

  auto* feat = app.add_subcommand("featurize", "compute 40-d log mel filterbank features with per-utterance CMVN");
  feat->add_option("--manifest", manifest.value, "manifest (default <out-dir>/corpus/manifest.tsv)");
  feat->add_option("--features-dir", features.value, "output directory (default <out-dir>/features)");

  auto* tdv = app.add_subcommand("train-dvector", "train the frame-level speaker classifier");
  auto* te2e = app.add_subcommand("train-e2e", "train the end-to-end pair network");
  for (auto* s : {tdv, te2e}) {
    s->add_option("--manifest", manifest.value, "training manifest (default <out-dir>/corpus/train.tsv)");
    s->add_option("--features", features.value, "feature directory (default <out-dir>/features)");
    s->add_option("--model", model.value, "model output path (default <out-dir>/models/<system>.model)");
  }

  auto* ext = app.add_subcommand("extract", "write one d-vector or embedding per utterance");
  ext->add_option("--model", model.value, "model file")->required();
  ext->add_option("--manifest", manifest.value, "manifest (default <out-dir>/corpus/train.tsv)");
  ext->add_option("--features", features.value, "feature directory (default <out-dir>/features)");
  ext->add_option("--output", output.value, "vector archive (default <out-dir>/vectors/<system>-<manifest>.vec)");

  auto* fit = app.add_subcommand("fit-backend", "fit LDA or LDA+PLDA on training vectors");
  fit->add_option("--kind", kind, "lda or plda")->required()->check(CLI::IsMember({"lda", "plda"}));
  fit->add_option("--vectors", vectors.value, "vector archive (default <out-dir>/vectors/dvector-train.vec)");
  fit->add_option("--manifest", manifest.value, "manifest with speaker labels (default <out-dir>/corpus/train.tsv)");
  fit->add_option("--output", output.value, "back-end file (default <out-dir>/models/<kind>.backend)");

  auto* tri = app.add_subcommand("trials", "build enrollment/test segments and trial lists for each condition");
  tri->add_option("--manifest", manifest.value, "evaluation manifest (default <out-dir>/corpus/eval.tsv)");
  tri->add_option("--features", features.value, "feature directory (default <out-dir>/features)");
  tri->add_option("--trials-dir", trials_dir.value, "output directory (default <out-dir>/trials)");

  auto* sco = app.add_subcommand("score", "score trial lists with one system");
  sco->add_option("--scoring", scoring, "cosine, lda, plda (d-vector), bilinear (e2e) or random")
      ->required()
      ->check(CLI::IsMember({"cosine", "lda", "plda", "bilinear", "random"}));
  sco->add_option("--model", model.value, "model file (default by scoring)");
  sco->add_option("--backend", backend_path.value, "back-end file for lda/plda (default <out-dir>/models/<kind>.backend)");
  sco->add_option("--condition", condition, "only this condition (default: all configured)");
  sco->add_option("--manifest", manifest.value, "evaluation manifest (default <out-dir>/corpus/eval.tsv)");
  sco->add_option("--features", features.value, "feature directory (default <out-dir>/features)");
  sco->add_option("--trials-dir", trials_dir.value, "trial directory (default <out-dir>/trials)");
  sco->add_option("--scores-dir", scores_dir.value, "output directory (default <out-dir>/scores)");

  auto* evl = app.add_subcommand("eval", "compute EERs and write the report");
  evl->add_option("--scores", score_files, "score files (default: every .scores file in <out-dir>/scores)");

  auto* gc = app.add_subcommand("gradcheck", "finite-difference check of both networks at reduced size");
  gc->add_option("--system", which, "dvector, e2e or both")->check(CLI::IsMember({"dvector", "e2e", "both"}));
  gc->add_option("--tolerance", tolerance, "largest accepted relative error");
  gc->add_option("--step", step, "finite-difference step");

  auto* run = app.add_subcommand("run", "every step above in order");

  for (auto* s : {gen, feat, tdv, te2e, ext, fit, tri, sco, evl, gc, run}) common.attach(s);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    const config::RunConfig cfg = common.resolve(*sub);
    const pipeline::Layout lay{cfg.out_dir};
    const std::string name = sub->get_name();
    pipeline::write_resolved_config(lay.root, name, cfg);

    if (sub == gen) {
      auto c = pipeline::gen_data(cfg, output.or_default(lay.corpus()));
      pipeline::note("wrote " + std::to_string(c.all.utterances.size()) + " utterances, " +
                     std::to_string(c.train.speakers().size()) + " training and " + std::to_string(c.eval.speakers().size()) +
                     " evaluation speakers");
    } else if (sub == feat) {
      auto m = datagen::read_manifest(manifest.or_default(lay.manifest()));
      pipeline::featurize(cfg, m, features.or_default(lay.features()));
      pipeline::note("featurized " + std::to_string(m.utterances.size()) + " utterances");
    } else if (sub == tdv || sub == te2e) {
      auto train = load_set(manifest.or_default(lay.train_manifest()), features.or_default(lay.features()));
      if (sub == tdv) {
        const auto path = model.or_default(lay.dvector_model());
        pipeline::train_dvector(cfg, train, path, path.parent_path() / "dvector_train.tsv");
      } else {
        const auto path = model.or_default(lay.e2e_model());
        pipeline::train_e2e(cfg, train, path, path.parent_path() / "e2e_train.tsv");
      }
    } else if (sub == ext) {
      const auto man = manifest.or_default(lay.train_manifest());
      auto sys = pipeline::load_system(model.value);
      auto a = pipeline::extract_vectors(sys, load_set(man, features.or_default(lay.features())));
      const auto path = output.or_default(lay.vectors() / (sys.name + "-" + man.stem().string() + ".vec"));
      if (path.has_parent_path()) fs::create_directories(path.parent_path());
      frontend::write_features(path, a.features, a.row_ids);
      pipeline::note("wrote " + path.string());
    } else if (sub == fit) {
      const auto k = backend::parse_backend_kind(kind);
      auto a = frontend::read_features(vectors.or_default(lay.vectors() / "dvector-train.vec"));
      auto be = pipeline::fit_backend(cfg, k, a, datagen::read_manifest(manifest.or_default(lay.train_manifest())));
      const auto path = output.or_default(lay.backend(k));
      if (path.has_parent_path()) fs::create_directories(path.parent_path());
      write_bundle(path, backend::to_bundle(be));
      pipeline::note("wrote " + path.string());
    } else if (sub == tri) {
      auto set = load_set(manifest.or_default(lay.eval_manifest()), features.or_default(lay.features()));
      for (const auto& l : pipeline::make_trials(cfg, set, trials_dir.or_default(lay.trials())))
        pipeline::note(l.condition.name + ": " + std::to_string(l.enrollments.size()) + " enrollments, " +
                       std::to_string(l.tests.size()) + " tests, " + std::to_string(l.num_targets()) + " target and " +
                       std::to_string(l.num_nontargets()) + " nontarget trials");
    } else if (sub == sco) {
      auto set = load_set(manifest.or_default(lay.eval_manifest()), features.or_default(lay.features()));
      std::optional<pipeline::System> sys;
      std::optional<backend::Backend> be;
      if (scoring != "random")
        sys = pipeline::load_system(model.or_default(scoring == "bilinear" ? lay.e2e_model() : lay.dvector_model()));
      if (scoring == "lda" || scoring == "plda") {
        const auto k = backend::parse_backend_kind(scoring);
        be = backend::backend_from_bundle(read_bundle(backend_path.or_default(lay.backend(k)), scoring));
      }
      std::vector<eval::ConditionSpec> conds = cfg.conditions;
      if (!condition.empty()) conds = {find_condition(cfg, condition)};
      for (const auto& c : conds)
        score_condition(cfg, scoring, sys ? &*sys : nullptr, be ? &*be : nullptr, c,
                        trials_dir.or_default(lay.trials()), set, scores_dir.or_default(lay.scores()));
    } else if (sub == evl) {
      std::vector<fs::path> paths(score_files.begin(), score_files.end());
      if (paths.empty()) {
        if (fs::is_directory(lay.scores()))
          for (const auto& e : fs::directory_iterator(lay.scores()))
            if (e.path().extension() == ".scores") paths.push_back(e.path());
        std::sort(paths.begin(), paths.end());
      }
      if (paths.empty()) throw UsageError("no trials: no score files found under " + lay.scores().string());
      std::vector<eval::ScoreSet> sets;
      for (const auto& p : paths) {
        auto s = eval::read_scores(p);
        if (s.records.empty()) throw UsageError("no trials in " + p.string());
        sets.push_back(std::move(s));
      }
      order_score_sets(sets, cfg);
      fs::create_directories(lay.root);
      auto cells = pipeline::write_report(sets, lay.report_text(), lay.report_tsv());
      std::cout << eval::format_report_table(cells);
    } else if (sub == gc) {
      std::vector<pipeline::GradCheckResult> results;
      if (which != "e2e") results.push_back(pipeline::gradcheck_dvector(cfg.seed, step));
      if (which != "dvector") results.push_back(pipeline::gradcheck_e2e(cfg.seed, step));
      const std::string report = pipeline::format_gradcheck(results, tolerance);
      io::write_file_atomic(lay.root / "gradcheck.tsv", report);
      std::cout << report;
      for (const auto& r : results)
        if (!r.report.passed(tolerance)) return 1;
    } else if (sub == run) {
      return run_pipeline(cfg);
    }
    return 0;
  } catch (const UsageError& e) {
    std::cerr << "dsv: error: " << e.what() << '\n';
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "dsv: config error: " << e.what() << '\n';
    return 2;
  } catch (const TrainingDiverged& e) {
    std::cerr << "dsv: training diverged: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "dsv: error: " << e.what() << '\n';
    return 1;
  }
}
