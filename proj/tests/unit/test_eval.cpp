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

#include <cmath>
#include <limits>
#include <random>

#include "dsv/core/text_format.hpp"
#include "dsv/eval/eer.hpp"
#include "dsv/eval/report.hpp"
#include "dsv/eval/trials.hpp"
#include "test_util.hpp"

namespace dsv::eval {
namespace {

// Naive reference: operating points at every score and +inf, each counted
// from scratch, then the same straight-line crossing.
// Also reports the bracket max_t min(FAR, FRR) .. min_t max(FAR, FRR) that
// any crossing point must fall in.
double brute_force_eer(const std::vector<double>& tar, const std::vector<double>& non,
                       std::pair<double, double>* bracket = nullptr) {
  std::vector<double> th(tar);
  th.insert(th.end(), non.begin(), non.end());
  std::sort(th.begin(), th.end());
  th.erase(std::unique(th.begin(), th.end()), th.end());
  th.push_back(std::numeric_limits<double>::infinity());
  std::vector<double> frr, far;
  for (double t : th) {
    int miss = 0, fa = 0;
    for (double s : tar) miss += s < t;
    for (double s : non) fa += s >= t;
    frr.push_back(static_cast<double>(miss) / tar.size());
    far.push_back(static_cast<double>(fa) / non.size());
  }
  if (bracket) {
    *bracket = {0.0, 100.0};
    for (std::size_t i = 0; i < th.size(); ++i) {
      bracket->first = std::max(bracket->first, 100.0 * std::min(frr[i], far[i]));
      bracket->second = std::min(bracket->second, 100.0 * std::max(frr[i], far[i]));
    }
  }
  for (std::size_t k = 1; k < th.size(); ++k)
    if (frr[k] >= far[k]) {
      double d0 = far[k - 1] - frr[k - 1], d1 = frr[k] - far[k];
      return 100.0 * (frr[k - 1] + d0 / (d0 + d1) * (frr[k] - frr[k - 1]));
    }
  return -1;
}

void random_scores(std::mt19937_64& rng, int nt, int nn, double shift, std::vector<double>& tar, std::vector<double>& non) {
  std::normal_distribution<double> g;
  tar.clear();
  non.clear();
  for (int i = 0; i < nt; ++i) tar.push_back(g(rng) + shift);
  for (int i = 0; i < nn; ++i) non.push_back(g(rng));
}

TEST(Eer, PerfectAndInverted) {
  std::vector<double> ones(10, 1.0), zeros(12, 0.0);
  EXPECT_EQ(compute_eer(ones, zeros).eer, 0.0);
  EXPECT_EQ(compute_eer(zeros, ones).eer, 100.0);
  auto r = compute_eer(ones, zeros);
  EXPECT_EQ(r.targets, 10u);
  EXPECT_EQ(r.nontargets, 12u);
  EXPECT_GT(r.threshold, 0.0);
  EXPECT_LE(r.threshold, 1.0);
}

TEST(Eer, RandomScoresMatchExhaustiveSweep) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u;
  std::vector<double> tar(1000), non(1000);
  for (auto& s : tar) s = u(rng);
  for (auto& s : non) s = u(rng);
  const double eer = compute_eer(tar, non).eer;
  EXPECT_NEAR(eer, 50.0, 3.0);
  EXPECT_DOUBLE_EQ(eer, brute_force_eer(tar, non));
}

TEST(Eer, MatchesSweepOnManySets) {
  std::mt19937_64 rng(5);
  std::vector<double> tar, non;
  std::uniform_real_distribution<double> log_size(std::log(10.0), std::log(5000.0));
  for (int i = 0; i < 50; ++i) {
    const int nt = static_cast<int>(std::exp(log_size(rng))), nn = static_cast<int>(std::exp(log_size(rng)));
    random_scores(rng, nt, nn, 0.2 * (i % 10), tar, non);
    std::pair<double, double> bracket;
    const double ref = brute_force_eer(tar, non, &bracket);
    const double eer = compute_eer(tar, non).eer;
    EXPECT_LT(std::abs(eer - ref), 0.1) << "set " << i;
    EXPECT_NEAR(eer, ref, 1e-9) << "set " << i;
    EXPECT_GE(eer, bracket.first - 1e-9) << "set " << i;
    EXPECT_LE(eer, bracket.second + 1e-9) << "set " << i;
  }
}

TEST(Eer, TiesAcceptAtThreshold) {
  // All scores tied: the only finite threshold accepts everything (no
  // misses, all false accepts), +inf rejects everything; halfway is 50%.
  std::vector<double> tar(4, 0.5), non(6, 0.5);
  EXPECT_DOUBLE_EQ(compute_eer(tar, non).eer, brute_force_eer(tar, non));
  EXPECT_DOUBLE_EQ(compute_eer(tar, non).eer, 50.0);
  EXPECT_EQ(compute_eer(tar, non).threshold, 0.5);
  // A nontarget tied with a target at the threshold counts as accepted.
  std::vector<double> t2{1.0, 2.0}, n2{0.0, 1.0};
  EXPECT_DOUBLE_EQ(compute_eer(t2, n2).eer, brute_force_eer(t2, n2));
}

TEST(Eer, MonotoneTransformInvariance) {
  std::mt19937_64 rng(8);
  std::vector<double> tar, non;
  random_scores(rng, 300, 700, 1.0, tar, non);
  const double base = compute_eer(tar, non).eer;
  auto map = [](std::vector<double> v, auto f) {
    for (auto& s : v) s = f(s);
    return v;
  };
  auto sig = [](double s) { return 1.0 / (1.0 + std::exp(-s)); };
  auto aff = [](double s) { return 3.5 * s - 2.0; };
  EXPECT_DOUBLE_EQ(compute_eer(map(tar, sig), map(non, sig)).eer, base);
  EXPECT_DOUBLE_EQ(compute_eer(map(tar, aff), map(non, aff)).eer, base);
}

TEST(Eer, PermutationInvariance) {
  std::mt19937_64 rng(9);
  std::vector<double> tar, non;
  random_scores(rng, 200, 400, 1.5, tar, non);
  const auto base = compute_eer(tar, non);
  for (int i = 0; i < 5; ++i) {
    std::shuffle(tar.begin(), tar.end(), rng);
    std::shuffle(non.begin(), non.end(), rng);
    auto r = compute_eer(tar, non);
    EXPECT_EQ(r.eer, base.eer);
    EXPECT_EQ(r.threshold, base.threshold);
  }
}

TEST(Eer, SingleClassIsAnError) {
  std::vector<double> some{0.1, 0.2}, none;
  EXPECT_THROW(compute_eer(some, none), UsageError);
  EXPECT_THROW(compute_eer(none, some), UsageError);
  try {
    compute_eer(none, none);
    FAIL();
  } catch (const UsageError& e) {
    EXPECT_NE(std::string(e.what()).find("no trials"), std::string::npos);
  }
  std::vector<double> bad{std::nan("")};
  EXPECT_THROW(compute_eer(bad, some), UsageError);
}

// 20 speakers, half female, U utterances each of 4.5 s at 10 ms.
std::vector<UttInfo> synthetic_eval_set(int speakers, int utts, long frames = 450) {
  std::vector<UttInfo> out;
  for (int s = 0; s < speakers; ++s)
    for (int u = 0; u < utts; ++u) {
      char spk[16], id[32];
      std::snprintf(spk, sizeof spk, "spk%03d", s);
      std::snprintf(id, sizeof id, "spk%03d-u%03d", s, u);
      out.push_back({id, spk, s < speakers / 2 ? Gender::female : Gender::male, frames});
    }
  return out;
}

TEST(Trials, FourSecondSegments) {
  auto utts = synthetic_eval_set(20, 6);
  auto list = build_condition(utts, {"C(4-4)", 4, 4});
  EXPECT_TRUE(list.warnings.empty());
  ASSERT_FALSE(list.trials.empty());
  for (const auto& s : list.enrollments) EXPECT_EQ(s.total_frames(), 400);
  for (const auto& s : list.tests) EXPECT_EQ(s.total_frames(), 400);
}

TEST(Trials, LabelAuditAndDistinctRecordings) {
  auto utts = synthetic_eval_set(20, 6);
  auto list = build_condition(utts, {"C(4-4)", 4, 4});
  std::map<std::string, const Segment*> seg;
  for (const auto& s : list.enrollments) seg[s.id] = &s;
  for (const auto& s : list.tests) seg[s.id] = &s;
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& t : list.trials) {
    const auto& e = *seg.at(t.enroll_id);
    const auto& x = *seg.at(t.test_id);
    EXPECT_EQ(t.label == TrialLabel::target, e.speaker == x.speaker);
    EXPECT_EQ(e.gender, x.gender);
    EXPECT_EQ(t.gender, e.gender);
    for (const auto& p : e.pieces) EXPECT_NE(p.utt, x.pieces[0].utt);
    EXPECT_TRUE(seen.emplace(t.enroll_id, t.test_id).second);
  }
}

TEST(Trials, CountsMatchCombinatorics) {
  // S speakers, U test utterances and E enrollment entries each: targets
  // S*U*E; nontargets pair each entry with every other same-gender
  // speaker's tests.
  for (int utts : {4, 6, 9}) {
    const int S = 20, half = S / 2;
    auto set = synthetic_eval_set(S, utts);
    auto list = build_condition(set, {"C(4-4)", 4, 4});
    const long U = utts - utts / 2, E = utts / 2;
    EXPECT_EQ(static_cast<long>(list.num_targets()), S * U * E);
    EXPECT_EQ(static_cast<long>(list.num_nontargets()), 2L * half * E * (half - 1) * U);
  }
}

TEST(Trials, LongEnrollmentConcatenates) {
  auto utts = synthetic_eval_set(4, 20);  // 10 x 4.5 s enrollment pool
  auto list = build_condition(utts, {"C(40-4)", 40, 4});
  ASSERT_EQ(list.enrollments.size(), 4u);
  for (const auto& e : list.enrollments) {
    EXPECT_EQ(e.total_frames(), 4000);
    EXPECT_EQ(e.pieces.size(), 9u);
    EXPECT_EQ(e.pieces.back().frames, 4000 - 8 * 450);
  }
  EXPECT_EQ(list.num_targets(), 4u * 10u);
}

TEST(Trials, ShortSpeakerExcludedWithWarning) {
  auto utts = synthetic_eval_set(4, 6);
  for (auto& u : utts)
    if (u.speaker == "spk001") u.num_frames = 100;
  auto list = build_condition(utts, {"C(40-4)", 40, 4});
  EXPECT_TRUE(list.enrollments.empty());
  EXPECT_EQ(list.warnings.size(), 4u);
  auto short_list = build_condition(utts, {"C(4-4)", 4, 4});
  ASSERT_EQ(short_list.warnings.size(), 1u);
  EXPECT_NE(short_list.warnings[0].find("spk001"), std::string::npos);
  for (const auto& t : short_list.trials) EXPECT_EQ(t.enroll_id.find("spk001"), std::string::npos);
}

TEST(Trials, SegmentFeaturesConcatenate) {
  frontend::FeatureMatrix a, b;
  a.frames = testing::random_matrix(5, 3, 1);
  b.frames = testing::random_matrix(4, 3, 2);
  a.kind.base_dim = b.kind.base_dim = 3;
  std::map<std::string, const frontend::FeatureMatrix*> feats{{"a", &a}, {"b", &b}};
  Segment s{"x", "s", Gender::male, {{"a", 1, 3}, {"b", 0, 2}}};
  auto f = segment_features(s, feats);
  ASSERT_EQ(f.num_frames(), 5);
  EXPECT_EQ(Matrix(f.frames.topRows(3)), Matrix(a.frames.middleRows(1, 3)));
  EXPECT_EQ(Matrix(f.frames.bottomRows(2)), Matrix(b.frames.topRows(2)));
  s.pieces[1].frames = 5;
  EXPECT_THROW(segment_features(s, feats), UsageError);
}

TEST(Trials, FilesRoundTrip) {
  auto list = build_condition(synthetic_eval_set(6, 6), {"C(4-4)", 4, 4});
  auto back = parse_trial_list(format_trials(list), format_segments(list));
  EXPECT_EQ(back.condition.name, "C(4-4)");
  ASSERT_EQ(back.trials.size(), list.trials.size());
  for (std::size_t i = 0; i < list.trials.size(); ++i) {
    EXPECT_EQ(back.trials[i].enroll_id, list.trials[i].enroll_id);
    EXPECT_EQ(back.trials[i].label, list.trials[i].label);
  }
  ASSERT_EQ(back.enrollments.size(), list.enrollments.size());
  EXPECT_EQ(back.enrollments[0].pieces[0].utt, list.enrollments[0].pieces[0].utt);
  EXPECT_EQ(format_trials(back), format_trials(list));
  EXPECT_EQ(format_segments(back), format_segments(list));

  std::string tampered = format_trials(list);
  tampered.replace(tampered.find("v1"), 2, "v7");
  EXPECT_THROW(parse_trial_list(tampered, format_segments(list)), FormatError);
}

ScoreSet sample_scores(const std::string& sys, const std::string& scoring, const std::string& cond, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  ScoreSet s{sys, scoring, cond, {}};
  for (int i = 0; i < 40; ++i)
    s.records.push_back({"e" + std::to_string(i % 5), "t" + std::to_string(i), g(rng) + (i % 4 == 0 ? 2 : 0),
                         i % 4 == 0 ? TrialLabel::target : TrialLabel::nontarget});
  return s;
}

TEST(Scores, RoundTripIsExact) {
  auto s = sample_scores("dvector", "plda", "C(4-4)", 3);
  s.records[0].score = 0.1 + 0.2;
  auto back = parse_scores(format_scores(s));
  EXPECT_EQ(back.system, "dvector");
  EXPECT_EQ(back.condition, "C(4-4)");
  for (std::size_t i = 0; i < s.records.size(); ++i) EXPECT_EQ(back.records[i].score, s.records[i].score);
  EXPECT_EQ(compute_eer(back).eer, compute_eer(s).eer);
  EXPECT_THROW(parse_scores("e\tt\t1\ttarget\n"), FormatError);
  EXPECT_THROW(parse_scores(text::version_line("scores") + "\ne\tt\tnan\ttarget\n"), FormatError);
  EXPECT_THROW(compute_eer(parse_scores(text::version_line("scores") + "\n")), UsageError);
}

TEST(Report, TableHasEveryCell) {
  std::vector<ReportCell> cells;
  for (auto sys : {"dvector", "e2e"})
    for (auto cond : {"C(4-4)", "C(40-4)"}) cells.push_back(make_cell(sample_scores(sys, "cosine", cond, cells.size())));
  auto table = format_report_table(cells);
  for (const auto& c : cells) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", c.result.eer);
    EXPECT_NE(table.find(buf), std::string::npos) << table;
  }
  EXPECT_EQ(table.find(" - "), std::string::npos);
  auto tsv = format_report_tsv(cells);
  EXPECT_EQ(std::count(tsv.begin(), tsv.end(), '\n'), 6);
  // Cells carry the exact EER value.
  EXPECT_NE(tsv.find(format_double(cells[3].result.eer)), std::string::npos);
}

TEST(Report, RegeneratedFromFilesIsIdentical) {
  std::vector<ScoreSet> sets{sample_scores("dvector", "lda", "C(4-4)", 1), sample_scores("e2e", "e2e", "C(4-4)", 2)};
  std::vector<ReportCell> a, b;
  for (const auto& s : sets) {
    a.push_back(make_cell(s));
    b.push_back(make_cell(parse_scores(format_scores(s))));
  }
  EXPECT_EQ(format_report_tsv(a), format_report_tsv(b));
  EXPECT_EQ(format_report_table(a), format_report_table(b));
}

TEST(TextHeader, VersionChecked) {
  auto line = text::version_line("scores", {{"system", "x"}});
  EXPECT_EQ(line, "#dsv-scores v1 system=x");
  EXPECT_EQ(text::parse_version_line(line, "scores").attr("system"), "x");
  EXPECT_THROW(text::parse_version_line(line, "trials"), FormatError);
  EXPECT_THROW(text::parse_version_line("#dsv-scores v2", "scores"), FormatError);
  EXPECT_THROW(text::parse_version_line("enroll\ttest", "scores"), FormatError);
  EXPECT_THROW(text::version_line("scores", {{"system", "a b"}}), UsageError);
}

}  // namespace
}  // namespace dsv::eval
