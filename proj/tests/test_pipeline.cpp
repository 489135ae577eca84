// Copyright (c) 2026 The REFD Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include <gtest/gtest.h>

#include "refd/config.hpp"
#include "refd/errors.hpp"
#include "refd/metrics.hpp"
#include "refd/mlp.hpp"
#include "refd/pipeline.hpp"
#include "refd/report.hpp"
#include "test_util.hpp"

namespace refd {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::map<int, double> row(std::initializer_list<double> cells) {
  std::map<int, double> m;
  int k = 0;
  for (double c : cells) m[k++] = c;
  return m;
}

TEST(F1, HandCounts) {
  EXPECT_NEAR(f1_from_counts({1, 1, 0}), 2.0 / 3.0, 1e-15);
  EXPECT_EQ(f1_from_counts({0, 0, 0}), 0.0);
  EXPECT_EQ(f1_from_counts({0, 3, 2}), 0.0);
  EXPECT_EQ(f1_from_counts({5, 0, 0}), 1.0);
}

TEST(F1, PerfectAndMissingNovelClass) {
  const std::vector<int> y{0, 1, 2, 3, 4, 5, 6, 7, 7};
  const auto classes = all_classes();
  const auto perfect = f1_per_class(y, y, classes);
  for (int k = 0; k < kNumClasses; ++k) EXPECT_EQ(perfect.f1.at(k), 1.0);
  EXPECT_EQ(macro_f1(perfect.f1), 1.0);

  std::vector<int> p = y;
  p[7] = p[8] = 6;
  const auto r = f1_per_class(p, y, classes);
  EXPECT_EQ(r.f1.at(7), 0.0);
  EXPECT_TRUE(r.absent.empty());

  const std::vector<int> only{1, 2};
  const auto partial = f1_per_class(only, only, classes);
  EXPECT_EQ(partial.absent, (std::vector<int>{0, 3, 4, 5, 6, 7}));
  EXPECT_EQ(partial.f1.at(5), 0.0);
}

TEST(Confusion, DiagonalSingleEntryAndRowSums) {
  const std::vector<int> y{0, 0, 3, 5, 7};
  const ConfusionMatrix c = confusion_matrix(y, y);
  EXPECT_EQ(c[0][0], 2);
  EXPECT_EQ(c[3][3], 1);

  const ConfusionMatrix one = confusion_matrix(std::vector<int>{7}, std::vector<int>{3});
  std::int64_t total = 0;
  for (const auto& r : one) total += std::accumulate(r.begin(), r.end(), std::int64_t{0});
  EXPECT_EQ(total, 1);
  EXPECT_EQ(one[3][7], 1);

  Rng rng(1);
  std::vector<int> truth(300), pred(300);
  std::array<std::int64_t, kNumClasses> hist{};
  for (std::size_t i = 0; i < truth.size(); ++i) {
    truth[i] = static_cast<int>(testing::uniform(rng, 0, 8));
    pred[i] = static_cast<int>(testing::uniform(rng, 0, 8));
    ++hist[static_cast<std::size_t>(truth[i])];
  }
  const ConfusionMatrix r = confusion_matrix(pred, truth);
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    EXPECT_EQ(std::accumulate(r[k].begin(), r[k].end(), std::int64_t{0}), hist[k]);
  }
  EXPECT_THROW(confusion_matrix(std::vector<int>{8}, std::vector<int>{0}), ArgumentError);
}

// Published per-class cells with their AVG column, in percent.
struct TableRow {
  const char* name;
  std::map<int, double> cells;
  double avg;
};

void expect_rows(const std::vector<TableRow>& rows) {
  for (const auto& r : rows) EXPECT_NEAR(macro_f1(r.cells), r.avg, 0.005) << r.name;
}

TEST(PublishedTables, FakeDispersionAverages) {
  expect_rows({
      {"CE w/o DA", row({91.73, 52.08, 59.07, 89.90, 96.06, 95.85, 88.16, 0}), 71.61},
      {"CE", row({91.73, 69.15, 69.98, 96.87, 98.98, 98.40, 93.92, 0}), 77.38},
      {"CE + NSD", row({91.73, 67.46, 66.98, 98.11, 98.29, 99.59, 86.86, 43.50}), 81.57},
      {"CE + RegMixup", row({91.73, 69.08, 79.02, 97.41, 99.33, 96.72, 94.28, 0}), 78.45},
      {"CE + RegMixup + NSD", row({91.73, 75.45, 82.32, 98.28, 97.35, 98.42, 92.99, 58.10}), 86.83},
  });
}

TEST(PublishedTables, OodDetectorAverages) {
  expect_rows({
      {"none", row({91.73, 69.08, 79.02, 97.41, 99.33, 96.72, 94.28, 0}), 78.45},
      {"MSP", row({91.73, 63.47, 85.19, 98.37, 94.85, 97.96, 80.97, 39.45}), 81.50},
      {"MaxLogit", row({91.73, 72.95, 83.13, 98.67, 97.86, 98.45, 89.58, 44.30}), 84.58},
      {"Energy", row({91.73, 73.49, 81.26, 98.28, 96.15, 98.45, 87.78, 47.56}), 84.34},
      {"KNN", row({91.73, 69.99, 83.26, 98.21, 99.09, 97.44, 91.25, 38.12}), 83.64},
      {"Mahalanobis", row({91.73, 64.50, 83.06, 98.31, 98.76, 97.89, 91.03, 45.60}), 83.86},
      {"NNGuide", row({91.73, 72.44, 82.86, 98.30, 97.49, 98.08, 89.36, 50.05}), 85.04},
      {"Relation", row({91.73, 70.23, 86.41, 97.94, 96.12, 97.19, 90.38, 51.23}), 85.15},
      {"NSD", row({91.73, 75.45, 82.32, 98.28, 97.35, 98.42, 92.99, 58.10}), 86.83},
  });
}

TEST(PublishedTables, QuotedDifferences) {
  // Gains quoted alongside the tables, recomputed from the AVG cells.
  EXPECT_NEAR(81.57 - 77.38, 4.19, 0.005);
  EXPECT_NEAR(78.45 - 77.38, 1.07, 0.005);
  EXPECT_NEAR(86.83 - 78.45, 8.38, 0.005);
  // Real-class table: AASIST over LCNN per column, and the tight gate gains.
  EXPECT_NEAR(77.79 - 73.90, 3.89, 0.005);
  EXPECT_NEAR(85.10 - 80.89, 4.21, 0.005);
  EXPECT_NEAR(91.73 - 85.74, 5.99, 0.005);
  EXPECT_NEAR(91.73 - 77.79, 13.94, 0.005);
  EXPECT_NEAR(91.73 - 85.10, 6.63, 0.005);
}

TEST(MacroF1, AllOnesAndKeyOrderIrrelevant) {
  EXPECT_EQ(macro_f1(row({1, 1, 1, 1, 1, 1, 1, 1})), 1.0);
  EXPECT_NEAR(macro_f1({{7, 0.2}, {0, 0.6}}), 0.4, 1e-15);
}

// Class of sample i after relabelling everything scoring below t.
double macro_at(std::span<const double> s, std::span<const int> base, std::span<const int> y, double t) {
  std::vector<int> p(base.begin(), base.end());
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (s[i] < t) p[i] = kOodClass;
  }
  return macro_f1(f1_per_class(p, y, all_classes()).f1);
}

TEST(Sweep, SeparableScoresReachPerfectF1) {
  const std::vector<double> s{5, 4, 3, 1, 2};
  const std::vector<int> y{1, 2, 3, 7, 7};
  const std::vector<int> base{1, 2, 3, 4, 4};
  const std::vector<int> classes{1, 2, 3, 7};
  const SweepResult r = sweep_threshold(s, base, y);
  EXPECT_GT(r.best_threshold, 2.0);
  EXPECT_LT(r.best_threshold, 3.0);
  std::vector<int> p = base;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (s[i] < r.best_threshold) p[i] = kOodClass;
  }
  EXPECT_EQ(p, y);
  EXPECT_EQ(macro_f1(f1_per_class(p, y, classes).f1), 1.0);
  EXPECT_EQ(r.best_macro_f1, macro_at(s, base, y, r.best_threshold));
  // Candidates: -inf, four midpoints, +inf.
  ASSERT_EQ(r.curve.size(), 6u);
  EXPECT_EQ(r.curve.front().threshold, -kInf);
  EXPECT_EQ(r.curve.back().threshold, kInf);
}

TEST(Sweep, MinusInfinityReproducesNoOod) {
  const std::vector<double> s{0.3, 0.1, 0.2};
  const std::vector<int> y{1, 7, 2}, base{1, 3, 2};
  const SweepResult r = sweep_threshold(s, base, y);
  ASSERT_EQ(r.curve.front().threshold, -kInf);
  const auto none = f1_per_class(base, y, all_classes());
  EXPECT_EQ(none.f1.at(7), 0.0);
  EXPECT_EQ(r.curve.front().macro_f1, macro_f1(none.f1));
}

TEST(Sweep, AllOodEqualScoresIsDeterministic) {
  const std::vector<double> s(4, 1.5);
  const std::vector<int> y(4, 7), base(4, 2);
  const SweepResult a = sweep_threshold(s, base, y), b = sweep_threshold(s, base, y);
  EXPECT_EQ(a.best_threshold, b.best_threshold);
  EXPECT_EQ(a.curve.size(), 2u);
  EXPECT_EQ(a.best_threshold, kInf);
}

TEST(Sweep, MatchesExhaustiveScan) {
  Rng rng(2);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = 1 + static_cast<std::size_t>(testing::uniform(rng, 0, 300));
    std::vector<double> s(n);
    std::vector<int> y(n), base(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = static_cast<int>(testing::uniform(rng, 0, 8));
      base[i] = y[i] == 7 ? static_cast<int>(testing::uniform(rng, 1, 7))
                          : (testing::uniform(rng, 0, 1) < 0.8 ? y[i] : 3);
      // Coarse scores produce ties.
      s[i] = std::round(testing::uniform(rng, 0, 20)) + (y[i] == 7 ? -3 : 0);
    }
    std::vector<double> cand{-kInf, kInf};
    for (double v : s) {
      cand.push_back(v);
      cand.push_back(std::nextafter(v, kInf));
    }
    double best = -1;
    for (double t : cand) best = std::max(best, macro_at(s, base, y, t));
    const SweepResult r = sweep_threshold(s, base, y);
    EXPECT_EQ(r.best_macro_f1, best) << trial;
    EXPECT_EQ(macro_at(s, base, y, r.best_threshold), best);
    for (const auto& pt : r.curve) {
      EXPECT_LE(pt.macro_f1, r.best_macro_f1);
      if (pt.threshold < r.best_threshold) {
        EXPECT_LT(pt.macro_f1, r.best_macro_f1);
      }
    }
  }
}

TEST(Sweep, IncreasingTransformKeepsPredictions) {
  Rng rng(3);
  const std::size_t n = 200;
  std::vector<double> s(n), t(n);
  std::vector<int> y(n), base(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = static_cast<int>(testing::uniform(rng, 1, 8));
    base[i] = y[i] == 7 ? 1 : y[i];
    s[i] = testing::uniform(rng, -2, 2) + (y[i] == 7 ? -1 : 0);
    t[i] = std::exp(3 * s[i]) + 7;
  }
  const SweepResult a = sweep_threshold(s, base, y), b = sweep_threshold(t, base, y);
  EXPECT_EQ(a.best_macro_f1, b.best_macro_f1);
  for (std::size_t i = 0; i < n; ++i) {
    EXPECT_EQ(s[i] < a.best_threshold, t[i] < b.best_threshold) << i;
  }
}

TEST(Sweep, Errors) {
  const std::vector<double> none;
  const std::vector<int> empty;
  EXPECT_THROW(sweep_threshold(none, empty, empty), ArgumentError);
  const std::vector<double> s{1, 2};
  const std::vector<int> two{1, 2}, one{1};
  EXPECT_THROW(sweep_threshold(s, two, one), ArgumentError);
  const std::vector<double> bad{1, std::nan("")};
  EXPECT_THROW(sweep_threshold(bad, two, two), ArgumentError);
}

RefdOutputs refd_outputs(std::vector<double> oc, std::vector<std::vector<double>> logits,
                         std::vector<double> ood) {
  RefdOutputs o;
  o.oc_scores = std::move(oc);
  std::vector<double> flat;
  for (const auto& r : logits) flat.insert(flat.end(), r.begin(), r.end());
  o.fd_logits = FeatureMatrix(logits.size(), 6, flat, MatrixRole::kLogits);
  o.ood_scores = std::move(ood);
  o.class_map = {1, 2, 3, 4, 5, 6};
  return o;
}

TEST(Assign, DualStageRules) {
  const auto o = refd_outputs({0.99, 0.5, 0.5, 0.98},
                              {{0, 0, 1, 0, 0, 0}, {0, 0, 1, 0, 0, 0}, {0, 0, 5, 0, 0, 0}, {1, 0, 0, 0, 0, 0}},
                              {-5, -1, 3, -9});
  const std::vector<std::string> ids{"a", "b", "c", "d"};
  const auto p = assign_refd(o, ids, 0.98, 0.0);
  EXPECT_EQ(p[0].predicted_class, 0);
  EXPECT_EQ(p[0].stage, PredictionStage::kRealGate);
  EXPECT_FALSE(p[0].ood_score.has_value());
  EXPECT_EQ(p[1].predicted_class, 7);
  EXPECT_EQ(p[1].stage, PredictionStage::kOodFake);
  EXPECT_EQ(p[2].predicted_class, 3);
  EXPECT_EQ(p[2].stage, PredictionStage::kIdFake);
  EXPECT_EQ(p[3].predicted_class, 0);  // gate is inclusive
  EXPECT_EQ(p[2].utt_id, "c");
}

TEST(Assign, FakeLogitTiesGoToLowestClass) {
  const auto o = refd_outputs({0.1}, {{0, 2, 2, 0, 2, 0}}, {1});
  const std::vector<std::string> ids{"x"};
  EXPECT_EQ(assign_refd(o, ids, 0.98, 0.0)[0].predicted_class, 2);
}

TEST(Assign, OneStageRules) {
  OneStageOutputs o;
  o.logits = FeatureMatrix(3, 7, {0, 0, 0, 0, 0, 0, 0,  //
                                  3, 0, 0, 0, 3, 0, 0,  //
                                  0, 0, 0, 0, 0, 0, 9},
                           MatrixRole::kLogits);
  o.ood_scores = {-1, 2, 2};
  o.class_map = {0, 1, 2, 3, 4, 5, 6};
  const std::vector<std::string> ids{"a", "b", "c"};
  const auto p = assign_one_stage(o, ids, 0.0);
  EXPECT_EQ(p[0].predicted_class, 7);
  EXPECT_EQ(p[1].predicted_class, 0);
  EXPECT_EQ(p[1].stage, PredictionStage::kRealGate);
  EXPECT_EQ(p[2].predicted_class, 6);
  EXPECT_FALSE(p[0].oc_score.has_value());
}

TEST(Assign, GateAndThresholdMonotonicityAndPartition) {
  Rng rng(4);
  const std::size_t n = 300;
  std::vector<double> oc(n), ood(n);
  std::vector<std::vector<double>> logits(n, std::vector<double>(6));
  for (std::size_t i = 0; i < n; ++i) {
    oc[i] = testing::uniform(rng, -1, 1);
    ood[i] = testing::uniform(rng, -3, 3);
    for (double& v : logits[i]) v = testing::uniform(rng, -2, 2);
  }
  const auto o = refd_outputs(oc, logits, ood);
  const std::vector<std::string> ids(n, "u");
  auto count = [](const std::vector<Prediction>& p, int cls) {
    return std::count_if(p.begin(), p.end(), [&](const Prediction& q) { return q.predicted_class == cls; });
  };
  long prev_real = static_cast<long>(n) + 1;
  for (double gate : {-1.0, -0.5, 0.0, 0.5, 0.98, 1.0}) {
    const auto p = assign_refd(o, ids, gate, 0.0);
    EXPECT_LE(count(p, 0), prev_real);
    prev_real = count(p, 0);
    for (const auto& q : p) {
      EXPECT_EQ(q.stage == PredictionStage::kRealGate, q.predicted_class == 0);
      EXPECT_EQ(q.stage == PredictionStage::kOodFake, q.predicted_class == 7);
    }
  }
  long prev_ood = -1;
  for (double t : {-kInf, -2.0, 0.0, 1.0, 3.0, kInf}) {
    const auto p = assign_refd(o, ids, 0.5, t);
    EXPECT_GE(count(p, 7), prev_ood);
    prev_ood = count(p, 7);
    EXPECT_EQ(p.size(), n);
  }
}

TEST(Infer, StageMismatchIsConfigError) {
  const MlpShape fd_shape{4, 5, 3, 6};
  MlpShape re_shape = fd_shape;
  re_shape.classes = 0;
  const MlpModel re(Stage::kRealEmphasis, re_shape, {});
  const MlpModel fd(Stage::kFakeDispersion, fd_shape, {1, 2, 3, 4, 5, 6});
  Rng rng(5);
  const FeatureMatrix x = testing::random_matrix(3, 4, rng);
  const std::vector<std::string> ids{"a", "b", "c"};
  const TrainBank bank = build_bank(testing::random_matrix(5, 3, rng), testing::random_matrix(5, 6, rng));
  RefdConfig cfg;
  cfg.ood_threshold = 0.0;
  EXPECT_THROW(infer_refd(fd, fd, x, ids, cfg, bank), ConfigError);
  EXPECT_THROW(infer_refd(re, re, x, ids, cfg, bank), ConfigError);
  EXPECT_THROW(infer_one_stage(fd, x, ids, cfg.ood_scorer, 0.0, bank), ConfigError);
  cfg.ood_threshold.reset();
  EXPECT_THROW(infer_refd(re, fd, x, ids, cfg, bank), ConfigError);
}

TEST(PredictionsCsv, RoundTrip) {
  const std::vector<Prediction> p{
      {"a", 0, PredictionStage::kRealGate, 0.99, std::nullopt},
      {"b", 7, PredictionStage::kOodFake, 0.1, -2.5},
      {"c", 4, PredictionStage::kIdFake, std::nullopt, 1.0 / 3.0},
  };
  const std::string csv = encode_predictions_csv(p);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "utt_id,predicted_class,stage,oc_score,ood_score");
  const auto back = decode_predictions_csv(csv);
  ASSERT_EQ(back.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(back[i].utt_id, p[i].utt_id);
    EXPECT_EQ(back[i].predicted_class, p[i].predicted_class);
    EXPECT_EQ(back[i].stage, p[i].stage);
    EXPECT_EQ(back[i].oc_score, p[i].oc_score);
    EXPECT_EQ(back[i].ood_score, p[i].ood_score);
  }
  EXPECT_THROW(decode_predictions_csv("utt_id,predicted_class,stage,oc_score,ood_score\na,0,id_fake,,\n"),
               FormatError);
  EXPECT_THROW(decode_predictions_csv("utt_id,predicted_class,stage,oc_score,ood_score\na,9,id_fake,,\n"),
               FormatError);
}

TEST(PredictionsCsv, SweepScoresUseInfinityWhenAbsent) {
  const std::vector<Prediction> p{{"a", 0, PredictionStage::kRealGate, 0.99, std::nullopt},
                                  {"b", 3, PredictionStage::kIdFake, 0.1, 2.0}};
  const auto s = sweep_scores(p);
  EXPECT_EQ(s[0], kInf);
  EXPECT_EQ(s[1], 2.0);
}

TEST(Report, JsonRoundTripWithInfiniteThreshold) {
  const std::vector<int> y{0, 1, 7, 7}, p{0, 1, 7, 2};
  EvalReport r = evaluate_predictions(p, y);
  r.method = "x";
  r.re_gate = 0.98;
  r.ood_threshold = -kInf;
  r.threshold_mode = "disabled";
  r.seed = 42;
  r.config = {{"a", 1}};
  const auto j = report_to_json(r);
  EXPECT_EQ(j.at("thresholds").at("ood_threshold"), "-inf");
  const EvalReport back = report_from_json(nlohmann::json::parse(j.dump()));
  EXPECT_EQ(back.macro_f1, r.macro_f1);
  EXPECT_EQ(back.per_class_f1, r.per_class_f1);
  EXPECT_EQ(back.confusion, r.confusion);
  EXPECT_EQ(back.ood_threshold, r.ood_threshold);
  EXPECT_EQ(back.re_gate, r.re_gate);
  EXPECT_EQ(back.config, r.config);
  EXPECT_EQ(encode_report(back), encode_report(r));
  EXPECT_EQ(threshold_from_json(threshold_to_json(kInf)), kInf);
  EXPECT_EQ(threshold_from_json(threshold_to_json(0.25)), 0.25);
}

TEST(Report, MacroIsMeanAndConfusionRowsMatchTruth) {
  const std::vector<int> y{0, 1, 1, 2, 7}, p{0, 1, 2, 2, 7};
  const EvalReport r = evaluate_predictions(p, y);
  double mean = 0;
  for (const auto& [k, v] : r.per_class_f1) mean += v;
  EXPECT_NEAR(r.macro_f1, mean / static_cast<double>(r.per_class_f1.size()), 1e-15);
  EXPECT_EQ(r.confusion[1][1] + r.confusion[1][2], 2);
  EXPECT_EQ(r.per_class_f1.size(), 8u);
}

TEST(Report, TablesRenderPercent) {
  EvalReport r = evaluate_predictions(std::vector<int>{1, 2}, std::vector<int>{1, 2});
  r.method = "row";
  const std::vector<EvalReport> rows{r};
  const std::string csv = render_table_csv(rows);
  EXPECT_NE(csv.find("row"), std::string::npos);
  EXPECT_NE(csv.find("100.00"), std::string::npos);
  EXPECT_NE(render_table_text("T", rows).find("T"), std::string::npos);
}

TEST(Config, JsonRoundTripAndUnknownKeys) {
  StudyConfig c;
  c.synth.seed = 7;
  c.train_fd.epochs = 3;
  c.refd.re_gate = 0.5;
  c.refd.ood_threshold = 1.25;
  c.threshold_mode = ThresholdMode::kFixed;
  c.paths = {{"data", "corpus/"}, {"models", "ckpt/"}};
  const nlohmann::json j = to_json(c);
  const StudyConfig back = study_config_from_json(nlohmann::json::parse(j.dump()));
  EXPECT_EQ(to_json(back), j);
  EXPECT_EQ(back.synth.seed, 7u);
  EXPECT_EQ(back.refd.ood_threshold, 1.25);
  EXPECT_EQ(back.paths, c.paths);
  EXPECT_FALSE(to_json(StudyConfig{}).contains("paths"));
  EXPECT_THROW(study_config_from_json({{"paths", {{"data", 3}}}}), ConfigError);

  nlohmann::json bad = j;
  bad["synth"]["seperation"] = 3;
  EXPECT_THROW(study_config_from_json(bad), ConfigError);
  EXPECT_THROW(study_config_from_json({{"bogus", 1}}), ConfigError);
  EXPECT_NO_THROW(study_config_from_json(nlohmann::json::object()));
  EXPECT_THROW(parse_threshold_mode("median"), ConfigError);
}

}  // namespace
}  // namespace refd
