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

#pragma once

#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "refd/feature_matrix.hpp"
#include "refd/manifest.hpp"
#include "refd/mlp.hpp"
#include "refd/ood.hpp"

namespace refd {

struct RefdConfig {
  // Cosine gate of the one-class head; at or above it a sample is real.
  double re_gate = 0.98;
  OodScorerConfig ood_scorer;
  // nullopt means "choose by sweep".
  std::optional<double> ood_threshold;
  int ood_class = kOodClass;

  void validate() const;
};

enum class PredictionStage { kRealGate, kIdFake, kOodFake };

std::string_view prediction_stage_name(PredictionStage s);
PredictionStage parse_prediction_stage(std::string_view s);

struct Prediction {
  std::string utt_id;
  int predicted_class = 0;
  PredictionStage stage = PredictionStage::kIdFake;
  std::optional<double> oc_score;   // absent for the one-stage pipeline
  std::optional<double> ood_score;  // absent for samples stopped at the real gate
};

// Everything the dual-stage decision rule needs, computed once so the OOD
// threshold can be swept without re-running the models.
struct RefdOutputs {
  std::vector<double> oc_scores;
  FeatureMatrix fd_logits;
  ScoreVector ood_scores;
  std::vector<int> class_map;
};

RefdOutputs compute_refd_outputs(const MlpModel& re_model, const MlpModel& fd_model,
                                 const FeatureMatrix& eval_raw, const OodScorerConfig& scorer,
                                 const TrainBank& bank);

// Per sample: oc >= re_gate -> class 0; else ood < threshold -> ood_class;
// else argmax of the FD logits through its class map.
std::vector<Prediction> assign_refd(const RefdOutputs& outputs, std::span<const std::string> utt_ids,
                                    double re_gate, double ood_threshold, int ood_class = kOodClass);

// Throws ConfigError on stage-tag mismatch or an unresolved threshold.
std::vector<Prediction> infer_refd(const MlpModel& re_model, const MlpModel& fd_model,
                                   const FeatureMatrix& eval_raw, std::span<const std::string> utt_ids,
                                   const RefdConfig& cfg, const TrainBank& bank);

struct OneStageOutputs {
  FeatureMatrix logits;
  ScoreVector ood_scores;
  std::vector<int> class_map;
};

OneStageOutputs compute_one_stage_outputs(const MlpModel& model, const FeatureMatrix& eval_raw,
                                          const OodScorerConfig& scorer, const TrainBank& bank);

std::vector<Prediction> assign_one_stage(const OneStageOutputs& outputs,
                                         std::span<const std::string> utt_ids, double ood_threshold,
                                         int ood_class = kOodClass);

std::vector<Prediction> infer_one_stage(const MlpModel& model, const FeatureMatrix& eval_raw,
                                        std::span<const std::string> utt_ids,
                                        const OodScorerConfig& scorer, double ood_threshold,
                                        const TrainBank& bank, int ood_class = kOodClass);

std::vector<int> predicted_classes(std::span<const Prediction> predictions);

// Scores aligned with `predictions` for sweeping: +inf (never flagged) for
// samples without an OOD score.
ScoreVector sweep_scores(std::span<const Prediction> predictions);

struct SweepPoint {
  double threshold = 0.0;
  double macro_f1 = 0.0;
};

struct SweepResult {
  double best_threshold = -std::numeric_limits<double>::infinity();
  double best_macro_f1 = 0.0;
  std::vector<SweepPoint> curve;
};

// Exact max-macro-F1 threshold search. Candidates are -inf, the midpoints of
// consecutive distinct finite scores, and +inf; a sample is relabelled
// ood_class when its score is strictly below the threshold. Ties in macro-F1
// go to the smallest threshold. Scores may be +inf (never relabelled) but not
// NaN or -inf. Macro-F1 averages classes 0..ood_class.
SweepResult sweep_threshold(std::span<const double> scores, std::span<const int> base_predictions,
                            std::span<const int> labels, int ood_class = kOodClass);

// Predictions CSV: utt_id,predicted_class,stage,oc_score,ood_score (empty
// cell for an absent score).
std::string encode_predictions_csv(std::span<const Prediction> predictions);
std::vector<Prediction> decode_predictions_csv(std::string_view text);
void save_predictions_csv(std::span<const Prediction> predictions, const std::filesystem::path& path);
std::vector<Prediction> load_predictions_csv(const std::filesystem::path& path);

}  // namespace refd
