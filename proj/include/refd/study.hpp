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

#include <span>
#include <string>
#include <vector>

#include "refd/config.hpp"
#include "refd/pipeline.hpp"
#include "refd/report.hpp"
#include "refd/synth.hpp"
#include "refd/trainer.hpp"

namespace refd {

struct Subset {
  FeatureMatrix x;
  std::vector<int> y;
  std::vector<std::string> ids;
};

// Rows whose label lies in [lo, hi].
Subset label_subset(const FeatureMatrix& x, std::span<const int> labels,
                    std::span<const std::string> ids, int lo, int hi);

// Bank over the model's own training split (features + logits), with class
// labels attached for the Mahalanobis statistics.
TrainBank bank_from_model(const MlpModel& model, const FeatureMatrix& train_x,
                          std::span<const int> train_y, const OodScorerConfig& scorer);

struct PipelineRun {
  std::vector<Prediction> predictions;
  // -inf when OOD detection is disabled.
  double threshold = 0.0;
  std::string threshold_mode;
};

struct EvalSplit {
  const FeatureMatrix* x = nullptr;
  std::span<const int> labels;
  std::span<const std::string> ids;
};

// Dual-stage inference with the threshold chosen per `mode`. With
// `ood_enabled` false the threshold is -inf and nothing is flagged novel.
PipelineRun run_refd(const MlpModel& re, const MlpModel& fd, const TrainBank& bank,
                     const EvalSplit& eval, const EvalSplit& dev, const RefdConfig& cfg,
                     ThresholdMode mode, bool ood_enabled);

PipelineRun run_one_stage(const MlpModel& model, const TrainBank& bank, const EvalSplit& eval,
                          const EvalSplit& dev, const RefdConfig& cfg, ThresholdMode mode);

struct StudyResult {
  // OC-Softmax at gate 0 and at the configured tight gate; class 0 only.
  std::vector<EvalReport> real_stage;
  // CE vs CE + RegMixup fake-dispersion training, each without and with NSD.
  std::vector<EvalReport> fake_dispersion;
  // RegMixup model, no OOD followed by every configured scorer.
  std::vector<EvalReport> ood_detectors;
  // One-stage vs dual-stage, both with the configured scorer.
  std::vector<EvalReport> stage_comparison;

  // Throws ArgumentError when no row carries that method name.
  const EvalReport& find(const std::string& method) const;
};

// Generates the synthetic corpus, trains every model the comparison needs and
// evaluates all pipelines. Deterministic given the config; `generated_at`
// is copied into every report verbatim.
StudyResult run_study(const StudyConfig& cfg, const std::string& generated_at = "");

}  // namespace refd
