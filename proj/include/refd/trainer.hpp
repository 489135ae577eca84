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

#include <cstdint>
#include <span>
#include <vector>

#include "refd/adam.hpp"
#include "refd/feature_matrix.hpp"
#include "refd/losses.hpp"
#include "refd/mlp.hpp"

namespace refd {

enum class ClassifierLoss { kCrossEntropy, kRegMixup };

struct TrainConfig {
  int epochs = 30;
  std::size_t batch_size = 16;
  double lr = 1e-3;
  int lr_halve_every = 5;
  AdamConfig adam;
  std::uint64_t seed = 42;
  std::size_t hidden_dim = 64;
  std::size_t feature_dim = 16;

  // Real emphasis stage.
  OcMargins oc;
  // Cosine gate used to score real-class F1 on dev for checkpoint selection.
  double dev_gate = 0.98;

  // Fake dispersion / one-stage.
  ClassifierLoss loss = ClassifierLoss::kRegMixup;
  RegMixupParams regmixup;

  // Throws ConfigError.
  void validate() const;
  // lr * 2^-floor(epoch / lr_halve_every), epoch counted from 0.
  double lr_at(int epoch) const;
};

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double mean_loss = 0.0;
  double dev_metric = 0.0;
};

struct TrainResult {
  MlpModel model;  // best dev checkpoint; later epochs win ties
  int best_epoch = -1;
  double best_dev_metric = 0.0;
  std::vector<EpochRecord> epochs;
  // Total loss of every optimisation step, in order.
  std::vector<double> step_losses;
};

// Labels are already collapsed to {0 = real, 1 = fake}.
TrainResult train_real_emphasis(const FeatureMatrix& train_x, std::span<const int> train_y,
                                const FeatureMatrix& dev_x, std::span<const int> dev_y,
                                const TrainConfig& cfg);

// Labels 1..6; no real (0) or novel (7) samples allowed.
TrainResult train_fake_dispersion(const FeatureMatrix& train_x, std::span<const int> train_y,
                                  const FeatureMatrix& dev_x, std::span<const int> dev_y,
                                  const TrainConfig& cfg);

// Labels 0..6.
TrainResult train_one_stage(const FeatureMatrix& train_x, std::span<const int> train_y,
                            const FeatureMatrix& dev_x, std::span<const int> dev_y,
                            const TrainConfig& cfg);

// 0 for class 0, 1 for everything else.
std::vector<int> collapse_real_fake(std::span<const int> labels);

// Argmax of each logit row mapped through the model's class map (ties go to
// the lowest output index).
std::vector<int> predict_classes(const MlpModel& model, const FeatureMatrix& logits);

}  // namespace refd
