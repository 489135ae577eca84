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
#include <functional>
#include <span>
#include <vector>

#include "refd/feature_matrix.hpp"

namespace refd {

// Scale and angular margins of the one-class softmax. Real samples are
// pushed inside the cone cos >= m0, fake samples outside cos <= m1.
struct OcMargins {
  double alpha = 20.0;
  double m0 = 0.9;
  double m1 = 0.2;

  void validate() const;
};

struct OcSoftmaxParams {
  std::vector<double> w0;
  OcMargins margins;
};

// Cosine between `feature` and `w0`. Throws DegenerateError on a zero vector.
double oc_score(std::span<const double> feature, std::span<const double> w0);

struct OcLossResult {
  double loss = 0.0;
  FeatureMatrix grad_features;
  std::vector<double> grad_w0;
};

// Mean over samples of softplus(alpha * (m_y - cos_i) * (-1)^y), labels in
// {0 = real, 1 = fake}. Gradients are taken through both normalizations.
OcLossResult oc_softmax_loss(const FeatureMatrix& features, std::span<const int> labels,
                             const OcSoftmaxParams& p);

struct LossAndGrad {
  double loss = 0.0;
  FeatureMatrix grad;
};

// Mean soft-target cross-entropy. Every target row must be a probability
// distribution (sum 1 within 1e-9).
LossAndGrad cross_entropy(const FeatureMatrix& logits, const FeatureMatrix& targets);

FeatureMatrix one_hot(std::span<const int> labels, std::size_t num_classes);

struct MixupDraw {
  std::size_t partner = 0;
  double lambda = 1.0;
};

struct MixedBatch {
  FeatureMatrix x;
  FeatureMatrix y;
  std::vector<MixupDraw> draws;
};

// lambda_i ~ Beta(beta_a, beta_a), partner_i = perm[i] for one random
// permutation of the batch.
std::vector<MixupDraw> draw_mixup(std::size_t batch_size, double beta_a, std::uint64_t seed);
MixedBatch apply_mixup(const FeatureMatrix& x, const FeatureMatrix& y,
                       std::vector<MixupDraw> draws);
MixedBatch mixup_batch(const FeatureMatrix& x, const FeatureMatrix& y, double beta_a,
                       std::uint64_t seed);

struct RegMixupParams {
  double eta = 1.0;
  double beta_a = 10.0;

  void validate() const;
};

struct RegMixupResult {
  double loss = 0.0;
  double clean_loss = 0.0;
  double mixed_loss = 0.0;
  FeatureMatrix grad_clean;
  FeatureMatrix grad_mixed;  // already scaled by eta
};

// CE(clean) + eta * CE(mixed).
RegMixupResult regmixup_loss(const FeatureMatrix& logits_clean, const FeatureMatrix& targets_clean,
                             const FeatureMatrix& logits_mixed, const FeatureMatrix& targets_mixed,
                             const RegMixupParams& p);

// Loss with analytic gradient: returns the loss at `params` and writes the
// gradient into `grad` (same length).
using DifferentiableFn = std::function<double(std::span<const double> params,
                                              std::span<double> grad)>;

// Max over coordinates of |analytic - numeric| / max(1e-8, |analytic| +
// |numeric|), numeric from the fourth-order central difference
// (-f(+2h) + 8f(+h) - 8f(-h) + f(-2h)) / 12h. epsilon must be in [1e-7, 1e-3].
double grad_check(const DifferentiableFn& fn, std::span<const double> params, double epsilon);

}  // namespace refd
