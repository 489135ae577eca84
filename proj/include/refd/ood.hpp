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
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "refd/feature_matrix.hpp"

// Post-hoc OOD scorers. Every score follows one convention: higher means
// more in-distribution, and samples scoring below a threshold are flagged as
// the novel class.
namespace refd {

using ScoreVector = std::vector<double>;

enum class ScorerKind { kMsp, kMaxLogit, kEnergy, kKnn, kMahalanobis, kNnGuide, kNsd };

std::string_view scorer_name(ScorerKind k);
ScorerKind parse_scorer(std::string_view name);
// Table order: MSP, MaxLogit, Energy, KNN, Mahalanobis, NNGuide, NSD.
std::vector<ScorerKind> all_scorers();

struct OodScorerConfig {
  ScorerKind kind = ScorerKind::kNsd;
  double temperature = 1.0;
  std::size_t k = 10;  // clamped to the bank size
  // Mahalanobis ridge, relative: ridge * trace(Sigma) / d is added to the
  // diagonal before inversion.
  double ridge = 1e-6;
  std::size_t block_rows = 256;

  void validate() const;
};

// Training-domain reference set for the feature-based scorers.
struct TrainBank {
  FeatureMatrix z;               // L2-normalised training features
  std::vector<double> energies;  // temperature * logsumexp(L_j / temperature)
  double temperature = 1.0;
  std::vector<int> labels;       // empty when built without labels

  // Mahalanobis statistics (only when labels were given).
  std::vector<int> mean_classes;
  FeatureMatrix class_means;
  std::vector<double> precision;  // inverse of the ridge-regularised shared covariance

  std::size_t size() const { return z.rows(); }
  bool has_class_stats() const { return !mean_classes.empty(); }
};

struct BankOptions {
  double temperature = 1.0;
  double ridge = 1e-6;
};

// Throws ArgumentError on row mismatch, DegenerateError on a zero feature
// row, NumericalError when the regularised covariance is not positive definite.
TrainBank build_bank(const FeatureMatrix& features, const FeatureMatrix& logits,
                     std::optional<std::span<const int>> labels = std::nullopt,
                     const BankOptions& opts = {});

ScoreVector score_msp(const FeatureMatrix& logits);
ScoreVector score_maxlogit(const FeatureMatrix& logits);
ScoreVector score_energy(const FeatureMatrix& logits, double temperature = 1.0);
ScoreVector score_knn(const FeatureMatrix& features, const TrainBank& bank, std::size_t k);
ScoreVector score_mahalanobis(const FeatureMatrix& features, const TrainBank& bank);
// Test energies use the bank's temperature.
ScoreVector score_nnguide(const FeatureMatrix& features, const FeatureMatrix& logits,
                          const TrainBank& bank, std::size_t k);
// Energy-scaled cosine similarity to the whole training bank, averaged over
// the bank: E(l_i) * (1/m) * sum_j E(L_j) <t_i, z_j>.
ScoreVector score_nsd(const FeatureMatrix& features, const FeatureMatrix& logits,
                      const TrainBank& bank, std::size_t block_rows = 256);

// Dispatches on cfg.kind; k is clamped to the bank size.
ScoreVector score(const OodScorerConfig& cfg, const FeatureMatrix& features,
                  const FeatureMatrix& logits, const TrainBank& bank);

// `utt_id,score` with 17 significant digits.
std::string encode_scores_csv(std::span<const std::string> utt_ids, std::span<const double> scores);
void save_scores_csv(std::span<const std::string> utt_ids, std::span<const double> scores,
                     const std::filesystem::path& path);

}  // namespace refd
