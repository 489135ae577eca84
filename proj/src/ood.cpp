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

#include "refd/ood.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "refd/errors.hpp"
#include "refd/fileio.hpp"
#include "refd/numeric.hpp"
#include "refd/ood_kernels.hpp"

namespace refd {

std::string_view scorer_name(ScorerKind k) {
  switch (k) {
    case ScorerKind::kMsp:
      return "msp";
    case ScorerKind::kMaxLogit:
      return "maxlogit";
    case ScorerKind::kEnergy:
      return "energy";
    case ScorerKind::kKnn:
      return "knn";
    case ScorerKind::kMahalanobis:
      return "mahalanobis";
    case ScorerKind::kNnGuide:
      return "nnguide";
    case ScorerKind::kNsd:
      return "nsd";
  }
  return "unknown";
}

ScorerKind parse_scorer(std::string_view name) {
  for (ScorerKind k : all_scorers()) {
    if (scorer_name(k) == name) return k;
  }
  throw ConfigError("unknown OOD scorer '" + std::string(name) + "'");
}

std::vector<ScorerKind> all_scorers() {
  return {ScorerKind::kMsp, ScorerKind::kMaxLogit,    ScorerKind::kEnergy, ScorerKind::kKnn,
          ScorerKind::kMahalanobis, ScorerKind::kNnGuide, ScorerKind::kNsd};
}

void OodScorerConfig::validate() const {
  if (!(temperature > 0.0)) throw ConfigError("scorer temperature must be positive");
  if (k < 1) throw ConfigError("scorer k must be at least 1");
  if (!(ridge >= 0.0)) throw ConfigError("Mahalanobis ridge must be nonnegative");
  if (block_rows < 1) throw ConfigError("block_rows must be at least 1");
}

namespace {

std::vector<double> row_energies(const FeatureMatrix& logits, double temperature) {
  std::vector<double> out(logits.rows());
  for (std::size_t i = 0; i < logits.rows(); ++i) out[i] = energy(logits.row(i), temperature);
  return out;
}

void require_finite(const FeatureMatrix& m, const char* what) {
  if (m.empty()) throw ArgumentError(std::string(what) + ": empty matrix");
  if (!m.all_finite()) throw ArgumentError(std::string(what) + ": non-finite entries");
}

const FeatureMatrix& check_test(const FeatureMatrix& features, const TrainBank& bank) {
  require_finite(features, "test features");
  if (features.cols() != bank.z.cols()) {
    throw ArgumentError("test feature width differs from the bank");
  }
  return features;
}

void check_k(std::size_t k, const TrainBank& bank) {
  if (k < 1 || k > bank.size()) {
    throw ConfigError("k = " + std::to_string(k) + " outside [1, " + std::to_string(bank.size()) +
                      "]");
  }
}

}  // namespace

TrainBank build_bank(const FeatureMatrix& features, const FeatureMatrix& logits,
                     std::optional<std::span<const int>> labels, const BankOptions& opts) {
  require_finite(features, "bank features");
  require_finite(logits, "bank logits");
  if (features.rows() != logits.rows()) {
    throw ArgumentError("bank features and logits differ in row count");
  }
  TrainBank bank;
  bank.temperature = opts.temperature;
  bank.z = l2_normalize_rows(features);
  bank.z.set_role(MatrixRole::kFeature);
  bank.energies = row_energies(logits, opts.temperature);
  if (!labels) return bank;

  if (labels->size() != features.rows()) throw ArgumentError("bank labels differ in row count");
  if (!(opts.ridge >= 0.0)) throw ConfigError("Mahalanobis ridge must be nonnegative");
  bank.labels.assign(labels->begin(), labels->end());
  const std::size_t d = bank.z.cols();
  const std::size_t m = bank.z.rows();

  std::map<int, std::size_t> slot;
  for (int y : bank.labels) slot.emplace(y, 0);
  for (auto& [y, s] : slot) {
    s = bank.mean_classes.size();
    bank.mean_classes.push_back(y);
  }
  bank.class_means = FeatureMatrix(slot.size(), d, MatrixRole::kFeature);
  std::vector<std::size_t> counts(slot.size(), 0);
  for (std::size_t j = 0; j < m; ++j) {
    const std::size_t s = slot[bank.labels[j]];
    ++counts[s];
    auto mu = bank.class_means.row(s);
    auto zj = bank.z.row(j);
    for (std::size_t q = 0; q < d; ++q) mu[q] += zj[q];
  }
  for (std::size_t s = 0; s < counts.size(); ++s) {
    for (double& v : bank.class_means.row(s)) v /= static_cast<double>(counts[s]);
  }

  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  Eigen::VectorXd diff(static_cast<Eigen::Index>(d));
  for (std::size_t j = 0; j < m; ++j) {
    auto mu = bank.class_means.row(slot[bank.labels[j]]);
    for (std::size_t q = 0; q < d; ++q) diff(static_cast<Eigen::Index>(q)) = bank.z(j, q) - mu[q];
    cov.noalias() += diff * diff.transpose();
  }
  cov /= static_cast<double>(m);
  const double ridge = opts.ridge * cov.trace() / static_cast<double>(d);
  cov.diagonal().array() += ridge;

  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("shared covariance is singular even after the ridge term");
  }
  const Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(cov.rows(), cov.cols()));
  if (!inv.allFinite()) throw NumericalError("covariance inverse is not finite");
  bank.precision.resize(d * d);
  for (std::size_t r = 0; r < d; ++r) {
    for (std::size_t c = 0; c < d; ++c) {
      // Symmetrise away solver round-off.
      bank.precision[r * d + c] = 0.5 * (inv(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) +
                                         inv(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(r)));
    }
  }
  return bank;
}

ScoreVector score_msp(const FeatureMatrix& logits) {
  require_finite(logits, "logits");
  ScoreVector out(logits.rows());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    const auto p = softmax(logits.row(i));
    out[i] = *std::max_element(p.begin(), p.end());
  }
  return out;
}

ScoreVector score_maxlogit(const FeatureMatrix& logits) {
  require_finite(logits, "logits");
  ScoreVector out(logits.rows());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    auto l = logits.row(i);
    out[i] = *std::max_element(l.begin(), l.end());
  }
  return out;
}

ScoreVector score_energy(const FeatureMatrix& logits, double temperature) {
  require_finite(logits, "logits");
  return row_energies(logits, temperature);
}

ScoreVector score_knn(const FeatureMatrix& features, const TrainBank& bank, std::size_t k) {
  check_k(k, bank);
  const FeatureMatrix t = l2_normalize_rows(check_test(features, bank));
  ScoreVector out(t.rows());
  kernels::knn(t, bank.z, k, out);
  return out;
}

ScoreVector score_mahalanobis(const FeatureMatrix& features, const TrainBank& bank) {
  if (!bank.has_class_stats()) {
    throw ConfigError("Mahalanobis scoring needs a bank built with class labels");
  }
  const FeatureMatrix t = l2_normalize_rows(check_test(features, bank));
  ScoreVector out(t.rows());
  kernels::mahalanobis(t, bank.class_means, bank.precision, out);
  return out;
}

ScoreVector score_nnguide(const FeatureMatrix& features, const FeatureMatrix& logits,
                          const TrainBank& bank, std::size_t k) {
  check_k(k, bank);
  const FeatureMatrix t = l2_normalize_rows(check_test(features, bank));
  require_finite(logits, "logits");
  if (logits.rows() != t.rows()) throw ArgumentError("features and logits differ in row count");
  const auto e_test = row_energies(logits, bank.temperature);
  ScoreVector out(t.rows());
  kernels::nnguide(t, e_test, bank.z, bank.energies, k, out);
  return out;
}

ScoreVector score_nsd(const FeatureMatrix& features, const FeatureMatrix& logits,
                      const TrainBank& bank, std::size_t block_rows) {
  if (bank.size() == 0) throw ArgumentError("NSD needs a nonempty bank");
  const FeatureMatrix t = l2_normalize_rows(check_test(features, bank));
  require_finite(logits, "logits");
  if (logits.rows() != t.rows()) throw ArgumentError("features and logits differ in row count");
  const auto e_test = row_energies(logits, bank.temperature);
  ScoreVector out(t.rows());
  kernels::nsd(t, e_test, bank.z, bank.energies, out, block_rows);
  return out;
}

ScoreVector score(const OodScorerConfig& cfg, const FeatureMatrix& features,
                  const FeatureMatrix& logits, const TrainBank& bank) {
  cfg.validate();
  const std::size_t k = std::min(cfg.k, bank.size());
  switch (cfg.kind) {
    case ScorerKind::kMsp:
      return score_msp(logits);
    case ScorerKind::kMaxLogit:
      return score_maxlogit(logits);
    case ScorerKind::kEnergy:
      return score_energy(logits, cfg.temperature);
    case ScorerKind::kKnn:
      return score_knn(features, bank, k);
    case ScorerKind::kMahalanobis:
      return score_mahalanobis(features, bank);
    case ScorerKind::kNnGuide:
      return score_nnguide(features, logits, bank, k);
    case ScorerKind::kNsd:
      return score_nsd(features, logits, bank, cfg.block_rows);
  }
  throw ConfigError("unknown scorer kind");
}

std::string encode_scores_csv(std::span<const std::string> utt_ids, std::span<const double> scores) {
  if (utt_ids.size() != scores.size()) throw ArgumentError("utt_id and score counts differ");
  std::ostringstream out;
  out.precision(17);
  out << "utt_id,score\n";
  for (std::size_t i = 0; i < scores.size(); ++i) out << utt_ids[i] << ',' << scores[i] << '\n';
  return std::move(out).str();
}

void save_scores_csv(std::span<const std::string> utt_ids, std::span<const double> scores,
                     const std::filesystem::path& path) {
  write_file_atomic(path, encode_scores_csv(utt_ids, scores));
}

}  // namespace refd
