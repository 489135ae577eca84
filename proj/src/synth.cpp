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

#include "refd/synth.hpp"

#include <cmath>
#include <cstdio>

#include <boost/random/normal_distribution.hpp>

#include "refd/errors.hpp"
#include "refd/numeric.hpp"
#include "refd/rng.hpp"

namespace refd {

std::map<Split, ClassCounts> SynthConfig::default_counts() {
  return {
      {Split::kTrain, {400, 400, 400, 400, 400, 400, 400, 0}},
      {Split::kDev, {150, 150, 150, 150, 150, 150, 150, 0}},
      {Split::kEval, {500, 500, 500, 500, 500, 500, 500, 500}},
  };
}

void SynthConfig::validate() const {
  if (dim_raw < static_cast<std::size_t>(kNumClasses)) {
    throw ConfigError("dim_raw must be at least the class count (8)");
  }
  if (!(cluster_separation > 0.0)) throw ConfigError("cluster_separation must be positive");
  if (!(within_class_sigma >= 0.0) || !(eval_shift_sigma >= 0.0)) {
    throw ConfigError("sigmas must be nonnegative");
  }
  for (const auto& [split, counts] : per_class_counts) {
    if (split != Split::kEval && counts[kOodClass] != 0) {
      throw ConfigError("class 7 requested in the " + std::string(split_name(split)) + " split");
    }
  }
}

const FeatureMatrix& SynthData::features(Split s) const {
  switch (s) {
    case Split::kTrain:
      return train;
    case Split::kDev:
      return dev;
    case Split::kEval:
      return eval;
  }
  throw ArgumentError("unknown split");
}

namespace {

// Gram-Schmidt on Gaussian draws; rows are orthonormal.
FeatureMatrix random_orthonormal_rows(std::size_t k, std::size_t d, Rng& rng) {
  boost::random::normal_distribution<double> normal;
  FeatureMatrix q(k, d);
  for (std::size_t i = 0; i < k; ++i) {
    auto row = q.row(i);
    for (double& x : row) x = normal(rng);
    for (std::size_t j = 0; j < i; ++j) {
      const double proj = dot(row, q.row(j));
      auto prev = q.row(j);
      for (std::size_t c = 0; c < d; ++c) row[c] -= proj * prev[c];
    }
    const double norm = l2_norm(row);
    for (double& x : row) x /= norm;
  }
  return q;
}

}  // namespace

SynthData generate_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  Rng frame_rng(derive_seed(cfg.seed, 0));
  SynthData out;
  out.centers = random_orthonormal_rows(kNumClasses, cfg.dim_raw, frame_rng);
  const double radius = cfg.cluster_separation / std::sqrt(2.0);
  for (double& x : out.centers.data()) x *= radius;

  std::vector<ManifestRecord> records;
  const Split splits[] = {Split::kTrain, Split::kDev, Split::kEval};
  for (std::size_t s = 0; s < 3; ++s) {
    const Split split = splits[s];
    ClassCounts counts{};
    if (auto it = cfg.per_class_counts.find(split); it != cfg.per_class_counts.end()) {
      counts = it->second;
    }
    std::vector<int> labels;
    for (int c = 0; c < kNumClasses; ++c) labels.insert(labels.end(), counts[c], c);

    Rng rng(derive_seed(cfg.seed, 1 + s));
    shuffle_in_place(std::span<int>(labels), rng);
    boost::random::normal_distribution<double> normal;
    const double shift = split == Split::kEval ? cfg.eval_shift_sigma : 0.0;

    FeatureMatrix m(labels.size(), cfg.dim_raw, MatrixRole::kRaw);
    for (std::size_t i = 0; i < labels.size(); ++i) {
      auto row = m.row(i);
      auto center = out.centers.row(static_cast<std::size_t>(labels[i]));
      for (std::size_t c = 0; c < cfg.dim_raw; ++c) {
        row[c] = center[c] + cfg.within_class_sigma * normal(rng);
      }
      if (split == Split::kEval) {
        for (double& x : row) x += shift * normal(rng);
      }
      char id[32];
      std::snprintf(id, sizeof(id), "%s_%06zu", std::string(split_name(split)).c_str(), i);
      records.push_back({id, labels[i], split});
    }
    switch (split) {
      case Split::kTrain:
        out.train = std::move(m);
        break;
      case Split::kDev:
        out.dev = std::move(m);
        break;
      case Split::kEval:
        out.eval = std::move(m);
        break;
    }
  }
  out.manifest = DatasetManifest(std::move(records));
  return out;
}

}  // namespace refd
