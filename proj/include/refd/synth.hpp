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

#include <array>
#include <cstdint>
#include <map>

#include "refd/feature_matrix.hpp"
#include "refd/manifest.hpp"

namespace refd {

using ClassCounts = std::array<std::size_t, kNumClasses>;

// Gaussian-cluster stand-in for an embedding corpus: one cluster per class,
// centers on a random orthonormal frame so every pair is exactly
// `cluster_separation` apart.
struct SynthConfig {
  std::uint64_t seed = 42;
  std::size_t dim_raw = 32;
  std::map<Split, ClassCounts> per_class_counts = default_counts();
  double cluster_separation = 10.0;
  double within_class_sigma = 1.0;
  // Extra isotropic noise applied to eval points only (test-domain shift).
  double eval_shift_sigma = 0.3;

  static std::map<Split, ClassCounts> default_counts();
  // Throws ConfigError.
  void validate() const;
};

struct SynthData {
  FeatureMatrix train;
  FeatureMatrix dev;
  FeatureMatrix eval;
  // Records are ordered train rows, then dev rows, then eval rows.
  DatasetManifest manifest;
  // Cluster centers, one row per class.
  FeatureMatrix centers;

  const FeatureMatrix& features(Split s) const;
};

SynthData generate_synthetic(const SynthConfig& cfg);

}  // namespace refd
