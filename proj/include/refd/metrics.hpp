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
#include <span>
#include <vector>

#include "refd/manifest.hpp"

namespace refd {

struct ClassCountsPRF {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
};

// 2PR / (P + R), written as 2TP / (2TP + FP + FN); 0 when TP = 0.
double f1_from_counts(const ClassCountsPRF& c);

struct PerClassF1 {
  std::map<int, double> f1;
  // Classes that never occur in either predictions or labels; their F1 is 0.
  std::vector<int> absent;
};

// One-vs-rest F1 for each class in `classes`.
PerClassF1 f1_per_class(std::span<const int> predictions, std::span<const int> labels,
                        std::span<const int> classes);

// All eight classes of the taxonomy.
std::vector<int> all_classes();

// Unweighted mean of the map values, in key order.
double macro_f1(const std::map<int, double>& per_class);

using ConfusionMatrix = std::array<std::array<std::int64_t, kNumClasses>, kNumClasses>;

// Entry (truth, predicted). Throws ArgumentError for labels outside 0..7.
ConfusionMatrix confusion_matrix(std::span<const int> predictions, std::span<const int> labels);

}  // namespace refd
