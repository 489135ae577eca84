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

#include "refd/metrics.hpp"

#include <algorithm>
#include <string>

#include "refd/errors.hpp"

namespace refd {

double f1_from_counts(const ClassCountsPRF& c) {
  if (c.tp == 0) return 0.0;
  const auto tp2 = static_cast<double>(2 * c.tp);
  return tp2 / (tp2 + static_cast<double>(c.fp) + static_cast<double>(c.fn));
}

PerClassF1 f1_per_class(std::span<const int> predictions, std::span<const int> labels,
                        std::span<const int> classes) {
  if (predictions.size() != labels.size()) {
    throw ArgumentError("f1_per_class: predictions and labels differ in length");
  }
  std::map<int, ClassCountsPRF> counts;
  std::map<int, bool> seen;
  for (int c : classes) {
    counts[c] = {};
    seen[c] = false;
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int p = predictions[i];
    const int y = labels[i];
    if (auto it = seen.find(p); it != seen.end()) it->second = true;
    if (auto it = seen.find(y); it != seen.end()) it->second = true;
    if (p == y) {
      if (auto it = counts.find(p); it != counts.end()) ++it->second.tp;
    } else {
      if (auto it = counts.find(p); it != counts.end()) ++it->second.fp;
      if (auto it = counts.find(y); it != counts.end()) ++it->second.fn;
    }
  }
  PerClassF1 out;
  for (const auto& [c, cnt] : counts) {
    out.f1[c] = f1_from_counts(cnt);
    if (!seen[c]) out.absent.push_back(c);
  }
  return out;
}

std::vector<int> all_classes() {
  std::vector<int> out(kNumClasses);
  for (int c = 0; c < kNumClasses; ++c) out[c] = c;
  return out;
}

double macro_f1(const std::map<int, double>& per_class) {
  if (per_class.empty()) throw ArgumentError("macro_f1 of an empty class map");
  double sum = 0.0;
  for (const auto& [c, f] : per_class) sum += f;
  return sum / static_cast<double>(per_class.size());
}

ConfusionMatrix confusion_matrix(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size()) {
    throw ArgumentError("confusion_matrix: predictions and labels differ in length");
  }
  ConfusionMatrix m{};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int y = labels[i];
    const int p = predictions[i];
    if (y < 0 || y >= kNumClasses || p < 0 || p >= kNumClasses) {
      throw ArgumentError("confusion_matrix: class outside 0..7 at index " + std::to_string(i));
    }
    ++m[y][p];
  }
  return m;
}

}  // namespace refd
