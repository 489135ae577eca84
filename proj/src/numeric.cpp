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

#include "refd/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "refd/errors.hpp"

namespace refd {

double logsumexp(std::span<const double> v) {
  if (v.empty()) throw ArgumentError("logsumexp of an empty vector");
  const double hi = *std::max_element(v.begin(), v.end());
  double acc = 0.0;
  for (double x : v) acc += std::exp(x - hi);
  return hi + std::log(acc);
}

double energy(std::span<const double> v, double temperature) {
  if (!(temperature > 0.0)) throw ConfigError("energy temperature must be positive");
  if (temperature == 1.0) return logsumexp(v);
  std::vector<double> scaled(v.begin(), v.end());
  for (double& x : scaled) x /= temperature;
  return temperature * logsumexp(scaled);
}

std::vector<double> softmax(std::span<const double> v) {
  if (v.empty()) throw ArgumentError("softmax of an empty vector");
  const double hi = *std::max_element(v.begin(), v.end());
  std::vector<double> out(v.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp(v[i] - hi);
    acc += out[i];
  }
  for (double& p : out) p /= acc;
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double l2_norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

FeatureMatrix l2_normalize_rows(const FeatureMatrix& m) {
  FeatureMatrix out = m;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = out.row(r);
    const double norm = l2_norm(row);
    if (!(norm >= kDegenerateNorm)) {
      throw DegenerateError("row " + std::to_string(r) + " has (near) zero norm");
    }
    for (double& x : row) x /= norm;
  }
  return out;
}

std::size_t argmax(std::span<const double> v) {
  if (v.empty()) throw ArgumentError("argmax of an empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

}  // namespace refd
