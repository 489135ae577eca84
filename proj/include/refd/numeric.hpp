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
#include <vector>

#include "refd/feature_matrix.hpp"

namespace refd {

// Rows with Euclidean norm below this are rejected as degenerate.
inline constexpr double kDegenerateNorm = 1e-30;

// log(sum(exp(v))) with max subtraction. Throws ArgumentError on empty input.
double logsumexp(std::span<const double> v);

// Energy score T * logsumexp(v / T). Throws ConfigError when T <= 0.
double energy(std::span<const double> v, double temperature = 1.0);

std::vector<double> softmax(std::span<const double> v);

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> v);

// Unit-norm copy of every row; throws DegenerateError for a row whose norm
// is below kDegenerateNorm.
FeatureMatrix l2_normalize_rows(const FeatureMatrix& m);

// Index of the largest entry, ties resolved toward the lowest index.
std::size_t argmax(std::span<const double> v);

}  // namespace refd
