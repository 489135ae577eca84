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

#include <cstddef>
#include <span>

#include "refd/feature_matrix.hpp"

// Row-parallel scoring kernels over an L2-normalised test block `t` (n x d)
// and bank `z` (m x d). Every output row depends only on its own input row,
// so results do not depend on the thread count. The `serial` namespace holds
// the single-threaded reference versions used by tests and benchmarks.
namespace refd::kernels {

// out[i] = e_test[i] * (1/m) * sum_j e_bank[j] * <t_i, z_j>, computing the
// similarity matrix `block_rows` test rows at a time.
void nsd(const FeatureMatrix& t, std::span<const double> e_test, const FeatureMatrix& z,
         std::span<const double> e_bank, std::span<double> out, std::size_t block_rows = 256);

// out[i] = e_test[i] * mean over the k most cosine-similar bank rows j of
// e_bank[j] * <t_i, z_j>. Similarity ties go to the lower bank index.
void nnguide(const FeatureMatrix& t, std::span<const double> e_test, const FeatureMatrix& z,
             std::span<const double> e_bank, std::size_t k, std::span<double> out);

// out[i] = -(Euclidean distance from t_i to its k-th nearest bank row).
void knn(const FeatureMatrix& t, const FeatureMatrix& z, std::size_t k, std::span<double> out);

// out[i] = -min_c (t_i - mu_c)^T P (t_i - mu_c); P is d x d row-major.
void mahalanobis(const FeatureMatrix& t, const FeatureMatrix& means, std::span<const double> precision,
                 std::span<double> out);

namespace serial {

void nsd(const FeatureMatrix& t, std::span<const double> e_test, const FeatureMatrix& z,
         std::span<const double> e_bank, std::span<double> out);
void nnguide(const FeatureMatrix& t, std::span<const double> e_test, const FeatureMatrix& z,
             std::span<const double> e_bank, std::size_t k, std::span<double> out);
void knn(const FeatureMatrix& t, const FeatureMatrix& z, std::size_t k, std::span<double> out);
void mahalanobis(const FeatureMatrix& t, const FeatureMatrix& means, std::span<const double> precision,
                 std::span<double> out);

}  // namespace serial

}  // namespace refd::kernels
