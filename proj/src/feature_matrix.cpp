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

#include "refd/feature_matrix.hpp"

#include <cmath>
#include <string>

#include "refd/errors.hpp"

namespace refd {

std::string_view role_name(MatrixRole role) {
  switch (role) {
    case MatrixRole::kRaw:
      return "raw";
    case MatrixRole::kFeature:
      return "feature";
    case MatrixRole::kLogits:
      return "logits";
  }
  return "unknown";
}

FeatureMatrix::FeatureMatrix(std::size_t rows, std::size_t cols, MatrixRole role)
    : rows_(rows), cols_(cols), role_(role), data_(rows * cols, 0.0) {}

FeatureMatrix::FeatureMatrix(std::size_t rows, std::size_t cols, std::vector<double> data,
                             MatrixRole role)
    : rows_(rows), cols_(cols), role_(role), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw ArgumentError("matrix payload has " + std::to_string(data_.size()) +
                        " entries, expected " + std::to_string(rows_ * cols_));
  }
  if (!all_finite()) throw ArgumentError("matrix contains non-finite entries");
}

FeatureMatrix FeatureMatrix::select_rows(std::span<const std::size_t> indices) const {
  FeatureMatrix out(indices.size(), cols_, role_);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= rows_) throw ArgumentError("row index out of range");
    auto src = row(indices[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

bool FeatureMatrix::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace refd
