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
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace refd {

enum class MatrixRole : std::uint8_t { kRaw = 0, kFeature = 1, kLogits = 2 };

std::string_view role_name(MatrixRole role);

// Dense row-major n x d matrix of finite doubles. Files store f32; all math
// happens in f64.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  FeatureMatrix(std::size_t rows, std::size_t cols, MatrixRole role = MatrixRole::kRaw);
  // Throws ArgumentError when data.size() != rows * cols or an entry is
  // not finite.
  FeatureMatrix(std::size_t rows, std::size_t cols, std::vector<double> data,
                MatrixRole role = MatrixRole::kRaw);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  MatrixRole role() const { return role_; }
  void set_role(MatrixRole role) { role_ = role; }
  bool empty() const { return rows_ == 0 || cols_ == 0; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }

  // Rows at the given indices, in order.
  FeatureMatrix select_rows(std::span<const std::size_t> indices) const;

  bool all_finite() const;

  friend bool operator==(const FeatureMatrix&, const FeatureMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  MatrixRole role_ = MatrixRole::kRaw;
  std::vector<double> data_;
};

}  // namespace refd
