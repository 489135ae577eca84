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

#include <filesystem>
#include <string>
#include <vector>

#include "refd/feature_matrix.hpp"

namespace refd {

// Binary container layout (little-endian):
//   "EMB1" | u8 role | u32 n | u32 d | n*d f32 row-major
inline constexpr char kFeatureMagic[4] = {'E', 'M', 'B', '1'};
inline constexpr std::size_t kFeatureHeaderBytes = 4 + 1 + 4 + 4;

std::string encode_features(const FeatureMatrix& m);
FeatureMatrix decode_features(std::string_view bytes);

// CSV: header `utt_id,f0,...,f{d-1}`, one row per utterance.
struct LabeledFeatures {
  std::vector<std::string> utt_ids;
  FeatureMatrix matrix;
};
std::string encode_features_csv(const LabeledFeatures& lf);
LabeledFeatures decode_features_csv(std::string_view text, MatrixRole role = MatrixRole::kRaw);

// Dispatches on the magic bytes: "EMB1" is binary, anything else is parsed
// as CSV (role raw, ids dropped).
FeatureMatrix load_features(const std::filesystem::path& path);
void save_features(const FeatureMatrix& m, const std::filesystem::path& path);

}  // namespace refd
