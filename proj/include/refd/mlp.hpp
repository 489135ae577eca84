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

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "refd/feature_matrix.hpp"

namespace refd {

enum class Stage : std::uint8_t { kRealEmphasis = 0, kFakeDispersion = 1, kOneStage = 2 };

std::string_view stage_name(Stage s);

struct MlpShape {
  std::size_t input = 32;
  std::size_t hidden = 64;
  std::size_t feature = 16;
  // Classification head width; 0 for the one-class (real emphasis) head.
  std::size_t classes = 0;

  friend bool operator==(const MlpShape&, const MlpShape&) = default;
};

// Surrogate backbone: raw -> hidden (ReLU) -> feature (linear) -> head.
// The real-emphasis head is a single direction w0; the other stages use a
// linear classifier whose output index k maps to class_map[k].
//
// All parameters live in one flat buffer, laid out as
//   w1[hidden x input] b1[hidden] w2[feature x hidden] b2[feature]
//   then w0[feature]                        (real emphasis)
//   or   wh[classes x feature] bh[classes]  (classifier heads)
class MlpModel {
 public:
  MlpModel() = default;
  // Zero-initialised parameters. Throws ConfigError when the shape and
  // class map are inconsistent with the stage.
  MlpModel(Stage stage, MlpShape shape, std::vector<int> class_map);

  Stage stage() const { return stage_; }
  const MlpShape& shape() const { return shape_; }
  const std::vector<int>& class_map() const { return class_map_; }

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }

  std::span<double> w1() { return slice(0, shape_.hidden * shape_.input); }
  std::span<double> b1() { return slice(off_b1(), shape_.hidden); }
  std::span<double> w2() { return slice(off_w2(), shape_.feature * shape_.hidden); }
  std::span<double> b2() { return slice(off_b2(), shape_.feature); }
  std::span<double> w0() { return slice(off_head(), shape_.feature); }
  std::span<double> wh() { return slice(off_head(), shape_.classes * shape_.feature); }
  std::span<double> bh() { return slice(off_head() + shape_.classes * shape_.feature, shape_.classes); }

  std::span<const double> w1() const { return slice(0, shape_.hidden * shape_.input); }
  std::span<const double> b1() const { return slice(off_b1(), shape_.hidden); }
  std::span<const double> w2() const { return slice(off_w2(), shape_.feature * shape_.hidden); }
  std::span<const double> b2() const { return slice(off_b2(), shape_.feature); }
  std::span<const double> w0() const { return slice(off_head(), shape_.feature); }
  std::span<const double> wh() const { return slice(off_head(), shape_.classes * shape_.feature); }
  std::span<const double> bh() const {
    return slice(off_head() + shape_.classes * shape_.feature, shape_.classes);
  }

  // Same shape, all parameters zero; used as a gradient accumulator.
  MlpModel zeros_like() const;

  friend bool operator==(const MlpModel&, const MlpModel&) = default;

 private:
  std::size_t off_b1() const { return shape_.hidden * shape_.input; }
  std::size_t off_w2() const { return off_b1() + shape_.hidden; }
  std::size_t off_b2() const { return off_w2() + shape_.feature * shape_.hidden; }
  std::size_t off_head() const { return off_b2() + shape_.feature; }
  std::span<double> slice(std::size_t off, std::size_t len) { return {params_.data() + off, len}; }
  std::span<const double> slice(std::size_t off, std::size_t len) const {
    return {params_.data() + off, len};
  }

  Stage stage_ = Stage::kFakeDispersion;
  MlpShape shape_;
  std::vector<int> class_map_;
  std::vector<double> params_;
};

// He-normal hidden weights, Glorot-normal feature/head weights, zero biases.
MlpModel init_mlp(Stage stage, MlpShape shape, std::vector<int> class_map, std::uint64_t seed);

struct ForwardResult {
  FeatureMatrix hidden;    // post-ReLU activations
  FeatureMatrix features;  // penultimate activations, before any normalization
  FeatureMatrix logits;    // classifier heads only
  std::vector<double> oc_scores;  // real-emphasis head only
};

// Pure; rows are processed independently (OpenMP over rows).
ForwardResult forward(const MlpModel& model, const FeatureMatrix& x);

// Accumulates parameter gradients into `grads` given dL/dlogits and/or
// dL/dfeatures for the batch that produced `fwd`. The w0 gradient of the
// one-class head is not touched here.
void backward(const MlpModel& model, const FeatureMatrix& x, const ForwardResult& fwd,
              const FeatureMatrix* grad_logits, const FeatureMatrix* grad_features,
              MlpModel& grads);

// Checkpoint layout (little-endian):
//   "MLP1" | u8 stage | u32 input | u32 hidden | u32 feature | u32 classes |
//   u32 map_len | map_len x i32 class_map | u32 param_count | f64 params
std::string encode_model(const MlpModel& m);
MlpModel decode_model(std::string_view bytes);
void save_model(const MlpModel& m, const std::filesystem::path& path);
MlpModel load_model(const std::filesystem::path& path);

}  // namespace refd
