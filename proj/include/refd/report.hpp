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
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "refd/metrics.hpp"
#include "refd/pipeline.hpp"

namespace refd {

inline constexpr const char* kToolVersion = "refd 1.0.0";
// The only key whose value may differ between two identical runs.
inline constexpr const char* kTimestampKey = "generated_at";

struct EvalReport {
  std::string method;
  std::map<int, double> per_class_f1;
  double macro_f1 = 0.0;
  ConfusionMatrix confusion{};
  std::vector<int> absent_classes;
  std::optional<double> re_gate;        // absent for the one-stage pipeline
  std::optional<double> ood_threshold;  // absent when OOD detection is off
  // "fixed", "oracle-eval", "dev" or "disabled".
  std::string threshold_mode = "disabled";
  nlohmann::json config = nlohmann::json::object();
  std::uint64_t seed = 0;
  std::string tool_version = kToolVersion;
  std::string generated_at;
};

// Per-class F1 over `classes` (default all eight), macro-F1 and the 8x8
// confusion matrix.
EvalReport evaluate_predictions(std::span<const int> predictions, std::span<const int> labels,
                                std::span<const int> classes = {});

// Thresholds of +-inf are written as the strings "inf" / "-inf".
nlohmann::json report_to_json(const EvalReport& r);
EvalReport report_from_json(const nlohmann::json& j);
std::string encode_report(const EvalReport& r);
void save_report(const EvalReport& r, const std::filesystem::path& path);
EvalReport load_report(const std::filesystem::path& path);

// Rows = reports, columns = classes 0..7 + AVG, values in percent with two
// decimals. Missing classes render as "-".
std::string render_table_csv(std::span<const EvalReport> rows);
std::string render_table_text(const std::string& title, std::span<const EvalReport> rows);

nlohmann::json threshold_to_json(double t);
double threshold_from_json(const nlohmann::json& j);

}  // namespace refd
