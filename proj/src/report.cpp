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

#include "refd/report.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "refd/errors.hpp"
#include "refd/fileio.hpp"

namespace refd {

EvalReport evaluate_predictions(std::span<const int> predictions, std::span<const int> labels,
                                std::span<const int> classes) {
  const std::vector<int> every = all_classes();
  if (classes.empty()) classes = every;
  EvalReport r;
  auto f1 = f1_per_class(predictions, labels, classes);
  r.per_class_f1 = std::move(f1.f1);
  r.absent_classes = std::move(f1.absent);
  r.macro_f1 = macro_f1(r.per_class_f1);
  r.confusion = confusion_matrix(predictions, labels);
  return r;
}

nlohmann::json threshold_to_json(double t) {
  if (t == std::numeric_limits<double>::infinity()) return "inf";
  if (t == -std::numeric_limits<double>::infinity()) return "-inf";
  return t;
}

double threshold_from_json(const nlohmann::json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    throw FormatError("bad threshold '" + s + "'");
  }
  return j.get<double>();
}

nlohmann::json report_to_json(const EvalReport& r) {
  nlohmann::json j;
  j["method"] = r.method;
  nlohmann::json f1 = nlohmann::json::object();
  for (const auto& [c, v] : r.per_class_f1) f1[std::to_string(c)] = v;
  j["per_class_f1"] = f1;
  j["macro_f1"] = r.macro_f1;
  j["confusion"] = r.confusion;
  j["absent_classes"] = r.absent_classes;
  nlohmann::json th;
  th["re_gate"] = r.re_gate ? nlohmann::json(*r.re_gate) : nlohmann::json(nullptr);
  th["ood_threshold"] = r.ood_threshold ? threshold_to_json(*r.ood_threshold) : nlohmann::json(nullptr);
  th["mode"] = r.threshold_mode;
  j["thresholds"] = th;
  j["config"] = r.config;
  j["seed"] = r.seed;
  j["tool_version"] = r.tool_version;
  j[kTimestampKey] = r.generated_at;
  return j;
}

EvalReport report_from_json(const nlohmann::json& j) {
  try {
    EvalReport r;
    r.method = j.at("method").get<std::string>();
    for (const auto& [k, v] : j.at("per_class_f1").items()) r.per_class_f1[std::stoi(k)] = v.get<double>();
    r.macro_f1 = j.at("macro_f1").get<double>();
    r.confusion = j.at("confusion").get<ConfusionMatrix>();
    r.absent_classes = j.at("absent_classes").get<std::vector<int>>();
    const auto& th = j.at("thresholds");
    if (!th.at("re_gate").is_null()) r.re_gate = th.at("re_gate").get<double>();
    if (!th.at("ood_threshold").is_null()) r.ood_threshold = threshold_from_json(th.at("ood_threshold"));
    r.threshold_mode = th.at("mode").get<std::string>();
    r.config = j.at("config");
    r.seed = j.at("seed").get<std::uint64_t>();
    r.tool_version = j.at("tool_version").get<std::string>();
    r.generated_at = j.value(kTimestampKey, std::string());
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed report: ") + e.what());
  }
}

std::string encode_report(const EvalReport& r) { return report_to_json(r).dump(2) + "\n"; }

void save_report(const EvalReport& r, const std::filesystem::path& path) {
  write_file_atomic(path, encode_report(r));
}

EvalReport load_report(const std::filesystem::path& path) {
  try {
    return report_from_json(nlohmann::json::parse(read_file(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

namespace {

std::string percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", 100.0 * v);
  return buf;
}

std::vector<std::string> row_cells(const EvalReport& r) {
  std::vector<std::string> cells{r.method};
  for (int c = 0; c < kNumClasses; ++c) {
    auto it = r.per_class_f1.find(c);
    cells.push_back(it == r.per_class_f1.end() ? "-" : percent(it->second));
  }
  cells.push_back(percent(r.macro_f1));
  return cells;
}

std::vector<std::string> header_cells() {
  std::vector<std::string> h{"method"};
  for (int c = 0; c < kNumClasses; ++c) h.push_back(std::to_string(c));
  h.push_back("AVG");
  return h;
}

}  // namespace

std::string render_table_csv(std::span<const EvalReport> rows) {
  std::ostringstream out;
  auto emit = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
    out << '\n';
  };
  emit(header_cells());
  for (const auto& r : rows) emit(row_cells(r));
  return std::move(out).str();
}

std::string render_table_text(const std::string& title, std::span<const EvalReport> rows) {
  std::vector<std::vector<std::string>> grid{header_cells()};
  for (const auto& r : rows) grid.push_back(row_cells(r));
  std::vector<std::size_t> width(grid[0].size(), 0);
  for (const auto& row : grid) {
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::ostringstream out;
  out << title << '\n';
  for (std::size_t r = 0; r < grid.size(); ++r) {
    for (std::size_t c = 0; c < grid[r].size(); ++c) {
      const auto& cell = grid[r][c];
      const std::string pad(width[c] - cell.size(), ' ');
      out << (c ? "  " : "") << (c == 0 ? cell + pad : pad + cell);
    }
    out << '\n';
    if (r == 0) {
      std::size_t total = 0;
      for (std::size_t w : width) total += w + 2;
      out << std::string(total - 2, '-') << '\n';
    }
  }
  return std::move(out).str();
}

}  // namespace refd
