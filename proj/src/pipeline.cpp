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

#include "refd/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <sstream>

#include "refd/errors.hpp"
#include "refd/fileio.hpp"
#include "refd/metrics.hpp"
#include "refd/numeric.hpp"

namespace refd {

void RefdConfig::validate() const {
  if (!(re_gate >= -1.0 && re_gate <= 1.0)) throw ConfigError("re_gate must lie in [-1, 1]");
  if (ood_class < 0 || ood_class >= kNumClasses) throw ConfigError("ood_class outside 0..7");
  if (ood_threshold && std::isnan(*ood_threshold)) throw ConfigError("ood_threshold is NaN");
  ood_scorer.validate();
}

std::string_view prediction_stage_name(PredictionStage s) {
  switch (s) {
    case PredictionStage::kRealGate:
      return "real_gate";
    case PredictionStage::kIdFake:
      return "id_fake";
    case PredictionStage::kOodFake:
      return "ood_fake";
  }
  return "unknown";
}

PredictionStage parse_prediction_stage(std::string_view s) {
  if (s == "real_gate") return PredictionStage::kRealGate;
  if (s == "id_fake") return PredictionStage::kIdFake;
  if (s == "ood_fake") return PredictionStage::kOodFake;
  throw FormatError("unknown prediction stage '" + std::string(s) + "'");
}

namespace {

void require_stage(const MlpModel& m, Stage expected) {
  if (m.stage() != expected) {
    throw ConfigError("expected a " + std::string(stage_name(expected)) + " model, got " +
                      std::string(stage_name(m.stage())));
  }
}

void require_ids(std::span<const std::string> utt_ids, std::size_t n) {
  if (utt_ids.size() != n) throw ArgumentError("utt_id count differs from the number of samples");
}

}  // namespace

RefdOutputs compute_refd_outputs(const MlpModel& re_model, const MlpModel& fd_model,
                                 const FeatureMatrix& eval_raw, const OodScorerConfig& scorer,
                                 const TrainBank& bank) {
  require_stage(re_model, Stage::kRealEmphasis);
  require_stage(fd_model, Stage::kFakeDispersion);
  RefdOutputs out;
  out.oc_scores = forward(re_model, eval_raw).oc_scores;
  auto fd = forward(fd_model, eval_raw);
  out.ood_scores = score(scorer, fd.features, fd.logits, bank);
  out.fd_logits = std::move(fd.logits);
  out.class_map = fd_model.class_map();
  return out;
}

std::vector<Prediction> assign_refd(const RefdOutputs& outputs, std::span<const std::string> utt_ids,
                                    double re_gate, double ood_threshold, int ood_class) {
  const std::size_t n = outputs.oc_scores.size();
  require_ids(utt_ids, n);
  if (outputs.fd_logits.rows() != n || outputs.ood_scores.size() != n) {
    throw ArgumentError("assign_refd: stage outputs differ in length");
  }
  std::vector<Prediction> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    Prediction& p = out[i];
    p.utt_id = utt_ids[i];
    p.oc_score = outputs.oc_scores[i];
    if (outputs.oc_scores[i] >= re_gate) {
      p.predicted_class = kRealClass;
      p.stage = PredictionStage::kRealGate;
      continue;
    }
    p.ood_score = outputs.ood_scores[i];
    if (outputs.ood_scores[i] < ood_threshold) {
      p.predicted_class = ood_class;
      p.stage = PredictionStage::kOodFake;
    } else {
      p.predicted_class = outputs.class_map.at(argmax(outputs.fd_logits.row(i)));
      p.stage = PredictionStage::kIdFake;
    }
  }
  return out;
}

std::vector<Prediction> infer_refd(const MlpModel& re_model, const MlpModel& fd_model,
                                   const FeatureMatrix& eval_raw, std::span<const std::string> utt_ids,
                                   const RefdConfig& cfg, const TrainBank& bank) {
  cfg.validate();
  if (!cfg.ood_threshold) throw ConfigError("infer_refd needs a resolved OOD threshold");
  const auto outputs = compute_refd_outputs(re_model, fd_model, eval_raw, cfg.ood_scorer, bank);
  return assign_refd(outputs, utt_ids, cfg.re_gate, *cfg.ood_threshold, cfg.ood_class);
}

OneStageOutputs compute_one_stage_outputs(const MlpModel& model, const FeatureMatrix& eval_raw,
                                          const OodScorerConfig& scorer, const TrainBank& bank) {
  require_stage(model, Stage::kOneStage);
  auto fwd = forward(model, eval_raw);
  OneStageOutputs out;
  out.ood_scores = score(scorer, fwd.features, fwd.logits, bank);
  out.logits = std::move(fwd.logits);
  out.class_map = model.class_map();
  return out;
}

std::vector<Prediction> assign_one_stage(const OneStageOutputs& outputs,
                                         std::span<const std::string> utt_ids, double ood_threshold,
                                         int ood_class) {
  const std::size_t n = outputs.logits.rows();
  require_ids(utt_ids, n);
  if (outputs.ood_scores.size() != n) throw ArgumentError("assign_one_stage: length mismatch");
  std::vector<Prediction> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    Prediction& p = out[i];
    p.utt_id = utt_ids[i];
    p.ood_score = outputs.ood_scores[i];
    if (outputs.ood_scores[i] < ood_threshold) {
      p.predicted_class = ood_class;
      p.stage = PredictionStage::kOodFake;
      continue;
    }
    p.predicted_class = outputs.class_map.at(argmax(outputs.logits.row(i)));
    p.stage = p.predicted_class == kRealClass ? PredictionStage::kRealGate : PredictionStage::kIdFake;
  }
  return out;
}

std::vector<Prediction> infer_one_stage(const MlpModel& model, const FeatureMatrix& eval_raw,
                                        std::span<const std::string> utt_ids,
                                        const OodScorerConfig& scorer, double ood_threshold,
                                        const TrainBank& bank, int ood_class) {
  const auto outputs = compute_one_stage_outputs(model, eval_raw, scorer, bank);
  return assign_one_stage(outputs, utt_ids, ood_threshold, ood_class);
}

std::vector<int> predicted_classes(std::span<const Prediction> predictions) {
  std::vector<int> out(predictions.size());
  for (std::size_t i = 0; i < predictions.size(); ++i) out[i] = predictions[i].predicted_class;
  return out;
}

ScoreVector sweep_scores(std::span<const Prediction> predictions) {
  ScoreVector out(predictions.size());
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    out[i] = predictions[i].ood_score.value_or(std::numeric_limits<double>::infinity());
  }
  return out;
}

SweepResult sweep_threshold(std::span<const double> scores, std::span<const int> base_predictions,
                            std::span<const int> labels, int ood_class) {
  const std::size_t n = scores.size();
  if (n == 0) throw ArgumentError("sweep_threshold: empty inputs");
  if (base_predictions.size() != n || labels.size() != n) {
    throw ArgumentError("sweep_threshold: scores, predictions and labels differ in length");
  }
  if (ood_class < 0 || ood_class >= kNumClasses) throw ArgumentError("ood_class outside 0..7");
  const auto classes = static_cast<std::size_t>(ood_class) + 1;
  std::vector<ClassCountsPRF> counts(classes);
  for (std::size_t i = 0; i < n; ++i) {
    if (std::isnan(scores[i]) || scores[i] == -std::numeric_limits<double>::infinity()) {
      throw ArgumentError("sweep_threshold: scores must not be NaN or -inf");
    }
    const int p = base_predictions[i];
    const int y = labels[i];
    if (p < 0 || p > ood_class || y < 0 || y > ood_class) {
      throw ArgumentError("sweep_threshold: class outside 0.." + std::to_string(ood_class));
    }
    if (p == y) {
      ++counts[p].tp;
    } else {
      ++counts[p].fp;
      ++counts[y].fn;
    }
  }
  auto macro = [&] {
    double sum = 0.0;
    for (const auto& c : counts) sum += f1_from_counts(c);
    return sum / static_cast<double>(classes);
  };
  // Relabel sample i from its base class to ood_class.
  auto flip = [&](std::size_t i) {
    const int p = base_predictions[i];
    const int y = labels[i];
    if (p == ood_class) return;
    if (y == p) {
      --counts[p].tp;
      ++counts[p].fn;
    } else {
      --counts[p].fp;
    }
    if (y == ood_class) {
      ++counts[ood_class].tp;
      --counts[ood_class].fn;
    } else {
      ++counts[ood_class].fp;
    }
  };

  std::vector<std::size_t> order;
  order.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (std::isfinite(scores[i])) order.push_back(i);
  }
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  constexpr double kInf = std::numeric_limits<double>::infinity();
  SweepResult out;
  out.curve.push_back({-kInf, macro()});
  std::size_t pos = 0;
  while (pos < order.size()) {
    const double value = scores[order[pos]];
    while (pos < order.size() && scores[order[pos]] == value) flip(order[pos++]);
    double threshold = kInf;
    if (pos < order.size()) {
      const double next = scores[order[pos]];
      threshold = value / 2 + next / 2;
      if (!(threshold > value)) threshold = next;
    }
    out.curve.push_back({threshold, macro()});
  }
  if (order.empty()) out.curve.push_back({kInf, macro()});

  out.best_threshold = out.curve.front().threshold;
  out.best_macro_f1 = out.curve.front().macro_f1;
  for (const auto& pt : out.curve) {
    if (pt.macro_f1 > out.best_macro_f1) {
      out.best_macro_f1 = pt.macro_f1;
      out.best_threshold = pt.threshold;
    }
  }
  return out;
}

namespace {

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

template <typename T>
T parse_number(std::string_view s, const char* what) {
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw FormatError(std::string("bad ") + what + " '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace

std::string encode_predictions_csv(std::span<const Prediction> predictions) {
  std::ostringstream out;
  out.precision(17);
  out << "utt_id,predicted_class,stage,oc_score,ood_score\n";
  for (const auto& p : predictions) {
    out << p.utt_id << ',' << p.predicted_class << ',' << prediction_stage_name(p.stage) << ',';
    if (p.oc_score) out << *p.oc_score;
    out << ',';
    if (p.ood_score) out << *p.ood_score;
    out << '\n';
  }
  return std::move(out).str();
}

std::vector<Prediction> decode_predictions_csv(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(start, nl - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty()) lines.push_back(line);
    start = nl + 1;
  }
  if (lines.empty()) throw FormatError("empty predictions file");
  const auto header = split_csv(lines[0]);
  auto column = [&](std::string_view name) -> std::optional<std::size_t> {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (header[c] == name) return c;
    }
    return std::nullopt;
  };
  const auto id_col = column("utt_id");
  const auto class_col = column("predicted_class");
  if (!id_col || !class_col) throw FormatError("predictions CSV needs utt_id and predicted_class");
  const auto stage_col = column("stage");
  const auto oc_col = column("oc_score");
  const auto ood_col = column("ood_score");

  std::vector<Prediction> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = split_csv(lines[i]);
    if (f.size() != header.size()) {
      throw FormatError("predictions row " + std::to_string(i) + " has the wrong field count");
    }
    Prediction p;
    p.utt_id = std::string(f[*id_col]);
    p.predicted_class = parse_number<int>(f[*class_col], "class");
    if (p.predicted_class < 0 || p.predicted_class >= kNumClasses) {
      throw FormatError("predictions row " + std::to_string(i) + ": class out of range");
    }
    if (stage_col) {
      p.stage = parse_prediction_stage(f[*stage_col]);
      if ((p.stage == PredictionStage::kRealGate) != (p.predicted_class == kRealClass) ||
          (p.stage == PredictionStage::kOodFake) != (p.predicted_class == kOodClass)) {
        throw FormatError("predictions row " + std::to_string(i) + ": stage does not match class");
      }
    } else {
      p.stage = p.predicted_class == kRealClass  ? PredictionStage::kRealGate
                : p.predicted_class == kOodClass ? PredictionStage::kOodFake
                                                 : PredictionStage::kIdFake;
    }
    if (oc_col && !f[*oc_col].empty()) p.oc_score = parse_number<double>(f[*oc_col], "oc_score");
    if (ood_col && !f[*ood_col].empty()) p.ood_score = parse_number<double>(f[*ood_col], "ood_score");
    out.push_back(std::move(p));
  }
  return out;
}

void save_predictions_csv(std::span<const Prediction> predictions, const std::filesystem::path& path) {
  write_file_atomic(path, encode_predictions_csv(predictions));
}

std::vector<Prediction> load_predictions_csv(const std::filesystem::path& path) {
  return decode_predictions_csv(read_file(path));
}

}  // namespace refd
