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

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "refd/ood.hpp"
#include "refd/pipeline.hpp"
#include "refd/synth.hpp"
#include "refd/trainer.hpp"

namespace refd {

// How the OOD threshold of a pipeline is chosen.
//   oracle-eval: max-macro-F1 sweep on the evaluation labels
//   dev:         sweep on the dev split (which has no novel class)
//   fixed:       RefdConfig::ood_threshold as given
enum class ThresholdMode { kOracleEval, kDev, kFixed };

std::string threshold_mode_name(ThresholdMode m);
ThresholdMode parse_threshold_mode(const std::string& s);

// Everything a synthetic end-to-end run needs.
struct StudyConfig {
  SynthConfig synth;
  TrainConfig train_re;
  TrainConfig train_fd;
  TrainConfig train_onestage;
  RefdConfig refd;
  std::vector<ScorerKind> scorers = all_scorers();
  ThresholdMode threshold_mode = ThresholdMode::kOracleEval;
  // Named file locations. The command-line tool reads "data" as the default
  // dataset directory; other names are carried through unchanged.
  std::map<std::string, std::string> paths;

  void validate() const;
};

// JSON mapping. Missing keys keep their defaults; unknown keys raise
// ConfigError so typos do not pass silently.
nlohmann::json to_json(const SynthConfig& c);
nlohmann::json to_json(const TrainConfig& c);
nlohmann::json to_json(const OodScorerConfig& c);
nlohmann::json to_json(const RefdConfig& c);
nlohmann::json to_json(const StudyConfig& c);

void from_json(const nlohmann::json& j, SynthConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);
void from_json(const nlohmann::json& j, OodScorerConfig& c);
void from_json(const nlohmann::json& j, RefdConfig& c);
void from_json(const nlohmann::json& j, StudyConfig& c);

StudyConfig study_config_from_json(const nlohmann::json& j);

}  // namespace refd
