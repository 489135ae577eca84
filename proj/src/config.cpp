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

#include "refd/config.hpp"

#include <initializer_list>
#include <string_view>

#include "refd/errors.hpp"
#include "refd/report.hpp"

namespace refd {

std::string threshold_mode_name(ThresholdMode m) {
  switch (m) {
    case ThresholdMode::kOracleEval:
      return "oracle-eval";
    case ThresholdMode::kDev:
      return "dev";
    case ThresholdMode::kFixed:
      return "fixed";
  }
  return "unknown";
}

ThresholdMode parse_threshold_mode(const std::string& s) {
  if (s == "oracle-eval") return ThresholdMode::kOracleEval;
  if (s == "dev") return ThresholdMode::kDev;
  if (s == "fixed") return ThresholdMode::kFixed;
  throw ConfigError("unknown threshold mode '" + s + "'");
}

void StudyConfig::validate() const {
  synth.validate();
  train_re.validate();
  train_fd.validate();
  train_onestage.validate();
  refd.validate();
  if (threshold_mode == ThresholdMode::kFixed && !refd.ood_threshold) {
    throw ConfigError("threshold mode 'fixed' needs refd.ood_threshold");
  }
}

namespace {

void reject_unknown(const nlohmann::json& j, std::initializer_list<std::string_view> known,
                    const char* section) {
  if (!j.is_object()) throw ConfigError(std::string(section) + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (auto k : known) ok = ok || key == k;
    if (!ok) throw ConfigError("unknown key '" + key + "' in " + section);
  }
}

template <typename T>
void read(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

}  // namespace

nlohmann::json to_json(const SynthConfig& c) {
  nlohmann::json counts;
  for (const auto& [split, cc] : c.per_class_counts) counts[std::string(split_name(split))] = cc;
  return {{"seed", c.seed},
          {"dim_raw", c.dim_raw},
          {"per_class_counts", counts},
          {"cluster_separation", c.cluster_separation},
          {"within_class_sigma", c.within_class_sigma},
          {"eval_shift_sigma", c.eval_shift_sigma}};
}

void from_json(const nlohmann::json& j, SynthConfig& c) {
  reject_unknown(j,
                 {"seed", "dim_raw", "per_class_counts", "cluster_separation",
                  "within_class_sigma", "eval_shift_sigma"},
                 "synth");
  read(j, "seed", c.seed);
  read(j, "dim_raw", c.dim_raw);
  read(j, "cluster_separation", c.cluster_separation);
  read(j, "within_class_sigma", c.within_class_sigma);
  read(j, "eval_shift_sigma", c.eval_shift_sigma);
  if (j.contains("per_class_counts")) {
    const auto& pc = j.at("per_class_counts");
    reject_unknown(pc, {"train", "dev", "eval"}, "synth.per_class_counts");
    for (const auto& [name, counts] : pc.items()) {
      try {
        c.per_class_counts[parse_split(name)] = counts.get<ClassCounts>();
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError("per_class_counts." + name + " must list 8 counts: " + e.what());
      }
    }
  }
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"lr", c.lr},
          {"lr_halve_every", c.lr_halve_every},
          {"adam_beta1", c.adam.beta1},
          {"adam_beta2", c.adam.beta2},
          {"adam_epsilon", c.adam.epsilon},
          {"weight_decay", c.adam.weight_decay},
          {"seed", c.seed},
          {"hidden_dim", c.hidden_dim},
          {"feature_dim", c.feature_dim},
          {"oc_alpha", c.oc.alpha},
          {"oc_m0", c.oc.m0},
          {"oc_m1", c.oc.m1},
          {"dev_gate", c.dev_gate},
          {"loss", c.loss == ClassifierLoss::kRegMixup ? "regmixup" : "ce"},
          {"regmixup_eta", c.regmixup.eta},
          {"regmixup_beta_a", c.regmixup.beta_a}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  reject_unknown(j,
                 {"epochs", "batch_size", "lr", "lr_halve_every", "adam_beta1", "adam_beta2",
                  "adam_epsilon", "weight_decay", "seed", "hidden_dim", "feature_dim", "oc_alpha",
                  "oc_m0", "oc_m1", "dev_gate", "loss", "regmixup_eta", "regmixup_beta_a"},
                 "train");
  read(j, "epochs", c.epochs);
  read(j, "batch_size", c.batch_size);
  read(j, "lr", c.lr);
  read(j, "lr_halve_every", c.lr_halve_every);
  read(j, "adam_beta1", c.adam.beta1);
  read(j, "adam_beta2", c.adam.beta2);
  read(j, "adam_epsilon", c.adam.epsilon);
  read(j, "weight_decay", c.adam.weight_decay);
  read(j, "seed", c.seed);
  read(j, "hidden_dim", c.hidden_dim);
  read(j, "feature_dim", c.feature_dim);
  read(j, "oc_alpha", c.oc.alpha);
  read(j, "oc_m0", c.oc.m0);
  read(j, "oc_m1", c.oc.m1);
  read(j, "dev_gate", c.dev_gate);
  read(j, "regmixup_eta", c.regmixup.eta);
  read(j, "regmixup_beta_a", c.regmixup.beta_a);
  if (j.contains("loss")) {
    std::string loss;
    read(j, "loss", loss);
    if (loss == "regmixup") {
      c.loss = ClassifierLoss::kRegMixup;
    } else if (loss == "ce") {
      c.loss = ClassifierLoss::kCrossEntropy;
    } else {
      throw ConfigError("loss must be 'ce' or 'regmixup'");
    }
  }
}

nlohmann::json to_json(const OodScorerConfig& c) {
  return {{"kind", std::string(scorer_name(c.kind))},
          {"temperature", c.temperature},
          {"k", c.k},
          {"ridge", c.ridge},
          {"block_rows", c.block_rows}};
}

void from_json(const nlohmann::json& j, OodScorerConfig& c) {
  reject_unknown(j, {"kind", "temperature", "k", "ridge", "block_rows"}, "ood_scorer");
  if (j.contains("kind")) {
    std::string kind;
    read(j, "kind", kind);
    c.kind = parse_scorer(kind);
  }
  read(j, "temperature", c.temperature);
  read(j, "k", c.k);
  read(j, "ridge", c.ridge);
  read(j, "block_rows", c.block_rows);
}

nlohmann::json to_json(const RefdConfig& c) {
  return {{"re_gate", c.re_gate},
          {"ood_scorer", to_json(c.ood_scorer)},
          {"ood_threshold", c.ood_threshold ? threshold_to_json(*c.ood_threshold)
                                            : nlohmann::json("sweep")},
          {"ood_class", c.ood_class}};
}

void from_json(const nlohmann::json& j, RefdConfig& c) {
  reject_unknown(j, {"re_gate", "ood_scorer", "ood_threshold", "ood_class"}, "refd");
  read(j, "re_gate", c.re_gate);
  read(j, "ood_class", c.ood_class);
  if (j.contains("ood_scorer")) from_json(j.at("ood_scorer"), c.ood_scorer);
  if (j.contains("ood_threshold")) {
    const auto& t = j.at("ood_threshold");
    if (t.is_string() && t.get<std::string>() == "sweep") {
      c.ood_threshold.reset();
    } else {
      try {
        c.ood_threshold = threshold_from_json(t);
      } catch (const std::exception& e) {
        throw ConfigError(std::string("bad ood_threshold: ") + e.what());
      }
    }
  }
}

nlohmann::json to_json(const StudyConfig& c) {
  nlohmann::json scorers = nlohmann::json::array();
  for (ScorerKind k : c.scorers) scorers.push_back(std::string(scorer_name(k)));
  nlohmann::json j = {{"synth", to_json(c.synth)},
                      {"train_re", to_json(c.train_re)},
                      {"train_fd", to_json(c.train_fd)},
                      {"train_onestage", to_json(c.train_onestage)},
                      {"refd", to_json(c.refd)},
                      {"scorers", scorers},
                      {"threshold_mode", threshold_mode_name(c.threshold_mode)}};
  if (!c.paths.empty()) j["paths"] = c.paths;
  return j;
}

void from_json(const nlohmann::json& j, StudyConfig& c) {
  reject_unknown(j,
                 {"synth", "train_re", "train_fd", "train_onestage", "refd", "scorers",
                  "threshold_mode", "paths"},
                 "config");
  if (j.contains("synth")) from_json(j.at("synth"), c.synth);
  if (j.contains("train_re")) from_json(j.at("train_re"), c.train_re);
  if (j.contains("train_fd")) from_json(j.at("train_fd"), c.train_fd);
  if (j.contains("train_onestage")) from_json(j.at("train_onestage"), c.train_onestage);
  if (j.contains("refd")) from_json(j.at("refd"), c.refd);
  if (j.contains("scorers")) {
    std::vector<std::string> names;
    read(j, "scorers", names);
    c.scorers.clear();
    for (const auto& n : names) c.scorers.push_back(parse_scorer(n));
  }
  if (j.contains("threshold_mode")) {
    std::string mode;
    read(j, "threshold_mode", mode);
    c.threshold_mode = parse_threshold_mode(mode);
  }
  if (j.contains("paths")) {
    if (!j.at("paths").is_object()) throw ConfigError("config.paths must be an object of strings");
    c.paths.clear();
    for (const auto& [k, v] : j.at("paths").items()) {
      if (!v.is_string()) throw ConfigError("config.paths." + k + " must be a string");
      c.paths[k] = v.get<std::string>();
    }
  }
}

StudyConfig study_config_from_json(const nlohmann::json& j) {
  StudyConfig c;
  from_json(j, c);
  return c;
}

}  // namespace refd
