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

#include "refd/study.hpp"

#include <limits>

#include "refd/errors.hpp"
#include "refd/metrics.hpp"

namespace refd {

namespace {

constexpr double kNoOod = -std::numeric_limits<double>::infinity();

// Max-macro-F1 threshold over the OOD scores of the samples that reach the
// fake-dispersion stage.
double pick_threshold(const std::vector<Prediction>& base, std::span<const int> labels,
                      int ood_class) {
  return sweep_threshold(sweep_scores(base), predicted_classes(base), labels, ood_class)
      .best_threshold;
}

EvalReport make_report(const std::string& method, const PipelineRun& run, std::span<const int> labels,
                       std::optional<double> re_gate, const nlohmann::json& config,
                       std::uint64_t seed, const std::string& generated_at) {
  EvalReport r = evaluate_predictions(predicted_classes(run.predictions), labels);
  r.method = method;
  r.re_gate = re_gate;
  if (run.threshold_mode != "disabled") r.ood_threshold = run.threshold;
  r.threshold_mode = run.threshold_mode;
  r.config = config;
  r.seed = seed;
  r.generated_at = generated_at;
  return r;
}

}  // namespace

Subset label_subset(const FeatureMatrix& x, std::span<const int> labels,
                    std::span<const std::string> ids, int lo, int hi) {
  if (labels.size() != x.rows() || ids.size() != x.rows()) {
    throw ArgumentError("label_subset: rows, labels and ids differ in length");
  }
  std::vector<std::size_t> keep;
  Subset out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= lo && labels[i] <= hi) {
      keep.push_back(i);
      out.y.push_back(labels[i]);
      out.ids.push_back(ids[i]);
    }
  }
  out.x = x.select_rows(keep);
  return out;
}

TrainBank bank_from_model(const MlpModel& model, const FeatureMatrix& train_x,
                          std::span<const int> train_y, const OodScorerConfig& scorer) {
  if (model.stage() == Stage::kRealEmphasis) {
    throw ConfigError("OOD banks are built from a classifier (fake-dispersion or one-stage) model");
  }
  const auto fwd = forward(model, train_x);
  return build_bank(fwd.features, fwd.logits, train_y,
                    BankOptions{scorer.temperature, scorer.ridge});
}

PipelineRun run_refd(const MlpModel& re, const MlpModel& fd, const TrainBank& bank,
                     const EvalSplit& eval, const EvalSplit& dev, const RefdConfig& cfg,
                     ThresholdMode mode, bool ood_enabled) {
  cfg.validate();
  const auto outputs = compute_refd_outputs(re, fd, *eval.x, cfg.ood_scorer, bank);
  PipelineRun run;
  if (!ood_enabled) {
    run.threshold = kNoOod;
    run.threshold_mode = "disabled";
  } else if (mode == ThresholdMode::kFixed) {
    if (!cfg.ood_threshold) throw ConfigError("fixed threshold mode needs refd.ood_threshold");
    run.threshold = *cfg.ood_threshold;
    run.threshold_mode = "fixed";
  } else if (mode == ThresholdMode::kOracleEval) {
    const auto base = assign_refd(outputs, eval.ids, cfg.re_gate, kNoOod, cfg.ood_class);
    run.threshold = pick_threshold(base, eval.labels, cfg.ood_class);
    run.threshold_mode = "oracle-eval";
  } else {
    const auto dev_out = compute_refd_outputs(re, fd, *dev.x, cfg.ood_scorer, bank);
    const auto base = assign_refd(dev_out, dev.ids, cfg.re_gate, kNoOod, cfg.ood_class);
    run.threshold = pick_threshold(base, dev.labels, cfg.ood_class);
    run.threshold_mode = "dev";
  }
  run.predictions = assign_refd(outputs, eval.ids, cfg.re_gate, run.threshold, cfg.ood_class);
  return run;
}

PipelineRun run_one_stage(const MlpModel& model, const TrainBank& bank, const EvalSplit& eval,
                          const EvalSplit& dev, const RefdConfig& cfg, ThresholdMode mode) {
  cfg.validate();
  const auto outputs = compute_one_stage_outputs(model, *eval.x, cfg.ood_scorer, bank);
  PipelineRun run;
  if (mode == ThresholdMode::kFixed) {
    if (!cfg.ood_threshold) throw ConfigError("fixed threshold mode needs refd.ood_threshold");
    run.threshold = *cfg.ood_threshold;
    run.threshold_mode = "fixed";
  } else if (mode == ThresholdMode::kOracleEval) {
    const auto base = assign_one_stage(outputs, eval.ids, kNoOod, cfg.ood_class);
    run.threshold = pick_threshold(base, eval.labels, cfg.ood_class);
    run.threshold_mode = "oracle-eval";
  } else {
    const auto dev_out = compute_one_stage_outputs(model, *dev.x, cfg.ood_scorer, bank);
    const auto base = assign_one_stage(dev_out, dev.ids, kNoOod, cfg.ood_class);
    run.threshold = pick_threshold(base, dev.labels, cfg.ood_class);
    run.threshold_mode = "dev";
  }
  run.predictions = assign_one_stage(outputs, eval.ids, run.threshold, cfg.ood_class);
  return run;
}

const EvalReport& StudyResult::find(const std::string& method) const {
  for (const auto* table : {&real_stage, &fake_dispersion, &ood_detectors, &stage_comparison}) {
    for (const auto& r : *table) {
      if (r.method == method) return r;
    }
  }
  throw ArgumentError("no study row named '" + method + "'");
}

StudyResult run_study(const StudyConfig& cfg, const std::string& generated_at) {
  cfg.validate();
  const SynthData data = generate_synthetic(cfg.synth);
  const auto& manifest = data.manifest;
  const auto train_y = manifest.labels(Split::kTrain);
  const auto dev_y = manifest.labels(Split::kDev);
  const auto eval_y = manifest.labels(Split::kEval);
  const auto train_ids = manifest.utt_ids(Split::kTrain);
  const auto dev_ids = manifest.utt_ids(Split::kDev);
  const auto eval_ids = manifest.utt_ids(Split::kEval);
  const nlohmann::json config_echo = to_json(cfg);
  const std::uint64_t seed = cfg.synth.seed;

  const auto re = train_real_emphasis(data.train, collapse_real_fake(train_y), data.dev,
                                      collapse_real_fake(dev_y), cfg.train_re);

  const Subset fd_train = label_subset(data.train, train_y, train_ids, kFirstFakeClass, kLastFakeClass);
  const Subset fd_dev = label_subset(data.dev, dev_y, dev_ids, kFirstFakeClass, kLastFakeClass);
  TrainConfig ce_cfg = cfg.train_fd;
  ce_cfg.loss = ClassifierLoss::kCrossEntropy;
  TrainConfig rm_cfg = cfg.train_fd;
  rm_cfg.loss = ClassifierLoss::kRegMixup;
  const auto fd_ce = train_fake_dispersion(fd_train.x, fd_train.y, fd_dev.x, fd_dev.y, ce_cfg);
  const auto fd_rm = train_fake_dispersion(fd_train.x, fd_train.y, fd_dev.x, fd_dev.y, rm_cfg);

  const Subset os_train = label_subset(data.train, train_y, train_ids, kRealClass, kLastFakeClass);
  const Subset os_dev = label_subset(data.dev, dev_y, dev_ids, kRealClass, kLastFakeClass);
  const auto one_stage = train_one_stage(os_train.x, os_train.y, os_dev.x, os_dev.y, cfg.train_onestage);

  const EvalSplit eval{&data.eval, eval_y, eval_ids};
  const EvalSplit dev{&data.dev, dev_y, dev_ids};
  StudyResult out;

  {
    const auto oc = forward(re.model, data.eval).oc_scores;
    const int real_only[] = {kRealClass};
    for (const auto& [name, gate] : {std::pair<std::string, double>{"OC-Softmax", 0.0},
                                     std::pair<std::string, double>{"OC-Softmax-T", cfg.refd.re_gate}}) {
      std::vector<int> pred(oc.size());
      for (std::size_t i = 0; i < oc.size(); ++i) pred[i] = oc[i] >= gate ? kRealClass : kOodClass;
      EvalReport r = evaluate_predictions(pred, eval_y, real_only);
      r.method = name;
      r.re_gate = gate;
      r.config = config_echo;
      r.seed = seed;
      r.generated_at = generated_at;
      out.real_stage.push_back(std::move(r));
    }
  }

  const std::string primary(scorer_name(cfg.refd.ood_scorer.kind));
  auto refd_row = [&](const std::string& method, const TrainResult& fd, const RefdConfig& rc,
                      bool ood) {
    const TrainBank bank = bank_from_model(fd.model, fd_train.x, fd_train.y, rc.ood_scorer);
    const auto run = run_refd(re.model, fd.model, bank, eval, dev, rc, cfg.threshold_mode, ood);
    return make_report(method, run, eval_y, rc.re_gate, config_echo, seed, generated_at);
  };

  out.fake_dispersion.push_back(refd_row("CE / -", fd_ce, cfg.refd, false));
  out.fake_dispersion.push_back(refd_row("CE / " + primary, fd_ce, cfg.refd, true));
  out.fake_dispersion.push_back(refd_row("CE + RegMixup / -", fd_rm, cfg.refd, false));
  out.fake_dispersion.push_back(refd_row("CE + RegMixup / " + primary, fd_rm, cfg.refd, true));

  out.ood_detectors.push_back(refd_row("-", fd_rm, cfg.refd, false));
  for (ScorerKind k : cfg.scorers) {
    RefdConfig rc = cfg.refd;
    rc.ood_scorer.kind = k;
    out.ood_detectors.push_back(refd_row(std::string(scorer_name(k)), fd_rm, rc, true));
  }

  {
    const TrainBank bank =
        bank_from_model(one_stage.model, os_train.x, os_train.y, cfg.refd.ood_scorer);
    const auto run = run_one_stage(one_stage.model, bank, eval, dev, cfg.refd, cfg.threshold_mode);
    out.stage_comparison.push_back(
        make_report("one-stage / " + primary, run, eval_y, std::nullopt, config_echo, seed, generated_at));
  }
  out.stage_comparison.push_back(refd_row("dual-stage / " + primary, fd_rm, cfg.refd, true));
  return out;
}

}  // namespace refd
