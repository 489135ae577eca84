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

#include "cli.hpp"

#include <omp.h>

#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "refd/config.hpp"
#include "refd/errors.hpp"
#include "refd/feature_io.hpp"
#include "refd/fileio.hpp"
#include "refd/manifest.hpp"
#include "refd/ood.hpp"
#include "refd/pipeline.hpp"
#include "refd/report.hpp"
#include "refd/study.hpp"
#include "refd/synth.hpp"
#include "refd/trainer.hpp"

namespace refd::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

// Output paths honour REFD_OUT_DIR when relative.
fs::path out_path(const std::string& p) {
  fs::path path(p);
  if (path.is_relative()) {
    if (const char* dir = std::getenv("REFD_OUT_DIR"); dir != nullptr && *dir != '\0') {
      return fs::path(dir) / path;
    }
  }
  return path;
}

void apply_thread_env() {
  const char* v = std::getenv("REFD_THREADS");
  if (v == nullptr || *v == '\0') return;
  char* end = nullptr;
  const long n = std::strtol(v, &end, 10);
  if (*end != '\0' || n < 1 || n > 4096) throw ConfigError(std::string("bad REFD_THREADS '") + v + "'");
  omp_set_num_threads(static_cast<int>(n));
}

// One record per invocation: what ran, with which config, and what it wrote.
class RunLog {
 public:
  RunLog(std::string command, std::vector<std::string> args)
      : command_(std::move(command)), args_(std::move(args)) {}

  void write(const fs::path& path, std::string_view bytes) {
    write_file_atomic(path, bytes);
    artifacts_.push_back(path.generic_string());
  }

  void finish(const fs::path& log_path, const json& config, std::uint64_t seed) const {
    json j;
    j["command"] = command_;
    j["args"] = args_;
    j["config"] = config;
    j["seed"] = seed;
    j["tool_version"] = kToolVersion;
    j["artifacts"] = artifacts_;
    j[kTimestampKey] = utc_now();
    write_file_atomic(log_path, j.dump(2) + "\n");
  }

 private:
  std::string command_;
  std::vector<std::string> args_;
  std::vector<std::string> artifacts_;
};

struct Dataset {
  DatasetManifest manifest;
  std::map<Split, FeatureMatrix> x;
};

fs::path split_file(const fs::path& dir, Split s) {
  return dir / (std::string(split_name(s)) + ".emb");
}

Dataset load_dataset(const fs::path& dir) {
  Dataset d{DatasetManifest::decode_jsonl(read_file(dir / "manifest.jsonl")), {}};
  for (Split s : {Split::kTrain, Split::kDev, Split::kEval}) {
    FeatureMatrix m = load_features(split_file(dir, s));
    if (m.rows() != d.manifest.labels(s).size()) {
      throw DataError("split '" + std::string(split_name(s)) + "' has " + std::to_string(m.rows()) +
                      " rows but the manifest lists " + std::to_string(d.manifest.labels(s).size()));
    }
    d.x.emplace(s, std::move(m));
  }
  return d;
}

// Shared flags. Values are applied only when given on the command line.
struct Common {
  std::string config_path;
  std::string data_dir = "data";
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* data_opt = nullptr;

  void add(CLI::App* sub, bool with_data) {
    sub->add_option("--config", config_path, "JSON config file");
    if (with_data) {
      data_opt = sub->add_option("--data", data_dir, "Dataset directory (default: config paths.data, then 'data')");
    }
    seed_opt = sub->add_option("--seed", seed, "Random seed");
  }

  StudyConfig load() const {
    if (config_path.empty()) return {};
    json j;
    try {
      j = json::parse(read_file(config_path));
    } catch (const json::parse_error& e) {
      throw ConfigError("config '" + config_path + "' is not valid JSON: " + e.what());
    }
    return study_config_from_json(j);
  }

  std::string data(const StudyConfig& cfg) const {
    if (data_opt != nullptr && data_opt->count() > 0) return data_dir;
    if (const auto it = cfg.paths.find("data"); it != cfg.paths.end()) return it->second;
    return data_dir;
  }
};

struct TrainFlags {
  int epochs = 0;
  std::size_t batch_size = 0;
  double lr = 0;
  std::string loss;
  double eta = 0;
  CLI::Option* epochs_opt = nullptr;
  CLI::Option* batch_opt = nullptr;
  CLI::Option* lr_opt = nullptr;
  CLI::Option* loss_opt = nullptr;
  CLI::Option* eta_opt = nullptr;

  void add(CLI::App* sub, bool classifier) {
    epochs_opt = sub->add_option("--epochs", epochs);
    batch_opt = sub->add_option("--batch-size", batch_size);
    lr_opt = sub->add_option("--lr", lr);
    if (classifier) {
      loss_opt = sub->add_option("--loss", loss)->check(CLI::IsMember({"ce", "regmixup"}));
      eta_opt = sub->add_option("--eta", eta, "RegMixup weight");
    }
  }

  void apply(TrainConfig& c, const Common& common) const {
    if (*epochs_opt) c.epochs = epochs;
    if (*batch_opt) c.batch_size = batch_size;
    if (*lr_opt) c.lr = lr;
    if (loss_opt != nullptr && *loss_opt) {
      c.loss = loss == "ce" ? ClassifierLoss::kCrossEntropy : ClassifierLoss::kRegMixup;
    }
    if (eta_opt != nullptr && *eta_opt) c.regmixup.eta = eta;
    if (*common.seed_opt) c.seed = common.seed;
    c.validate();
  }
};

struct ScorerFlags {
  std::vector<std::string> names;
  std::size_t k = 0;
  double temperature = 0;
  CLI::Option* k_opt = nullptr;
  CLI::Option* t_opt = nullptr;

  void add(CLI::App* sub, bool many) {
    auto* o = sub->add_option("--scorer", names, many ? "Scorer name(s) or 'all'" : "Scorer name");
    if (!many) o->expected(1);
    k_opt = sub->add_option("--k", k, "Neighbours for knn / nnguide");
    t_opt = sub->add_option("--temperature", temperature, "Energy temperature");
  }

  OodScorerConfig apply(OodScorerConfig c) const {
    if (*k_opt) c.k = k;
    if (*t_opt) c.temperature = temperature;
    c.validate();
    return c;
  }

  std::vector<ScorerKind> kinds(const StudyConfig& cfg) const {
    if (names.empty()) return {cfg.refd.ood_scorer.kind};
    std::vector<ScorerKind> out;
    for (const auto& n : names) {
      if (n == "all") return all_scorers();
      out.push_back(parse_scorer(n));
    }
    return out;
  }
};

// Which trained models drive inference.
struct ModelFlags {
  std::string re_path;
  std::string fd_path;
  std::string onestage_path;
  double re_gate = 0;
  CLI::Option* gate_opt = nullptr;

  void add(CLI::App* sub) {
    sub->add_option("--re", re_path, "Real-emphasis checkpoint");
    sub->add_option("--fd", fd_path, "Fake-dispersion checkpoint");
    sub->add_option("--onestage", onestage_path, "One-stage checkpoint (instead of --re/--fd)");
    gate_opt = sub->add_option("--re-gate", re_gate, "Cosine gate of the real stage");
  }

  bool one_stage() const {
    if (!onestage_path.empty()) {
      if (!re_path.empty() || !fd_path.empty()) {
        throw ArgumentError("--onestage excludes --re and --fd");
      }
      return true;
    }
    if (re_path.empty() || fd_path.empty()) {
      throw ArgumentError("give --re and --fd, or --onestage");
    }
    return false;
  }
};

double parse_threshold(const std::string& s) {
  if (s == "inf" || s == "-inf") return threshold_from_json(json(s));
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size() || std::isnan(v)) throw ArgumentError("bad threshold '" + s + "'");
  return v;
}

Split parse_split_flag(const std::string& s) {
  try {
    return parse_split(s);
  } catch (const Error&) {
    throw ArgumentError("unknown split '" + s + "'");
  }
}

// Training rows restricted to the classes the model was trained on.
TrainBank bank_for(const MlpModel& model, const Dataset& d, const OodScorerConfig& scorer) {
  const auto labels = d.manifest.labels(Split::kTrain);
  const auto ids = d.manifest.utt_ids(Split::kTrain);
  const auto& map = model.class_map();
  const auto sub = label_subset(d.x.at(Split::kTrain), labels, ids, map.front(), map.back());
  return bank_from_model(model, sub.x, sub.y, scorer);
}

std::string sanitize(const std::string& s) {
  std::string out;
  for (char c : s) out += std::isalnum(static_cast<unsigned char>(c)) ? c : '_';
  return out;
}

json history_json(const TrainResult& r) {
  json epochs = json::array();
  for (const auto& e : r.epochs) {
    epochs.push_back({{"epoch", e.epoch}, {"lr", e.lr}, {"mean_loss", e.mean_loss},
                      {"dev_metric", e.dev_metric}});
  }
  return {{"best_epoch", r.best_epoch}, {"best_dev_metric", r.best_dev_metric}, {"epochs", epochs}};
}

// Subcommand bodies. Each returns after writing its run log.

struct Invocation {
  std::vector<std::string> args;
  std::ostream* out;
};

int cmd_gen_synth(const Invocation& inv, const Common& common, const std::string& out_dir,
                  const std::map<std::string, std::pair<CLI::Option*, double>>& overrides) {
  StudyConfig cfg = common.load();
  if (*common.seed_opt) cfg.synth.seed = common.seed;
  if (auto it = overrides.find("separation"); *it->second.first) {
    cfg.synth.cluster_separation = it->second.second;
  }
  if (auto it = overrides.find("sigma"); *it->second.first) cfg.synth.within_class_sigma = it->second.second;
  if (auto it = overrides.find("shift"); *it->second.first) cfg.synth.eval_shift_sigma = it->second.second;
  cfg.synth.validate();

  const SynthData data = generate_synthetic(cfg.synth);
  const fs::path dir = out_path(out_dir);
  RunLog log("gen-synth", inv.args);
  for (Split s : {Split::kTrain, Split::kDev, Split::kEval}) {
    log.write(split_file(dir, s), encode_features(data.features(s)));
  }
  log.write(dir / "manifest.jsonl", data.manifest.encode_jsonl());
  log.finish(dir / "gen-synth.runlog.json", to_json(cfg.synth), cfg.synth.seed);
  *inv.out << "wrote " << data.manifest.size() << " records to " << dir.generic_string() << "\n";
  return kExitOk;
}

int cmd_train(const Invocation& inv, Stage stage, const Common& common, const TrainFlags& flags,
              const std::string& out_file) {
  StudyConfig cfg = common.load();
  const Dataset d = load_dataset(common.data(cfg));
  const auto train_y = d.manifest.labels(Split::kTrain);
  const auto dev_y = d.manifest.labels(Split::kDev);
  const auto train_ids = d.manifest.utt_ids(Split::kTrain);
  const auto dev_ids = d.manifest.utt_ids(Split::kDev);
  const FeatureMatrix& tx = d.x.at(Split::kTrain);
  const FeatureMatrix& dx = d.x.at(Split::kDev);

  TrainConfig tc;
  TrainResult result;
  std::string command;
  switch (stage) {
    case Stage::kRealEmphasis:
      command = "train-re";
      tc = cfg.train_re;
      flags.apply(tc, common);
      result = train_real_emphasis(tx, collapse_real_fake(train_y), dx, collapse_real_fake(dev_y), tc);
      break;
    case Stage::kFakeDispersion: {
      command = "train-fd";
      tc = cfg.train_fd;
      flags.apply(tc, common);
      const auto tr = label_subset(tx, train_y, train_ids, kFirstFakeClass, kLastFakeClass);
      const auto dv = label_subset(dx, dev_y, dev_ids, kFirstFakeClass, kLastFakeClass);
      result = train_fake_dispersion(tr.x, tr.y, dv.x, dv.y, tc);
      break;
    }
    case Stage::kOneStage: {
      command = "train-onestage";
      tc = cfg.train_onestage;
      flags.apply(tc, common);
      const auto tr = label_subset(tx, train_y, train_ids, kRealClass, kLastFakeClass);
      const auto dv = label_subset(dx, dev_y, dev_ids, kRealClass, kLastFakeClass);
      result = train_one_stage(tr.x, tr.y, dv.x, dv.y, tc);
      break;
    }
  }

  const fs::path path = out_path(out_file);
  RunLog log(command, inv.args);
  log.write(path, encode_model(result.model));
  fs::path hist = path;
  hist += ".history.json";
  log.write(hist, history_json(result).dump(2) + "\n");
  fs::path log_path = path;
  log_path += ".runlog.json";
  log.finish(log_path, to_json(tc), tc.seed);
  *inv.out << command << ": best epoch " << result.best_epoch << ", dev metric "
           << result.best_dev_metric << "\n";
  return kExitOk;
}

int cmd_score(const Invocation& inv, const Common& common, const ScorerFlags& sf,
              const std::string& model_path, const std::string& split, const std::string& out_dir) {
  StudyConfig cfg = common.load();
  const Dataset d = load_dataset(common.data(cfg));
  const MlpModel model = load_model(model_path);
  if (model.stage() == Stage::kRealEmphasis) {
    throw ConfigError("score needs a fake-dispersion or one-stage checkpoint");
  }
  const Split s = parse_split_flag(split);
  const OodScorerConfig base = sf.apply(cfg.refd.ood_scorer);
  const TrainBank bank = bank_for(model, d, base);
  const auto fwd = forward(model, d.x.at(s));
  const auto ids = d.manifest.utt_ids(s);

  const fs::path dir = out_path(out_dir);
  RunLog log("score", inv.args);
  json echo = json::array();
  for (ScorerKind k : sf.kinds(cfg)) {
    OodScorerConfig sc = base;
    sc.kind = k;
    const auto scores = score(sc, fwd.features, fwd.logits, bank);
    log.write(dir / ("scores_" + std::string(scorer_name(k)) + ".csv"), encode_scores_csv(ids, scores));
    echo.push_back(to_json(sc));
  }
  log.finish(dir / "score.runlog.json", {{"scorers", echo}, {"model", model_path}, {"split", split}},
             cfg.synth.seed);
  *inv.out << "scored " << ids.size() << " samples with " << echo.size() << " scorer(s)\n";
  return kExitOk;
}

struct PipelineInputs {
  StudyConfig cfg;
  Dataset data;
  bool one_stage = false;
  MlpModel re, fd, os;
  TrainBank bank;
};

PipelineInputs load_pipeline(const Common& common, const ModelFlags& mf, const ScorerFlags& sf) {
  StudyConfig cfg = common.load();
  const std::string data_dir = common.data(cfg);
  PipelineInputs p{std::move(cfg), load_dataset(data_dir), mf.one_stage(), {}, {}, {}, {}};
  if (*mf.gate_opt) p.cfg.refd.re_gate = mf.re_gate;
  const auto kinds = sf.kinds(p.cfg);
  p.cfg.refd.ood_scorer = sf.apply(p.cfg.refd.ood_scorer);
  p.cfg.refd.ood_scorer.kind = kinds.front();
  p.cfg.refd.validate();
  if (p.one_stage) {
    p.os = load_model(mf.onestage_path);
    p.bank = bank_for(p.os, p.data, p.cfg.refd.ood_scorer);
  } else {
    p.re = load_model(mf.re_path);
    p.fd = load_model(mf.fd_path);
    if (p.fd.stage() != Stage::kFakeDispersion) throw ConfigError("--fd is not a fake-dispersion checkpoint");
    p.bank = bank_for(p.fd, p.data, p.cfg.refd.ood_scorer);
  }
  return p;
}

int cmd_sweep(const Invocation& inv, const Common& common, const ModelFlags& mf,
              const ScorerFlags& sf, const std::string& split, const std::string& out_dir) {
  PipelineInputs p = load_pipeline(common, mf, sf);
  const Split s = parse_split_flag(split);
  const auto labels = p.data.manifest.labels(s);
  const auto ids = p.data.manifest.utt_ids(s);
  const FeatureMatrix& x = p.data.x.at(s);
  const double none = -std::numeric_limits<double>::infinity();

  std::vector<Prediction> base;
  if (p.one_stage) {
    base = assign_one_stage(compute_one_stage_outputs(p.os, x, p.cfg.refd.ood_scorer, p.bank), ids,
                            none, p.cfg.refd.ood_class);
  } else {
    base = assign_refd(compute_refd_outputs(p.re, p.fd, x, p.cfg.refd.ood_scorer, p.bank), ids,
                       p.cfg.refd.re_gate, none, p.cfg.refd.ood_class);
  }
  const auto result = sweep_threshold(sweep_scores(base), predicted_classes(base), labels,
                                      p.cfg.refd.ood_class);

  std::ostringstream csv;
  csv << std::setprecision(17) << "threshold,macro_f1\n";
  for (const auto& pt : result.curve) csv << pt.threshold << ',' << pt.macro_f1 << '\n';
  const std::string name(scorer_name(p.cfg.refd.ood_scorer.kind));
  const fs::path dir = out_path(out_dir);
  RunLog log("sweep", inv.args);
  log.write(dir / ("sweep_" + name + ".csv"), csv.str());
  const json best = {{"scorer", name},
                     {"split", split},
                     {"pipeline", p.one_stage ? "one-stage" : "dual-stage"},
                     {"best_threshold", threshold_to_json(result.best_threshold)},
                     {"best_macro_f1", result.best_macro_f1}};
  log.write(dir / ("sweep_" + name + ".best.json"), best.dump(2) + "\n");
  log.finish(dir / "sweep.runlog.json", to_json(p.cfg.refd), p.cfg.synth.seed);
  *inv.out << "best threshold " << std::setprecision(17) << result.best_threshold << " macro-F1 "
           << result.best_macro_f1 << "\n";
  return kExitOk;
}

int cmd_infer(const Invocation& inv, const Common& common, const ModelFlags& mf,
              const ScorerFlags& sf, const std::string& split, const std::string& threshold,
              bool threshold_given, const std::string& mode_name, bool mode_given,
              const std::string& out_file) {
  PipelineInputs p = load_pipeline(common, mf, sf);
  const Split s = parse_split_flag(split);
  const auto labels = p.data.manifest.labels(s);
  const auto ids = p.data.manifest.utt_ids(s);
  const auto dev_labels = p.data.manifest.labels(Split::kDev);
  const auto dev_ids = p.data.manifest.utt_ids(Split::kDev);
  const EvalSplit eval{&p.data.x.at(s), labels, ids};
  const EvalSplit dev{&p.data.x.at(Split::kDev), dev_labels, dev_ids};

  // Flag beats file: an explicit --threshold wins over refd.ood_threshold.
  bool enabled = true;
  ThresholdMode mode = mode_given ? parse_threshold_mode(mode_name) : p.cfg.threshold_mode;
  if (threshold_given) {
    if (threshold == "none") {
      enabled = false;
    } else if (threshold == "sweep") {
      p.cfg.refd.ood_threshold.reset();
    } else {
      p.cfg.refd.ood_threshold = parse_threshold(threshold);
    }
  }
  if (p.cfg.refd.ood_threshold) {
    mode = ThresholdMode::kFixed;
  } else if (mode == ThresholdMode::kFixed) {
    throw ConfigError("fixed threshold mode needs a numeric threshold");
  }
  if (mode == ThresholdMode::kOracleEval && enabled) {
    for (int l : labels) {
      if (l == kUnlabeled) throw DataError("oracle threshold needs labels on the whole split");
    }
  }

  PipelineRun run;
  if (p.one_stage) {
    if (!enabled) p.cfg.refd.ood_threshold = -std::numeric_limits<double>::infinity();
    run = run_one_stage(p.os, p.bank, eval, dev, p.cfg.refd, enabled ? mode : ThresholdMode::kFixed);
    if (!enabled) run.threshold_mode = "disabled";
  } else {
    run = run_refd(p.re, p.fd, p.bank, eval, dev, p.cfg.refd, mode, enabled);
  }

  const fs::path path = out_path(out_file);
  RunLog log("infer", inv.args);
  log.write(path, encode_predictions_csv(run.predictions));
  json echo = to_json(p.cfg.refd);
  echo["threshold_used"] = threshold_to_json(run.threshold);
  echo["threshold_mode"] = run.threshold_mode;
  echo["pipeline"] = p.one_stage ? "one-stage" : "dual-stage";
  fs::path log_path = path;
  log_path += ".runlog.json";
  log.finish(log_path, echo, p.cfg.synth.seed);
  *inv.out << "wrote " << run.predictions.size() << " predictions (threshold "
           << std::setprecision(17) << run.threshold << ", " << run.threshold_mode << ")\n";
  return kExitOk;
}

int cmd_eval(const Invocation& inv, const Common& common, const std::string& pred_path,
             const std::string& split, const std::string& method, const std::string& out_file) {
  StudyConfig cfg = common.load();
  const auto manifest = DatasetManifest::decode_jsonl(read_file(fs::path(common.data(cfg)) / "manifest.jsonl"));
  const Split s = parse_split_flag(split);
  const auto preds = load_predictions_csv(pred_path);
  std::map<std::string, int> by_id;
  for (const auto& p : preds) {
    if (!by_id.emplace(p.utt_id, p.predicted_class).second) {
      throw DataError("duplicate prediction for '" + p.utt_id + "'");
    }
  }
  std::vector<int> predicted, labels;
  for (const auto& rec : manifest.split(s)) {
    const auto it = by_id.find(rec.utt_id);
    if (it == by_id.end()) throw DataError("no prediction for '" + rec.utt_id + "'");
    if (rec.label == kUnlabeled) throw DataError("'" + rec.utt_id + "' has no label");
    predicted.push_back(it->second);
    labels.push_back(rec.label);
  }
  if (predicted.size() != by_id.size()) {
    throw DataError("predictions include ids outside the '" + split + "' split");
  }

  EvalReport r = evaluate_predictions(predicted, labels);
  r.method = method;
  r.config = to_json(cfg);
  r.seed = cfg.synth.seed;
  r.generated_at = utc_now();
  // Thresholds come from the infer run log when it sits next to the predictions.
  fs::path infer_log = pred_path;
  infer_log += ".runlog.json";
  if (fs::exists(infer_log)) {
    const json j = json::parse(read_file(infer_log));
    const json& c = j.at("config");
    r.threshold_mode = c.value("threshold_mode", "disabled");
    if (r.threshold_mode != "disabled") r.ood_threshold = threshold_from_json(c.at("threshold_used"));
    if (c.value("pipeline", "") == "dual-stage") r.re_gate = c.at("re_gate").get<double>();
    r.config = {{"study", r.config}, {"infer", c}};
  }

  const fs::path path = out_path(out_file);
  RunLog log("eval", inv.args);
  log.write(path, encode_report(r));
  fs::path log_path = path;
  log_path += ".runlog.json";
  log.finish(log_path, r.config, r.seed);
  *inv.out << "macro-F1 " << std::setprecision(6) << r.macro_f1 << "\n";
  return kExitOk;
}

int cmd_report(const Invocation& inv, const Common& common, const std::vector<std::string>& inputs,
               bool study, const std::string& title, const std::string& out_dir) {
  const fs::path dir = out_path(out_dir);
  RunLog log("report", inv.args);
  StudyConfig cfg = common.load();
  if (*common.seed_opt) {
    cfg.synth.seed = common.seed;
    cfg.train_re.seed = cfg.train_fd.seed = cfg.train_onestage.seed = common.seed;
  }
  std::vector<std::pair<std::string, std::vector<EvalReport>>> tables;
  if (study) {
    if (!inputs.empty()) throw ArgumentError("--study and --inputs are exclusive");
    const StudyResult r = run_study(cfg, utc_now());
    tables = {{"real_stage", r.real_stage},
              {"fake_dispersion", r.fake_dispersion},
              {"ood_detectors", r.ood_detectors},
              {"stage_comparison", r.stage_comparison}};
    for (const auto& [name, rows] : tables) {
      for (std::size_t i = 0; i < rows.size(); ++i) {
        log.write(dir / "reports" / (name + "_" + std::to_string(i) + "_" + sanitize(rows[i].method) + ".json"),
                  encode_report(rows[i]));
      }
    }
  } else {
    if (inputs.empty()) throw ArgumentError("give --inputs or --study");
    std::vector<EvalReport> rows;
    for (const auto& in : inputs) rows.push_back(load_report(in));
    tables = {{title, rows}};
  }
  for (const auto& [name, rows] : tables) {
    const std::string text = render_table_text(name, rows);
    log.write(dir / (sanitize(name) + ".csv"), render_table_csv(rows));
    log.write(dir / (sanitize(name) + ".txt"), text);
    *inv.out << text << "\n";
  }
  log.finish(dir / "report.runlog.json", to_json(cfg), cfg.synth.seed);
  return kExitOk;
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Real-emphasis / fake-dispersion source tracing toolkit", "refd"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1, 1);

  Common common;
  TrainFlags train;
  ScorerFlags scorers;
  ModelFlags models;
  std::string out_opt, model_path, split = "eval", threshold = "sweep", mode = "oracle-eval";
  std::string pred_path, method = "refd", title = "results";
  std::vector<std::string> inputs;
  bool study = false;
  std::map<std::string, std::pair<CLI::Option*, double>> synth_over;
  for (const char* k : {"separation", "sigma", "shift"}) synth_over[k] = {nullptr, 0.0};

  auto* gen = app.add_subcommand("gen-synth", "Write a synthetic embedding corpus");
  common.add(gen, false);
  gen->add_option("--out", out_opt, "Output directory")->required();
  synth_over["separation"].first = gen->add_option("--separation", synth_over["separation"].second);
  synth_over["sigma"].first = gen->add_option("--sigma", synth_over["sigma"].second);
  synth_over["shift"].first = gen->add_option("--shift", synth_over["shift"].second);

  std::map<std::string, Stage> train_cmds = {{"train-re", Stage::kRealEmphasis},
                                             {"train-fd", Stage::kFakeDispersion},
                                             {"train-onestage", Stage::kOneStage}};
  std::map<std::string, CLI::App*> train_apps;
  // CLI11 binds each option to one variable, so the three trainers get their
  // own Common / TrainFlags instances.
  std::map<std::string, Common> train_common;
  std::map<std::string, TrainFlags> train_flags;
  for (const auto& [name, stage] : train_cmds) {
    auto* sub = app.add_subcommand(name, "Train the " + std::string(stage_name(stage)) + " model");
    train_common[name].add(sub, true);
    train_flags[name].add(sub, stage != Stage::kRealEmphasis);
    sub->add_option("--out", out_opt, "Checkpoint path")->required();
    train_apps[name] = sub;
  }

  auto* sc = app.add_subcommand("score", "Write OOD scores per scorer");
  Common score_common;
  score_common.add(sc, true);
  scorers.add(sc, true);
  sc->add_option("--model", model_path, "FD or one-stage checkpoint")->required();
  sc->add_option("--split", split)->capture_default_str();
  sc->add_option("--out", out_opt, "Output directory")->required();

  auto* sw = app.add_subcommand("sweep", "Threshold sweep curve and best point");
  Common sweep_common;
  ScorerFlags sweep_scorer;
  ModelFlags sweep_models;
  sweep_common.add(sw, true);
  sweep_scorer.add(sw, false);
  sweep_models.add(sw);
  sw->add_option("--split", split)->capture_default_str();
  sw->add_option("--out", out_opt, "Output directory")->required();

  auto* inf = app.add_subcommand("infer", "Predict classes with the full pipeline");
  Common infer_common;
  ScorerFlags infer_scorer;
  infer_common.add(inf, true);
  infer_scorer.add(inf, false);
  models.add(inf);
  inf->add_option("--split", split)->capture_default_str();
  auto* thr_opt = inf->add_option("--threshold", threshold, "Number, 'sweep' or 'none'");
  auto* mode_opt = inf->add_option("--threshold-mode", mode, "oracle-eval or dev (used with 'sweep')")
                       ->check(CLI::IsMember({"oracle-eval", "dev", "fixed"}));
  inf->add_option("--out", out_opt, "Predictions CSV")->required();

  auto* ev = app.add_subcommand("eval", "Score predictions against the manifest");
  Common eval_common;
  eval_common.add(ev, true);
  ev->add_option("--predictions", pred_path)->required();
  ev->add_option("--split", split)->capture_default_str();
  ev->add_option("--method", method)->capture_default_str();
  ev->add_option("--out", out_opt, "Report JSON")->required();

  auto* rep = app.add_subcommand("report", "Render result tables");
  Common report_common;
  report_common.add(rep, false);
  rep->add_option("--inputs", inputs, "Report JSON files, one table row each");
  rep->add_flag("--study", study, "Run the full synthetic study first");
  rep->add_option("--title", title)->capture_default_str();
  rep->add_option("--out", out_opt, "Output directory")->required();

  std::vector<std::string> argv_store{"refd"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_store) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInvalid;
  }

  const Invocation inv{args, &out};
  try {
    apply_thread_env();
    if (gen->parsed()) return cmd_gen_synth(inv, common, out_opt, synth_over);
    for (const auto& [name, sub] : train_apps) {
      if (sub->parsed()) return cmd_train(inv, train_cmds.at(name), train_common.at(name),
                                          train_flags.at(name), out_opt);
    }
    if (sc->parsed()) return cmd_score(inv, score_common, scorers, model_path, split, out_opt);
    if (sw->parsed()) return cmd_sweep(inv, sweep_common, sweep_models, sweep_scorer, split, out_opt);
    if (inf->parsed()) {
      return cmd_infer(inv, infer_common, models, infer_scorer, split, threshold, thr_opt->count() > 0,
                       mode, mode_opt->count() > 0, out_opt);
    }
    if (ev->parsed()) return cmd_eval(inv, eval_common, pred_path, split, method, out_opt);
    if (rep->parsed()) return cmd_report(inv, report_common, inputs, study, title, out_opt);
  } catch (const IoError& e) {
    err << "refd: " << e.what() << "\n";
    return kExitIo;
  } catch (const Error& e) {
    err << "refd: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const nlohmann::json::exception& e) {
    err << "refd: bad JSON: " << e.what() << "\n";
    return kExitInvalid;
  }
  err << "refd: no subcommand\n";
  return kExitInvalid;
}

}  // namespace refd::cli
