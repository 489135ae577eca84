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

#include "refd/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "refd/errors.hpp"
#include "refd/metrics.hpp"
#include "refd/numeric.hpp"
#include "refd/rng.hpp"

namespace refd {

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (batch_size < 1) throw ConfigError("batch_size must be positive");
  if (loss == ClassifierLoss::kRegMixup && batch_size < 2) {
    throw ConfigError("RegMixup needs batch_size >= 2");
  }
  if (!(lr > 0.0)) throw ConfigError("lr must be positive");
  if (lr_halve_every < 1) throw ConfigError("lr_halve_every must be at least 1");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
  if (!(adam.epsilon > 0.0) || !(adam.weight_decay >= 0.0)) {
    throw ConfigError("Adam epsilon must be positive and weight decay nonnegative");
  }
  if (hidden_dim == 0 || feature_dim == 0) throw ConfigError("layer widths must be positive");
  if (!(dev_gate >= -1.0 && dev_gate <= 1.0)) throw ConfigError("dev_gate must lie in [-1, 1]");
  oc.validate();
  regmixup.validate();
}

double TrainConfig::lr_at(int epoch) const {
  return std::ldexp(lr, -(epoch / lr_halve_every));
}

std::vector<int> collapse_real_fake(std::span<const int> labels) {
  std::vector<int> out(labels.size());
  std::transform(labels.begin(), labels.end(), out.begin(),
                 [](int y) { return y == kRealClass ? 0 : 1; });
  return out;
}

std::vector<int> predict_classes(const MlpModel& model, const FeatureMatrix& logits) {
  std::vector<int> out(logits.rows());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    out[i] = model.class_map().at(argmax(logits.row(i)));
  }
  return out;
}

namespace {

// Shuffled index batches. A trailing batch of one sample is folded into the
// previous batch so mixup always has a partner.
std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size,
                                                   Rng& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  shuffle_in_place(std::span<std::size_t>(order), rng);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    batches.emplace_back(order.begin() + start, order.begin() + end);
  }
  if (batches.size() > 1 && batches.back().size() == 1) {
    batches[batches.size() - 2].push_back(batches.back().front());
    batches.pop_back();
  }
  return batches;
}

void check_inputs(const FeatureMatrix& x, std::span<const int> y, const char* what) {
  if (x.rows() == 0) throw DataError(std::string(what) + ": empty split");
  if (x.rows() != y.size()) throw DataError(std::string(what) + ": label count differs from rows");
}

double real_class_f1(const MlpModel& model, const FeatureMatrix& x, std::span<const int> y01,
                     double gate) {
  const auto fwd = forward(model, x);
  std::vector<int> pred(y01.size());
  for (std::size_t i = 0; i < pred.size(); ++i) pred[i] = fwd.oc_scores[i] >= gate ? 0 : 1;
  const int real[] = {0};
  return f1_per_class(pred, y01, real).f1.at(0);
}

double classifier_macro_f1(const MlpModel& model, const FeatureMatrix& x, std::span<const int> y) {
  const auto fwd = forward(model, x);
  const auto pred = predict_classes(model, fwd.logits);
  return macro_f1(f1_per_class(pred, y, model.class_map()).f1);
}

MlpShape shape_for(const FeatureMatrix& x, const TrainConfig& cfg, std::size_t classes) {
  return MlpShape{x.cols(), cfg.hidden_dim, cfg.feature_dim, classes};
}

TrainResult train_classifier(Stage stage, const FeatureMatrix& train_x,
                             std::span<const int> train_y, const FeatureMatrix& dev_x,
                             std::span<const int> dev_y, const TrainConfig& cfg,
                             std::vector<int> class_map) {
  const std::size_t classes = class_map.size();
  std::vector<int> index_of(kNumClasses, -1);
  for (std::size_t k = 0; k < classes; ++k) index_of[class_map[k]] = static_cast<int>(k);
  std::vector<int> train_idx(train_y.size());
  for (std::size_t i = 0; i < train_y.size(); ++i) train_idx[i] = index_of[train_y[i]];
  const FeatureMatrix targets = one_hot(train_idx, classes);

  TrainResult result;
  MlpModel model = init_mlp(stage, shape_for(train_x, cfg, classes), std::move(class_map),
                            derive_seed(cfg.seed, 10));
  AdamState adam(model.params().size());
  Rng batch_rng(derive_seed(cfg.seed, 11));
  Rng mix_rng(derive_seed(cfg.seed, 12));
  double best = -std::numeric_limits<double>::infinity();

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = cfg.lr_at(epoch);
    double epoch_loss = 0.0;
    const auto batches = make_batches(train_x.rows(), cfg.batch_size, batch_rng);
    for (const auto& batch : batches) {
      const FeatureMatrix xb = train_x.select_rows(batch);
      const FeatureMatrix yb = targets.select_rows(batch);
      MlpModel grads = model.zeros_like();
      const auto fwd = forward(model, xb);
      double loss = 0.0;
      if (cfg.loss == ClassifierLoss::kRegMixup) {
        const auto mixed = mixup_batch(xb, yb, cfg.regmixup.beta_a, mix_rng());
        const auto fwd_mixed = forward(model, mixed.x);
        const auto rm = regmixup_loss(fwd.logits, yb, fwd_mixed.logits, mixed.y, cfg.regmixup);
        backward(model, xb, fwd, &rm.grad_clean, nullptr, grads);
        backward(model, mixed.x, fwd_mixed, &rm.grad_mixed, nullptr, grads);
        loss = rm.loss;
      } else {
        const auto ce = cross_entropy(fwd.logits, yb);
        backward(model, xb, fwd, &ce.grad, nullptr, grads);
        loss = ce.loss;
      }
      adam_step(model.params(), grads.params(), adam, cfg.adam, lr);
      result.step_losses.push_back(loss);
      epoch_loss += loss;
    }
    const double metric = classifier_macro_f1(model, dev_x, dev_y);
    result.epochs.push_back({epoch, lr, epoch_loss / static_cast<double>(batches.size()), metric});
    if (metric >= best) {
      best = metric;
      result.model = model;
      result.best_epoch = epoch;
      result.best_dev_metric = metric;
    }
  }
  return result;
}

}  // namespace

TrainResult train_real_emphasis(const FeatureMatrix& train_x, std::span<const int> train_y,
                                const FeatureMatrix& dev_x, std::span<const int> dev_y,
                                const TrainConfig& cfg) {
  cfg.validate();
  check_inputs(train_x, train_y, "train_real_emphasis(train)");
  check_inputs(dev_x, dev_y, "train_real_emphasis(dev)");
  for (auto labels : {train_y, dev_y}) {
    for (int y : labels) {
      if (y != 0 && y != 1) throw DataError("real emphasis labels must be collapsed to {0, 1}");
    }
  }
  if (std::find(train_y.begin(), train_y.end(), 0) == train_y.end()) {
    throw DataError("train_real_emphasis: no real samples in the training split");
  }
  if (dev_x.cols() != train_x.cols()) throw DataError("train and dev widths differ");

  TrainResult result;
  MlpModel model = init_mlp(Stage::kRealEmphasis, shape_for(train_x, cfg, 0), {},
                            derive_seed(cfg.seed, 10));
  AdamState adam(model.params().size());
  Rng batch_rng(derive_seed(cfg.seed, 11));
  double best = -std::numeric_limits<double>::infinity();

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = cfg.lr_at(epoch);
    double epoch_loss = 0.0;
    const auto batches = make_batches(train_x.rows(), cfg.batch_size, batch_rng);
    for (const auto& batch : batches) {
      const FeatureMatrix xb = train_x.select_rows(batch);
      std::vector<int> yb(batch.size());
      for (std::size_t i = 0; i < batch.size(); ++i) yb[i] = train_y[batch[i]];
      MlpModel grads = model.zeros_like();
      const auto fwd = forward(model, xb);
      const OcSoftmaxParams p{std::vector<double>(model.w0().begin(), model.w0().end()), cfg.oc};
      const auto oc = oc_softmax_loss(fwd.features, yb, p);
      backward(model, xb, fwd, nullptr, &oc.grad_features, grads);
      std::copy(oc.grad_w0.begin(), oc.grad_w0.end(), grads.w0().begin());
      adam_step(model.params(), grads.params(), adam, cfg.adam, lr);
      result.step_losses.push_back(oc.loss);
      epoch_loss += oc.loss;
    }
    const double metric = real_class_f1(model, dev_x, dev_y, cfg.dev_gate);
    result.epochs.push_back({epoch, lr, epoch_loss / static_cast<double>(batches.size()), metric});
    if (metric >= best) {
      best = metric;
      result.model = model;
      result.best_epoch = epoch;
      result.best_dev_metric = metric;
    }
  }
  return result;
}

TrainResult train_fake_dispersion(const FeatureMatrix& train_x, std::span<const int> train_y,
                                  const FeatureMatrix& dev_x, std::span<const int> dev_y,
                                  const TrainConfig& cfg) {
  cfg.validate();
  check_inputs(train_x, train_y, "train_fake_dispersion(train)");
  check_inputs(dev_x, dev_y, "train_fake_dispersion(dev)");
  for (auto labels : {train_y, dev_y}) {
    for (int y : labels) {
      if (y < kFirstFakeClass || y > kLastFakeClass) {
        throw DataError("fake dispersion labels must lie in 1..6, found " + std::to_string(y));
      }
    }
  }
  if (dev_x.cols() != train_x.cols()) throw DataError("train and dev widths differ");
  std::vector<int> class_map;
  for (int c = kFirstFakeClass; c <= kLastFakeClass; ++c) class_map.push_back(c);
  return train_classifier(Stage::kFakeDispersion, train_x, train_y, dev_x, dev_y, cfg,
                          std::move(class_map));
}

TrainResult train_one_stage(const FeatureMatrix& train_x, std::span<const int> train_y,
                            const FeatureMatrix& dev_x, std::span<const int> dev_y,
                            const TrainConfig& cfg) {
  cfg.validate();
  check_inputs(train_x, train_y, "train_one_stage(train)");
  check_inputs(dev_x, dev_y, "train_one_stage(dev)");
  for (auto labels : {train_y, dev_y}) {
    for (int y : labels) {
      if (y < kRealClass || y > kLastFakeClass) {
        throw DataError("one-stage labels must lie in 0..6, found " + std::to_string(y));
      }
    }
  }
  if (dev_x.cols() != train_x.cols()) throw DataError("train and dev widths differ");
  std::vector<int> class_map;
  for (int c = kRealClass; c <= kLastFakeClass; ++c) class_map.push_back(c);
  return train_classifier(Stage::kOneStage, train_x, train_y, dev_x, dev_y, cfg,
                          std::move(class_map));
}

}  // namespace refd
