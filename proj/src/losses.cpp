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

#include "refd/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include <boost/random/beta_distribution.hpp>

#include "refd/errors.hpp"
#include "refd/numeric.hpp"
#include "refd/rng.hpp"

namespace refd {

namespace {

double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void require_same_shape(const FeatureMatrix& a, const FeatureMatrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ArgumentError(std::string(what) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                        std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                        std::to_string(b.cols()) + ")");
  }
}

}  // namespace

void OcMargins::validate() const {
  if (!(alpha > 0.0)) throw ConfigError("OC-Softmax alpha must be positive");
  if (!(m0 > -1.0 && m0 <= 1.0)) throw ConfigError("OC-Softmax m0 must lie in (-1, 1]");
  if (!(m1 >= -1.0 && m1 < 1.0)) throw ConfigError("OC-Softmax m1 must lie in [-1, 1)");
  if (!(m0 > m1)) throw ConfigError("OC-Softmax requires m0 > m1");
}

double oc_score(std::span<const double> feature, std::span<const double> w0) {
  if (feature.size() != w0.size()) throw ArgumentError("oc_score: dimension mismatch");
  const double nf = l2_norm(feature);
  const double nw = l2_norm(w0);
  if (!(nf >= kDegenerateNorm) || !(nw >= kDegenerateNorm)) {
    throw DegenerateError("oc_score: zero feature or direction vector");
  }
  return std::clamp(dot(feature, w0) / (nf * nw), -1.0, 1.0);
}

OcLossResult oc_softmax_loss(const FeatureMatrix& features, std::span<const int> labels,
                             const OcSoftmaxParams& p) {
  p.margins.validate();
  const std::size_t n = features.rows();
  const std::size_t d = features.cols();
  if (n == 0) throw ArgumentError("oc_softmax_loss: empty batch");
  if (labels.size() != n) throw ArgumentError("oc_softmax_loss: label count mismatch");
  if (p.w0.size() != d) throw ArgumentError("oc_softmax_loss: w0 dimension mismatch");
  const double nw = l2_norm(p.w0);
  if (!(nw >= kDegenerateNorm)) throw DegenerateError("oc_softmax_loss: zero w0");

  std::vector<double> w_hat(p.w0);
  for (double& v : w_hat) v /= nw;

  OcLossResult out;
  out.grad_features = FeatureMatrix(n, d, MatrixRole::kFeature);
  out.grad_w0.assign(d, 0.0);
  const auto& [alpha, m0, m1] = p.margins;
  std::vector<double> x_hat(d);
  long double total = 0.0L;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] != 0 && labels[i] != 1) {
      throw ArgumentError("oc_softmax_loss: label " + std::to_string(labels[i]) +
                          " not in {0, 1}");
    }
    auto x = features.row(i);
    const double nx = l2_norm(x);
    if (!(nx >= kDegenerateNorm)) {
      throw DegenerateError("oc_softmax_loss: zero feature row " + std::to_string(i));
    }
    for (std::size_t k = 0; k < d; ++k) x_hat[k] = x[k] / nx;
    const double cos = dot(w_hat, x_hat);
    const double sign = labels[i] == 0 ? 1.0 : -1.0;
    const double margin = labels[i] == 0 ? m0 : m1;
    const double z = alpha * (margin - cos) * sign;
    total += softplus(z);

    const double dcos = sigmoid(z) * (-alpha * sign) / static_cast<double>(n);
    auto gx = out.grad_features.row(i);
    for (std::size_t k = 0; k < d; ++k) {
      gx[k] = dcos * (w_hat[k] - cos * x_hat[k]) / nx;
      out.grad_w0[k] += dcos * (x_hat[k] - cos * w_hat[k]) / nw;
    }
  }
  out.loss = static_cast<double>(total / static_cast<long double>(n));
  return out;
}

LossAndGrad cross_entropy(const FeatureMatrix& logits, const FeatureMatrix& targets) {
  require_same_shape(logits, targets, "cross_entropy");
  const std::size_t n = logits.rows();
  if (n == 0) throw ArgumentError("cross_entropy: empty batch");
  LossAndGrad out;
  out.grad = FeatureMatrix(n, logits.cols(), MatrixRole::kLogits);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto t = targets.row(i);
    double total = 0.0;
    for (double v : t) {
      if (v < -1e-12) throw ArgumentError("cross_entropy: negative target probability");
      total += v;
    }
    if (std::abs(total - 1.0) > 1e-9) {
      throw ArgumentError("cross_entropy: target row " + std::to_string(i) +
                          " is not a distribution");
    }
    auto l = logits.row(i);
    const double lse = logsumexp(l);
    auto g = out.grad.row(i);
    for (std::size_t c = 0; c < l.size(); ++c) {
      out.loss -= t[c] * (l[c] - lse);
      g[c] = (std::exp(l[c] - lse) - t[c]) * inv_n;
    }
  }
  out.loss *= inv_n;
  return out;
}

FeatureMatrix one_hot(std::span<const int> labels, std::size_t num_classes) {
  FeatureMatrix out(labels.size(), num_classes, MatrixRole::kRaw);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes) {
      throw ArgumentError("one_hot: label " + std::to_string(labels[i]) + " out of range");
    }
    out(i, static_cast<std::size_t>(labels[i])) = 1.0;
  }
  return out;
}

std::vector<MixupDraw> draw_mixup(std::size_t batch_size, double beta_a, std::uint64_t seed) {
  if (batch_size < 2) throw ArgumentError("mixup needs a batch of at least 2 samples");
  if (!(beta_a > 0.0)) throw ConfigError("mixup Beta shape must be positive");
  Rng rng(seed);
  std::vector<std::size_t> perm(batch_size);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  shuffle_in_place(std::span<std::size_t>(perm), rng);
  boost::random::beta_distribution<double> beta(beta_a, beta_a);
  std::vector<MixupDraw> draws(batch_size);
  for (std::size_t i = 0; i < batch_size; ++i) {
    draws[i].partner = perm[i];
    draws[i].lambda = std::clamp(beta(rng), 0.0, 1.0);
  }
  return draws;
}

MixedBatch apply_mixup(const FeatureMatrix& x, const FeatureMatrix& y,
                       std::vector<MixupDraw> draws) {
  const std::size_t n = x.rows();
  if (y.rows() != n || draws.size() != n) throw ArgumentError("apply_mixup: batch size mismatch");
  if (n < 2) throw ArgumentError("mixup needs a batch of at least 2 samples");
  MixedBatch out{FeatureMatrix(n, x.cols(), x.role()), FeatureMatrix(n, y.cols(), y.role()),
                 std::move(draws)};
  for (std::size_t i = 0; i < n; ++i) {
    const auto [j, lambda] = out.draws[i];
    if (j >= n) throw ArgumentError("apply_mixup: partner index out of range");
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw ArgumentError("apply_mixup: lambda outside [0,1]");
    const double rest = 1.0 - lambda;
    for (std::size_t c = 0; c < x.cols(); ++c) out.x(i, c) = lambda * x(i, c) + rest * x(j, c);
    for (std::size_t c = 0; c < y.cols(); ++c) out.y(i, c) = lambda * y(i, c) + rest * y(j, c);
  }
  return out;
}

MixedBatch mixup_batch(const FeatureMatrix& x, const FeatureMatrix& y, double beta_a,
                       std::uint64_t seed) {
  return apply_mixup(x, y, draw_mixup(x.rows(), beta_a, seed));
}

void RegMixupParams::validate() const {
  if (!(eta >= 0.0)) throw ConfigError("RegMixup eta must be nonnegative");
  if (!(beta_a > 0.0)) throw ConfigError("RegMixup Beta shape must be positive");
}

RegMixupResult regmixup_loss(const FeatureMatrix& logits_clean, const FeatureMatrix& targets_clean,
                             const FeatureMatrix& logits_mixed, const FeatureMatrix& targets_mixed,
                             const RegMixupParams& p) {
  p.validate();
  require_same_shape(logits_clean, logits_mixed, "regmixup_loss");
  auto clean = cross_entropy(logits_clean, targets_clean);
  auto mixed = cross_entropy(logits_mixed, targets_mixed);
  for (double& g : mixed.grad.data()) g *= p.eta;
  RegMixupResult out;
  out.clean_loss = clean.loss;
  out.mixed_loss = mixed.loss;
  out.loss = clean.loss + p.eta * mixed.loss;
  out.grad_clean = std::move(clean.grad);
  out.grad_mixed = std::move(mixed.grad);
  return out;
}

double grad_check(const DifferentiableFn& fn, std::span<const double> params, double epsilon) {
  if (!(epsilon >= 1e-7 && epsilon <= 1e-3)) {
    throw ArgumentError("grad_check: epsilon must lie in [1e-7, 1e-3]");
  }
  std::vector<double> theta(params.begin(), params.end());
  std::vector<double> analytic(theta.size());
  std::vector<double> scratch(theta.size());
  const double base = fn(theta, analytic);
  if (!std::isfinite(base)) throw NumericalError("grad_check: non-finite loss at base point");

  auto eval_at = [&](std::size_t k, double offset) {
    const double saved = theta[k];
    theta[k] = saved + offset;
    const double v = fn(theta, scratch);
    theta[k] = saved;
    if (!std::isfinite(v)) {
      throw NumericalError("grad_check: non-finite loss when perturbing parameter " +
                           std::to_string(k));
    }
    return v;
  };

  double worst = 0.0;
  for (std::size_t k = 0; k < theta.size(); ++k) {
    const double numeric = (-eval_at(k, 2 * epsilon) + 8 * eval_at(k, epsilon) -
                            8 * eval_at(k, -epsilon) + eval_at(k, -2 * epsilon)) /
                           (12 * epsilon);
    const double denom = std::max(1e-8, std::abs(analytic[k]) + std::abs(numeric));
    worst = std::max(worst, std::abs(analytic[k] - numeric) / denom);
  }
  return worst;
}

}  // namespace refd
