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

#include <cmath>

#include <gtest/gtest.h>

#include "grad_fixtures.hpp"
#include "refd/errors.hpp"
#include "refd/losses.hpp"
#include "refd/numeric.hpp"

namespace refd {
namespace {

using testing::random_targets;
using testing::random_vector;
using testing::oc_batch;
using testing::random_binary_labels;

// Unit feature at angle acos(c) from w0 = e1.
FeatureMatrix feature_at_cos(double c) {
  return FeatureMatrix(1, 2, {c, std::sqrt(1.0 - c * c)}, MatrixRole::kFeature);
}

OcSoftmaxParams e1_params(double alpha) {
  return {{1.0, 0.0}, OcMargins{alpha, 0.9, 0.2}};
}

TEST(OcScore, SelfOrthogonalOpposite) {
  const std::vector<double> w{0.3, -1.2, 2.0};
  const std::vector<double> neg{-0.3, 1.2, -2.0};
  EXPECT_NEAR(oc_score(w, w), 1.0, 1e-15);
  EXPECT_NEAR(oc_score(neg, w), -1.0, 1e-15);
  EXPECT_NEAR(oc_score(std::vector<double>{2.0, 0.5, 0.0}, std::vector<double>{-0.5, 2.0, 7.0}), 0.0,
              1e-15);
  EXPECT_THROW(oc_score(std::vector<double>{0, 0, 0}, w), DegenerateError);
  EXPECT_THROW(oc_score(w, std::vector<double>{0, 0, 0}), DegenerateError);
}

TEST(OcSoftmax, BoundaryIsLn2ForAnyAlpha) {
  for (double alpha : {1.0, 20.0, 100.0}) {
    const std::vector<int> real{0}, fake{1};
    EXPECT_NEAR(oc_softmax_loss(feature_at_cos(0.9), real, e1_params(alpha)).loss, std::log(2.0), 1e-12);
    EXPECT_NEAR(oc_softmax_loss(feature_at_cos(0.2), fake, e1_params(alpha)).loss, std::log(2.0), 1e-12);
  }
}

TEST(OcSoftmax, PerfectRealSample) {
  const std::vector<int> real{0};
  EXPECT_NEAR(oc_softmax_loss(feature_at_cos(1.0), real, e1_params(20)).loss,
              std::log1p(std::exp(-2.0)), 1e-12);
  EXPECT_NEAR(std::log1p(std::exp(-2.0)), 0.126928, 1e-6);
}

TEST(OcSoftmax, MonotoneInCosine) {
  const std::vector<int> real{0}, fake{1};
  double prev_real = std::numeric_limits<double>::infinity();
  double prev_fake = -std::numeric_limits<double>::infinity();
  for (double c = -0.99; c <= 0.99; c += 0.01) {
    const double lr = oc_softmax_loss(feature_at_cos(c), real, e1_params(20)).loss;
    const double lf = oc_softmax_loss(feature_at_cos(c), fake, e1_params(20)).loss;
    EXPECT_LT(lr, prev_real);
    EXPECT_GT(lf, prev_fake);
    prev_real = lr;
    prev_fake = lf;
  }
}

TEST(OcSoftmax, MeanOverSamplesAndLabelChecks) {
  FeatureMatrix two(2, 2, {0.9, std::sqrt(1 - 0.81), 0.2, std::sqrt(1 - 0.04)}, MatrixRole::kFeature);
  const std::vector<int> labels{0, 1};
  EXPECT_NEAR(oc_softmax_loss(two, labels, e1_params(20)).loss, std::log(2.0), 1e-12);
  const std::vector<int> bad{0, 2};
  EXPECT_THROW(oc_softmax_loss(two, bad, e1_params(20)), ArgumentError);
}

TEST(OcMargins, Validation) {
  EXPECT_THROW((OcMargins{20, 0.2, 0.9}.validate()), ConfigError);
  EXPECT_THROW((OcMargins{0, 0.9, 0.2}.validate()), ConfigError);
  EXPECT_THROW((OcMargins{20, 1.5, 0.2}.validate()), ConfigError);
  EXPECT_NO_THROW((OcMargins{20, 1.0, -1.0}.validate()));
}

TEST(CrossEntropy, HandValues) {
  const std::vector<int> zero{0};
  EXPECT_NEAR(cross_entropy(FeatureMatrix(1, 2, {0, 0}), one_hot(zero, 2)).loss, std::log(2.0), 1e-15);
  EXPECT_NEAR(cross_entropy(FeatureMatrix(1, 2, {10, -10}), one_hot(zero, 2)).loss,
              std::log1p(std::exp(-20.0)), 1e-14);
  EXPECT_NEAR(std::log1p(std::exp(-20.0)), 2.06e-9, 1e-11);
}

TEST(CrossEntropy, UniformTargetIdentity) {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t c = 2 + trial % 6;
    const auto v = random_vector(c, rng, -5, 5);
    FeatureMatrix t(1, c, std::vector<double>(c, 1.0 / c));
    double mean = 0;
    for (double x : v) mean += x / c;
    EXPECT_NEAR(cross_entropy(FeatureMatrix(1, c, v), t).loss, logsumexp(v) - mean, 1e-12);
  }
}

TEST(CrossEntropy, LinearInTargets) {
  Rng rng(8);
  const FeatureMatrix l = testing::random_matrix(5, 4, rng, 2.0);
  const FeatureMatrix a = random_targets(5, 4, rng), b = random_targets(5, 4, rng);
  for (double lambda : {0.0, 0.3, 0.5, 1.0}) {
    FeatureMatrix mix(5, 4);
    for (std::size_t i = 0; i < 20; ++i) mix.data()[i] = lambda * a.data()[i] + (1 - lambda) * b.data()[i];
    EXPECT_NEAR(cross_entropy(l, mix).loss,
                lambda * cross_entropy(l, a).loss + (1 - lambda) * cross_entropy(l, b).loss, 1e-12);
  }
}

TEST(CrossEntropy, RejectsNonDistributionTargets) {
  EXPECT_THROW(cross_entropy(FeatureMatrix(1, 2, {0, 0}), FeatureMatrix(1, 2, {0.5, 0.6})), ArgumentError);
  EXPECT_THROW(cross_entropy(FeatureMatrix(1, 2, {0, 0}), FeatureMatrix(1, 2, {1.5, -0.5})), ArgumentError);
  EXPECT_THROW(cross_entropy(FeatureMatrix(1, 2, {0, 0}), FeatureMatrix(1, 3, {1, 0, 0})), ArgumentError);
}

TEST(Mixup, EndpointAndMidpoint) {
  const FeatureMatrix x(2, 2, {0, 2, 2, 0});
  const FeatureMatrix y(2, 2, {1, 0, 0, 1});
  const auto same = apply_mixup(x, y, {{1, 1.0}, {0, 1.0}});
  EXPECT_EQ(same.x, x);
  EXPECT_EQ(same.y, y);
  const auto mid = apply_mixup(x, y, {{1, 0.5}, {0, 0.5}});
  EXPECT_EQ(mid.x(0, 0), 1.0);
  EXPECT_EQ(mid.x(0, 1), 1.0);
  EXPECT_EQ(mid.y(0, 0), 0.5);
}

TEST(Mixup, DrawsAreDeterministicPermutations) {
  const auto a = draw_mixup(32, 10.0, 99), b = draw_mixup(32, 10.0, 99);
  std::vector<int> seen(32, 0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].partner, b[i].partner);
    EXPECT_EQ(a[i].lambda, b[i].lambda);
    EXPECT_GE(a[i].lambda, 0.0);
    EXPECT_LE(a[i].lambda, 1.0);
    ++seen[a[i].partner];
  }
  for (int s : seen) EXPECT_EQ(s, 1);
  EXPECT_THROW(draw_mixup(1, 10.0, 1), ArgumentError);
}

TEST(Mixup, BetaShapeConcentratesLambda) {
  double sum = 0, sq = 0;
  const auto d = draw_mixup(4000, 10.0, 5);
  for (const auto& m : d) {
    sum += m.lambda;
    sq += m.lambda * m.lambda;
  }
  const double mean = sum / d.size(), var = sq / d.size() - mean * mean;
  // Beta(a, a): mean 1/2, variance 1 / (4 (2a + 1)).
  EXPECT_NEAR(mean, 0.5, 0.01);
  EXPECT_NEAR(var, 1.0 / (4 * 21), 0.002);
}

TEST(Mixup, ConvexHullAndRowSums) {
  Rng rng(12);
  const FeatureMatrix x = testing::random_matrix(16, 3, rng);
  std::vector<int> labels(16);
  for (int i = 0; i < 16; ++i) labels[i] = i % 4;
  const auto mixed = mixup_batch(x, one_hot(labels, 4), 0.4, 77);
  for (std::size_t i = 0; i < 16; ++i) {
    const auto& d = mixed.draws[i];
    double ysum = 0;
    for (std::size_t k = 0; k < 4; ++k) ysum += mixed.y(i, k);
    EXPECT_NEAR(ysum, 1.0, 1e-12);
    for (std::size_t c = 0; c < 3; ++c) {
      const double lo = std::min(x(i, c), x(d.partner, c)), hi = std::max(x(i, c), x(d.partner, c));
      EXPECT_GE(mixed.x(i, c), lo - 1e-12);
      EXPECT_LE(mixed.x(i, c), hi + 1e-12);
      EXPECT_NEAR(mixed.x(i, c), d.lambda * x(i, c) + (1 - d.lambda) * x(d.partner, c), 1e-12);
    }
  }
  EXPECT_THROW(mixup_batch(FeatureMatrix(1, 3), one_hot(std::vector<int>{0}, 4), 1.0, 1), ArgumentError);
}

TEST(RegMixup, EtaZeroIsCleanCe) {
  Rng rng(21);
  const FeatureMatrix lc = testing::random_matrix(8, 6, rng), lm = testing::random_matrix(8, 6, rng);
  const FeatureMatrix tc = random_targets(8, 6, rng), tm = random_targets(8, 6, rng);
  const auto r = regmixup_loss(lc, tc, lm, tm, {0.0, 10.0});
  EXPECT_EQ(r.loss, cross_entropy(lc, tc).loss);
  for (double g : r.grad_mixed.data()) EXPECT_EQ(g, 0.0);
}

TEST(RegMixup, IdenticalMixedDoublesAndIsLinear) {
  Rng rng(22);
  const FeatureMatrix l = testing::random_matrix(8, 6, rng), lm = testing::random_matrix(8, 6, rng);
  const FeatureMatrix t = random_targets(8, 6, rng), tm = random_targets(8, 6, rng);
  EXPECT_NEAR(regmixup_loss(l, t, l, t, {1.0, 10.0}).loss, 2.0 * cross_entropy(l, t).loss, 1e-12);
  const auto r = regmixup_loss(l, t, lm, tm, {0.7, 10.0});
  EXPECT_NEAR(r.loss, r.clean_loss + 0.7 * r.mixed_loss, 1e-12);
  EXPECT_THROW(regmixup_loss(l, t, FeatureMatrix(8, 5), random_targets(8, 5, rng), {1.0, 10.0}),
               ArgumentError);
  EXPECT_THROW((RegMixupParams{-1.0, 10.0}.validate()), ConfigError);
  EXPECT_THROW((RegMixupParams{1.0, 0.0}.validate()), ConfigError);
}

TEST(GradCheck, QuadraticIsExact) {
  const DifferentiableFn quad = [](std::span<const double> p, std::span<double> g) {
    double s = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      s += 0.5 * p[i] * p[i];
      g[i] = p[i];
    }
    return s;
  };
  Rng rng(1);
  EXPECT_LT(grad_check(quad, random_vector(20, rng), 1e-4), 1e-8);
}

TEST(GradCheck, DetectsWrongGradient) {
  const DifferentiableFn wrong = [](std::span<const double> p, std::span<double> g) {
    g[0] = 2 * p[0];
    return 0.5 * p[0] * p[0];
  };
  EXPECT_GT(grad_check(wrong, std::vector<double>{1.3}, 1e-4), 0.1);
}

TEST(GradCheck, EpsilonRangeAndNonFinite) {
  const DifferentiableFn quad = [](std::span<const double> p, std::span<double> g) {
    g[0] = p[0];
    return 0.5 * p[0] * p[0];
  };
  EXPECT_THROW(grad_check(quad, std::vector<double>{1.0}, 1e-9), ArgumentError);
  EXPECT_THROW(grad_check(quad, std::vector<double>{1.0}, 1e-2), ArgumentError);
  const DifferentiableFn blowup = [](std::span<const double> p, std::span<double> g) {
    g[0] = 1.0;
    return p[0] > 1.0 ? std::numeric_limits<double>::infinity() : p[0];
  };
  EXPECT_THROW(grad_check(blowup, std::vector<double>{1.0}, 1e-4), NumericalError);
}

TEST(GradCheck, OcSoftmaxRandomBatch) {
  Rng rng(31);
  for (int trial = 0; trial < 5; ++trial) {
    const auto labels = random_binary_labels(8, rng);
    const auto params = oc_batch(8, 4, labels, rng);
    EXPECT_LT(grad_check(testing::oc_fn(8, 4, labels, OcMargins{}), params, 1e-3), 1e-4);
  }
}

TEST(GradCheck, OcSoftmaxSaturatedFakeRowAbsoluteAgreement) {
  // Fake row pointing away from w0: its gradient is ~1e-10 and the
  // relative metric only sees rounding, so compare absolutely.
  const std::vector<int> labels{0, 1};
  const std::vector<double> p{1, 0.2, -1, 0.05, 1, 0};
  const auto fn = testing::oc_fn(2, 2, labels, OcMargins{});
  std::vector<double> g(p.size());
  fn(p, g);
  for (std::size_t i = 0; i < p.size(); ++i) {
    auto up = p, down = p;
    up[i] += 1e-4;
    down[i] -= 1e-4;
    std::vector<double> scratch(p.size());
    const double num = (fn(up, scratch) - fn(down, scratch)) / 2e-4;
    EXPECT_NEAR(g[i], num, 1e-8 + 1e-6 * std::abs(g[i])) << i;
  }
  EXPECT_LT(std::abs(g[2]) + std::abs(g[3]), 1e-9);
}

TEST(GradCheck, CrossEntropyRandomBatch) {
  Rng rng(32);
  const auto t = random_targets(8, 6, rng);
  EXPECT_LT(grad_check(testing::ce_fn(t), random_vector(48, rng, -3, 3), 1e-5), 1e-4);
}

TEST(GradCheck, RegMixupRandomBatch) {
  Rng rng(33);
  const auto tc = random_targets(8, 6, rng), tm = random_targets(8, 6, rng);
  EXPECT_LT(grad_check(testing::regmixup_fn(tc, tm, {1.0, 10.0}), random_vector(96, rng, -3, 3), 1e-5),
            1e-4);
}

}  // namespace
}  // namespace refd
