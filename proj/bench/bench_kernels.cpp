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

#include <cstdint>
#include <vector>

#include <benchmark/benchmark.h>
#include <boost/random/normal_distribution.hpp>

#include "refd/numeric.hpp"
#include "refd/ood_kernels.hpp"
#include "refd/rng.hpp"

namespace {

using refd::FeatureMatrix;

FeatureMatrix unit_rows(std::size_t n, std::size_t d, std::uint64_t seed) {
  refd::Rng rng(seed);
  boost::random::normal_distribution<double> normal;
  std::vector<double> v(n * d);
  for (double& x : v) x = normal(rng);
  return refd::l2_normalize_rows(FeatureMatrix(n, d, std::move(v)));
}

struct Inputs {
  FeatureMatrix t, z;
  std::vector<double> et, ez, out;

  explicit Inputs(const benchmark::State& state)
      : t(unit_rows(static_cast<std::size_t>(state.range(0)), 16, 1)),
        z(unit_rows(static_cast<std::size_t>(state.range(1)), 16, 2)),
        et(t.rows(), 1.5),
        ez(z.rows(), 2.0),
        out(t.rows()) {}
};

void set_items(benchmark::State& state) {
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(1));
}

void BM_NsdParallel(benchmark::State& state) {
  Inputs in(state);
  for (auto _ : state) {
    refd::kernels::nsd(in.t, in.et, in.z, in.ez, in.out);
    benchmark::DoNotOptimize(in.out.data());
  }
  set_items(state);
}

void BM_NsdSerial(benchmark::State& state) {
  Inputs in(state);
  for (auto _ : state) {
    refd::kernels::serial::nsd(in.t, in.et, in.z, in.ez, in.out);
    benchmark::DoNotOptimize(in.out.data());
  }
  set_items(state);
}

void BM_NnGuideParallel(benchmark::State& state) {
  Inputs in(state);
  for (auto _ : state) {
    refd::kernels::nnguide(in.t, in.et, in.z, in.ez, 10, in.out);
    benchmark::DoNotOptimize(in.out.data());
  }
  set_items(state);
}

void BM_NnGuideSerial(benchmark::State& state) {
  Inputs in(state);
  for (auto _ : state) {
    refd::kernels::serial::nnguide(in.t, in.et, in.z, in.ez, 10, in.out);
    benchmark::DoNotOptimize(in.out.data());
  }
  set_items(state);
}

void BM_KnnParallel(benchmark::State& state) {
  Inputs in(state);
  for (auto _ : state) {
    refd::kernels::knn(in.t, in.z, 10, in.out);
    benchmark::DoNotOptimize(in.out.data());
  }
  set_items(state);
}

void BM_KnnSerial(benchmark::State& state) {
  Inputs in(state);
  for (auto _ : state) {
    refd::kernels::serial::knn(in.t, in.z, 10, in.out);
    benchmark::DoNotOptimize(in.out.data());
  }
  set_items(state);
}

std::vector<double> identity_precision(std::size_t d) {
  std::vector<double> p(d * d, 0.0);
  for (std::size_t i = 0; i < d; ++i) p[i * d + i] = 1.0;
  return p;
}

void BM_MahalanobisParallel(benchmark::State& state) {
  Inputs in(state);
  const FeatureMatrix means = unit_rows(6, 16, 3);
  const auto prec = identity_precision(16);
  for (auto _ : state) {
    refd::kernels::mahalanobis(in.t, means, prec, in.out);
    benchmark::DoNotOptimize(in.out.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_MahalanobisSerial(benchmark::State& state) {
  Inputs in(state);
  const FeatureMatrix means = unit_rows(6, 16, 3);
  const auto prec = identity_precision(16);
  for (auto _ : state) {
    refd::kernels::serial::mahalanobis(in.t, means, prec, in.out);
    benchmark::DoNotOptimize(in.out.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

// (test rows, bank rows)
void sizes(benchmark::internal::Benchmark* b) {
  b->Args({512, 2048})->Args({4000, 2400})->Unit(benchmark::kMillisecond)->UseRealTime();
}

BENCHMARK(BM_NsdParallel)->Apply(sizes);
BENCHMARK(BM_NsdSerial)->Apply(sizes);
BENCHMARK(BM_NnGuideParallel)->Apply(sizes);
BENCHMARK(BM_NnGuideSerial)->Apply(sizes);
BENCHMARK(BM_KnnParallel)->Apply(sizes);
BENCHMARK(BM_KnnSerial)->Apply(sizes);
BENCHMARK(BM_MahalanobisParallel)->Apply(sizes);
BENCHMARK(BM_MahalanobisSerial)->Apply(sizes);

}  // namespace

BENCHMARK_MAIN();
