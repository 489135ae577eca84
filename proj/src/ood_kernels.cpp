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

#include "refd/ood_kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "refd/numeric.hpp"

namespace refd::kernels {

namespace {

double euclidean(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double diff = a[k] - b[k];
    acc += diff * diff;
  }
  return std::sqrt(acc);
}

double quadratic_form(std::span<const double> diff, std::span<const double> p) {
  const std::size_t d = diff.size();
  double acc = 0.0;
  for (std::size_t r = 0; r < d; ++r) {
    double row = 0.0;
    for (std::size_t c = 0; c < d; ++c) row += p[r * d + c] * diff[c];
    acc += diff[r] * row;
  }
  return acc;
}

}  // namespace

void nsd(const FeatureMatrix& t, std::span<const double> e_test, const FeatureMatrix& z,
         std::span<const double> e_bank, std::span<double> out, std::size_t block_rows) {
  const std::size_t n = t.rows();
  const std::size_t m = z.rows();
  block_rows = std::max<std::size_t>(block_rows, 1);
  const auto blocks = static_cast<std::int64_t>((n + block_rows - 1) / block_rows);
  const double inv_m = 1.0 / static_cast<double>(m);
#pragma omp parallel
  {
    std::vector<double> sim(block_rows * m);
#pragma omp for schedule(static)
    for (std::int64_t b = 0; b < blocks; ++b) {
      const std::size_t r0 = static_cast<std::size_t>(b) * block_rows;
      const std::size_t r1 = std::min(n, r0 + block_rows);
      for (std::size_t i = r0; i < r1; ++i) {
        auto ti = t.row(i);
        double* s = sim.data() + (i - r0) * m;
        for (std::size_t j = 0; j < m; ++j) s[j] = dot(ti, z.row(j));
      }
      for (std::size_t i = r0; i < r1; ++i) {
        const double* s = sim.data() + (i - r0) * m;
        double acc = 0.0;
        for (std::size_t j = 0; j < m; ++j) acc += e_bank[j] * s[j];
        out[i] = e_test[i] * (acc * inv_m);
      }
    }
  }
}

void nnguide(const FeatureMatrix& t, std::span<const double> e_test, const FeatureMatrix& z,
             std::span<const double> e_bank, std::size_t k, std::span<double> out) {
  const auto n = static_cast<std::int64_t>(t.rows());
  const std::size_t m = z.rows();
#pragma omp parallel
  {
    std::vector<double> sim(m);
    std::vector<std::size_t> idx(m);
#pragma omp for schedule(static)
    for (std::int64_t r = 0; r < n; ++r) {
      const auto i = static_cast<std::size_t>(r);
      auto ti = t.row(i);
      for (std::size_t j = 0; j < m; ++j) sim[j] = dot(ti, z.row(j));
      std::iota(idx.begin(), idx.end(), std::size_t{0});
      auto more_similar = [&](std::size_t a, std::size_t b) {
        return sim[a] > sim[b] || (sim[a] == sim[b] && a < b);
      };
      if (k < m) std::nth_element(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(), more_similar);
      std::sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k));
      double acc = 0.0;
      for (std::size_t q = 0; q < k; ++q) acc += e_bank[idx[q]] * sim[idx[q]];
      out[i] = e_test[i] * (acc * (1.0 / static_cast<double>(k)));
    }
  }
}

void knn(const FeatureMatrix& t, const FeatureMatrix& z, std::size_t k, std::span<double> out) {
  const auto n = static_cast<std::int64_t>(t.rows());
  const std::size_t m = z.rows();
#pragma omp parallel
  {
    std::vector<double> dist(m);
#pragma omp for schedule(static)
    for (std::int64_t r = 0; r < n; ++r) {
      const auto i = static_cast<std::size_t>(r);
      for (std::size_t j = 0; j < m; ++j) dist[j] = euclidean(t.row(i), z.row(j));
      auto kth = dist.begin() + static_cast<std::ptrdiff_t>(k - 1);
      std::nth_element(dist.begin(), kth, dist.end());
      out[i] = -*kth;
    }
  }
}

void mahalanobis(const FeatureMatrix& t, const FeatureMatrix& means, std::span<const double> precision,
                 std::span<double> out) {
  const auto n = static_cast<std::int64_t>(t.rows());
  const std::size_t d = t.cols();
#pragma omp parallel
  {
    std::vector<double> diff(d);
#pragma omp for schedule(static)
    for (std::int64_t r = 0; r < n; ++r) {
      const auto i = static_cast<std::size_t>(r);
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < means.rows(); ++c) {
        for (std::size_t q = 0; q < d; ++q) diff[q] = t(i, q) - means(c, q);
        best = std::min(best, quadratic_form(diff, precision));
      }
      out[i] = -best;
    }
  }
}

namespace serial {

void nsd(const FeatureMatrix& t, std::span<const double> e_test, const FeatureMatrix& z,
         std::span<const double> e_bank, std::span<double> out) {
  const double inv_m = 1.0 / static_cast<double>(z.rows());
  for (std::size_t i = 0; i < t.rows(); ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < z.rows(); ++j) acc += e_bank[j] * dot(t.row(i), z.row(j));
    out[i] = e_test[i] * (acc * inv_m);
  }
}

void nnguide(const FeatureMatrix& t, std::span<const double> e_test, const FeatureMatrix& z,
             std::span<const double> e_bank, std::size_t k, std::span<double> out) {
  for (std::size_t i = 0; i < t.rows(); ++i) {
    std::vector<std::pair<double, std::size_t>> ranked;
    for (std::size_t j = 0; j < z.rows(); ++j) ranked.emplace_back(-dot(t.row(i), z.row(j)), j);
    std::sort(ranked.begin(), ranked.end());
    std::vector<std::size_t> chosen;
    for (std::size_t q = 0; q < k; ++q) chosen.push_back(ranked[q].second);
    std::sort(chosen.begin(), chosen.end());
    double acc = 0.0;
    for (std::size_t j : chosen) acc += e_bank[j] * dot(t.row(i), z.row(j));
    out[i] = e_test[i] * (acc * (1.0 / static_cast<double>(k)));
  }
}

void knn(const FeatureMatrix& t, const FeatureMatrix& z, std::size_t k, std::span<double> out) {
  for (std::size_t i = 0; i < t.rows(); ++i) {
    std::vector<double> dist;
    for (std::size_t j = 0; j < z.rows(); ++j) dist.push_back(euclidean(t.row(i), z.row(j)));
    std::sort(dist.begin(), dist.end());
    out[i] = -dist[k - 1];
  }
}

void mahalanobis(const FeatureMatrix& t, const FeatureMatrix& means, std::span<const double> precision,
                 std::span<double> out) {
  const std::size_t d = t.cols();
  for (std::size_t i = 0; i < t.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < means.rows(); ++c) {
      std::vector<double> diff(d);
      for (std::size_t q = 0; q < d; ++q) diff[q] = t(i, q) - means(c, q);
      best = std::min(best, quadratic_form(diff, precision));
    }
    out[i] = -best;
  }
}

}  // namespace serial

}  // namespace refd::kernels
