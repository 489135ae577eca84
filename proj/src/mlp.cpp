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

#include "refd/mlp.hpp"

#include <cmath>
#include <cstring>

#include <boost/random/normal_distribution.hpp>

#include "refd/errors.hpp"
#include "refd/fileio.hpp"
#include "refd/losses.hpp"
#include "refd/rng.hpp"

namespace refd {

std::string_view stage_name(Stage s) {
  switch (s) {
    case Stage::kRealEmphasis:
      return "real-emphasis";
    case Stage::kFakeDispersion:
      return "fake-dispersion";
    case Stage::kOneStage:
      return "one-stage";
  }
  return "unknown";
}

MlpModel::MlpModel(Stage stage, MlpShape shape, std::vector<int> class_map)
    : stage_(stage), shape_(shape), class_map_(std::move(class_map)) {
  if (shape_.input == 0 || shape_.hidden == 0 || shape_.feature == 0) {
    throw ConfigError("MLP layer widths must be positive");
  }
  if (stage_ == Stage::kRealEmphasis) {
    if (shape_.classes != 0 || !class_map_.empty()) {
      throw ConfigError("real-emphasis model has a one-class head; classes must be 0");
    }
  } else {
    if (shape_.classes == 0 || class_map_.size() != shape_.classes) {
      throw ConfigError("classifier head width must equal the class map length");
    }
  }
  const std::size_t head = stage_ == Stage::kRealEmphasis
                               ? shape_.feature
                               : shape_.classes * shape_.feature + shape_.classes;
  params_.assign(off_head() + head, 0.0);
}

MlpModel MlpModel::zeros_like() const {
  MlpModel out = *this;
  std::fill(out.params_.begin(), out.params_.end(), 0.0);
  return out;
}

MlpModel init_mlp(Stage stage, MlpShape shape, std::vector<int> class_map, std::uint64_t seed) {
  MlpModel m(stage, shape, std::move(class_map));
  Rng rng(seed);
  boost::random::normal_distribution<double> normal;
  auto fill = [&](std::span<double> w, double stddev) {
    for (double& v : w) v = stddev * normal(rng);
  };
  fill(m.w1(), std::sqrt(2.0 / static_cast<double>(shape.input)));
  fill(m.w2(), std::sqrt(2.0 / static_cast<double>(shape.hidden + shape.feature)));
  if (stage == Stage::kRealEmphasis) {
    fill(m.w0(), 1.0);
  } else {
    fill(m.wh(), std::sqrt(2.0 / static_cast<double>(shape.feature + shape.classes)));
  }
  return m;
}

ForwardResult forward(const MlpModel& model, const FeatureMatrix& x) {
  const MlpShape& s = model.shape();
  if (x.cols() != s.input) {
    throw ArgumentError("forward: input has " + std::to_string(x.cols()) +
                        " columns, model expects " + std::to_string(s.input));
  }
  const auto n = static_cast<std::int64_t>(x.rows());
  const bool one_class = model.stage() == Stage::kRealEmphasis;
  ForwardResult out;
  out.hidden = FeatureMatrix(x.rows(), s.hidden, MatrixRole::kFeature);
  out.features = FeatureMatrix(x.rows(), s.feature, MatrixRole::kFeature);
  if (one_class) {
    out.oc_scores.assign(x.rows(), 0.0);
  } else {
    out.logits = FeatureMatrix(x.rows(), s.classes, MatrixRole::kLogits);
  }
  const auto w1 = model.w1();
  const auto b1 = model.b1();
  const auto w2 = model.w2();
  const auto b2 = model.b2();

  bool degenerate = false;
#pragma omp parallel for schedule(static) reduction(|| : degenerate)
  for (std::int64_t r = 0; r < n; ++r) {
    const auto i = static_cast<std::size_t>(r);
    auto xi = x.row(i);
    auto h = out.hidden.row(i);
    for (std::size_t j = 0; j < s.hidden; ++j) {
      double acc = b1[j];
      for (std::size_t k = 0; k < s.input; ++k) acc += w1[j * s.input + k] * xi[k];
      h[j] = acc > 0.0 ? acc : 0.0;
    }
    auto f = out.features.row(i);
    for (std::size_t j = 0; j < s.feature; ++j) {
      double acc = b2[j];
      for (std::size_t k = 0; k < s.hidden; ++k) acc += w2[j * s.hidden + k] * h[k];
      f[j] = acc;
    }
    if (one_class) {
      try {
        out.oc_scores[i] = oc_score(f, model.w0());
      } catch (const DegenerateError&) {
        degenerate = true;
      }
    } else {
      const auto wh = model.wh();
      const auto bh = model.bh();
      auto l = out.logits.row(i);
      for (std::size_t c = 0; c < s.classes; ++c) {
        double acc = bh[c];
        for (std::size_t k = 0; k < s.feature; ++k) acc += wh[c * s.feature + k] * f[k];
        l[c] = acc;
      }
    }
  }
  if (degenerate) throw DegenerateError("forward: zero feature vector under the one-class head");
  return out;
}

void backward(const MlpModel& model, const FeatureMatrix& x, const ForwardResult& fwd,
              const FeatureMatrix* grad_logits, const FeatureMatrix* grad_features,
              MlpModel& grads) {
  const MlpShape& s = model.shape();
  const std::size_t n = x.rows();
  if (!(grads.shape() == s)) throw ArgumentError("backward: gradient buffer shape mismatch");
  FeatureMatrix df(n, s.feature);
  if (grad_features != nullptr) {
    if (grad_features->rows() != n || grad_features->cols() != s.feature) {
      throw ArgumentError("backward: feature gradient shape mismatch");
    }
    df = *grad_features;
  }
  if (grad_logits != nullptr) {
    if (model.stage() == Stage::kRealEmphasis) {
      throw ArgumentError("backward: the one-class head has no logits");
    }
    if (grad_logits->rows() != n || grad_logits->cols() != s.classes) {
      throw ArgumentError("backward: logit gradient shape mismatch");
    }
    const auto wh = model.wh();
    auto gwh = grads.wh();
    auto gbh = grads.bh();
    for (std::size_t i = 0; i < n; ++i) {
      auto g = grad_logits->row(i);
      auto f = fwd.features.row(i);
      auto dfi = df.row(i);
      for (std::size_t c = 0; c < s.classes; ++c) {
        gbh[c] += g[c];
        for (std::size_t k = 0; k < s.feature; ++k) {
          gwh[c * s.feature + k] += g[c] * f[k];
          dfi[k] += g[c] * wh[c * s.feature + k];
        }
      }
    }
  }

  const auto w2 = model.w2();
  auto gw2 = grads.w2();
  auto gb2 = grads.b2();
  auto gw1 = grads.w1();
  auto gb1 = grads.b1();
  std::vector<double> dh(s.hidden);
  for (std::size_t i = 0; i < n; ++i) {
    auto dfi = df.row(i);
    auto h = fwd.hidden.row(i);
    std::fill(dh.begin(), dh.end(), 0.0);
    for (std::size_t j = 0; j < s.feature; ++j) {
      gb2[j] += dfi[j];
      for (std::size_t k = 0; k < s.hidden; ++k) {
        gw2[j * s.hidden + k] += dfi[j] * h[k];
        dh[k] += dfi[j] * w2[j * s.hidden + k];
      }
    }
    auto xi = x.row(i);
    for (std::size_t j = 0; j < s.hidden; ++j) {
      if (!(h[j] > 0.0)) continue;
      gb1[j] += dh[j];
      for (std::size_t k = 0; k < s.input; ++k) gw1[j * s.input + k] += dh[j] * xi[k];
    }
  }
}

namespace {
constexpr char kModelMagic[4] = {'M', 'L', 'P', '1'};
}

std::string encode_model(const MlpModel& m) {
  ByteWriter w;
  w.put_bytes(std::string_view(kModelMagic, 4));
  w.put(static_cast<std::uint8_t>(m.stage()));
  const MlpShape& s = m.shape();
  for (std::size_t v : {s.input, s.hidden, s.feature, s.classes}) {
    w.put(static_cast<std::uint32_t>(v));
  }
  w.put(static_cast<std::uint32_t>(m.class_map().size()));
  for (int c : m.class_map()) w.put(static_cast<std::int32_t>(c));
  w.put(static_cast<std::uint32_t>(m.params().size()));
  for (double p : m.params()) w.put(p);
  return w.take();
}

MlpModel decode_model(std::string_view bytes) {
  ByteReader r(bytes);
  std::string_view magic;
  if (!r.get_bytes(4, magic) || magic != std::string_view(kModelMagic, 4)) {
    throw FormatError("missing MLP1 magic");
  }
  std::uint8_t stage = 0;
  std::uint32_t dims[4] = {};
  std::uint32_t map_len = 0;
  if (!r.get(stage) || !r.get(dims[0]) || !r.get(dims[1]) || !r.get(dims[2]) || !r.get(dims[3]) ||
      !r.get(map_len)) {
    throw FormatError("truncated MLP1 header");
  }
  if (stage > static_cast<std::uint8_t>(Stage::kOneStage)) {
    throw FormatError("unknown stage tag " + std::to_string(stage));
  }
  if (map_len > 1024) throw FormatError("implausible class map length");
  std::vector<int> class_map(map_len);
  for (int& c : class_map) {
    std::int32_t v = 0;
    if (!r.get(v)) throw FormatError("truncated MLP1 class map");
    c = v;
  }
  std::uint32_t count = 0;
  if (!r.get(count)) throw FormatError("truncated MLP1 header");
  if (r.remaining() != std::size_t{count} * sizeof(double)) {
    throw CorruptionError("MLP1 payload length does not match the declared parameter count");
  }
  for (std::uint32_t d : dims) {
    if (d > (1u << 20)) throw FormatError("implausible MLP1 layer width");
  }
  const std::uint64_t in = dims[0], hid = dims[1], feat = dims[2], cls = dims[3];
  const std::uint64_t head = stage == static_cast<std::uint8_t>(Stage::kRealEmphasis)
                                 ? feat
                                 : cls * feat + cls;
  if (count != hid * in + hid + feat * hid + feat + head) {
    throw CorruptionError("MLP1 parameter count does not match the declared shape");
  }
  MlpModel m;
  try {
    m = MlpModel(static_cast<Stage>(stage), MlpShape{dims[0], dims[1], dims[2], dims[3]},
                 std::move(class_map));
  } catch (const ConfigError& e) {
    throw FormatError(std::string("inconsistent MLP1 header: ") + e.what());
  }
  if (count != m.params().size()) {
    throw CorruptionError("MLP1 parameter count does not match the declared shape");
  }
  for (double& p : m.params()) {
    r.get(p);
    if (!std::isfinite(p)) throw CorruptionError("non-finite parameter in MLP1 payload");
  }
  return m;
}

void save_model(const MlpModel& m, const std::filesystem::path& path) {
  write_file_atomic(path, encode_model(m));
}

MlpModel load_model(const std::filesystem::path& path) { return decode_model(read_file(path)); }

}  // namespace refd
