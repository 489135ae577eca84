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

#include "refd/feature_io.hpp"

#include <charconv>
#include <cmath>
#include <cstring>
#include <sstream>

#include "refd/errors.hpp"
#include "refd/fileio.hpp"

namespace refd {

std::string encode_features(const FeatureMatrix& m) {
  if (m.empty()) throw ArgumentError("cannot encode an empty matrix");
  ByteWriter w;
  w.put_bytes(std::string_view(kFeatureMagic, 4));
  w.put(static_cast<std::uint8_t>(m.role()));
  w.put(static_cast<std::uint32_t>(m.rows()));
  w.put(static_cast<std::uint32_t>(m.cols()));
  for (double v : m.data()) {
    const auto f = static_cast<float>(v);
    if (!std::isfinite(f)) throw ArgumentError("value not representable as f32");
    w.put(f);
  }
  return w.take();
}

FeatureMatrix decode_features(std::string_view bytes) {
  ByteReader r(bytes);
  std::string_view magic;
  std::uint8_t role = 0;
  std::uint32_t n = 0;
  std::uint32_t d = 0;
  if (!r.get_bytes(4, magic) || magic != std::string_view(kFeatureMagic, 4)) {
    throw FormatError("missing EMB1 magic");
  }
  if (!r.get(role) || !r.get(n) || !r.get(d)) throw FormatError("truncated EMB1 header");
  if (role > static_cast<std::uint8_t>(MatrixRole::kLogits)) {
    throw FormatError("unknown matrix role " + std::to_string(role));
  }
  if (n == 0 || d == 0) throw FormatError("EMB1 header declares an empty matrix");
  const std::uint64_t expected = std::uint64_t{n} * d * sizeof(float);
  if (r.remaining() != expected) {
    throw CorruptionError("EMB1 payload is " + std::to_string(r.remaining()) +
                          " bytes, header declares " + std::to_string(expected));
  }
  std::vector<double> data(std::size_t{n} * d);
  for (double& v : data) {
    float f = 0;
    r.get(f);
    if (!std::isfinite(f)) throw CorruptionError("non-finite value in EMB1 payload");
    v = f;
  }
  return FeatureMatrix(n, d, std::move(data), static_cast<MatrixRole>(role));
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

double parse_double(std::string_view s) {
  double v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw FormatError("bad number '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace

std::string encode_features_csv(const LabeledFeatures& lf) {
  const FeatureMatrix& m = lf.matrix;
  if (lf.utt_ids.size() != m.rows()) throw ArgumentError("utt_id count differs from row count");
  std::ostringstream out;
  out << "utt_id";
  for (std::size_t c = 0; c < m.cols(); ++c) out << ",f" << c;
  out << '\n';
  out.precision(17);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    out << lf.utt_ids[r];
    for (double v : m.row(r)) out << ',' << v;
    out << '\n';
  }
  return std::move(out).str();
}

LabeledFeatures decode_features_csv(std::string_view text, MatrixRole role) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(start, nl - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty()) lines.push_back(line);
    start = nl + 1;
  }
  if (lines.empty()) throw FormatError("empty CSV");
  const auto header = split_fields(lines[0]);
  if (header.size() < 2 || header[0] != "utt_id") {
    throw FormatError("CSV header must be utt_id,f0,...");
  }
  for (std::size_t c = 1; c < header.size(); ++c) {
    if (header[c] != "f" + std::to_string(c - 1)) throw FormatError("unexpected CSV column name");
  }
  const std::size_t d = header.size() - 1;
  const std::size_t n = lines.size() - 1;
  if (n == 0) throw FormatError("CSV has no data rows");
  LabeledFeatures out;
  std::vector<double> data;
  data.reserve(n * d);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto fields = split_fields(lines[i]);
    if (fields.size() != d + 1) {
      throw CorruptionError("CSV row " + std::to_string(i) + " has " +
                            std::to_string(fields.size()) + " fields, expected " +
                            std::to_string(d + 1));
    }
    out.utt_ids.emplace_back(fields[0]);
    for (std::size_t c = 1; c <= d; ++c) data.push_back(parse_double(fields[c]));
  }
  out.matrix = FeatureMatrix(n, d, std::move(data), role);
  return out;
}

FeatureMatrix load_features(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  if (bytes.size() >= 4 && std::memcmp(bytes.data(), kFeatureMagic, 4) == 0) {
    return decode_features(bytes);
  }
  return decode_features_csv(bytes).matrix;
}

void save_features(const FeatureMatrix& m, const std::filesystem::path& path) {
  write_file_atomic(path, encode_features(m));
}

}  // namespace refd
