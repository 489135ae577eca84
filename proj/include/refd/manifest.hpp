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

#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace refd {

// Class 0 is genuine speech, 1..6 are the known generation algorithms and 7
// is the novel algorithm that only shows up at evaluation time.
inline constexpr int kRealClass = 0;
inline constexpr int kFirstFakeClass = 1;
inline constexpr int kLastFakeClass = 6;
inline constexpr int kOodClass = 7;
inline constexpr int kNumClasses = 8;
inline constexpr int kUnlabeled = -1;

enum class Split { kTrain, kDev, kEval };

std::string_view split_name(Split s);
Split parse_split(std::string_view s);

struct ManifestRecord {
  std::string utt_id;
  int label = kUnlabeled;
  Split split = Split::kTrain;

  friend bool operator==(const ManifestRecord&, const ManifestRecord&) = default;
};

class DatasetManifest {
 public:
  DatasetManifest() = default;
  // Validates: unique ids, labels in -1..7, no class 7 outside eval.
  explicit DatasetManifest(std::vector<ManifestRecord> records);

  const std::vector<ManifestRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }

  // Records of one split, in manifest order.
  std::vector<ManifestRecord> split(Split s) const;
  std::vector<int> labels(Split s) const;
  std::vector<std::string> utt_ids(Split s) const;

  // One JSON object per line: {"utt_id":..., "label":..., "split":...}.
  std::string encode_jsonl() const;
  static DatasetManifest decode_jsonl(std::string_view text);

  static DatasetManifest load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;

 private:
  std::vector<ManifestRecord> records_;
};

}  // namespace refd
