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

#include "refd/manifest.hpp"

#include <unordered_set>

#include <nlohmann/json.hpp>

#include "refd/errors.hpp"
#include "refd/fileio.hpp"

namespace refd {

std::string_view split_name(Split s) {
  switch (s) {
    case Split::kTrain:
      return "train";
    case Split::kDev:
      return "dev";
    case Split::kEval:
      return "eval";
  }
  return "unknown";
}

Split parse_split(std::string_view s) {
  if (s == "train") return Split::kTrain;
  if (s == "dev") return Split::kDev;
  if (s == "eval") return Split::kEval;
  throw FormatError("unknown split '" + std::string(s) + "'");
}

DatasetManifest::DatasetManifest(std::vector<ManifestRecord> records)
    : records_(std::move(records)) {
  std::unordered_set<std::string> seen;
  for (const auto& r : records_) {
    if (!seen.insert(r.utt_id).second) throw DataError("duplicate utt_id '" + r.utt_id + "'");
    if (r.label < kUnlabeled || r.label >= kNumClasses) {
      throw DataError("label " + std::to_string(r.label) + " out of range for " + r.utt_id);
    }
    if (r.label == kOodClass && r.split != Split::kEval) {
      throw DataError("novel class 7 found in " + std::string(split_name(r.split)) +
                      " split (" + r.utt_id + ")");
    }
  }
}

std::vector<ManifestRecord> DatasetManifest::split(Split s) const {
  std::vector<ManifestRecord> out;
  for (const auto& r : records_) {
    if (r.split == s) out.push_back(r);
  }
  return out;
}

std::vector<int> DatasetManifest::labels(Split s) const {
  std::vector<int> out;
  for (const auto& r : records_) {
    if (r.split == s) out.push_back(r.label);
  }
  return out;
}

std::vector<std::string> DatasetManifest::utt_ids(Split s) const {
  std::vector<std::string> out;
  for (const auto& r : records_) {
    if (r.split == s) out.push_back(r.utt_id);
  }
  return out;
}

std::string DatasetManifest::encode_jsonl() const {
  std::string out;
  for (const auto& r : records_) {
    nlohmann::ordered_json j;
    j["utt_id"] = r.utt_id;
    j["label"] = r.label;
    j["split"] = split_name(r.split);
    out += j.dump();
    out += '\n';
  }
  return out;
}

DatasetManifest DatasetManifest::decode_jsonl(std::string_view text) {
  std::vector<ManifestRecord> records;
  std::size_t start = 0;
  std::size_t line_no = 0;
  while (start < text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    const std::string_view line = text.substr(start, nl - start);
    start = nl + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      ManifestRecord r;
      r.utt_id = j.at("utt_id").get<std::string>();
      r.label = j.at("label").get<int>();
      r.split = parse_split(j.at("split").get<std::string>());
      records.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("manifest line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return DatasetManifest(std::move(records));
}

DatasetManifest DatasetManifest::load(const std::filesystem::path& path) {
  return decode_jsonl(read_file(path));
}

void DatasetManifest::save(const std::filesystem::path& path) const {
  write_file_atomic(path, encode_jsonl());
}

}  // namespace refd
