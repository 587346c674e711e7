// Copyright 2026 The labci Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

namespace labci::store {

namespace fs = std::filesystem;

// One provenance record binding a source snapshot to a finished job's log,
// fingerprint and artifacts. Digest fields are lowercase hex.
struct LedgerEntry {
  std::string repo_id;
  std::string commit_id;
  std::int64_t build_id = 0;
  std::int64_t job_id = 0;
  int matrix_index = 0;
  std::string overall;
  std::string fingerprint_digest;  // empty when the job never ran
  std::string log_digest;
  std::string artifact_manifest_digest;
  std::string completed_at;

  bool operator==(const LedgerEntry&) const = default;
};

nlohmann::json to_json(const LedgerEntry& e);
LedgerEntry ledger_entry_from_json(const nlohmann::json& j);

// Append-only JSONL file. Every append is fsynced before it returns. On open,
// a torn trailing record (crash mid-write) is cut off so the surviving
// entries are always a prefix of what was acknowledged.
class Ledger {
 public:
  explicit Ledger(fs::path file);

  // Throws Error(kDuplicateJob) if job_id is already recorded.
  void append(const LedgerEntry& entry);

  std::vector<LedgerEntry> query(const std::string& repo_id, const std::string& commit_id) const;
  std::vector<LedgerEntry> all() const;
  bool contains_job(std::int64_t job_id) const;
  const fs::path& path() const noexcept { return file_; }

 private:
  fs::path file_;
  mutable std::mutex mu_;
  std::vector<LedgerEntry> entries_;
  std::set<std::int64_t> jobs_;
};

}  // namespace labci::store
