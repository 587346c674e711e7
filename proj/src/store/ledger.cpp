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

#include "store/ledger.hpp"

#include <unistd.h>

#include "common/error.hpp"
#include "common/fsutil.hpp"

namespace labci::store {

using nlohmann::json;

json to_json(const LedgerEntry& e) {
  return json{{"repo_id", e.repo_id},
              {"commit_id", e.commit_id},
              {"build_id", e.build_id},
              {"job_id", e.job_id},
              {"matrix_index", e.matrix_index},
              {"overall", e.overall},
              {"fingerprint_digest", e.fingerprint_digest},
              {"log_digest", e.log_digest},
              {"artifact_manifest_digest", e.artifact_manifest_digest},
              {"completed_at", e.completed_at}};
}

LedgerEntry ledger_entry_from_json(const json& j) {
  LedgerEntry e;
  e.repo_id = j.at("repo_id").get<std::string>();
  e.commit_id = j.at("commit_id").get<std::string>();
  e.build_id = j.at("build_id").get<std::int64_t>();
  e.job_id = j.at("job_id").get<std::int64_t>();
  e.matrix_index = j.at("matrix_index").get<int>();
  e.overall = j.at("overall").get<std::string>();
  e.fingerprint_digest = j.at("fingerprint_digest").get<std::string>();
  e.log_digest = j.at("log_digest").get<std::string>();
  e.artifact_manifest_digest = j.at("artifact_manifest_digest").get<std::string>();
  e.completed_at = j.at("completed_at").get<std::string>();
  return e;
}

Ledger::Ledger(fs::path file) : file_(std::move(file)) {
  fs::create_directories(file_.parent_path());
  std::error_code ec;
  if (!fs::exists(file_, ec)) return;
  std::string text = fsutil::read_file(file_);
  std::size_t pos = 0;
  std::size_t good = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string::npos) break;
    try {
      auto e = ledger_entry_from_json(json::parse(text.substr(pos, nl - pos)));
      if (!jobs_.insert(e.job_id).second) break;
      entries_.push_back(std::move(e));
    } catch (const json::exception&) {
      break;
    }
    pos = nl + 1;
    good = pos;
  }
  if (good != text.size()) {
    if (::truncate(file_.c_str(), static_cast<off_t>(good)) != 0) {
      throw Error(Errc::kStorage, "cannot truncate torn ledger tail: " + file_.string());
    }
  }
}

void Ledger::append(const LedgerEntry& entry) {
  std::lock_guard lock(mu_);
  if (jobs_.contains(entry.job_id)) {
    throw Error(Errc::kDuplicateJob, "ledger already has job " + std::to_string(entry.job_id));
  }
  fsutil::append_durable(file_, to_json(entry).dump() + "\n");
  jobs_.insert(entry.job_id);
  entries_.push_back(entry);
}

std::vector<LedgerEntry> Ledger::query(const std::string& repo_id, const std::string& commit_id) const {
  std::lock_guard lock(mu_);
  std::vector<LedgerEntry> out;
  for (const auto& e : entries_) {
    if (e.repo_id == repo_id && (commit_id.empty() || e.commit_id == commit_id)) out.push_back(e);
  }
  return out;
}

std::vector<LedgerEntry> Ledger::all() const {
  std::lock_guard lock(mu_);
  return entries_;
}

bool Ledger::contains_job(std::int64_t job_id) const {
  std::lock_guard lock(mu_);
  return jobs_.contains(job_id);
}

}  // namespace labci::store
