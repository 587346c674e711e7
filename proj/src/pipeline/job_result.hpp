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
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "common/clock.hpp"
#include "json.hpp"
#include "pipeline/job_state.hpp"
#include "store/artifacts.hpp"

namespace labci::pipeline {

enum class RunnerKind { kCloud, kSelfHosted };
std::string_view runner_kind_name(RunnerKind k) noexcept;
std::optional<RunnerKind> parse_runner_kind(std::string_view text) noexcept;

struct EnvironmentFingerprint {
  std::string os_name;
  std::string os_version;
  int cpu_count = 1;
  std::int64_t mem_total_mb = 1;
  std::string hostname;
  RunnerKind runner_kind = RunnerKind::kCloud;
  std::map<std::string, std::string> toolchain_reports;
  Timestamp captured_at;

  // `key=value` lines written at the top of the info stage.
  std::vector<std::string> to_lines() const;
};

nlohmann::json to_json(const EnvironmentFingerprint& fp);
EnvironmentFingerprint fingerprint_from_json(const nlohmann::json& j);

enum class StageStatus { kSucceeded, kFailed, kSkipped, kTimedOut };
std::string_view stage_status_name(StageStatus s) noexcept;
std::optional<StageStatus> parse_stage_status(std::string_view text) noexcept;

struct StageResult {
  std::string stage;  // a pipeline stage name, or "internal" for executor errors
  StageStatus status = StageStatus::kSkipped;
  std::optional<int> exit_code;
  Timestamp started_at;
  Timestamp ended_at;
  std::uint64_t log_offset = 0;
  std::uint64_t log_length = 0;
  std::string note;  // e.g. "canceled", "batch_lost"
  long peak_rss_kb = 0;  // not serialized
};

struct JobResult {
  std::vector<StageResult> stage_results;
  // One of succeeded, failed, timed_out, canceled.
  JobState overall = JobState::kFailed;
  std::optional<EnvironmentFingerprint> fingerprint;
  store::ArtifactManifest artifacts;
  std::optional<std::string> peak_note;
};

nlohmann::json to_json(const StageResult& r);
StageResult stage_result_from_json(const nlohmann::json& j);
nlohmann::json to_json(const JobResult& r);
JobResult job_result_from_json(const nlohmann::json& j);

}  // namespace labci::pipeline
