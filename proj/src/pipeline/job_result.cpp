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

#include "pipeline/job_result.hpp"

#include "common/error.hpp"

namespace labci::pipeline {

using nlohmann::json;

std::string_view runner_kind_name(RunnerKind k) noexcept {
  return k == RunnerKind::kSelfHosted ? "selfhosted" : "cloud";
}

std::optional<RunnerKind> parse_runner_kind(std::string_view text) noexcept {
  if (text == "cloud") return RunnerKind::kCloud;
  if (text == "selfhosted") return RunnerKind::kSelfHosted;
  return std::nullopt;
}

std::vector<std::string> EnvironmentFingerprint::to_lines() const {
  std::vector<std::string> lines = {
      "os_name=" + os_name,
      "os_version=" + os_version,
      "cpu_count=" + std::to_string(cpu_count),
      "mem_total_mb=" + std::to_string(mem_total_mb),
      "hostname=" + hostname,
      "runner_kind=" + std::string(runner_kind_name(runner_kind)),
  };
  for (const auto& [lang, version] : toolchain_reports) lines.push_back("toolchain." + lang + "=" + version);
  lines.push_back("captured_at=" + format_rfc3339(captured_at));
  return lines;
}

json to_json(const EnvironmentFingerprint& fp) {
  return json{{"os_name", fp.os_name},
              {"os_version", fp.os_version},
              {"cpu_count", fp.cpu_count},
              {"mem_total_mb", fp.mem_total_mb},
              {"hostname", fp.hostname},
              {"runner_kind", runner_kind_name(fp.runner_kind)},
              {"toolchain_reports", fp.toolchain_reports},
              {"captured_at", format_rfc3339(fp.captured_at)}};
}

namespace {

Timestamp time_field(const json& j, const char* key) {
  auto t = parse_rfc3339(j.at(key).get<std::string>());
  if (!t) throw Error(Errc::kInvalidArgument, std::string("bad timestamp in field ") + key);
  return *t;
}

}  // namespace

EnvironmentFingerprint fingerprint_from_json(const json& j) {
  EnvironmentFingerprint fp;
  fp.os_name = j.at("os_name").get<std::string>();
  fp.os_version = j.at("os_version").get<std::string>();
  fp.cpu_count = j.at("cpu_count").get<int>();
  fp.mem_total_mb = j.at("mem_total_mb").get<std::int64_t>();
  fp.hostname = j.at("hostname").get<std::string>();
  auto kind = parse_runner_kind(j.at("runner_kind").get<std::string>());
  if (!kind) throw Error(Errc::kInvalidArgument, "bad runner_kind");
  fp.runner_kind = *kind;
  fp.toolchain_reports = j.value("toolchain_reports", std::map<std::string, std::string>{});
  fp.captured_at = time_field(j, "captured_at");
  if (fp.cpu_count < 1 || fp.mem_total_mb < 1) throw Error(Errc::kInvalidArgument, "fingerprint resources must be positive");
  return fp;
}

std::string_view stage_status_name(StageStatus s) noexcept {
  switch (s) {
    case StageStatus::kSucceeded: return "succeeded";
    case StageStatus::kFailed: return "failed";
    case StageStatus::kSkipped: return "skipped";
    case StageStatus::kTimedOut: return "timed_out";
  }
  return "skipped";
}

std::optional<StageStatus> parse_stage_status(std::string_view text) noexcept {
  for (auto s : {StageStatus::kSucceeded, StageStatus::kFailed, StageStatus::kSkipped, StageStatus::kTimedOut}) {
    if (stage_status_name(s) == text) return s;
  }
  return std::nullopt;
}

json to_json(const StageResult& r) {
  json j{{"stage", r.stage},
         {"status", stage_status_name(r.status)},
         {"exit_code", r.exit_code ? json(*r.exit_code) : json(nullptr)},
         {"started_at", format_rfc3339(r.started_at)},
         {"ended_at", format_rfc3339(r.ended_at)},
         {"log_offset", r.log_offset},
         {"log_length", r.log_length}};
  if (!r.note.empty()) j["note"] = r.note;
  return j;
}

StageResult stage_result_from_json(const json& j) {
  StageResult r;
  r.stage = j.at("stage").get<std::string>();
  auto status = parse_stage_status(j.at("status").get<std::string>());
  if (!status) throw Error(Errc::kInvalidArgument, "bad stage status");
  r.status = *status;
  if (j.contains("exit_code") && !j.at("exit_code").is_null()) r.exit_code = j.at("exit_code").get<int>();
  r.started_at = time_field(j, "started_at");
  r.ended_at = time_field(j, "ended_at");
  r.log_offset = j.at("log_offset").get<std::uint64_t>();
  r.log_length = j.at("log_length").get<std::uint64_t>();
  r.note = j.value("note", std::string());
  return r;
}

json to_json(const JobResult& r) {
  json stages = json::array();
  for (const auto& s : r.stage_results) stages.push_back(to_json(s));
  return json{{"stage_results", stages},
              {"overall", state_name(r.overall)},
              {"fingerprint", r.fingerprint ? to_json(*r.fingerprint) : json(nullptr)},
              {"artifacts", store::to_json(r.artifacts)},
              {"peak_note", r.peak_note ? json(*r.peak_note) : json(nullptr)}};
}

JobResult job_result_from_json(const json& j) {
  JobResult r;
  for (const auto& s : j.at("stage_results")) r.stage_results.push_back(stage_result_from_json(s));
  auto overall = parse_state(j.at("overall").get<std::string>());
  if (!overall || !is_terminal(*overall)) throw Error(Errc::kInvalidArgument, "overall must be a terminal state");
  r.overall = *overall;
  if (j.contains("fingerprint") && !j.at("fingerprint").is_null()) {
    r.fingerprint = fingerprint_from_json(j.at("fingerprint"));
  }
  if (j.contains("artifacts") && !j.at("artifacts").is_null()) {
    r.artifacts = store::artifact_manifest_from_json(j.at("artifacts"));
  }
  if (j.contains("peak_note") && !j.at("peak_note").is_null()) r.peak_note = j.at("peak_note").get<std::string>();
  return r;
}

}  // namespace labci::pipeline
