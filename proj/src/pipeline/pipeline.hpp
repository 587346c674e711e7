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

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <mutex>
#include <stop_token>
#include <string>
#include <string_view>
#include <vector>

#include "config/pipeline_config.hpp"
#include "pipeline/executor.hpp"
#include "pipeline/job_result.hpp"

namespace labci::pipeline {

// Accumulates `<timestamp> [<stage>] <line>\n` records and hands every
// formatted record to the sink. Offsets count bytes since the job started.
class JobLog {
 public:
  using Sink = std::function<void(std::string_view bytes)>;
  using TimeSource = std::function<Timestamp()>;

  explicit JobLog(Sink sink = {}, TimeSource now = {});

  void write(std::string_view stage, std::string_view line);
  std::uint64_t size() const;

 private:
  Sink sink_;
  TimeSource now_;
  mutable std::mutex mu_;
  std::uint64_t size_ = 0;
};

std::string format_log_line(Timestamp t, std::string_view stage, std::string_view line);

// `*` and `?` stay within one path segment, `**` spans any number of segments.
bool glob_match(std::string_view pattern, std::string_view path);

// Regular files under root matching any pattern, as sorted relative paths.
// Symlinks are never followed or reported.
std::vector<std::string> match_artifacts(const fs::path& root, const std::vector<std::string>& patterns);

store::ArtifactManifest collect_artifacts(const fs::path& workspace, const std::vector<std::string>& patterns);

struct JobContext {
  std::int64_t job_id = 0;
  std::int64_t build_id = 0;
  std::string commit_id;
};

struct RunOptions {
  // Length of one unit of `timeout_minutes`; shortened in tests.
  std::chrono::milliseconds timeout_unit = std::chrono::minutes(1);
};

// Fingerprints the executing machine and writes the info stage's log lines.
EnvironmentFingerprint collect_info(ExecutorBackend& backend, const config::JobSpec& spec,
                                    const fs::path& workspace, JobLog& log);

// Returns true when `detected` satisfies `requested` ("3.6" accepts "3.6.15").
bool toolchain_matches(std::string_view requested, std::string_view detected);

StageResult execute_stage(ExecutorBackend& backend, const fs::path& workspace, config::Stage stage,
                          const std::vector<std::string>& commands, const config::EnvVars& env,
                          Timestamp deadline, JobLog& log, std::stop_token cancel = {});

// Runs info followed by the job's planned stages. Executor errors never escape:
// they end the job as failed with an `internal` stage entry.
JobResult run_job(const config::JobSpec& spec, ExecutorBackend& backend, const fs::path& workspace,
                  const JobContext& ctx, JobLog& log, std::stop_token cancel = {}, const RunOptions& options = {});

// Variables injected into every stage.
config::EnvVars ci_variables(const config::JobSpec& spec, const JobContext& ctx, config::Stage stage);

}  // namespace labci::pipeline
