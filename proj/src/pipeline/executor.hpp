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

#include <filesystem>
#include <optional>
#include <stop_token>
#include <string>
#include <vector>

#include "common/clock.hpp"
#include "config/pipeline_config.hpp"
#include "pipeline/job_result.hpp"
#include "pipeline/process.hpp"

namespace labci::pipeline {

namespace fs = std::filesystem;

struct BackendIdentity {
  RunnerKind kind = RunnerKind::kCloud;
  std::string name;  // "local" or "batch_bridge"
  std::string os;
  std::vector<std::string> tags;
};

// Facts about the machine that actually executes commands.
struct HostFacts {
  std::string os_name;
  std::string os_version;
  int cpu_count = 1;
  std::int64_t mem_total_mb = 1;
  std::string hostname;
};

HostFacts local_host_facts();

struct StageRequest {
  fs::path workspace;
  std::string stage;
  std::vector<std::string> commands;
  config::EnvVars env;
  Timestamp deadline;
};

struct StageOutcome {
  StageStatus status = StageStatus::kSucceeded;
  std::optional<int> exit_code;
  bool canceled = false;
  std::string note;
  long peak_rss_kb = 0;
};

// Something that can run a stage's commands somewhere: directly on this host
// or through a batch scheduler. Implementations must emit output lines in
// the order the commands produced them.
class ExecutorBackend {
 public:
  virtual ~ExecutorBackend() = default;

  virtual BackendIdentity identity() const = 0;
  // Throws Error(kBackendUnavailable) when the executing machine is unreachable.
  virtual HostFacts host_facts() = 0;
  // Detected version string for a toolchain, or nullopt when no probe exists
  // or it fails.
  virtual std::optional<std::string> probe_toolchain(const std::string& language, const fs::path& workspace) = 0;
  virtual StageOutcome run_stage(const StageRequest& request, const LineSink& on_line, std::stop_token cancel) = 0;
};

// Runs each command through `/bin/sh -c` on this host, stopping at the first
// nonzero exit.
class LocalBackend : public ExecutorBackend {
 public:
  explicit LocalBackend(RunnerKind kind = RunnerKind::kCloud,
                        std::chrono::milliseconds kill_grace = std::chrono::seconds(5));

  BackendIdentity identity() const override;
  HostFacts host_facts() override;
  std::optional<std::string> probe_toolchain(const std::string& language, const fs::path& workspace) override;
  StageOutcome run_stage(const StageRequest& request, const LineSink& on_line, std::stop_token cancel) override;

 protected:
  RunnerKind kind_;
  std::chrono::milliseconds kill_grace_;
};

// Shell probe used to detect a toolchain's version, e.g. `python3 --version`.
std::string toolchain_probe_command(const std::string& language);
// First dotted number in probe output ("Python 3.8.10" -> "3.8.10").
std::optional<std::string> extract_version(std::string_view text);

}  // namespace labci::pipeline
