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
#include <deque>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <stop_token>
#include <string>

#include "pipeline/executor.hpp"
#include "pipeline/pipeline.hpp"
#include "runner/batch_bridge.hpp"
#include "runner/client.hpp"
#include "runner/log_forwarder.hpp"

namespace labci::runner {

namespace fs = std::filesystem;

enum class BackendKind { kLocal, kBatchBridge };
std::optional<BackendKind> parse_backend_kind(std::string_view text) noexcept;

struct RunnerConfig {
  std::string server_url;
  std::string token;
  pipeline::RunnerKind kind = pipeline::RunnerKind::kCloud;
  BackendKind backend = BackendKind::kLocal;
  std::chrono::milliseconds poll_interval = std::chrono::seconds(2);
  std::chrono::milliseconds heartbeat_interval = std::chrono::seconds(10);
  fs::path workspace_root;
  RunnerCapabilities capabilities;
  int retained_failed_cap = 5;
  std::chrono::milliseconds backoff_cap = std::chrono::seconds(60);
  std::chrono::milliseconds kill_grace = std::chrono::seconds(5);
  pipeline::RunOptions run_options;
  SimulatedSchedulerConfig scheduler;
  ForwarderOptions forwarder;
};

// Throws Error(kInvalidArgument) for inconsistent settings.
void validate(const RunnerConfig& config);

// Builds the backend named by config.backend.
std::unique_ptr<pipeline::ExecutorBackend> make_backend(const RunnerConfig& config);

// Unpacks a snapshot tarball into a fresh directory under `root` and checks
// the tree's recomputed digest against commit_id. Throws
// Error(kDigestMismatch) or Error(kFetchFailure).
fs::path prepare_workspace(ServerClient& client, const fs::path& root, std::int64_t job_id,
                           const std::string& commit_id);
void populate_workspace(std::string_view tar, const fs::path& dir, const std::string& commit_id);

struct JobOutcome {
  std::int64_t job_id = 0;
  pipeline::JobState overall = pipeline::JobState::kFailed;
  // Set when the workspace was kept for inspection.
  std::optional<fs::path> retained_workspace;
  std::string transcript;
  // False when the server no longer accepted the result (job already ended).
  bool reported = true;
};

// One agent: claims jobs and runs them one at a time.
class Agent {
 public:
  Agent(RunnerConfig config, ServerClient& client);
  Agent(RunnerConfig config, ServerClient& client, std::unique_ptr<pipeline::ExecutorBackend> backend);

  // Claims and runs at most one job. Transport and auth errors propagate.
  std::optional<JobOutcome> run_once();
  // Runs jobs until nothing is claimable; returns how many ran.
  int run_until_idle();
  // Service loop until `stop`. Retries network failures with exponential
  // backoff; an auth failure ends the loop by throwing.
  void attach(std::stop_token stop);

  const std::deque<fs::path>& retained() const noexcept { return retained_; }
  // Called after every finished job; for progress output.
  std::function<void(const JobView&, const JobOutcome&)> on_job_done;

 private:
  JobOutcome process(const JobView& job);
  void release_workspace(const fs::path& ws, bool success, JobOutcome& outcome);
  template <typename F>
  auto with_retry(F f) -> decltype(f());

  RunnerConfig config_;
  ServerClient& client_;
  std::unique_ptr<pipeline::ExecutorBackend> backend_;
  std::deque<fs::path> retained_;
};

}  // namespace labci::runner
