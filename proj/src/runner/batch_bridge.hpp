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

#include <atomic>
#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <stop_token>
#include <string>
#include <thread>
#include <vector>

#include "config/pipeline_config.hpp"
#include "pipeline/executor.hpp"

namespace labci::runner {

namespace fs = std::filesystem;

enum class BatchState { kPending, kRunning, kDone, kLost };
std::string_view batch_state_name(BatchState s) noexcept;

struct BatchPoll {
  BatchState state = BatchState::kPending;
  int exit_code = 0;  // meaningful once kDone
};

struct BatchSubmission {
  fs::path workspace;
  std::vector<std::string> commands;
  config::EnvVars env;
};

// Narrow adapter boundary to a batch system: submit a stage, poll it, pull
// its output. A real scheduler adapter would implement the same four calls.
class BatchScheduler {
 public:
  virtual ~BatchScheduler() = default;
  // Throws Error(kSubmissionRefused).
  virtual std::string submit(const BatchSubmission& submission) = 0;
  virtual BatchPoll poll(const std::string& batch_id) = 0;
  // Output lines from index `from` on, in the order they were produced.
  virtual std::vector<std::string> fetch_output(const std::string& batch_id, std::size_t from) = 0;
  virtual void cancel(const std::string& batch_id) = 0;
};

struct SimulatedSchedulerConfig {
  // Wall-clock pause between polls made by the bridge.
  int tick_ms = 20;
  // Batches allowed to run at once.
  int capacity = 1;
  // Submissions after the first `drop_after` are lost; negative disables.
  int drop_after = -1;
  // Polls a batch stays pending before it may start.
  int delay_ticks = 0;
  // Queued-but-not-started batches beyond this are refused.
  int max_queue = 64;
};

// Reads the optional JSON config file (`tick_ms`, `capacity`, `drop_after`,
// `delay_ticks`, `max_queue`). Throws Error(kInvalidArgument).
SimulatedSchedulerConfig load_scheduler_config(const fs::path& file);
SimulatedSchedulerConfig scheduler_config_from_json(const nlohmann::json& j);

// In-process scheduler whose clock advances once per poll, so state
// sequences are deterministic. Started batches run their commands through
// /bin/sh on this host.
class SimulatedScheduler : public BatchScheduler {
 public:
  explicit SimulatedScheduler(SimulatedSchedulerConfig config = {},
                              std::chrono::milliseconds kill_grace = std::chrono::seconds(5));
  ~SimulatedScheduler() override;

  std::string submit(const BatchSubmission& submission) override;
  BatchPoll poll(const std::string& batch_id) override;
  std::vector<std::string> fetch_output(const std::string& batch_id, std::size_t from) override;
  void cancel(const std::string& batch_id) override;

  const SimulatedSchedulerConfig& config() const noexcept { return config_; }

 private:
  struct Batch {
    BatchSubmission submission;
    int number = 0;
    BatchState state = BatchState::kPending;
    int ticks = 0;
    std::mutex out_mu;
    std::vector<std::string> lines;
    std::atomic<bool> finished{false};
    int exit_code = 0;
    std::stop_source stop;
    std::thread worker;
  };
  Batch& find(const std::string& batch_id);
  void start(Batch& b);

  SimulatedSchedulerConfig config_;
  std::chrono::milliseconds kill_grace_;
  std::mutex mu_;
  std::map<std::string, std::unique_ptr<Batch>> batches_;
  int submitted_ = 0;
};

// Executor backend that turns each stage into one batch submission and
// relays the batch's output and exit code back.
class BatchBridgeBackend : public pipeline::ExecutorBackend {
 public:
  BatchBridgeBackend(std::shared_ptr<BatchScheduler> scheduler, std::chrono::milliseconds tick,
                     pipeline::RunnerKind kind = pipeline::RunnerKind::kSelfHosted);

  pipeline::BackendIdentity identity() const override;
  pipeline::HostFacts host_facts() override;
  std::optional<std::string> probe_toolchain(const std::string& language, const fs::path& workspace) override;
  pipeline::StageOutcome run_stage(const pipeline::StageRequest& request, const pipeline::LineSink& on_line,
                                   std::stop_token cancel) override;

 private:
  std::shared_ptr<BatchScheduler> scheduler_;
  std::chrono::milliseconds tick_;
  pipeline::RunnerKind kind_;
};

}  // namespace labci::runner
