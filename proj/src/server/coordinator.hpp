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
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "common/clock.hpp"
#include "config/pipeline_config.hpp"
#include "json.hpp"
#include "pipeline/job_result.hpp"
#include "pipeline/job_state.hpp"
#include "server/journal.hpp"
#include "store/artifacts.hpp"
#include "store/blob_store.hpp"
#include "store/ledger.hpp"
#include "store/snapshot.hpp"

namespace labci::server {

namespace fs = std::filesystem;
using pipeline::JobState;
using pipeline::RunnerKind;

enum class BuildStatus { kPending, kRunning, kSucceeded, kFailed, kTimedOut, kCanceled, kConfigError };
std::string_view build_status_name(BuildStatus s) noexcept;

// Pure function of the job states. All queued -> pending; any job not yet
// terminal -> running; otherwise failed > timed_out > canceled > succeeded.
BuildStatus derive_build_status(bool config_error, const std::vector<JobState>& jobs);

struct PushEvent {
  std::string repo_id;
  std::string commit_id;
  // An existing directory on the server host, the hex digest of an uploaded
  // tarball blob, or empty when the snapshot is already stored.
  std::string snapshot_ref;
  std::string event_id;
};

struct RunnerCapabilities {
  std::string os = "linux";
  std::vector<std::string> tags;
};

nlohmann::json to_json(const RunnerCapabilities& c);
RunnerCapabilities capabilities_from_json(const nlohmann::json& j);

struct Registration {
  std::int64_t runner_id = 0;
  std::string token;
};

struct JobView {
  std::int64_t job_id = 0;
  std::int64_t build_id = 0;
  std::string repo_id;
  std::string commit_id;
  int matrix_index = 0;
  JobState state = JobState::kQueued;
  std::optional<std::int64_t> assigned_runner;
  std::string reason;  // e.g. runner_lost
  bool cancel_requested = false;
  config::JobSpec spec;
  std::uint64_t log_size = 0;
  store::ArtifactManifest artifacts;
  std::optional<pipeline::JobResult> result;
  Timestamp created_at;
  std::optional<Timestamp> claimed_at;
  std::optional<Timestamp> finished_at;
};

nlohmann::json to_json(const JobView& j);
JobView job_view_from_json(const nlohmann::json& j);

struct BuildView {
  std::int64_t build_id = 0;
  // Position among this repo's builds, starting at 1.
  std::int64_t number = 0;
  std::string repo_id;
  std::string commit_id;
  Timestamp created_at;
  BuildStatus status = BuildStatus::kPending;
  std::string event_id;
  std::vector<std::string> only_stages;
  // Diagnostics for config_error builds.
  std::string config_log;
  std::vector<JobView> jobs;
};

nlohmann::json to_json(const BuildView& b);
BuildView build_view_from_json(const nlohmann::json& j);

struct SchedulerView {
  int parallel_cap = 0;
  std::vector<std::int64_t> active_jobs;
  std::size_t queued = 0;
  // Highest number of simultaneously active jobs since startup.
  int peak_active = 0;
};

nlohmann::json to_json(const SchedulerView& s);

struct CoordinatorOptions {
  fs::path data_dir;
  int parallel_cap = 4;
  std::chrono::milliseconds heartbeat_interval = std::chrono::seconds(10);
};

// All server-side state and its rules. Every method is thread safe; all
// mutations are journaled before they are acknowledged.
class Coordinator {
 public:
  explicit Coordinator(CoordinatorOptions options);
  ~Coordinator();

  BuildView ingest_push(const PushEvent& event);
  BuildView trigger_build(const std::string& repo_id, const std::string& commit_id,
                          const std::optional<std::vector<config::Stage>>& only_stages);

  Registration register_runner(RunnerKind kind, const RunnerCapabilities& caps);

  // Uses the registered capabilities when `caps` is empty.
  std::optional<JobView> claim_job(const std::string& token, const std::optional<RunnerCapabilities>& caps);
  void append_log(const std::string& token, std::int64_t job_id, std::int64_t seq, std::string_view bytes);
  Digest upload_artifact(const std::string& token, std::int64_t job_id, const std::string& path,
                         std::string_view bytes);
  void complete_job(const std::string& token, std::int64_t job_id, const pipeline::JobResult& result);
  // Returns whether the runner should cancel the job.
  bool heartbeat(const std::string& token, std::int64_t job_id);

  void cancel_build(std::int64_t build_id);
  // Fails claimed/running jobs whose runner has been silent for three
  // heartbeat intervals. Returns the number of jobs failed.
  int sweep_lost_runners(Timestamp now = Clock::now());

  std::vector<BuildView> list_builds(const std::string& repo_id) const;
  BuildView get_build(std::int64_t build_id) const;
  JobView get_job(std::int64_t job_id) const;
  // Committed log bytes starting at `offset`.
  std::string get_log(std::int64_t job_id, std::uint64_t offset = 0) const;
  std::string get_artifact(std::int64_t job_id, const std::string& path) const;
  pipeline::EnvironmentFingerprint get_fingerprint(std::int64_t job_id) const;
  std::vector<store::LedgerEntry> ledger(const std::string& repo_id, const std::string& commit_id) const;
  store::ReproReport compare(std::int64_t build_a, std::int64_t build_b, bool allow_cross_commit) const;
  SchedulerView scheduler() const;

  // Snapshot and blob transfer for runners and clients.
  std::string snapshot_tar(const std::string& commit_id) const;
  std::string put_snapshot_tar(std::string_view tar);
  std::string put_blob(std::string_view bytes);

  const CoordinatorOptions& options() const noexcept { return options_; }

 private:
  struct Runner {
    std::int64_t id = 0;
    std::string token_hash;
    RunnerKind kind = RunnerKind::kCloud;
    RunnerCapabilities caps;
    Timestamp last_seen;
  };
  struct Job {
    JobView view;
    std::int64_t next_seq = 0;
  };
  struct Build {
    BuildView view;  // jobs left empty; filled from jobs_ on read
    std::vector<std::int64_t> job_ids;
    bool config_error = false;
  };

  BuildView create_build(const std::string& repo_id, const Digest& commit, const std::string& event_id,
                         const std::optional<std::vector<config::Stage>>& only_stages);
  Runner& authenticate(const std::string& token);
  Job& owned_job(Runner& runner, std::int64_t job_id);
  void mark_running(Job& job);
  void finish(Job& job, JobState outcome, const std::string& reason, const Timestamp& when, bool journal);
  void append_ledger_for(const Job& job);
  BuildView view_of(const Build& b) const;
  int active_count() const;
  void replay(const nlohmann::json& record);
  fs::path log_path(std::int64_t job_id) const;

  CoordinatorOptions options_;
  store::BlobStore blobs_;
  store::SnapshotStore snapshots_;
  store::Ledger ledger_;
  Journal journal_;

  mutable std::shared_mutex mu_;
  std::map<std::int64_t, Runner> runners_;
  std::map<std::string, std::int64_t> runner_by_token_;
  std::map<std::int64_t, Build> builds_;
  std::map<std::int64_t, Job> jobs_;
  std::map<std::string, std::int64_t> build_by_event_;
  std::map<std::string, std::int64_t> builds_per_repo_;
  std::int64_t next_build_id_ = 1;
  std::int64_t next_job_id_ = 1;
  std::int64_t next_runner_id_ = 1;
  int peak_active_ = 0;
};

}  // namespace labci::server
