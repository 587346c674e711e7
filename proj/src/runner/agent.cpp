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

#include "runner/agent.hpp"

#include <sys/stat.h>

#include <condition_variable>
#include <fstream>
#include <mutex>
#include <thread>

#include "common/error.hpp"
#include "common/fsutil.hpp"
#include "store/snapshot.hpp"
#include "store/tar.hpp"

namespace labci::runner {

using pipeline::JobResult;
using pipeline::JobState;
using pipeline::StageResult;
using pipeline::StageStatus;

std::optional<BackendKind> parse_backend_kind(std::string_view text) noexcept {
  if (text == "local") return BackendKind::kLocal;
  if (text == "batch_bridge" || text == "batch-bridge" || text == "batch-sim") return BackendKind::kBatchBridge;
  return std::nullopt;
}

void validate(const RunnerConfig& c) {
  if (c.poll_interval.count() <= 0 || c.heartbeat_interval.count() <= 0) {
    throw Error(Errc::kInvalidArgument, "poll and heartbeat intervals must be positive");
  }
  if (c.poll_interval > c.heartbeat_interval) {
    throw Error(Errc::kInvalidArgument, "poll interval must not exceed the heartbeat interval");
  }
  if (c.retained_failed_cap < 0) throw Error(Errc::kInvalidArgument, "retained workspace cap must be >= 0");
  if (c.workspace_root.empty()) throw Error(Errc::kInvalidArgument, "workspace root is required");
}

std::unique_ptr<pipeline::ExecutorBackend> make_backend(const RunnerConfig& c) {
  if (c.backend == BackendKind::kBatchBridge) {
    auto sched = std::make_shared<SimulatedScheduler>(c.scheduler, c.kill_grace);
    return std::make_unique<BatchBridgeBackend>(sched, std::chrono::milliseconds(c.scheduler.tick_ms), c.kind);
  }
  return std::make_unique<pipeline::LocalBackend>(c.kind, c.kill_grace);
}

void populate_workspace(std::string_view tar, const fs::path& dir, const std::string& commit_id) {
  std::vector<store::TarEntry> entries;
  try {
    entries = store::read_tar(tar);
  } catch (const Error& e) {
    throw Error(Errc::kDigestMismatch, std::string("snapshot archive unreadable: ") + e.what());
  }
  for (const auto& e : entries) {
    fs::path target = dir / e.path;
    fs::create_directories(target.parent_path());
    {
      std::ofstream out(target, std::ios::binary | std::ios::trunc);
      out.write(e.contents.data(), static_cast<std::streamsize>(e.contents.size()));
      if (!out) throw Error(Errc::kStorage, "cannot write " + target.string());
    }
    ::chmod(target.c_str(), e.executable ? 0755 : 0644);
  }
  const std::string got = store::scan_directory(dir).digest().hex();
  if (got != commit_id) {
    throw Error(Errc::kDigestMismatch, "workspace digest " + got + " does not match commit " + commit_id);
  }
}

fs::path prepare_workspace(ServerClient& client, const fs::path& root, std::int64_t job_id,
                           const std::string& commit_id) {
  std::string tar;
  try {
    tar = client.fetch_snapshot(commit_id);
  } catch (const Error& e) {
    if (e.code() == Errc::kDigestMismatch) throw;
    throw Error(Errc::kFetchFailure, std::string("snapshot fetch failed: ") + e.what());
  }
  fs::create_directories(root);
  fs::path dir = fsutil::make_unique_dir(root, "job-" + std::to_string(job_id) + "-");
  populate_workspace(tar, dir, commit_id);
  return dir;
}

namespace {

// Result for a job that never reached its stages.
JobResult unprepared_result(const config::JobSpec& spec, const std::string& why) {
  JobResult r;
  const Timestamp now = Clock::now();
  StageResult info;
  info.stage = "info";
  info.started_at = info.ended_at = now;
  r.stage_results.push_back(info);
  for (auto s : config::effective_stages(spec)) {
    if (s == config::Stage::kInfo) continue;
    StageResult sr;
    sr.stage = std::string(config::stage_name(s));
    sr.started_at = sr.ended_at = now;
    r.stage_results.push_back(sr);
  }
  StageResult internal;
  internal.stage = "internal";
  internal.status = StageStatus::kFailed;
  internal.started_at = internal.ended_at = now;
  internal.note = why;
  r.stage_results.push_back(internal);
  r.overall = JobState::kFailed;
  return r;
}

bool ignorable_on_report(Errc c) {
  return c == Errc::kIllegalTransition || c == Errc::kJobNotRunning;
}

}  // namespace

Agent::Agent(RunnerConfig config, ServerClient& client)
    : Agent(config, client, make_backend(config)) {}

Agent::Agent(RunnerConfig config, ServerClient& client, std::unique_ptr<pipeline::ExecutorBackend> backend)
    : config_(std::move(config)), client_(client), backend_(std::move(backend)) {
  validate(config_);
}

template <typename F>
auto Agent::with_retry(F f) -> decltype(f()) {
  auto backoff = std::chrono::milliseconds(100);
  const auto give_up = Clock::now() + config_.forwarder.give_up_after;
  while (true) {
    try {
      return f();
    } catch (const Error& e) {
      if (e.code() != Errc::kNetwork || Clock::now() >= give_up) throw;
    }
    std::this_thread::sleep_for(backoff);
    backoff = std::min(backoff * 2, config_.backoff_cap);
  }
}

std::optional<JobOutcome> Agent::run_once() {
  auto job = client_.claim(config_.capabilities);
  if (!job) return std::nullopt;
  JobOutcome outcome = process(*job);
  if (on_job_done) on_job_done(*job, outcome);
  return outcome;
}

int Agent::run_until_idle() {
  int n = 0;
  while (run_once()) ++n;
  return n;
}

void Agent::attach(std::stop_token stop) {
  std::mutex mu;
  std::condition_variable_any cv;
  auto backoff = config_.poll_interval;
  while (!stop.stop_requested()) {
    auto wait = config_.poll_interval;
    try {
      if (run_once()) continue;
      backoff = config_.poll_interval;
    } catch (const Error& e) {
      if (e.code() != Errc::kNetwork) throw;
      backoff = std::min(backoff * 2, config_.backoff_cap);
      wait = backoff;
    }
    std::unique_lock lock(mu);
    cv.wait_for(lock, stop, wait, [] { return false; });
  }
}

JobOutcome Agent::process(const JobView& job) {
  JobOutcome outcome;
  outcome.job_id = job.job_id;

  // First contact moves the job to running before any stage starts.
  std::stop_source cancel;
  if (with_retry([&] { return client_.heartbeat(job.job_id); })) cancel.request_stop();

  std::mutex hb_mu;
  std::condition_variable hb_cv;
  bool hb_done = false;
  std::thread heartbeat([&] {
    std::unique_lock lock(hb_mu);
    while (!hb_cv.wait_for(lock, config_.heartbeat_interval, [&] { return hb_done; })) {
      lock.unlock();
      try {
        if (client_.heartbeat(job.job_id)) cancel.request_stop();
      } catch (const Error& e) {
        // Network blips are retried next interval; anything else means the
        // job is no longer ours.
        if (e.code() != Errc::kNetwork) cancel.request_stop();
      }
      lock.lock();
    }
  });

  LogForwarder forwarder(client_, job.job_id, config_.forwarder);
  pipeline::JobLog log([&](std::string_view bytes) { forwarder.push(bytes); });

  JobResult result;
  std::optional<fs::path> ws;
  try {
    ws = prepare_workspace(client_, config_.workspace_root, job.job_id, job.commit_id);
  } catch (const Error& e) {
    log.write("info", std::string("workspace preparation failed: ") + e.what());
    result = unprepared_result(job.spec, std::string(errc_name(e.code())) + ": " + e.what());
  }
  if (ws) {
    pipeline::JobContext ctx{job.job_id, job.build_id, job.commit_id};
    result = pipeline::run_job(job.spec, *backend_, *ws, ctx, log, cancel.get_token(), config_.run_options);
  }

  {
    std::lock_guard lock(hb_mu);
    hb_done = true;
  }
  hb_cv.notify_all();
  heartbeat.join();

  outcome.reported = forwarder.close();
  outcome.transcript = forwarder.transcript();
  outcome.overall = result.overall;

  try {
    if (outcome.reported) {
      for (const auto& a : result.artifacts.entries) {
        std::string bytes = fsutil::read_file(*ws / a.path);
        with_retry([&] { return client_.upload_artifact(job.job_id, a.path, bytes); });
      }
      with_retry([&] {
        client_.complete(job.job_id, result);
        return 0;
      });
    }
  } catch (const Error& e) {
    if (!ignorable_on_report(e.code()) && e.code() != Errc::kAuth) throw;
    outcome.reported = false;
  }

  if (ws) release_workspace(*ws, result.overall == JobState::kSucceeded, outcome);
  return outcome;
}

void Agent::release_workspace(const fs::path& ws, bool success, JobOutcome& outcome) {
  std::error_code ec;
  if (success || config_.retained_failed_cap == 0) {
    fs::remove_all(ws, ec);
    return;
  }
  retained_.push_back(ws);
  outcome.retained_workspace = ws;
  while (static_cast<int>(retained_.size()) > config_.retained_failed_cap) {
    fs::remove_all(retained_.front(), ec);
    retained_.pop_front();
  }
}

}  // namespace labci::runner
