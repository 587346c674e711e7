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

#include "runner/batch_bridge.hpp"

#include "common/error.hpp"
#include "common/fsutil.hpp"
#include "pipeline/process.hpp"

namespace labci::runner {

using nlohmann::json;
using pipeline::StageStatus;

std::string_view batch_state_name(BatchState s) noexcept {
  switch (s) {
    case BatchState::kPending: return "pending";
    case BatchState::kRunning: return "running";
    case BatchState::kDone: return "done";
    case BatchState::kLost: return "lost";
  }
  return "lost";
}

SimulatedSchedulerConfig scheduler_config_from_json(const json& j) {
  if (!j.is_object()) throw Error(Errc::kInvalidArgument, "scheduler config must be a JSON object");
  SimulatedSchedulerConfig c;
  try {
    c.tick_ms = j.value("tick_ms", c.tick_ms);
    c.capacity = j.value("capacity", c.capacity);
    c.drop_after = j.value("drop_after", c.drop_after);
    c.delay_ticks = j.value("delay_ticks", c.delay_ticks);
    c.max_queue = j.value("max_queue", c.max_queue);
  } catch (const json::exception& e) {
    throw Error(Errc::kInvalidArgument, std::string("scheduler config: ") + e.what());
  }
  if (c.tick_ms < 0 || c.capacity < 1 || c.delay_ticks < 0 || c.max_queue < 1) {
    throw Error(Errc::kInvalidArgument, "scheduler config: tick_ms/delay_ticks must be >= 0, capacity/max_queue >= 1");
  }
  return c;
}

SimulatedSchedulerConfig load_scheduler_config(const fs::path& file) {
  std::string text = fsutil::read_file(file);
  try {
    return scheduler_config_from_json(json::parse(text));
  } catch (const json::parse_error& e) {
    throw Error(Errc::kInvalidArgument, file.string() + ": " + e.what());
  }
}

SimulatedScheduler::SimulatedScheduler(SimulatedSchedulerConfig config, std::chrono::milliseconds kill_grace)
    : config_(config), kill_grace_(kill_grace) {}

SimulatedScheduler::~SimulatedScheduler() {
  std::lock_guard lock(mu_);
  for (auto& [id, b] : batches_) {
    b->stop.request_stop();
    if (b->worker.joinable()) b->worker.join();
  }
}

std::string SimulatedScheduler::submit(const BatchSubmission& submission) {
  std::lock_guard lock(mu_);
  int queued = 0;
  for (const auto& [id, b] : batches_) queued += b->state == BatchState::kPending ? 1 : 0;
  if (queued >= config_.max_queue) throw Error(Errc::kSubmissionRefused, "batch queue full");
  if (submission.commands.empty()) throw Error(Errc::kSubmissionRefused, "empty batch script");
  auto b = std::make_unique<Batch>();
  b->submission = submission;
  b->number = ++submitted_;
  std::string id = "sim-" + std::to_string(b->number);
  batches_[id] = std::move(b);
  return id;
}

SimulatedScheduler::Batch& SimulatedScheduler::find(const std::string& batch_id) {
  auto it = batches_.find(batch_id);
  if (it == batches_.end()) throw Error(Errc::kNotFound, "unknown batch " + batch_id);
  return *it->second;
}

void SimulatedScheduler::start(Batch& b) {
  b.state = BatchState::kRunning;
  b.worker = std::thread([&b, grace = kill_grace_] {
    int code = 0;
    auto sink = [&b](std::string_view line) {
      std::lock_guard lock(b.out_mu);
      b.lines.emplace_back(line);
    };
    const auto far = Clock::now() + std::chrono::hours(24 * 365);
    for (const auto& command : b.submission.commands) {
      pipeline::ProcessSpec spec{{"/bin/sh", "-c", command}, b.submission.workspace, b.submission.env};
      try {
        auto outcome = pipeline::run_process(spec, sink, far, b.stop.get_token(), grace);
        code = outcome.end == pipeline::ProcessOutcome::End::kExited ? outcome.code : 128 + outcome.code;
        if (outcome.end == pipeline::ProcessOutcome::End::kCanceled) code = 137;
      } catch (const std::exception& e) {
        sink(std::string("batch error: ") + e.what());
        code = 127;
      }
      if (code != 0) break;
    }
    b.exit_code = code;
    b.finished.store(true);
  });
}

BatchPoll SimulatedScheduler::poll(const std::string& batch_id) {
  std::lock_guard lock(mu_);
  Batch& b = find(batch_id);
  switch (b.state) {
    case BatchState::kPending: {
      if (b.ticks < config_.delay_ticks) {
        ++b.ticks;
        return {BatchState::kPending, 0};
      }
      if (config_.drop_after >= 0 && b.number > config_.drop_after) {
        b.state = BatchState::kLost;
        return {BatchState::kLost, 0};
      }
      int running = 0;
      for (const auto& [id, other] : batches_) running += other->state == BatchState::kRunning ? 1 : 0;
      if (running >= config_.capacity) return {BatchState::kPending, 0};
      start(b);
      return {BatchState::kRunning, 0};
    }
    case BatchState::kRunning:
      if (!b.finished.load()) return {BatchState::kRunning, 0};
      if (b.worker.joinable()) b.worker.join();
      b.state = BatchState::kDone;
      return {BatchState::kDone, b.exit_code};
    case BatchState::kDone: return {BatchState::kDone, b.exit_code};
    case BatchState::kLost: return {BatchState::kLost, 0};
  }
  return {BatchState::kLost, 0};
}

std::vector<std::string> SimulatedScheduler::fetch_output(const std::string& batch_id, std::size_t from) {
  Batch* b = nullptr;
  {
    std::lock_guard lock(mu_);
    b = &find(batch_id);
  }
  std::lock_guard lock(b->out_mu);
  if (from >= b->lines.size()) return {};
  return {b->lines.begin() + static_cast<long>(from), b->lines.end()};
}

void SimulatedScheduler::cancel(const std::string& batch_id) {
  std::lock_guard lock(mu_);
  Batch& b = find(batch_id);
  if (b.state == BatchState::kPending) {
    b.state = BatchState::kDone;
    b.exit_code = 137;
    return;
  }
  b.stop.request_stop();
}

// ---- bridge backend ----

BatchBridgeBackend::BatchBridgeBackend(std::shared_ptr<BatchScheduler> scheduler, std::chrono::milliseconds tick,
                                       pipeline::RunnerKind kind)
    : scheduler_(std::move(scheduler)), tick_(tick), kind_(kind) {}

pipeline::BackendIdentity BatchBridgeBackend::identity() const {
  return {kind_, "batch_bridge", "linux", {"os:linux", "batch_bridge"}};
}

pipeline::HostFacts BatchBridgeBackend::host_facts() { return pipeline::local_host_facts(); }

std::optional<std::string> BatchBridgeBackend::probe_toolchain(const std::string& language, const fs::path& workspace) {
  return pipeline::LocalBackend().probe_toolchain(language, workspace);
}

pipeline::StageOutcome BatchBridgeBackend::run_stage(const pipeline::StageRequest& request,
                                                     const pipeline::LineSink& on_line, std::stop_token cancel) {
  std::error_code ec;
  if (!fs::is_directory(request.workspace, ec)) {
    throw Error(Errc::kWorkspaceMissing, "workspace missing: " + request.workspace.string());
  }
  const std::string id = scheduler_->submit({request.workspace, request.commands, request.env});
  std::size_t relayed = 0;
  auto relay = [&] {
    for (const auto& line : scheduler_->fetch_output(id, relayed)) {
      on_line(line);
      ++relayed;
    }
  };

  pipeline::StageOutcome out;
  bool stopping = false;
  while (true) {
    BatchPoll p = scheduler_->poll(id);
    relay();
    if (p.state == BatchState::kDone) {
      if (stopping) return out;
      out.exit_code = p.exit_code;
      out.status = p.exit_code == 0 ? StageStatus::kSucceeded : StageStatus::kFailed;
      return out;
    }
    if (p.state == BatchState::kLost) {
      out.status = StageStatus::kFailed;
      out.note = "batch_lost";
      return out;
    }
    if (!stopping) {
      if (cancel.stop_requested()) {
        out.status = StageStatus::kFailed;
        out.canceled = true;
        out.note = "canceled";
        stopping = true;
      } else if (Clock::now() >= request.deadline) {
        out.status = StageStatus::kTimedOut;
        stopping = true;
      }
      if (stopping) scheduler_->cancel(id);
    }
    std::this_thread::sleep_for(tick_);
  }
}

}  // namespace labci::runner
