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

#include "pipeline/job_state.hpp"

#include <string>

#include "common/error.hpp"

namespace labci::pipeline {

bool is_terminal(JobState s) noexcept {
  return s == JobState::kSucceeded || s == JobState::kFailed || s == JobState::kTimedOut ||
         s == JobState::kCanceled;
}

std::string_view state_name(JobState s) noexcept {
  switch (s) {
    case JobState::kQueued: return "queued";
    case JobState::kClaimed: return "claimed";
    case JobState::kRunning: return "running";
    case JobState::kSucceeded: return "succeeded";
    case JobState::kFailed: return "failed";
    case JobState::kTimedOut: return "timed_out";
    case JobState::kCanceled: return "canceled";
  }
  return "queued";
}

std::optional<JobState> parse_state(std::string_view text) noexcept {
  for (auto s : {JobState::kQueued, JobState::kClaimed, JobState::kRunning, JobState::kSucceeded,
                 JobState::kFailed, JobState::kTimedOut, JobState::kCanceled}) {
    if (state_name(s) == text) return s;
  }
  return std::nullopt;
}

std::string_view event_name(JobEventKind e) noexcept {
  switch (e) {
    case JobEventKind::kClaimed: return "claimed";
    case JobEventKind::kStarted: return "started";
    case JobEventKind::kStageDone: return "stage_done";
    case JobEventKind::kCompleted: return "completed";
    case JobEventKind::kCancelRequested: return "cancel_requested";
    case JobEventKind::kDeadlineExceeded: return "deadline_exceeded";
  }
  return "claimed";
}

namespace {

[[noreturn]] void illegal(JobState s, const JobEvent& e) {
  throw Error(Errc::kIllegalTransition, "illegal transition: " + std::string(event_name(e.kind)) +
                                            " in state " + std::string(state_name(s)));
}

}  // namespace

JobState advance(JobState state, const JobEvent& event) {
  if (is_terminal(state)) illegal(state, event);
  switch (event.kind) {
    case JobEventKind::kClaimed:
      if (state == JobState::kQueued) return JobState::kClaimed;
      break;
    case JobEventKind::kStarted:
      if (state == JobState::kClaimed) return JobState::kRunning;
      break;
    case JobEventKind::kStageDone:
      if (state == JobState::kRunning) return JobState::kRunning;
      break;
    case JobEventKind::kCompleted:
      if ((state == JobState::kClaimed || state == JobState::kRunning) && event.outcome &&
          is_terminal(*event.outcome)) {
        return *event.outcome;
      }
      break;
    case JobEventKind::kCancelRequested:
      return JobState::kCanceled;
    case JobEventKind::kDeadlineExceeded:
      if (state == JobState::kClaimed || state == JobState::kRunning) return JobState::kTimedOut;
      break;
  }
  illegal(state, event);
}

}  // namespace labci::pipeline
