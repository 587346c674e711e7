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

#include <optional>
#include <string_view>

namespace labci::pipeline {

enum class JobState { kQueued, kClaimed, kRunning, kSucceeded, kFailed, kTimedOut, kCanceled };

enum class JobEventKind { kClaimed, kStarted, kStageDone, kCompleted, kCancelRequested, kDeadlineExceeded };

struct JobEvent {
  JobEventKind kind;
  // Terminal state reported by a kCompleted event.
  std::optional<JobState> outcome;

  static JobEvent claimed() { return {JobEventKind::kClaimed, std::nullopt}; }
  static JobEvent started() { return {JobEventKind::kStarted, std::nullopt}; }
  static JobEvent stage_done() { return {JobEventKind::kStageDone, std::nullopt}; }
  static JobEvent completed(JobState outcome) { return {JobEventKind::kCompleted, outcome}; }
  static JobEvent cancel_requested() { return {JobEventKind::kCancelRequested, std::nullopt}; }
  static JobEvent deadline_exceeded() { return {JobEventKind::kDeadlineExceeded, std::nullopt}; }
};

bool is_terminal(JobState s) noexcept;
std::string_view state_name(JobState s) noexcept;
std::optional<JobState> parse_state(std::string_view text) noexcept;
std::string_view event_name(JobEventKind e) noexcept;

//   queued  --claimed-->  claimed  --started--> running --stage_done--> running
//   queued  --cancel_requested--> canceled
//   claimed --completed(x)--> x        running --completed(x)--> x
//   claimed|running --cancel_requested--> canceled
//   claimed|running --deadline_exceeded--> timed_out
// Terminal states admit no transitions. Anything else throws
// Error(kIllegalTransition).
JobState advance(JobState state, const JobEvent& event);

}  // namespace labci::pipeline
