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
#include <filesystem>
#include <functional>
#include <optional>
#include <stop_token>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "common/clock.hpp"

namespace labci::pipeline {

using LineSink = std::function<void(std::string_view line)>;

struct ProcessSpec {
  std::vector<std::string> argv;
  std::filesystem::path cwd;
  // Added to (and overriding) the inherited environment.
  std::vector<std::pair<std::string, std::string>> env;
};

struct ProcessOutcome {
  enum class End { kExited, kSignaled, kTimedOut, kCanceled };
  End end = End::kExited;
  // Exit status for kExited, signal number for kSignaled.
  int code = 0;
  long peak_rss_kb = 0;
};

// Runs argv in its own process group with stdout and stderr merged into one
// pipe; each output line (without its newline) is passed to on_line in
// order. On deadline or cancellation the group gets SIGTERM, then SIGKILL
// after `grace`, and is reaped before returning.
ProcessOutcome run_process(const ProcessSpec& spec, const LineSink& on_line, Timestamp deadline,
                           std::stop_token cancel,
                           std::chrono::milliseconds grace = std::chrono::seconds(5));

}  // namespace labci::pipeline
