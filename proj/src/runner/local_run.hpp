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
#include <string>
#include <vector>

#include "config/pipeline_config.hpp"
#include "runner/agent.hpp"
#include "server/coordinator.hpp"

namespace labci::runner {

struct LocalRunOptions {
  fs::path source_dir;
  // Holds blobs, logs, ledger and workspaces, as the server would.
  fs::path data_dir;
  // Defaults to "local/<source dir name>".
  std::string repo_id;
  std::optional<std::vector<config::Stage>> only_stages;
  BackendKind backend = BackendKind::kLocal;
  pipeline::RunOptions run_options;
  SimulatedSchedulerConfig scheduler;
};

// Single-process build: snapshot the directory, create a build, run its
// jobs one after another with an in-process agent. Returns the finished
// build; logs and artifacts stay readable through a Coordinator on data_dir.
server::BuildView run_local(const LocalRunOptions& options);

}  // namespace labci::runner
