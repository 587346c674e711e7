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

#include "runner/local_run.hpp"

#include "common/error.hpp"
#include "store/snapshot.hpp"

namespace labci::runner {

server::BuildView run_local(const LocalRunOptions& o) {
  std::error_code ec;
  if (!fs::is_directory(o.source_dir, ec)) {
    throw Error(Errc::kInvalidArgument, "not a directory: " + o.source_dir.string());
  }
  std::string repo = o.repo_id;
  if (repo.empty()) {
    std::string name = fs::weakly_canonical(o.source_dir).filename().string();
    repo = "local/" + (name.empty() ? std::string("root") : name);
  }

  server::Coordinator coord({o.data_dir, 1, std::chrono::hours(1)});
  const std::string commit = coord.put_snapshot_tar(store::pack_directory(o.source_dir));
  server::BuildView build = coord.trigger_build(repo, commit, o.only_stages);

  RunnerConfig cfg;
  cfg.kind = pipeline::RunnerKind::kSelfHosted;
  cfg.backend = o.backend;
  cfg.workspace_root = o.data_dir / "workspaces";
  cfg.poll_interval = std::chrono::milliseconds(100);
  cfg.heartbeat_interval = std::chrono::seconds(1);
  cfg.run_options = o.run_options;
  cfg.scheduler = o.scheduler;
  cfg.forwarder.flush_interval = std::chrono::milliseconds(50);
  LocalClient client(coord, coord.register_runner(cfg.kind, cfg.capabilities).token);
  Agent agent(cfg, client);
  agent.run_until_idle();
  return coord.get_build(build.build_id);
}

}  // namespace labci::runner
