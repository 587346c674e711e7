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

#include <map>
#include <string>

#include "server/coordinator.hpp"
#include "../unit/test_util.hpp"

namespace testutil {

// A source tree on disk: file path -> contents. Paths ending in ".sh" are
// written executable.
inline fs::path make_tree(const fs::path& dir, const std::map<std::string, std::string>& files) {
  fs::create_directories(dir);
  for (const auto& [path, body] : files) {
    bool exec = path.size() > 3 && path.compare(path.size() - 3, 3, ".sh") == 0;
    write_file(dir / path, body, exec);
  }
  return dir;
}

struct ServerFixture {
  TempDir tmp;
  labci::server::Coordinator coord;
  int trees = 0;

  explicit ServerFixture(int cap = 4, std::chrono::milliseconds heartbeat = std::chrono::seconds(10))
      : coord(labci::server::CoordinatorOptions{tmp.path() / "data", cap, heartbeat}) {}

  labci::server::BuildView push(const std::map<std::string, std::string>& files, const std::string& repo = "lab/exp",
                                std::string event = {}) {
    fs::path dir = make_tree(tmp.path() / ("src" + std::to_string(++trees)), files);
    if (event.empty()) event = "evt-" + std::to_string(trees);
    return coord.ingest_push({repo, "", dir.string(), event});
  }

  std::string runner(labci::pipeline::RunnerKind kind = labci::pipeline::RunnerKind::kSelfHosted) {
    return coord.register_runner(kind, {}).token;
  }
};

}  // namespace testutil
