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

// labci-runner: standalone runner agent.

#include "cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"labci-runner: claims and executes jobs from a labci server"};
  app.set_version_flag("--version", std::string(labci_version()));
  cli::RunnerFlags flags;
  cli::add_runner_flags(app, flags);
  return cli::guarded_main(app, argc, argv, [&] { return cli::run_runner(flags); });
}
