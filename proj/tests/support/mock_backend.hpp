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
#include <string>

#include "common/error.hpp"
#include "pipeline/executor.hpp"

namespace testutil {

// Runs commands on this host like LocalBackend but reports canned machine
// facts and toolchain versions. Can be told to fail like an unreachable node.
class MockBackend : public labci::pipeline::LocalBackend {
 public:
  labci::pipeline::HostFacts facts{"linux", "mock-1.0", 56, 262144, "mock-node"};
  std::optional<std::string> toolchain_version;
  bool unreachable = false;
  labci::pipeline::RunnerKind kind = labci::pipeline::RunnerKind::kSelfHosted;

  labci::pipeline::BackendIdentity identity() const override {
    auto id = LocalBackend::identity();
    id.kind = kind;
    id.name = "mock";
    return id;
  }

  labci::pipeline::HostFacts host_facts() override {
    if (unreachable) throw labci::Error(labci::Errc::kBackendUnavailable, "mock node unreachable");
    return facts;
  }

  std::optional<std::string> probe_toolchain(const std::string&, const std::filesystem::path&) override {
    return toolchain_version;
  }

  labci::pipeline::StageOutcome run_stage(const labci::pipeline::StageRequest& request,
                                          const labci::pipeline::LineSink& on_line,
                                          std::stop_token cancel) override {
    if (unreachable) throw labci::Error(labci::Errc::kBackendUnavailable, "mock node unreachable");
    return LocalBackend::run_stage(request, on_line, cancel);
  }
};

}  // namespace testutil
