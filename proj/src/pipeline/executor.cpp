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

#include "pipeline/executor.hpp"

#include <sys/utsname.h>
#include <unistd.h>

#include <cctype>
#include <fstream>
#include <map>

#include "common/error.hpp"

namespace labci::pipeline {

namespace {

std::string os_release_version() {
  std::ifstream in("/etc/os-release");
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("VERSION_ID=", 0) != 0) continue;
    std::string v = line.substr(11);
    if (v.size() >= 2 && v.front() == '"' && v.back() == '"') v = v.substr(1, v.size() - 2);
    return v;
  }
  return {};
}

}  // namespace

HostFacts local_host_facts() {
  HostFacts facts;
  utsname un{};
  if (::uname(&un) == 0) {
    facts.os_name = un.sysname;
    for (auto& c : facts.os_name) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    facts.os_version = un.release;
  }
  if (auto distro = os_release_version(); !distro.empty()) facts.os_version = distro + " (kernel " + facts.os_version + ")";
  long cpus = ::sysconf(_SC_NPROCESSORS_ONLN);
  facts.cpu_count = cpus > 0 ? static_cast<int>(cpus) : 1;
  long pages = ::sysconf(_SC_PHYS_PAGES);
  long page_size = ::sysconf(_SC_PAGESIZE);
  if (pages > 0 && page_size > 0) {
    facts.mem_total_mb = std::max<std::int64_t>(1, static_cast<std::int64_t>(pages) * page_size / (1024 * 1024));
  }
  char host[256] = {};
  if (::gethostname(host, sizeof host - 1) == 0) facts.hostname = host;
  return facts;
}

std::string toolchain_probe_command(const std::string& language) {
  static const std::map<std::string, std::string> probes = {
      {"python", "python3 --version 2>&1 || python --version 2>&1"},
      {"ruby", "ruby --version"},
      {"node_js", "node --version"},
      {"go", "go version"},
      {"rust", "rustc --version"},
      {"java", "java -version 2>&1"},
      {"jdk", "java -version 2>&1"},
      {"r", "R --version"},
      {"julia", "julia --version"},
      {"perl", "perl -e 'print $^V'"},
      {"php", "php --version"},
      {"c", "cc --version"},
      {"cpp", "c++ --version"},
      {"dart", "dart --version 2>&1"},
      {"elixir", "elixir --version"},
      {"haskell", "ghc --numeric-version"},
      {"scala", "scala -version 2>&1"},
      {"crystal", "crystal --version"},
      {"swift", "swift --version 2>&1"},
  };
  auto it = probes.find(language);
  return it == probes.end() ? std::string() : it->second;
}

std::optional<std::string> extract_version(std::string_view text) {
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (!std::isdigit(static_cast<unsigned char>(text[i]))) continue;
    if (i > 0 && (std::isalnum(static_cast<unsigned char>(text[i - 1])) || text[i - 1] == '.')) continue;
    std::size_t j = i;
    bool dotted = false;
    while (j < text.size()) {
      if (std::isdigit(static_cast<unsigned char>(text[j]))) {
        ++j;
      } else if (text[j] == '.' && j + 1 < text.size() && std::isdigit(static_cast<unsigned char>(text[j + 1]))) {
        dotted = true;
        ++j;
      } else {
        break;
      }
    }
    if (dotted) return std::string(text.substr(i, j - i));
    i = j;
  }
  return std::nullopt;
}

LocalBackend::LocalBackend(RunnerKind kind, std::chrono::milliseconds kill_grace)
    : kind_(kind), kill_grace_(kill_grace) {}

BackendIdentity LocalBackend::identity() const {
  BackendIdentity id;
  id.kind = kind_;
  id.name = "local";
  id.os = "linux";
  id.tags = {"os:linux", "shell:sh"};
  return id;
}

HostFacts LocalBackend::host_facts() { return local_host_facts(); }

std::optional<std::string> LocalBackend::probe_toolchain(const std::string& language, const fs::path& workspace) {
  std::string probe = toolchain_probe_command(language);
  if (probe.empty()) return std::nullopt;
  std::string output;
  ProcessSpec spec{{"/bin/sh", "-c", probe}, workspace, {}};
  auto outcome = run_process(
      spec, [&](std::string_view line) { output.append(line).push_back('\n'); },
      Clock::now() + std::chrono::seconds(20), std::stop_token{}, std::chrono::milliseconds(200));
  if (outcome.end != ProcessOutcome::End::kExited || outcome.code != 0) return std::nullopt;
  return extract_version(output);
}

StageOutcome LocalBackend::run_stage(const StageRequest& request, const LineSink& on_line, std::stop_token cancel) {
  std::error_code ec;
  if (!fs::is_directory(request.workspace, ec)) {
    throw Error(Errc::kWorkspaceMissing, "workspace missing: " + request.workspace.string());
  }
  StageOutcome result;
  for (const auto& command : request.commands) {
    ProcessSpec spec{{"/bin/sh", "-c", command}, request.workspace, request.env};
    auto outcome = run_process(spec, on_line, request.deadline, cancel, kill_grace_);
    result.peak_rss_kb = std::max(result.peak_rss_kb, outcome.peak_rss_kb);
    switch (outcome.end) {
      case ProcessOutcome::End::kExited:
        result.exit_code = outcome.code;
        if (outcome.code != 0) {
          result.status = StageStatus::kFailed;
          return result;
        }
        break;
      case ProcessOutcome::End::kSignaled:
        result.status = StageStatus::kFailed;
        result.exit_code = 128 + outcome.code;
        result.note = "killed by signal " + std::to_string(outcome.code);
        return result;
      case ProcessOutcome::End::kTimedOut:
        result.status = StageStatus::kTimedOut;
        result.exit_code.reset();
        return result;
      case ProcessOutcome::End::kCanceled:
        result.status = StageStatus::kFailed;
        result.exit_code.reset();
        result.canceled = true;
        result.note = "canceled";
        return result;
    }
  }
  result.status = StageStatus::kSucceeded;
  if (!result.exit_code) result.exit_code = 0;
  return result;
}

}  // namespace labci::pipeline
