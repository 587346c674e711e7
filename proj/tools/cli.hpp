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

// Shared pieces of the labci and labci-runner front ends. Everything here
// goes through the C API in labci/labci.h.

#include <pthread.h>
#include <signal.h>

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <sstream>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "labci/labci.h"

namespace cli {

using nlohmann::json;

enum Exit : int { kSuccess = 0, kFailure = 1, kUsage = 2, kServer = 3 };

// Maps a failed call to the documented exit codes.
inline int exit_for(labci_status s) {
  switch (s) {
    case LABCI_OK: return kSuccess;
    case LABCI_INVALID_ARGUMENT:
    case LABCI_SYNTAX:
    case LABCI_VALIDATION:
    case LABCI_EMPTY_STAGE_PLAN:
    case LABCI_PATH_REJECTED:
      return kUsage;
    case LABCI_CROSS_COMMIT:
    case LABCI_MATRIX_SHAPE_MISMATCH:
    case LABCI_NOT_TERMINAL:
      return kFailure;
    default: return kServer;
  }
}

// Thrown out of command bodies; main() turns it into a message and a code.
struct Failure {
  int code;
  std::string message;
};

inline void check(labci_status s) {
  if (s == LABCI_OK) return;
  std::string msg = std::string(labci_status_name(s)) + ": " + labci_last_error();
  throw Failure{exit_for(s), msg};
}

// Owns a buffer handed out by the C API.
class Buf {
 public:
  Buf() = default;
  ~Buf() { labci_free(p_); }
  Buf(const Buf&) = delete;
  Buf& operator=(const Buf&) = delete;
  char** out() { return &p_; }
  size_t* len() { return &n_; }
  std::string str() const { return p_ == nullptr ? std::string() : std::string(p_, n_ ? n_ : std::strlen(p_)); }
  json parse() const { return json::parse(str()); }

 private:
  char* p_ = nullptr;
  size_t n_ = 0;
};

inline std::string env_or(const char* name, std::string fallback) {
  const char* v = std::getenv(name);
  return v != nullptr && *v != '\0' ? std::string(v) : fallback;
}

inline std::string default_addr() { return env_or("LABCI_ADDR", "127.0.0.1:8975"); }
inline std::string default_data_dir() {
  return env_or("LABCI_DATA_DIR", env_or("HOME", ".") + "/.labci");
}

inline std::string short_hex(const std::string& hex) { return hex.substr(0, 12); }

inline void print_job(const json& job, std::ostream& out) {
  out << "  job " << job.at("job_id").get<long long>() << " matrix " << job.at("matrix_index").get<int>() << " "
      << job.at("state").get<std::string>();
  const std::string reason = job.value("reason", std::string());
  if (!reason.empty()) out << " (" << reason << ")";
  out << "\n";
  if (!job.at("result").is_object()) return;
  for (const auto& s : job["result"]["stage_results"]) {
    std::string name = s.at("stage").get<std::string>();
    out << "    " << name << std::string(name.size() < 9 ? 9 - name.size() : 1, ' ') << s.at("status").get<std::string>();
    if (!s.at("exit_code").is_null()) out << " exit " << s["exit_code"].get<int>();
    if (s.contains("note")) out << " [" << s["note"].get<std::string>() << "]";
    out << "\n";
  }
}

inline void print_build(const json& b, std::ostream& out) {
  out << "build " << b.at("build_id").get<long long>() << " (#" << b.value("number", 0LL) << ") "
      << b.at("repo_id").get<std::string>() << " commit " << short_hex(b.at("commit_id").get<std::string>()) << " "
      << b.at("status").get<std::string>() << "\n";
  const std::string config_log = b.value("config_log", std::string());
  if (!config_log.empty()) {
    out << config_log;
    if (config_log.back() != '\n') out << "\n";
  }
  for (const auto& j : b.at("jobs")) print_job(j, out);
}

inline int exit_for_build(const json& b) {
  const std::string status = b.at("status").get<std::string>();
  if (status == "succeeded") return kSuccess;
  if (status == "config_error") return kUsage;
  return kFailure;
}

// Blocks SIGINT/SIGTERM in the calling thread (and threads it starts later).
inline sigset_t block_stop_signals() {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
  return set;
}

inline int wait_for_stop_signal(const sigset_t& set) {
  int sig = 0;
  sigwait(&set, &sig);
  return sig;
}

struct RunnerFlags {
  std::string server;
  std::string token;
  std::string backend = "local";
  std::string workspace;
  long long poll_ms = 2000;
  long long heartbeat_ms = 0;
  std::string kind;
  std::string os = "linux";
  std::vector<std::string> tags;
  std::string scheduler_config;
  long long timeout_unit_ms = 0;
  bool once = false;
};

inline void add_runner_flags(CLI::App& app, RunnerFlags& f) {
  f.server = default_addr();
  app.add_option("--server", f.server, "Server address (LABCI_ADDR)")->capture_default_str();
  app.add_option("--token", f.token, "Runner token; registers a new runner when omitted");
  app.add_option("--backend", f.backend, "Executor backend")
      ->check(CLI::IsMember({"local", "batch-sim", "batch_bridge"}))
      ->capture_default_str();
  app.add_option("--workspace", f.workspace, "Directory for job workspaces")->required();
  app.add_option("--poll-ms", f.poll_ms, "Claim poll interval in ms")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--heartbeat-ms", f.heartbeat_ms, "Heartbeat interval in ms (default max(10000, poll))")
      ->check(CLI::PositiveNumber);
  app.add_option("--kind", f.kind, "Runner kind")->check(CLI::IsMember({"selfhosted", "cloud"}));
  app.add_option("--os", f.os, "Advertised OS")->capture_default_str();
  app.add_option("--tag", f.tags, "Capability tag (repeatable)");
  app.add_option("--scheduler-config", f.scheduler_config, "JSON config for the simulated batch scheduler")
      ->check(CLI::ExistingFile);
  app.add_option("--timeout-unit-ms", f.timeout_unit_ms, "Length of one timeout_minutes unit (testing)")
      ->check(CLI::PositiveNumber)
      ->group("");
  app.add_flag("--once", f.once, "Exit once no job is claimable");
}

inline int run_runner(const RunnerFlags& f) {
  json cfg{{"server", f.server},
           {"backend", f.backend == "batch-sim" ? "batch_bridge" : f.backend},
           {"workspace", f.workspace},
           {"poll_ms", f.poll_ms},
           {"os", f.os},
           {"tags", f.tags}};
  if (!f.token.empty()) cfg["token"] = f.token;
  if (!f.kind.empty()) cfg["kind"] = f.kind;
  if (f.heartbeat_ms > 0) cfg["heartbeat_ms"] = f.heartbeat_ms;
  if (!f.scheduler_config.empty()) cfg["scheduler_config"] = f.scheduler_config;
  if (f.timeout_unit_ms > 0) cfg["timeout_unit_ms"] = f.timeout_unit_ms;

  sigset_t set = block_stop_signals();
  labci_runner* runner = nullptr;
  check(labci_runner_create(cfg.dump().c_str(), &runner));
  std::thread([set, runner] {
    wait_for_stop_signal(set);
    labci_runner_stop(runner);
  }).detach();
  std::cerr << "runner polling " << f.server << " (backend " << f.backend << ")\n";
  int jobs = 0;
  labci_status s = labci_runner_run(runner, f.once ? 1 : 0, &jobs);
  std::string err = labci_last_error();
  // The signal thread may still hold the handle; the process exits next.
  if (s != LABCI_OK) {
    throw Failure{exit_for(s) == kUsage ? kUsage : kServer, std::string(labci_status_name(s)) + ": " + err};
  }
  std::cerr << "runner stopped after " << jobs << " job(s)\n";
  return kSuccess;
}

// Runs a CLI11 app and maps every outcome to an exit code.
template <typename F>
int guarded_main(CLI::App& app, int argc, char** argv, F&& body) {
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }
  try {
    return body();
  } catch (const Failure& f) {
    std::cerr << "error: " << f.message << "\n";
    return f.code;
  } catch (const json::exception& e) {
    std::cerr << "error: unexpected response: " << e.what() << "\n";
    return kServer;
  }
}

}  // namespace cli
