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

// labci: command-line front end.

#include <unistd.h>

#include <chrono>
#include <filesystem>
#include <fstream>

#include "cli.hpp"

namespace fs = std::filesystem;
using namespace cli;

namespace {

struct Client {
  labci_client* c = nullptr;
  explicit Client(const std::string& addr) { check(labci_client_open(addr.c_str(), nullptr, &c)); }
  ~Client() { labci_client_close(c); }
};

void emit(const json& j, bool as_json, void (*text)(const json&, std::ostream&)) {
  if (as_json) {
    std::cout << j.dump(2) << "\n";
  } else {
    text(j, std::cout);
  }
}

int cmd_validate(const std::string& path, bool strict, bool as_json) {
  Buf report;
  labci_status s = labci_validate_file(path.c_str(), report.out());
  if (s != LABCI_OK) {
    const int line = labci_last_error_line();
    if (as_json) {
      std::cout << json{{"ok", false},
                        {"error", {{"code", labci_status_name(s)}, {"message", labci_last_error()}, {"line", line}}}}
                       .dump(2)
                << "\n";
    } else {
      // The message already carries "line N: " when a line is known.
      std::string msg = labci_last_error();
      const std::string prefix = "line " + std::to_string(line) + ": ";
      if (line > 0 && msg.rfind(prefix, 0) == 0) msg.erase(0, prefix.size());
      std::cerr << path << ":" << (line > 0 ? std::to_string(line) + ":" : std::string()) << " error: " << msg
                << "\n";
    }
    return exit_for(s) == kUsage ? kUsage : kServer;
  }
  json r = report.parse();
  const bool warned = !r["warnings"].empty();
  if (as_json) {
    r["ok"] = true;
    std::cout << r.dump(2) << "\n";
  } else {
    for (const auto& w : r["warnings"]) {
      const int line = w.value("line", 0);
      std::cout << path << ":" << (line > 0 ? std::to_string(line) + ":" : std::string()) << " warning: " << w.value("message", std::string()) << " ["
                << w.value("code", std::string()) << "]\n";
    }
    for (const auto& j : r["jobs"]) {
      std::cout << "job " << j["matrix_index"].get<int>() << ":";
      for (const auto& st : j["stages"]) std::cout << " " << st.get<std::string>();
      std::cout << "\n";
    }
    std::cout << "ok" << (warned ? " with warnings" : "") << "\n";
  }
  return strict && warned ? kFailure : kSuccess;
}

int cmd_run(const std::string& dir, const std::string& only, const std::string& data_dir, const std::string& backend,
            long long timeout_unit_ms, bool as_json) {
  json opts{{"data_dir", data_dir}, {"backend", backend == "batch-sim" ? "batch_bridge" : backend}};
  if (!only.empty()) {
    json list = json::array();
    std::stringstream ss(only);
    for (std::string item; std::getline(ss, item, ',');) {
      if (!item.empty()) list.push_back(item);
    }
    opts["only"] = list;
  }
  if (timeout_unit_ms > 0) opts["timeout_unit_ms"] = timeout_unit_ms;
  Buf out;
  check(labci_run_local(dir.c_str(), opts.dump().c_str(), out.out()));
  json b = out.parse();
  if (as_json) {
    std::cout << b.dump(2) << "\n";
  } else {
    print_build(b, std::cout);
    for (const auto& j : b["jobs"]) {
      std::cout << "log " << j["job_id"].get<long long>() << ": "
                << (fs::path(data_dir) / "logs" / (std::to_string(j["job_id"].get<long long>()) + ".log")).string()
                << "\n";
    }
  }
  return exit_for_build(b);
}

int cmd_serve(const std::string& addr, const std::string& data_dir, int cap, long long heartbeat_ms) {
  sigset_t set = block_stop_signals();
  labci_server* server = nullptr;
  check(labci_server_open(data_dir.c_str(), cap, static_cast<int>(heartbeat_ms), &server));
  int port = 0;
  labci_status s = labci_server_listen(server, addr.c_str(), &port);
  if (s != LABCI_OK) {
    std::string msg = std::string(labci_status_name(s)) + ": " + labci_last_error();
    labci_server_close(server);
    throw Failure{kServer, msg};
  }
  auto host = addr.substr(0, addr.rfind(':'));
  if (addr.find(':') == std::string::npos) host = "127.0.0.1";
  std::cout << "listening on " << host << ":" << port << " data " << data_dir << " cap " << cap << std::endl;
  int sig = wait_for_stop_signal(set);
  std::cerr << "signal " << sig << ", shutting down\n";
  labci_server_close(server);
  return kSuccess;
}

int cmd_push(const std::string& addr, const std::string& dir, const std::string& repo, std::string event_id,
             bool as_json) {
  Client c(addr);
  Buf commit;
  check(labci_client_upload_dir(c.c, dir.c_str(), commit.out()));
  if (event_id.empty()) {
    auto now = std::chrono::system_clock::now().time_since_epoch();
    event_id = "cli-" + commit.str().substr(0, 16) + "-" +
               std::to_string(std::chrono::duration_cast<std::chrono::microseconds>(now).count()) + "-" +
               std::to_string(::getpid());
  }
  Buf out;
  check(labci_client_push(c.c, repo.c_str(), commit.str().c_str(), "", event_id.c_str(), out.out()));
  emit(out.parse(), as_json, print_build);
  return kSuccess;
}

int cmd_trigger(const std::string& addr, const std::string& repo, const std::string& commit, const std::string& only,
                bool as_json) {
  Client c(addr);
  Buf out;
  check(labci_client_trigger(c.c, repo.c_str(), commit.c_str(), only.empty() ? nullptr : only.c_str(), out.out()));
  emit(out.parse(), as_json, print_build);
  return kSuccess;
}

int cmd_build(const std::string& addr, long long id, bool wait, bool as_json) {
  Client c(addr);
  json b;
  while (true) {
    Buf out;
    check(labci_client_build(c.c, id, out.out()));
    b = out.parse();
    const std::string st = b["status"];
    if (!wait || (st != "pending" && st != "running")) break;
    std::this_thread::sleep_for(std::chrono::milliseconds(200));
  }
  emit(b, as_json, print_build);
  return wait ? exit_for_build(b) : kSuccess;
}

// One log line as {"time", "stage", "line"}; the format is fixed by the runner.
json log_line_json(const std::string& line) {
  const auto sp = line.find(' ');
  const auto close = line.find("] ", sp == std::string::npos ? 0 : sp);
  if (sp == std::string::npos || close == std::string::npos || line.compare(sp + 1, 1, "[") != 0) {
    return json{{"time", nullptr}, {"stage", nullptr}, {"line", line}};
  }
  return json{{"time", line.substr(0, sp)},
              {"stage", line.substr(sp + 2, close - sp - 2)},
              {"line", line.substr(close + 2)}};
}

int cmd_logs(const std::string& addr, long long job, bool follow, bool as_json) {
  std::string pending;
  Client c(addr);
  std::uint64_t offset = 0;
  while (true) {
    Buf bytes;
    Buf state;
    check(labci_client_log(c.c, job, offset, bytes.out(), bytes.len(), state.out()));
    std::string chunk = bytes.str();
    if (as_json) {
      // JSON Lines, emitted per complete log line.
      pending += chunk;
      std::size_t nl = 0;
      while ((nl = pending.find('\n')) != std::string::npos) {
        std::cout << log_line_json(pending.substr(0, nl)).dump() << "\n";
        pending.erase(0, nl + 1);
      }
    } else {
      std::cout.write(chunk.data(), static_cast<std::streamsize>(chunk.size()));
    }
    std::cout.flush();
    offset += chunk.size();
    if (!follow) break;
    const std::string st = state.str();
    const bool done = st == "succeeded" || st == "failed" || st == "timed_out" || st == "canceled";
    // The final state can arrive with bytes still unread; stop on an empty read.
    if (done && chunk.empty()) break;
    if (chunk.empty()) std::this_thread::sleep_for(std::chrono::milliseconds(250));
  }
  return kSuccess;
}

int cmd_artifacts(const std::string& addr, long long job, const std::string& fetch, const std::string& output,
                  bool as_json) {
  Client c(addr);
  if (!fetch.empty()) {
    Buf bytes;
    check(labci_client_artifact(c.c, job, fetch.c_str(), bytes.out(), bytes.len()));
    std::string data = bytes.str();
    if (output.empty() || output == "-") {
      std::cout.write(data.data(), static_cast<std::streamsize>(data.size()));
    } else {
      std::ofstream f(output, std::ios::binary | std::ios::trunc);
      f.write(data.data(), static_cast<std::streamsize>(data.size()));
      if (!f) throw Failure{kUsage, "cannot write " + output};
    }
    return kSuccess;
  }
  Buf out;
  check(labci_client_artifacts(c.c, job, out.out()));
  json m = out.parse();
  if (as_json) {
    std::cout << m.dump(2) << "\n";
  } else {
    for (const auto& e : m["entries"]) {
      std::cout << e["digest"].get<std::string>() << "  " << e["size"].get<long long>() << "  "
                << e["path"].get<std::string>() << "\n";
    }
  }
  return kSuccess;
}

int cmd_compare(const std::string& addr, long long a, long long b, bool cross, bool as_json) {
  Client c(addr);
  Buf report;
  Buf text;
  check(labci_client_compare(c.c, a, b, cross ? 1 : 0, report.out(), text.out()));
  json r = report.parse();
  if (as_json) {
    std::cout << r.dump(2) << "\n";
  } else {
    std::cout << text.str();
  }
  return r["verdict"] == "reproduced" ? kSuccess : kFailure;
}

int cmd_ledger(const std::string& addr, const std::string& repo, const std::string& commit, bool as_json) {
  Client c(addr);
  Buf out;
  check(labci_client_ledger(c.c, repo.c_str(), commit.c_str(), out.out()));
  json entries = out.parse();
  if (as_json) {
    std::cout << entries.dump(2) << "\n";
    return kSuccess;
  }
  for (const auto& e : entries) {
    std::cout << "job " << e["job_id"].get<long long>() << " build " << e["build_id"].get<long long>() << " "
              << e["overall"].get<std::string>() << " commit " << short_hex(e["commit_id"].get<std::string>())
              << " log " << short_hex(e["log_digest"].get<std::string>()) << " artifacts "
              << short_hex(e["artifact_manifest_digest"].get<std::string>()) << "\n";
  }
  return kSuccess;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"labci: continuous integration for research experiments"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(labci_version()));
  bool as_json = false;
  std::string addr = default_addr();
  std::string data_dir = default_data_dir();

  auto add_addr = [&](CLI::App* sub) {
    sub->add_option("--server", addr, "Server address (LABCI_ADDR)")->capture_default_str();
  };
  auto add_json = [&](CLI::App* sub) { sub->add_flag("--json", as_json, "Machine-readable output"); };

  std::string path;
  bool strict = false;
  auto* validate = app.add_subcommand("validate", "Check a .labci.yml file");
  validate->add_option("path", path, "Config file")->required();
  validate->add_flag("--strict", strict, "Treat warnings as failure");
  add_json(validate);

  std::string only;
  std::string backend = "local";
  long long timeout_unit_ms = 0;
  auto* run = app.add_subcommand("run", "Run a source directory's pipeline in this process");
  run->add_option("dir", path, "Source directory containing .labci.yml")->required()->check(CLI::ExistingDirectory);
  run->add_option("--only", only, "Comma-separated stages to keep, e.g. run,report");
  run->add_option("--data-dir", data_dir, "Where logs, blobs and the ledger go (LABCI_DATA_DIR)")->capture_default_str();
  run->add_option("--backend", backend, "Executor backend")->check(CLI::IsMember({"local", "batch-sim", "batch_bridge"}));
  run->add_option("--timeout-unit-ms", timeout_unit_ms, "Length of one timeout_minutes unit (testing)")
      ->check(CLI::PositiveNumber)
      ->group("");
  add_json(run);

  int cap = 4;
  if (const char* v = std::getenv("LABCI_PARALLEL_CAP"); v != nullptr && *v != '\0') {
    try {
      cap = std::stoi(v);
    } catch (const std::exception&) {
      std::cerr << "error: LABCI_PARALLEL_CAP must be an integer\n";
      return kUsage;
    }
  }
  long long heartbeat_ms = 10000;
  std::string listen = addr;
  auto* serve = app.add_subcommand("serve", "Run the coordination server");
  serve->add_option("--addr", listen, "host:port to listen on (LABCI_ADDR)")->capture_default_str();
  serve->add_option("--data-dir", data_dir, "Data directory (LABCI_DATA_DIR)")->capture_default_str();
  serve->add_option("--parallel-cap", cap, "Max concurrently running jobs (LABCI_PARALLEL_CAP)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  serve->add_option("--heartbeat-ms", heartbeat_ms, "Expected runner heartbeat interval")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  RunnerFlags rflags;
  auto* runner = app.add_subcommand("runner", "Run a runner agent against a server");
  add_runner_flags(*runner, rflags);

  std::string repo;
  std::string event_id;
  auto* push = app.add_subcommand("push", "Upload a source directory and send a push event");
  push->add_option("dir", path, "Source directory")->required()->check(CLI::ExistingDirectory);
  push->add_option("--repo", repo, "Repository id, e.g. lab/experiment")->required();
  push->add_option("--event-id", event_id, "Idempotency key (default: generated)");
  add_addr(push);
  add_json(push);

  std::string commit;
  auto* trigger = app.add_subcommand("trigger", "Start a build for a stored commit");
  trigger->add_option("repo", repo, "Repository id")->required();
  trigger->add_option("commit", commit, "Commit id (hex)")->required();
  trigger->add_option("--only", only, "Comma-separated stages to keep");
  add_addr(trigger);
  add_json(trigger);

  long long id = 0;
  bool wait = false;
  auto* build = app.add_subcommand("build", "Show a build");
  build->add_option("build_id", id, "Build id")->required();
  build->add_flag("--wait", wait, "Poll until the build finishes; exit reflects its status");
  add_addr(build);
  add_json(build);

  bool no_follow = false;
  auto* logs = app.add_subcommand("logs", "Print a job's log, following it until the job ends");
  logs->add_option("job_id", id, "Job id")->required();
  logs->add_flag("--no-follow", no_follow, "Print what is committed now and exit");
  add_addr(logs);
  add_json(logs);

  std::string fetch;
  std::string output;
  auto* artifacts = app.add_subcommand("artifacts", "List or fetch a job's artifacts");
  artifacts->add_option("job_id", id, "Job id")->required();
  artifacts->add_option("--fetch", fetch, "Artifact path to download");
  artifacts->add_option("-o,--output", output, "Write the fetched artifact here instead of stdout");
  add_addr(artifacts);
  add_json(artifacts);

  long long id_b = 0;
  bool cross = false;
  auto* compare = app.add_subcommand("compare", "Compare the artifacts of two builds");
  compare->add_option("build_a", id, "First build")->required();
  compare->add_option("build_b", id_b, "Second build")->required();
  compare->add_flag("--cross-commit", cross, "Allow builds of different commits");
  add_addr(compare);
  add_json(compare);

  auto* ledger = app.add_subcommand("ledger", "Show ledger entries for a commit");
  ledger->add_option("repo", repo, "Repository id")->required();
  ledger->add_option("commit", commit, "Commit id (hex)")->required();
  add_addr(ledger);
  add_json(ledger);

  return guarded_main(app, argc, argv, [&]() -> int {
    if (*validate) return cmd_validate(path, strict, as_json);
    if (*run) return cmd_run(path, only, data_dir, backend, timeout_unit_ms, as_json);
    if (*serve) return cmd_serve(listen, data_dir, cap, heartbeat_ms);
    if (*runner) return run_runner(rflags);
    if (*push) return cmd_push(addr, path, repo, event_id, as_json);
    if (*trigger) return cmd_trigger(addr, repo, commit, only, as_json);
    if (*build) return cmd_build(addr, id, wait, as_json);
    if (*logs) return cmd_logs(addr, id, !no_follow, as_json);
    if (*artifacts) return cmd_artifacts(addr, id, fetch, output, as_json);
    if (*compare) return cmd_compare(addr, id, id_b, cross, as_json);
    if (*ledger) return cmd_ledger(addr, repo, commit, as_json);
    return kUsage;
  });
}
