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

#include <algorithm>
#include <chrono>
#include <map>
#include <random>
#include <thread>

#include "doctest.h"

#include "../support/mock_backend.hpp"
#include "common/error.hpp"
#include "config/pipeline_config.hpp"
#include "pipeline/pipeline.hpp"
#include "test_util.hpp"

using namespace labci;
using namespace labci::pipeline;
using config::Stage;
using namespace std::chrono_literals;

namespace {

Timestamp fixed_time() {
  return *parse_rfc3339("2026-10-16T08:00:00.125Z");
}

struct CapturedLog {
  std::string bytes;
  JobLog log{[this](std::string_view b) { bytes.append(b); }};
};

config::JobSpec make_spec(std::vector<std::pair<Stage, std::vector<std::string>>> stages) {
  config::JobSpec spec;
  for (auto& [s, cmds] : stages) spec.stage_plan.push_back({s, cmds});
  return spec;
}

std::vector<std::string> stage_names(const JobResult& r) {
  std::vector<std::string> out;
  for (const auto& s : r.stage_results) out.push_back(s.stage);
  return out;
}

std::vector<StageStatus> statuses(const JobResult& r) {
  std::vector<StageStatus> out;
  for (const auto& s : r.stage_results) out.push_back(s.status);
  return out;
}

Errc code_of(JobState s, const JobEvent& e) {
  try {
    advance(s, e);
  } catch (const Error& err) {
    return err.code();
  }
  return Errc::kOk;
}

}  // namespace

TEST_CASE("advance: documented examples") {
  CHECK(advance(JobState::kQueued, JobEvent::claimed()) == JobState::kClaimed);
  CHECK(advance(JobState::kQueued, JobEvent::cancel_requested()) == JobState::kCanceled);
  CHECK(code_of(JobState::kSucceeded, JobEvent::claimed()) == Errc::kIllegalTransition);
  CHECK(code_of(JobState::kQueued, JobEvent::completed(JobState::kSucceeded)) == Errc::kIllegalTransition);
}

TEST_CASE("advance: every state x event pair matches the hand-written table") {
  const std::vector<JobState> states = {JobState::kQueued,    JobState::kClaimed,  JobState::kRunning,
                                        JobState::kSucceeded, JobState::kFailed,   JobState::kTimedOut,
                                        JobState::kCanceled};
  // Expected next state; absent means the transition must be rejected.
  using Key = std::pair<JobState, JobEventKind>;
  const std::map<Key, JobState> table = {
      {{JobState::kQueued, JobEventKind::kClaimed}, JobState::kClaimed},
      {{JobState::kQueued, JobEventKind::kCancelRequested}, JobState::kCanceled},
      {{JobState::kClaimed, JobEventKind::kStarted}, JobState::kRunning},
      {{JobState::kClaimed, JobEventKind::kCancelRequested}, JobState::kCanceled},
      {{JobState::kClaimed, JobEventKind::kDeadlineExceeded}, JobState::kTimedOut},
      {{JobState::kRunning, JobEventKind::kStageDone}, JobState::kRunning},
      {{JobState::kRunning, JobEventKind::kCancelRequested}, JobState::kCanceled},
      {{JobState::kRunning, JobEventKind::kDeadlineExceeded}, JobState::kTimedOut},
  };
  const std::vector<JobEventKind> kinds = {JobEventKind::kClaimed,   JobEventKind::kStarted,
                                           JobEventKind::kStageDone, JobEventKind::kCompleted,
                                           JobEventKind::kCancelRequested, JobEventKind::kDeadlineExceeded};
  int checked = 0;
  for (auto s : states) {
    for (auto k : kinds) {
      if (k == JobEventKind::kCompleted) {
        for (auto outcome : states) {
          JobEvent e{k, outcome};
          bool ok = (s == JobState::kClaimed || s == JobState::kRunning) && is_terminal(outcome);
          CAPTURE(state_name(s));
          CAPTURE(state_name(outcome));
          if (ok) {
            CHECK(advance(s, e) == outcome);
          } else {
            CHECK(code_of(s, e) == Errc::kIllegalTransition);
          }
          ++checked;
        }
        continue;
      }
      JobEvent e{k, std::nullopt};
      CAPTURE(state_name(s));
      CAPTURE(event_name(k));
      auto it = table.find({s, k});
      if (it != table.end()) {
        CHECK(advance(s, e) == it->second);
      } else {
        CHECK(code_of(s, e) == Errc::kIllegalTransition);
      }
      if (is_terminal(s)) CHECK(code_of(s, e) == Errc::kIllegalTransition);
      ++checked;
    }
  }
  CHECK(checked == 7 * 5 + 7 * 7);
}

TEST_CASE("state and event names round trip") {
  for (auto s : {JobState::kQueued, JobState::kClaimed, JobState::kRunning, JobState::kSucceeded,
                 JobState::kFailed, JobState::kTimedOut, JobState::kCanceled}) {
    CHECK(parse_state(state_name(s)) == s);
  }
  CHECK_FALSE(parse_state("done").has_value());
  CHECK(event_name(JobEventKind::kDeadlineExceeded) == "deadline_exceeded");
}

TEST_CASE("log line format is bit exact") {
  CHECK(format_log_line(fixed_time(), "run", "hello world") == "2026-10-16T08:00:00.125Z [run] hello world\n");
  std::string sink;
  JobLog log([&](std::string_view b) { sink.append(b); }, fixed_time);
  log.write("install", "");
  log.write("install", "x y");
  CHECK(sink == "2026-10-16T08:00:00.125Z [install] \n2026-10-16T08:00:00.125Z [install] x y\n");
  CHECK(log.size() == sink.size());
}

TEST_CASE("glob matching") {
  struct Row {
    const char* pattern;
    const char* path;
    bool match;
  };
  const Row rows[] = {
      {"*.csv", "result.csv", true},     {"*.csv", "out/result.csv", false},
      {"**/*.csv", "result.csv", true},  {"**/*.csv", "a/b/result.csv", true},
      {"out/*", "out/x", true},          {"out/*", "out/x/y", false},
      {"out/**", "out/x/y", true},       {"res?lt.txt", "result.txt", true},
      {"[ab].log", "a.log", true},       {"[ab].log", "c.log", false},
      {"counts.txt", "counts.txt", true}, {"a/**/z", "a/z", true},
      {"a/**/z", "a/b/c/z", true},       {"a/**/z", "b/z", false},
  };
  for (const auto& r : rows) {
    CAPTURE(r.pattern);
    CAPTURE(r.path);
    CHECK(glob_match(r.pattern, r.path) == r.match);
  }
}

TEST_CASE("version extraction") {
  CHECK(extract_version("Python 3.8.10") == "3.8.10");
  CHECK(extract_version("go version go1.21.3 linux/amd64") == std::nullopt);
  CHECK(extract_version("v18.19.0") == std::nullopt);
  CHECK(extract_version("node 18.19.0\n") == "18.19.0");
  CHECK(extract_version("cc (Ubuntu 11.4.0-1ubuntu1~22.04) 11.4.0") == "11.4.0");
  CHECK(extract_version("no digits") == std::nullopt);
  CHECK(toolchain_matches("3.6", "3.6.15"));
  CHECK(toolchain_matches("3.6", "3.6"));
  CHECK_FALSE(toolchain_matches("3.6", "3.8.10"));
  CHECK_FALSE(toolchain_matches("3.6.1", "3.6"));
  CHECK_FALSE(toolchain_matches("3.1", "3.10.12"));
}

TEST_CASE("execute_stage: exit codes and timeout") {
  testutil::TempDir ws;
  LocalBackend backend;
  JobLog log;
  auto far = Clock::now() + 60s;

  auto ok = execute_stage(backend, ws.path(), Stage::kRun, {"true"}, {}, far, log);
  CHECK(ok.status == StageStatus::kSucceeded);
  CHECK(ok.exit_code == 0);

  auto bad = execute_stage(backend, ws.path(), Stage::kRun, {"sh -c 'exit 3'"}, {}, far, log);
  CHECK(bad.status == StageStatus::kFailed);
  CHECK(bad.exit_code == 3);

  auto stops = execute_stage(backend, ws.path(), Stage::kRun, {"exit 4", "touch never"}, {}, far, log);
  CHECK(stops.exit_code == 4);
  CHECK_FALSE(fs::exists(ws.path() / "never"));

  auto start = std::chrono::steady_clock::now();
  auto slow = execute_stage(backend, ws.path(), Stage::kRun, {"sleep 120"}, {}, Clock::now() + 1s, log);
  auto elapsed = std::chrono::steady_clock::now() - start;
  CHECK(slow.status == StageStatus::kTimedOut);
  CHECK_FALSE(slow.exit_code.has_value());
  CHECK(elapsed < 5s);
  CHECK(slow.ended_at >= slow.started_at);
}

TEST_CASE("execute_stage: grandchildren ignoring SIGTERM are killed after the grace period") {
  testutil::TempDir ws;
  LocalBackend backend(RunnerKind::kCloud, 300ms);
  JobLog log;
  auto start = std::chrono::steady_clock::now();
  auto r = execute_stage(backend, ws.path(), Stage::kRun, {"trap '' TERM; sleep 30 & wait"}, {},
                         Clock::now() + 500ms, log);
  CHECK(r.status == StageStatus::kTimedOut);
  CHECK(std::chrono::steady_clock::now() - start < 5s);
}

TEST_CASE("execute_stage: output lines, env vars and missing workspace") {
  testutil::TempDir ws;
  LocalBackend backend;
  std::string bytes;
  JobLog log([&](std::string_view b) { bytes.append(b); }, fixed_time);
  config::EnvVars env = {{"GREETING", "hi there"}, {"LABCI_STAGE", "run"}};
  auto r = execute_stage(backend, ws.path(), Stage::kRun, {"echo \"$GREETING\"", "echo err >&2; printf tail"}, env,
                         Clock::now() + 60s, log);
  CHECK(r.status == StageStatus::kSucceeded);
  CHECK(bytes ==
        "2026-10-16T08:00:00.125Z [run] hi there\n"
        "2026-10-16T08:00:00.125Z [run] err\n"
        "2026-10-16T08:00:00.125Z [run] tail\n");
  CHECK(r.log_offset == 0);
  CHECK(r.log_length == bytes.size());

  CHECK_THROWS_AS(execute_stage(backend, ws.path() / "missing", Stage::kRun, {"true"}, {}, Clock::now() + 60s, log),
                  Error);
  try {
    execute_stage(backend, ws.path() / "missing", Stage::kRun, {"true"}, {}, Clock::now() + 60s, log);
  } catch (const Error& e) {
    CHECK(e.code() == Errc::kWorkspaceMissing);
  }
}

TEST_CASE("collect_info: local backend reports physical facts") {
  testutil::TempDir ws;
  LocalBackend backend;
  JobLog log;
  config::JobSpec spec;
  auto fp = collect_info(backend, spec, ws.path(), log);
  CHECK(fp.cpu_count >= 1);
  CHECK(fp.mem_total_mb > 0);
  CHECK(fp.os_name == "linux");
  CHECK_FALSE(fp.hostname.empty());
}

TEST_CASE("collect_info: mock node facts are echoed and written first") {
  testutil::TempDir ws;
  testutil::MockBackend backend;
  backend.toolchain_version = "3.8.10";
  std::string bytes;
  JobLog log([&](std::string_view b) { bytes.append(b); }, fixed_time);
  config::JobSpec spec;
  spec.env.language = "python";
  spec.env.language_version = "3.6";
  auto before = Clock::now();
  auto fp = collect_info(backend, spec, ws.path(), log);
  CHECK(fp.cpu_count == 56);
  CHECK(fp.mem_total_mb == 262144);
  CHECK(fp.runner_kind == RunnerKind::kSelfHosted);
  CHECK(fp.toolchain_reports.at("python") == "3.8.10");
  CHECK(fp.captured_at >= before);

  const std::string prefix = "2026-10-16T08:00:00.125Z [info] ";
  std::string expected;
  for (const auto& line : fp.to_lines()) expected += prefix + line + "\n";
  expected += prefix + "backend=mock\n";
  expected += prefix + "toolchain mismatch: requested 3.6, found 3.8\n";
  CHECK(bytes == expected);
  CHECK(bytes.rfind(prefix + "os_name=linux\n" + prefix + "os_version=mock-1.0\n" + prefix + "cpu_count=56\n" +
                        prefix + "mem_total_mb=262144\n",
                    0) == 0);

  backend.toolchain_version = "3.6.15";
  bytes.clear();
  collect_info(backend, spec, ws.path(), log);
  CHECK(bytes.find("toolchain mismatch") == std::string::npos);

  backend.unreachable = true;
  try {
    collect_info(backend, spec, ws.path(), log);
    FAIL("expected BackendUnavailable");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::kBackendUnavailable);
  }
}

TEST_CASE("collect_info: real python probe on this host") {
  testutil::TempDir ws;
  LocalBackend backend;
  auto detected = backend.probe_toolchain("python", ws.path());
  if (!detected) return;  // no python on this host
  std::string bytes;
  JobLog log([&](std::string_view b) { bytes.append(b); });
  config::JobSpec spec;
  spec.env.language = "python";
  spec.env.language_version = "2.1";
  collect_info(backend, spec, ws.path(), log);
  auto major_minor = detected->substr(0, detected->find('.', detected->find('.') + 1));
  CHECK(bytes.find("[info] toolchain mismatch: requested 2.1, found " + major_minor + "\n") != std::string::npos);
}

TEST_CASE("run_job: workflow block with echo in place of the experiment") {
  testutil::TempDir ws;
  testutil::write_file(ws.path() / "requirements.txt", "");
  auto cfg = config::parse_config(
      "os: linux\n"
      "language: python\n"
      "env:\n"
      "  PIP_DISABLE_PIP_VERSION_CHECK: \"1\"\n"
      "install: \n"
      "  - pip install -r requirements.txt\n"
      "script: # run experiment\n"
      "  - echo done\n");
  auto spec = config::expand_matrix(cfg).at(0);
  LocalBackend backend;
  CapturedLog cap;
  auto result = run_job(spec, backend, ws.path(), {1, 1, "c0ffee"}, cap.log);
  CHECK(stage_names(result) == std::vector<std::string>{"info", "install", "run"});
  if (result.stage_results.at(1).status != StageStatus::kSucceeded) {
    // pip may be missing from a minimal host; the shape still has to hold.
    MESSAGE("install failed on this host: " << cap.bytes);
    CHECK(result.overall == JobState::kFailed);
    return;
  }
  CHECK(statuses(result) ==
        std::vector<StageStatus>{StageStatus::kSucceeded, StageStatus::kSucceeded, StageStatus::kSucceeded});
  CHECK(result.overall == JobState::kSucceeded);
  CHECK(cap.bytes.find("[run] done\n") != std::string::npos);
  CHECK(result.fingerprint.has_value());
}

TEST_CASE("run_job: test failure skips every later stage") {
  testutil::TempDir ws;
  auto spec = make_spec({{Stage::kInstall, {"true"}},
                         {Stage::kBuild, {"true"}},
                         {Stage::kTest, {"exit 1"}},
                         {Stage::kDeploy, {"true"}},
                         {Stage::kRun, {"true"}},
                         {Stage::kReport, {"true"}}});
  LocalBackend backend;
  JobLog log;
  auto result = run_job(spec, backend, ws.path(), {}, log);
  CHECK(statuses(result) == std::vector<StageStatus>{StageStatus::kSucceeded, StageStatus::kSucceeded,
                                                     StageStatus::kSucceeded, StageStatus::kFailed,
                                                     StageStatus::kSkipped, StageStatus::kSkipped,
                                                     StageStatus::kSkipped});
  CHECK(result.overall == JobState::kFailed);
  for (const auto& s : result.stage_results) {
    if (s.status == StageStatus::kSkipped) {
      CHECK_FALSE(s.exit_code.has_value());
      CHECK(s.log_length == 0);
    }
  }
}

TEST_CASE("run_job: artifacts collected with content digests, even after failure") {
  testutil::TempDir ws;
  auto spec = make_spec({{Stage::kRun, {"printf 'x,y\\n1,2\\n' > result.csv", "mkdir -p sub && echo n > sub/x.csv"}}});
  spec.artifacts.patterns = {"*.csv"};
  LocalBackend backend;
  JobLog log;
  auto result = run_job(spec, backend, ws.path(), {7, 3, "abc"}, log);
  REQUIRE(result.overall == JobState::kSucceeded);
  REQUIRE(result.artifacts.entries.size() == 1);
  CHECK(result.artifacts.job_id == 7);
  const auto& e = result.artifacts.entries[0];
  CHECK(e.path == "result.csv");
  CHECK(e.size == 8);
  // sha256sum of the same eight bytes.
  CHECK(e.digest.hex() == "81bf9fa83c6f7f151bd491a98cd7d933de3965289e3ebd77c6c425f7eaa16392");

  testutil::TempDir ws2;
  auto failing = make_spec({{Stage::kRun, {"echo partial > partial.txt", "exit 2"}}, {Stage::kReport, {"true"}}});
  failing.artifacts.patterns = {"*.txt"};
  auto r2 = run_job(failing, backend, ws2.path(), {}, log);
  CHECK(r2.overall == JobState::kFailed);
  REQUIRE(r2.artifacts.entries.size() == 1);
  CHECK(r2.artifacts.entries[0].path == "partial.txt");
}

TEST_CASE("run_job: CI variables are injected into every stage") {
  testutil::TempDir ws;
  auto spec = make_spec({{Stage::kBuild, {"echo \"$CI $LABCI_JOB_ID $LABCI_BUILD_ID $LABCI_COMMIT $LABCI_STAGE $LABCI_MATRIX_INDEX\""}},
                         {Stage::kRun, {"echo \"$LABCI_STAGE $USER_VAR\""}}});
  spec.matrix_index = 2;
  spec.env.env_vars = {{"USER_VAR", "u"}, {"LABCI_STAGE", "ignored"}};
  LocalBackend backend;
  CapturedLog cap;
  auto result = run_job(spec, backend, ws.path(), {11, 5, "deadbeef"}, cap.log);
  CHECK(result.overall == JobState::kSucceeded);
  CHECK(cap.bytes.find("[build] true 11 5 deadbeef build 2\n") != std::string::npos);
  CHECK(cap.bytes.find("[run] run u\n") != std::string::npos);
}

TEST_CASE("run_job: job-wide timeout") {
  testutil::TempDir ws;
  auto spec = make_spec({{Stage::kInstall, {"sleep 0.3"}}, {Stage::kRun, {"sleep 60"}}, {Stage::kReport, {"true"}}});
  spec.timeout_minutes = 1;
  LocalBackend backend;
  JobLog log;
  auto start = std::chrono::steady_clock::now();
  auto result = run_job(spec, backend, ws.path(), {}, log, {}, RunOptions{1000ms});
  CHECK(std::chrono::steady_clock::now() - start < 10s);
  CHECK(statuses(result) == std::vector<StageStatus>{StageStatus::kSucceeded, StageStatus::kSucceeded,
                                                     StageStatus::kTimedOut, StageStatus::kSkipped});
  CHECK(result.overall == JobState::kTimedOut);
}

TEST_CASE("run_job: cancellation stops the running stage") {
  testutil::TempDir ws;
  auto spec = make_spec({{Stage::kRun, {"sleep 30"}}, {Stage::kReport, {"true"}}});
  LocalBackend backend(RunnerKind::kCloud, 500ms);
  JobLog log;
  std::stop_source stop;
  std::thread canceller([&] {
    std::this_thread::sleep_for(300ms);
    stop.request_stop();
  });
  auto start = std::chrono::steady_clock::now();
  auto result = run_job(spec, backend, ws.path(), {}, log, stop.get_token());
  canceller.join();
  CHECK(std::chrono::steady_clock::now() - start < 5s);
  CHECK(result.overall == JobState::kCanceled);
  CHECK(result.stage_results.at(1).status == StageStatus::kFailed);
  CHECK(result.stage_results.at(1).note == "canceled");
  CHECK(result.stage_results.at(2).status == StageStatus::kSkipped);
}

TEST_CASE("run_job: executor errors become an internal stage entry") {
  testutil::TempDir ws;
  testutil::MockBackend backend;
  backend.unreachable = true;
  auto spec = make_spec({{Stage::kRun, {"true"}}});
  JobLog log;
  auto result = run_job(spec, backend, ws.path(), {}, log);
  CHECK(result.overall == JobState::kFailed);
  CHECK(stage_names(result) == std::vector<std::string>{"info", "run", "internal"});
  CHECK(statuses(result) ==
        std::vector<StageStatus>{StageStatus::kSkipped, StageStatus::kSkipped, StageStatus::kFailed});
  CHECK(result.stage_results.back().note.find("unreachable") != std::string::npos);

  LocalBackend local;
  auto missing = run_job(spec, local, ws.path() / "gone", {}, log);
  CHECK(missing.overall == JobState::kFailed);
  CHECK(missing.stage_results.back().stage == "internal");
}

TEST_CASE("run_job: deterministic job yields identical artifact digests") {
  auto spec = make_spec({{Stage::kRun, {"seq 1 500 | awk '{s+=$1*$1} END {print s}' > sum.txt"}}});
  spec.artifacts.patterns = {"sum.txt"};
  LocalBackend backend;
  JobLog log;
  testutil::TempDir a, b;
  auto ra = run_job(spec, backend, a.path(), {}, log);
  auto rb = run_job(spec, backend, b.path(), {}, log);
  REQUIRE(ra.overall == JobState::kSucceeded);
  CHECK(ra.artifacts.entries == rb.artifacts.entries);
  CHECK(testutil::read(a.path() / "sum.txt") == "41791750\n");
}

TEST_CASE("property: stage order, skip set and contiguous log ranges") {
  std::mt19937 rng(20261016);
  LocalBackend backend;
  const std::vector<std::string> order = {"info", "install", "build", "test", "deploy", "run", "report"};
  for (int trial = 0; trial < 40; ++trial) {
    std::vector<std::pair<Stage, std::vector<std::string>>> plan;
    for (auto s : config::kConfigurableStages) {
      if (rng() % 2) continue;
      std::vector<std::string> cmds = {"echo " + std::string(config::stage_name(s))};
      if (rng() % 5 == 0) cmds.push_back("exit " + std::to_string(1 + rng() % 3));
      plan.push_back({s, cmds});
    }
    if (plan.empty()) plan.push_back({Stage::kRun, {"true"}});
    auto spec = make_spec(plan);
    testutil::TempDir ws;
    JobLog log;
    auto r = run_job(spec, backend, ws.path(), {}, log);

    // Order is a subsequence of the canonical stage order.
    auto names = stage_names(r);
    std::size_t pos = 0;
    for (const auto& n : names) {
      auto it = std::find(order.begin() + static_cast<long>(pos), order.end(), n);
      REQUIRE(it != order.end());
      pos = static_cast<std::size_t>(it - order.begin()) + 1;
    }
    CHECK(names.size() == plan.size() + 1);

    // Everything after the first non-success is skipped.
    bool seen_bad = false;
    int bad_count = 0;
    std::size_t last_non_skipped = 0;
    for (std::size_t i = 0; i < r.stage_results.size(); ++i) {
      const auto& s = r.stage_results[i];
      if (seen_bad) CHECK(s.status == StageStatus::kSkipped);
      if (s.status == StageStatus::kFailed || s.status == StageStatus::kTimedOut) {
        seen_bad = true;
        ++bad_count;
      }
      if (s.status != StageStatus::kSkipped) last_non_skipped = i;
    }
    CHECK((r.overall == JobState::kSucceeded) == !seen_bad);
    if (seen_bad) {
      CHECK(bad_count == 1);
      CHECK(r.stage_results[last_non_skipped].status == StageStatus::kFailed);
    }

    // Log ranges tile the log with no gaps or overlaps.
    std::uint64_t cursor = 0;
    for (const auto& s : r.stage_results) {
      CHECK(s.log_offset == cursor);
      cursor += s.log_length;
      CHECK(s.ended_at >= s.started_at);
    }
    CHECK(cursor == log.size());
  }
}

TEST_CASE("job result JSON round trip") {
  testutil::TempDir ws;
  testutil::MockBackend backend;
  auto spec = make_spec({{Stage::kRun, {"echo hi > a.out"}}});
  spec.artifacts.patterns = {"*.out"};
  JobLog log;
  auto r = run_job(spec, backend, ws.path(), {3, 1, "x"}, log);
  auto back = job_result_from_json(to_json(r));
  CHECK(to_json(back) == to_json(r));
  CHECK(back.fingerprint->cpu_count == 56);
  CHECK(back.artifacts == r.artifacts);
}
