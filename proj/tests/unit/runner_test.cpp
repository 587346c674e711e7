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

#include <sys/stat.h>

#include <atomic>
#include <functional>
#include <random>
#include <thread>

#include "doctest.h"

#include "../support/fixtures.hpp"
#include "common/digest.hpp"
#include "common/error.hpp"
#include "runner/agent.hpp"
#include "runner/batch_bridge.hpp"
#include "runner/client.hpp"
#include "runner/log_forwarder.hpp"
#include "store/snapshot.hpp"
#include "store/tar.hpp"
#include "test_util.hpp"

using namespace labci;
using namespace labci::runner;
using pipeline::JobState;
using pipeline::StageStatus;
using testutil::ServerFixture;
using namespace std::chrono_literals;

namespace {

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return Errc::kOk;
}

// Wraps a client and injects transport failures. Half of the injected log
// failures happen after the server already took the chunk.
class FlakyClient : public ServerClient {
 public:
  FlakyClient(ServerClient& inner, double fail_rate, unsigned seed) : inner_(inner), rate_(fail_rate), rng_(seed) {}

  server::Registration register_runner(pipeline::RunnerKind k, const RunnerCapabilities& c) override {
    return inner_.register_runner(k, c);
  }
  std::optional<JobView> claim(const RunnerCapabilities& caps) override { return inner_.claim(caps); }
  std::string fetch_snapshot(const std::string& commit) override {
    if (fetch_override) return *fetch_override;
    return inner_.fetch_snapshot(commit);
  }
  void append_log(std::int64_t job, std::int64_t seq, const std::string& bytes) override {
    int mode = roll();
    if (mode == 1) throw Error(Errc::kNetwork, "injected: request lost");
    inner_.append_log(job, seq, bytes);
    if (mode == 2) throw Error(Errc::kNetwork, "injected: reply lost");
  }
  std::string upload_artifact(std::int64_t job, const std::string& path, const std::string& bytes) override {
    if (roll() == 1) throw Error(Errc::kNetwork, "injected");
    return inner_.upload_artifact(job, path, bytes);
  }
  void complete(std::int64_t job, const pipeline::JobResult& r) override {
    if (roll() == 1) throw Error(Errc::kNetwork, "injected");
    inner_.complete(job, r);
  }
  bool heartbeat(std::int64_t job) override { return inner_.heartbeat(job); }
  void set_token(std::string token) override { inner_.set_token(std::move(token)); }

  std::optional<std::string> fetch_override;
  std::atomic<int> faults{0};

 private:
  int roll() {
    std::lock_guard lock(mu_);
    double x = std::uniform_real_distribution<double>(0, 1)(rng_);
    if (x >= rate_) return 0;
    ++faults;
    return x < rate_ / 2 ? 1 : 2;
  }
  ServerClient& inner_;
  double rate_;
  std::mutex mu_;
  std::mt19937 rng_;
};

RunnerConfig fast_config(const fs::path& root, BackendKind backend = BackendKind::kLocal) {
  RunnerConfig c;
  c.workspace_root = root;
  c.backend = backend;
  c.kind = pipeline::RunnerKind::kSelfHosted;
  c.poll_interval = 50ms;
  c.heartbeat_interval = 100ms;
  c.kill_grace = 500ms;
  c.forwarder.flush_interval = 20ms;
  c.scheduler.tick_ms = 5;
  return c;
}

const std::map<std::string, std::string> kDeterministic = {
    {".labci.yml",
     "language: shell\nbuild:\n  - sh gen.sh > table.csv\ntest:\n  - test -s table.csv\n"
     "run:\n  - sort -n table.csv | tail -n 1 > max.txt\nartifacts:\n  - table.csv\n  - max.txt\n"},
    {"gen.sh", "i=0\nwhile [ $i -lt 20 ]; do echo $((i * i % 17)); i=$((i + 1)); done\n"},
};

std::vector<StageStatus> statuses(const pipeline::JobResult& r) {
  std::vector<StageStatus> out;
  for (const auto& s : r.stage_results) out.push_back(s.status);
  return out;
}

}  // namespace

TEST_CASE("workspace: unpacked tree matches the commit, modes included") {
  testutil::TempDir tmp;
  auto src = testutil::make_tree(tmp.path() / "src", {{"a/run.sh", "echo hi\n"}, {"b.txt", "data\n"}});
  const std::string commit = store::scan_directory(src).digest().hex();
  std::string tar = store::write_tar({{"a/run.sh", true, "echo hi\n"}, {"b.txt", false, "data\n"}});

  fs::path ws = tmp.path() / "ws";
  fs::create_directories(ws);
  populate_workspace(tar, ws, commit);
  struct stat st {};
  REQUIRE(::stat((ws / "a/run.sh").c_str(), &st) == 0);
  CHECK((st.st_mode & 0777) == 0755);
  REQUIRE(::stat((ws / "b.txt").c_str(), &st) == 0);
  CHECK((st.st_mode & 0777) == 0644);

  SUBCASE("executable bit is part of the digest") {
    std::string flipped = store::write_tar({{"a/run.sh", false, "echo hi\n"}, {"b.txt", false, "data\n"}});
    fs::path w2 = tmp.path() / "w2";
    fs::create_directories(w2);
    CHECK(code_of([&] { populate_workspace(flipped, w2, commit); }) == Errc::kDigestMismatch);
  }
  SUBCASE("altered content") {
    std::string other = store::write_tar({{"a/run.sh", true, "echo HI\n"}, {"b.txt", false, "data\n"}});
    fs::path w3 = tmp.path() / "w3";
    fs::create_directories(w3);
    CHECK(code_of([&] { populate_workspace(other, w3, commit); }) == Errc::kDigestMismatch);
  }
  SUBCASE("corrupted archive") {
    std::string bad = tar;
    bad[150] ^= 0x5a;  // inside the first header's checksum range
    fs::path w4 = tmp.path() / "w4";
    fs::create_directories(w4);
    CHECK(code_of([&] { populate_workspace(bad, w4, commit); }) == Errc::kDigestMismatch);
  }
}

TEST_CASE("log forwarder: server log equals the pushed bytes under faults") {
  for (unsigned seed : {1u, 2u, 3u, 4u, 5u}) {
    ServerFixture f;
    f.push({{".labci.yml", "run: [x]\n"}});
    LocalClient local(f.coord, f.runner());
    auto job = local.claim({});
    REQUIRE(job);
    FlakyClient flaky(local, 0.3, seed);
    ForwarderOptions opts;
    opts.flush_interval = 2ms;
    opts.max_chunk = 37;
    opts.backoff_cap = 5ms;
    std::mt19937 rng(seed);
    std::string expected;
    {
      LogForwarder fwd(flaky, job->job_id, opts);
      for (int i = 0; i < 200; ++i) {
        std::string piece(std::uniform_int_distribution<int>(0, 90)(rng), 'a');
        for (auto& ch : piece) ch = static_cast<char>(std::uniform_int_distribution<int>(0, 255)(rng));
        expected += piece;
        fwd.push(piece);
        if (i % 50 == 0) std::this_thread::sleep_for(3ms);
      }
      CHECK(fwd.close());
      CHECK(fwd.transcript() == expected);
    }
    CHECK(flaky.faults.load() > 0);
    CHECK(f.coord.get_log(job->job_id) == expected);
  }
}

TEST_CASE("log forwarder: refusal is reported, not retried forever") {
  ServerFixture f;
  f.push({{".labci.yml", "run: [x]\n"}});
  const std::string token = f.runner();
  LocalClient local(f.coord, token);
  auto job = local.claim({});
  REQUIRE(job);
  local.append_log(job->job_id, 0, "a");
  pipeline::JobResult r;
  r.overall = JobState::kFailed;
  f.coord.complete_job(token, job->job_id, r);
  LogForwarder fwd(local, job->job_id);
  fwd.push("late\n");
  CHECK_FALSE(fwd.close());
  CHECK(f.coord.get_log(job->job_id) == "a");
}

TEST_CASE("simulated scheduler: pending for delay ticks, then running, then done") {
  testutil::TempDir tmp;
  SimulatedSchedulerConfig cfg;
  cfg.delay_ticks = 3;
  SimulatedScheduler sched(cfg, 200ms);
  auto id = sched.submit({tmp.path(), {"echo one", "echo two", "exit 4"}, {}});
  std::vector<BatchState> seen;
  BatchPoll p;
  for (int i = 0; i < 2000; ++i) {
    p = sched.poll(id);
    if (seen.empty() || seen.back() != p.state) seen.push_back(p.state);
    if (p.state == BatchState::kDone) break;
    std::this_thread::sleep_for(1ms);
  }
  CHECK(seen == std::vector<BatchState>{BatchState::kPending, BatchState::kRunning, BatchState::kDone});
  CHECK(p.exit_code == 4);
  CHECK(sched.fetch_output(id, 0) == std::vector<std::string>{"one", "two"});
  CHECK(sched.fetch_output(id, 1) == std::vector<std::string>{"two"});

  SUBCASE("the first delay_ticks polls are pending") {
    auto id2 = sched.submit({tmp.path(), {"true"}, {}});
    for (int i = 0; i < 3; ++i) CHECK(sched.poll(id2).state == BatchState::kPending);
    CHECK(sched.poll(id2).state == BatchState::kRunning);
  }
}

TEST_CASE("simulated scheduler: refusal and loss") {
  testutil::TempDir tmp;
  SimulatedSchedulerConfig cfg;
  cfg.max_queue = 1;
  cfg.drop_after = 0;
  SimulatedScheduler sched(cfg);
  CHECK(code_of([&] { sched.submit({tmp.path(), {}, {}}); }) == Errc::kSubmissionRefused);
  auto id = sched.submit({tmp.path(), {"true"}, {}});
  CHECK(code_of([&] { sched.submit({tmp.path(), {"true"}, {}}); }) == Errc::kSubmissionRefused);
  CHECK(sched.poll(id).state == BatchState::kLost);

  CHECK(code_of([] { scheduler_config_from_json(nlohmann::json{{"capacity", 0}}); }) == Errc::kInvalidArgument);
  CHECK(code_of([] { scheduler_config_from_json(nlohmann::json{{"tick_ms", "x"}}); }) == Errc::kInvalidArgument);
  auto c = scheduler_config_from_json(nlohmann::json{{"delay_ticks", 2}});
  CHECK(c.delay_ticks == 2);
  CHECK(c.capacity == 1);
}

TEST_CASE("batch bridge: lost batch fails the stage with batch_lost") {
  testutil::TempDir tmp;
  SimulatedSchedulerConfig cfg;
  cfg.drop_after = 0;
  BatchBridgeBackend bridge(std::make_shared<SimulatedScheduler>(cfg), 1ms);
  pipeline::StageRequest req{tmp.path(), "run", {"echo x"}, {}, Clock::now() + 10s};
  auto out = bridge.run_stage(req, [](std::string_view) {}, {});
  CHECK(out.status == StageStatus::kFailed);
  CHECK(out.note == "batch_lost");
  CHECK(bridge.identity().name == "batch_bridge");
}

TEST_CASE("batch bridge: timeout and cancel") {
  testutil::TempDir tmp;
  auto sched = std::make_shared<SimulatedScheduler>(SimulatedSchedulerConfig{}, 200ms);
  BatchBridgeBackend bridge(sched, 2ms);
  auto t0 = std::chrono::steady_clock::now();
  pipeline::StageRequest req{tmp.path(), "run", {"sleep 30"}, {}, Clock::now() + 300ms};
  auto out = bridge.run_stage(req, [](std::string_view) {}, {});
  CHECK(out.status == StageStatus::kTimedOut);
  CHECK(std::chrono::steady_clock::now() - t0 < 5s);

  std::stop_source stop;
  std::thread canceller([&] {
    std::this_thread::sleep_for(200ms);
    stop.request_stop();
  });
  req.deadline = Clock::now() + 60s;
  out = bridge.run_stage(req, [](std::string_view) {}, stop.get_token());
  canceller.join();
  CHECK(out.status == StageStatus::kFailed);
  CHECK(out.canceled);
  CHECK(out.note == "canceled");
}

TEST_CASE("agent: runs a job end to end and cleans up") {
  ServerFixture f;
  auto b = f.push(kDeterministic);
  LocalClient client(f.coord, f.runner());
  Agent agent(fast_config(f.tmp.path() / "ws"), client);
  CHECK(agent.run_until_idle() == 1);
  auto job = f.coord.get_job(b.jobs[0].job_id);
  CHECK(job.state == JobState::kSucceeded);
  REQUIRE(job.result);
  CHECK(statuses(*job.result) == std::vector<StageStatus>(4, StageStatus::kSucceeded));
  CHECK(job.artifacts.entries.size() == 2);
  CHECK(f.coord.get_artifact(job.job_id, "max.txt") == "16\n");
  const std::string log = f.coord.get_log(job.job_id);
  CHECK(log.find("[info] os_name=linux") != std::string::npos);
  CHECK(log.find("[info] backend=local") != std::string::npos);
  CHECK(f.coord.ledger("lab/exp", b.commit_id).size() == 1);
  CHECK(agent.retained().empty());
  CHECK(fs::is_empty(f.tmp.path() / "ws"));
}

TEST_CASE("agent: failed workspaces are kept up to the cap") {
  ServerFixture f;
  LocalClient client(f.coord, f.runner());
  auto cfg = fast_config(f.tmp.path() / "ws");
  cfg.retained_failed_cap = 2;
  Agent agent(cfg, client);
  for (int i = 0; i < 3; ++i) {
    f.push({{".labci.yml", "run: [exit 3]\n"}, {"n.txt", std::to_string(i)}});
  }
  CHECK(agent.run_until_idle() == 3);
  REQUIRE(agent.retained().size() == 2);
  int dirs = 0;
  for (const auto& e : fs::directory_iterator(f.tmp.path() / "ws")) dirs += e.is_directory() ? 1 : 0;
  CHECK(dirs == 2);
  for (const auto& p : agent.retained()) CHECK(fs::exists(p / "n.txt"));
}

TEST_CASE("agent: network faults during reporting are retried") {
  ServerFixture f;
  auto b = f.push(kDeterministic);
  LocalClient local(f.coord, f.runner());
  FlakyClient flaky(local, 0.4, 11);
  auto cfg = fast_config(f.tmp.path() / "ws");
  cfg.backoff_cap = 5ms;
  Agent agent(cfg, flaky);
  auto outcome = agent.run_once();
  REQUIRE(outcome);
  CHECK(outcome->reported);
  auto job = f.coord.get_job(b.jobs[0].job_id);
  CHECK(job.state == JobState::kSucceeded);
  CHECK(f.coord.get_log(job.job_id) == outcome->transcript);
}

TEST_CASE("agent: an unusable snapshot fails the job with an internal entry") {
  ServerFixture f;
  auto b = f.push({{".labci.yml", "install: [a]\nrun: [b]\n"}});
  LocalClient local(f.coord, f.runner());
  FlakyClient client(local, 0.0, 1);
  client.fetch_override = store::write_tar({{"other.txt", false, "tampered\n"}});
  Agent agent(fast_config(f.tmp.path() / "ws"), client);
  REQUIRE(agent.run_once());
  auto job = f.coord.get_job(b.jobs[0].job_id);
  CHECK(job.state == JobState::kFailed);
  REQUIRE(job.result);
  const auto& r = job.result->stage_results;
  REQUIRE(r.size() == 4);
  CHECK(r[0].stage == "info");
  CHECK(r[1].status == StageStatus::kSkipped);
  CHECK(r[2].status == StageStatus::kSkipped);
  CHECK(r[3].stage == "internal");
  CHECK(r[3].note.find("digest_mismatch") == 0);
  CHECK(f.coord.get_log(job.job_id).find("workspace preparation failed") != std::string::npos);
}

TEST_CASE("agent: cancel reaches a running job through the heartbeat") {
  ServerFixture f;
  auto b = f.push({{".labci.yml", "run: [sleep 30]\n"}});
  LocalClient client(f.coord, f.runner());
  Agent agent(fast_config(f.tmp.path() / "ws"), client);
  auto t0 = std::chrono::steady_clock::now();
  std::thread canceller([&] {
    while (f.coord.get_job(b.jobs[0].job_id).state != JobState::kRunning) std::this_thread::sleep_for(5ms);
    std::this_thread::sleep_for(200ms);
    f.coord.cancel_build(b.build_id);
  });
  auto outcome = agent.run_once();
  canceller.join();
  REQUIRE(outcome);
  CHECK(outcome->overall == JobState::kCanceled);
  CHECK(std::chrono::steady_clock::now() - t0 < 5s);
  CHECK(f.coord.get_build(b.build_id).status == server::BuildStatus::kCanceled);
}

TEST_CASE("backends: local and batch bridge agree on statuses and artifacts") {
  auto run_with = [](BackendKind kind) {
    ServerFixture f;
    auto b = f.push(kDeterministic);
    LocalClient client(f.coord, f.runner());
    auto cfg = fast_config(f.tmp.path() / "ws", kind);
    cfg.scheduler.delay_ticks = 2;
    Agent agent(cfg, client);
    agent.run_until_idle();
    auto job = f.coord.get_job(b.jobs[0].job_id);
    REQUIRE(job.result);
    return std::make_pair(statuses(*job.result), job.artifacts.entries);
  };
  auto local = run_with(BackendKind::kLocal);
  auto batch = run_with(BackendKind::kBatchBridge);
  CHECK(local.first == batch.first);
  CHECK(local.second == batch.second);
  CHECK(local.second.size() == 2);
}

TEST_CASE("runner config validation") {
  RunnerConfig c = fast_config("/tmp/x");
  CHECK_NOTHROW(validate(c));
  c.poll_interval = 1s;
  CHECK(code_of([&] { validate(c); }) == Errc::kInvalidArgument);
  c = fast_config("");
  CHECK(code_of([&] { validate(c); }) == Errc::kInvalidArgument);
  CHECK(parse_backend_kind("batch-sim") == BackendKind::kBatchBridge);
  CHECK(parse_backend_kind("local") == BackendKind::kLocal);
  CHECK(!parse_backend_kind("slurm"));
}
