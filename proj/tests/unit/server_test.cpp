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

#include <atomic>
#include <fstream>
#include <functional>
#include <mutex>
#include <set>
#include <thread>

#include "doctest.h"

#include "../support/fixtures.hpp"
#include "common/digest.hpp"
#include "common/error.hpp"
#include "runner/client.hpp"
#include "server/http_api.hpp"
#include "server/journal.hpp"
#include "store/blob_store.hpp"
#include "store/snapshot.hpp"
#include "store/tar.hpp"
#include "test_util.hpp"

using namespace labci;
using namespace labci::server;
using pipeline::JobResult;
using pipeline::JobState;
using pipeline::StageResult;
using pipeline::StageStatus;
using testutil::ServerFixture;

namespace {

const std::map<std::string, std::string> kSimple = {
    {".labci.yml", "language: shell\nrun:\n  - echo hi\n"},
    {"data.txt", "1 2 3\n"},
};

const std::map<std::string, std::string> kMatrix = {
    {".labci.yml", "run: [echo $SHARD]\nmatrix:\n  - env: {SHARD: '0'}\n  - env: {SHARD: '1'}\n"},
};

JobResult done(JobState overall = JobState::kSucceeded) {
  JobResult r;
  StageResult info;
  info.stage = "info";
  info.status = StageStatus::kSucceeded;
  StageResult run;
  run.stage = "run";
  run.status = overall == JobState::kSucceeded ? StageStatus::kSucceeded : StageStatus::kFailed;
  run.exit_code = overall == JobState::kSucceeded ? 0 : 1;
  r.stage_results = {info, run};
  r.overall = overall;
  return r;
}

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return Errc::kOk;
}

}  // namespace

TEST_CASE("derive_build_status") {
  using S = JobState;
  CHECK(derive_build_status(true, {}) == BuildStatus::kConfigError);
  CHECK(derive_build_status(false, {S::kQueued, S::kQueued}) == BuildStatus::kPending);
  CHECK(derive_build_status(false, {S::kQueued, S::kSucceeded}) == BuildStatus::kRunning);
  CHECK(derive_build_status(false, {S::kSucceeded, S::kSucceeded}) == BuildStatus::kSucceeded);
  CHECK(derive_build_status(false, {S::kCanceled, S::kTimedOut}) == BuildStatus::kTimedOut);
  CHECK(derive_build_status(false, {S::kTimedOut, S::kFailed}) == BuildStatus::kFailed);
  CHECK(derive_build_status(false, {S::kSucceeded, S::kCanceled}) == BuildStatus::kCanceled);
}

TEST_CASE("push: one build per event id, one job per matrix entry") {
  ServerFixture f;
  auto a = f.push(kMatrix, "lab/exp", "e1");
  auto again = f.coord.ingest_push({"lab/exp", a.commit_id, "", "e1"});
  CHECK(again.build_id == a.build_id);
  CHECK(f.coord.list_builds("lab/exp").size() == 1);
  REQUIRE(a.jobs.size() == 2);
  CHECK(a.jobs[0].matrix_index == 0);
  CHECK(a.jobs[1].matrix_index == 1);
  CHECK(a.status == BuildStatus::kPending);
  CHECK(a.number == 1);

  // Same commit, new event: a second build.
  auto b = f.coord.ingest_push({"lab/exp", a.commit_id, "", "e2"});
  CHECK(b.build_id != a.build_id);
  CHECK(b.number == 2);
  CHECK(b.commit_id == a.commit_id);
}

TEST_CASE("push: snapshot resolution errors") {
  ServerFixture f;
  CHECK(code_of([&] { f.coord.ingest_push({"lab/exp", "", "/nonexistent/dir", "x"}); }) == Errc::kSnapshotNotFound);
  CHECK(code_of([&] { f.coord.ingest_push({"lab/exp", std::string(64, 'a'), "", "y"}); }) == Errc::kSnapshotNotFound);
  auto dir = testutil::make_tree(f.tmp.path() / "t", kSimple);
  CHECK(code_of([&] { f.coord.ingest_push({"lab/exp", std::string(64, 'b'), dir.string(), "z"}); }) ==
        Errc::kDigestMismatch);
  CHECK(code_of([&] { f.coord.ingest_push({"lab/exp", "", dir.string(), ""}); }) == Errc::kInvalidArgument);
}

TEST_CASE("push: uploaded tarball as snapshot") {
  ServerFixture f;
  auto dir = testutil::make_tree(f.tmp.path() / "t", kSimple);
  std::string commit = store::scan_directory(dir).digest().hex();
  std::string tar = store::write_tar({{".labci.yml", false, kSimple.at(".labci.yml")}, {"data.txt", false, "1 2 3\n"}});
  std::string blob = f.coord.put_blob(tar);
  auto b = f.coord.ingest_push({"lab/exp", commit, blob, "tar-1"});
  CHECK(b.commit_id == commit);
  CHECK(b.jobs.size() == 1);
  // Served snapshot unpacks to the same tree.
  std::vector<store::TarEntry> entries = store::read_tar(f.coord.snapshot_tar(commit));
  CHECK(entries.size() == 2);
}

TEST_CASE("push: missing or invalid config gives a config_error build with no jobs") {
  ServerFixture f;
  auto none = f.push({{"README", "x\n"}});
  CHECK(none.status == BuildStatus::kConfigError);
  CHECK(none.jobs.empty());
  CHECK(none.config_log.find(".labci.yml") != std::string::npos);

  auto bad = f.push({{".labci.yml", "run: [a\n"}});
  CHECK(bad.status == BuildStatus::kConfigError);
  CHECK(!bad.config_log.empty());
}

TEST_CASE("trigger: stage filter and its errors") {
  ServerFixture f;
  auto b = f.push({{".labci.yml", "install: [a]\nbuild: [b]\nrun: [c]\n"}});
  auto t = f.coord.trigger_build("lab/exp", b.commit_id, std::vector<config::Stage>{config::Stage::kRun});
  REQUIRE(t.jobs.size() == 1);
  auto stages = config::effective_stages(t.jobs[0].spec);
  CHECK(stages == std::vector<config::Stage>{config::Stage::kInfo, config::Stage::kRun});

  const auto before = f.coord.list_builds("lab/exp").size();
  CHECK(code_of([&] {
          f.coord.trigger_build("lab/exp", b.commit_id, std::vector<config::Stage>{config::Stage::kDeploy});
        }) == Errc::kEmptyStagePlan);
  CHECK(f.coord.list_builds("lab/exp").size() == before);
  CHECK(code_of([&] { f.coord.trigger_build("lab/exp", std::string(64, 'c'), std::nullopt); }) ==
        Errc::kUnknownCommit);
  CHECK(code_of([&] { f.coord.trigger_build("lab/exp", "not-hex", std::nullopt); }) == Errc::kUnknownCommit);
}

TEST_CASE("claim: exactly one of many concurrent claimers wins") {
  ServerFixture f;
  std::vector<std::string> tokens;
  for (int i = 0; i < 8; ++i) tokens.push_back(f.runner());
  for (int trial = 0; trial < 50; ++trial) {
    f.push(kSimple, "lab/exp", "claim-" + std::to_string(trial));
    std::atomic<int> wins{0};
    std::mutex mu;
    std::string winner;
    std::int64_t job_id = 0;
    std::vector<std::thread> threads;
    for (const auto& t : tokens) {
      threads.emplace_back([&, t] {
        if (auto j = f.coord.claim_job(t, std::nullopt)) {
          ++wins;
          std::lock_guard lock(mu);
          winner = t;
          job_id = j->job_id;
        }
      });
    }
    for (auto& th : threads) th.join();
    REQUIRE(wins.load() == 1);
    // Release the slot for the next trial.
    f.coord.heartbeat(winner, job_id);
    f.coord.complete_job(winner, job_id, done());
  }
}

TEST_CASE("claim: FIFO, parallel cap and os matching") {
  ServerFixture f(2);
  auto b = f.push({{".labci.yml", "run: [x]\nmatrix:\n  - env: {I: '0'}\n  - env: {I: '1'}\n  - env: {I: '2'}\n"
                                  "  - env: {I: '3'}\n"}});
  auto r = f.runner();
  auto mac = f.coord.register_runner(pipeline::RunnerKind::kSelfHosted, {"macos", {}}).token;
  CHECK(!f.coord.claim_job(mac, std::nullopt));

  auto j1 = f.coord.claim_job(r, std::nullopt);
  auto j2 = f.coord.claim_job(r, std::nullopt);
  REQUIRE(j1);
  REQUIRE(j2);
  CHECK(j1->job_id == b.jobs[0].job_id);
  CHECK(j2->job_id == b.jobs[1].job_id);
  CHECK(!f.coord.claim_job(r, std::nullopt));
  auto sched = f.coord.scheduler();
  CHECK(sched.active_jobs.size() == 2);
  CHECK(sched.queued == 2);

  f.coord.heartbeat(r, j1->job_id);
  f.coord.complete_job(r, j1->job_id, done());
  auto j3 = f.coord.claim_job(r, std::nullopt);
  REQUIRE(j3);
  CHECK(j3->job_id == b.jobs[2].job_id);
  CHECK(f.coord.scheduler().peak_active == 2);
  CHECK(code_of([&] { f.coord.claim_job("bogus", std::nullopt); }) == Errc::kAuth);
}

TEST_CASE("logs: ordered chunks, duplicate acks, gaps and ownership") {
  ServerFixture f;
  auto b = f.push(kSimple);
  auto r = f.runner();
  auto other = f.runner();
  auto job = f.coord.claim_job(r, std::nullopt);
  REQUIRE(job);
  const auto id = job->job_id;

  f.coord.append_log(r, id, 0, "alpha\n");
  CHECK(f.coord.get_job(id).state == JobState::kRunning);
  f.coord.append_log(r, id, 1, "beta\n");
  f.coord.append_log(r, id, 1, "beta\n");  // retry of an acked chunk
  CHECK(code_of([&] { f.coord.append_log(r, id, 3, "gamma\n"); }) == Errc::kOutOfOrderChunk);
  CHECK(code_of([&] { f.coord.append_log(other, id, 2, "x"); }) == Errc::kAuth);
  CHECK(code_of([&] { f.coord.append_log("nope", id, 2, "x"); }) == Errc::kAuth);
  CHECK(f.coord.get_log(id) == "alpha\nbeta\n");
  CHECK(f.coord.get_log(id, 6) == "beta\n");
  CHECK(f.coord.get_log(id, 100).empty());

  f.coord.complete_job(r, id, done());
  CHECK(code_of([&] { f.coord.append_log(r, id, 2, "late\n"); }) == Errc::kJobNotRunning);
  (void)b;
}

TEST_CASE("artifacts and completion produce one resolvable ledger entry") {
  ServerFixture f;
  auto b = f.push(kSimple);
  auto r = f.runner();
  auto job = f.coord.claim_job(r, std::nullopt);
  REQUIRE(job);
  const auto id = job->job_id;
  f.coord.append_log(r, id, 0, "line\n");

  CHECK(code_of([&] { f.coord.upload_artifact(r, id, "../escape.txt", "x"); }) == Errc::kPathEscapesWorkspace);
  CHECK(code_of([&] { f.coord.upload_artifact(r, id, "/abs.txt", "x"); }) == Errc::kPathEscapesWorkspace);
  Digest d = f.coord.upload_artifact(r, id, "out/result.csv", "x,y\n1,2\n");
  CHECK(d.hex() == "81bf9fa83c6f7f151bd491a98cd7d933de3965289e3ebd77c6c425f7eaa16392");
  CHECK(f.coord.upload_artifact(r, id, "out/result.csv", "x,y\n1,2\n") == d);

  JobResult result = done();
  result.artifacts.job_id = id;
  result.artifacts.record({"out/missing.csv", 3, Digest::of("abc")});
  CHECK(code_of([&] { f.coord.complete_job(r, id, result); }) == Errc::kInvalidArgument);

  result.artifacts.entries.clear();
  result.artifacts.record({"out/result.csv", 8, d});
  pipeline::EnvironmentFingerprint fp;
  fp.os_name = "linux";
  fp.hostname = "node";
  result.fingerprint = fp;
  f.coord.complete_job(r, id, result);
  CHECK(f.coord.get_job(id).state == JobState::kSucceeded);
  CHECK(f.coord.get_build(b.build_id).status == BuildStatus::kSucceeded);
  CHECK(f.coord.get_artifact(id, "out/result.csv") == "x,y\n1,2\n");
  CHECK(code_of([&] { f.coord.get_artifact(id, "nope"); }) == Errc::kNotFound);
  CHECK(f.coord.get_fingerprint(id).hostname == "node");

  // Completing twice is an illegal transition and adds no ledger entry.
  CHECK(code_of([&] { f.coord.complete_job(r, id, result); }) == Errc::kIllegalTransition);
  auto entries = f.coord.ledger("lab/exp", b.commit_id);
  REQUIRE(entries.size() == 1);
  const auto& e = entries[0];
  CHECK(e.job_id == id);
  CHECK(e.overall == "succeeded");
  CHECK(e.log_digest == Digest::of("line\n").hex());
  CHECK(e.commit_id == b.commit_id);
  store::BlobStore blobs(f.tmp.path() / "data" / "blobs");
  CHECK(blobs.get(*Digest::from_hex(e.artifact_manifest_digest)) == store::canonical_bytes(f.coord.get_job(id).artifacts));
  CHECK(blobs.contains(*Digest::from_hex(e.fingerprint_digest)));
  // commit_id resolves to the stored snapshot.
  CHECK(!f.coord.snapshot_tar(e.commit_id).empty());
}

TEST_CASE("cancel: queued jobs end at once, active jobs are told via heartbeat") {
  ServerFixture f;
  auto b = f.push(kMatrix);
  auto r = f.runner();
  auto job = f.coord.claim_job(r, std::nullopt);
  REQUIRE(job);
  CHECK(!f.coord.heartbeat(r, job->job_id));
  f.coord.cancel_build(b.build_id);
  CHECK(f.coord.get_job(b.jobs[1].job_id).state == JobState::kCanceled);
  CHECK(f.coord.get_job(job->job_id).cancel_requested);
  CHECK(f.coord.heartbeat(r, job->job_id));
  CHECK(f.coord.get_build(b.build_id).status == BuildStatus::kRunning);
  f.coord.complete_job(r, job->job_id, done(JobState::kCanceled));
  CHECK(f.coord.get_build(b.build_id).status == BuildStatus::kCanceled);
  CHECK(f.coord.ledger("lab/exp", b.commit_id).size() == 2);
}

TEST_CASE("silent runner: jobs fail with runner_lost after three intervals") {
  ServerFixture f(4, std::chrono::milliseconds(100));
  auto b = f.push(kSimple);
  auto r = f.runner();
  auto job = f.coord.claim_job(r, std::nullopt);
  REQUIRE(job);
  CHECK(f.coord.sweep_lost_runners(Clock::now() + std::chrono::milliseconds(200)) == 0);
  CHECK(f.coord.sweep_lost_runners(Clock::now() + std::chrono::milliseconds(400)) == 1);
  auto view = f.coord.get_job(job->job_id);
  CHECK(view.state == JobState::kFailed);
  CHECK(view.reason == "runner_lost");
  CHECK(f.coord.ledger("lab/exp", b.commit_id).size() == 1);
  // The late runner cannot report any more.
  CHECK(code_of([&] { f.coord.complete_job(r, job->job_id, done()); }) == Errc::kIllegalTransition);
}

TEST_CASE("restart: builds, log bytes and ledger survive") {
  testutil::TempDir tmp;
  const fs::path data = tmp.path() / "data";
  auto dir = testutil::make_tree(tmp.path() / "src", kMatrix);
  std::int64_t build_id = 0;
  std::int64_t done_job = 0;
  std::int64_t open_job = 0;
  std::string token;
  {
    Coordinator c({data, 4, std::chrono::seconds(10)});
    auto b = c.ingest_push({"lab/exp", "", dir.string(), "e"});
    build_id = b.build_id;
    token = c.register_runner(pipeline::RunnerKind::kCloud, {}).token;
    auto j = c.claim_job(token, std::nullopt);
    done_job = j->job_id;
    c.append_log(token, done_job, 0, "first\n");
    c.append_log(token, done_job, 1, "second\n");
    c.complete_job(token, done_job, done());
    auto k = c.claim_job(token, std::nullopt);
    open_job = k->job_id;
    c.append_log(token, open_job, 0, "partial\n");
  }
  // A torn journal tail is dropped on recovery.
  {
    std::ofstream out(data / "journal.jsonl", std::ios::app | std::ios::binary);
    out << "{\"t\":\"log\",\"job\":";
  }
  Coordinator c({data, 4, std::chrono::seconds(10)});
  auto b = c.get_build(build_id);
  CHECK(b.jobs.size() == 2);
  CHECK(c.get_job(done_job).state == JobState::kSucceeded);
  CHECK(c.get_log(done_job) == "first\nsecond\n");
  CHECK(c.get_job(open_job).state == JobState::kRunning);
  CHECK(c.get_log(open_job) == "partial\n");
  CHECK(c.ledger("lab/exp", b.commit_id).size() == 1);
  // The runner's token is still valid and the sequence continues.
  c.append_log(token, open_job, 1, "more\n");
  c.complete_job(token, open_job, done(JobState::kFailed));
  CHECK(c.get_build(build_id).status == BuildStatus::kFailed);
  CHECK(c.ledger("lab/exp", b.commit_id).size() == 2);
  // Event ids stay deduplicated.
  CHECK(c.ingest_push({"lab/exp", "", dir.string(), "e"}).build_id == build_id);
}

TEST_CASE("journal: records round trip and a torn tail is truncated") {
  testutil::TempDir tmp;
  const fs::path file = tmp.path() / "j.jsonl";
  {
    Journal j(file);
    j.append({{"t", "a"}, {"n", 1}});
    j.append({{"t", "b"}, {"n", 2}});
  }
  {
    std::ofstream out(file, std::ios::app | std::ios::binary);
    out << "{\"t\":\"c\"";
  }
  Journal j(file);
  REQUIRE(j.recovered().size() == 2);
  CHECK(j.recovered()[1]["n"] == 2);
  j.append({{"t", "d"}});
  Journal again(file);
  CHECK(again.recovered().size() == 3);
}

TEST_CASE("http: status mapping and address parsing") {
  CHECK(http_status_for(Errc::kAuth) == 401);
  CHECK(http_status_for(Errc::kNotFound) == 404);
  CHECK(http_status_for(Errc::kUnknownCommit) == 404);
  CHECK(http_status_for(Errc::kOutOfOrderChunk) == 409);
  CHECK(http_status_for(Errc::kIllegalTransition) == 409);
  CHECK(http_status_for(Errc::kEmptyStagePlan) == 422);
  CHECK(http_status_for(Errc::kValidation) == 400);
  CHECK(http_status_for(Errc::kStorage) == 500);
  CHECK(parse_addr("127.0.0.1:8975") == std::pair<std::string, int>{"127.0.0.1", 8975});
  CHECK(parse_addr("9000") == std::pair<std::string, int>{"127.0.0.1", 9000});
  CHECK(code_of([] { parse_addr("host:notaport"); }) == Errc::kInvalidArgument);
}

TEST_CASE("http: runner protocol and public reads over the wire") {
  ServerFixture f;
  HttpService http(f.coord, "127.0.0.1", 0);
  http.start();
  REQUIRE(http.port() > 0);
  runner::HttpClient client("127.0.0.1:" + std::to_string(http.port()));

  auto dir = testutil::make_tree(f.tmp.path() / "t", kSimple);
  std::string commit = store::scan_directory(dir).digest().hex();
  std::string tar = store::write_tar({{".labci.yml", false, kSimple.at(".labci.yml")}, {"data.txt", false, "1 2 3\n"}});
  CHECK(client.upload_snapshot(tar) == commit);
  auto pushed = client.push_event("lab/exp", commit, "", "wire-1");
  const std::int64_t build_id = pushed["build_id"];

  auto reg = client.register_runner(pipeline::RunnerKind::kSelfHosted, {});
  client.set_token(reg.token);
  auto job = client.claim({});
  REQUIRE(job);
  CHECK(!client.claim({}));
  const auto id = job->job_id;
  CHECK(client.fetch_snapshot(commit) == f.coord.snapshot_tar(commit));
  CHECK(!client.heartbeat(id));
  client.append_log(id, 0, std::string("bin\0ary\n", 8));
  CHECK(code_of([&] { client.append_log(id, 5, "x"); }) == Errc::kOutOfOrderChunk);
  std::string digest = client.upload_artifact(id, "a.txt", "artifact\n");
  CHECK(digest == Digest::of("artifact\n").hex());
  JobResult r = done();
  r.artifacts.job_id = id;
  r.artifacts.record({"a.txt", 9, *Digest::from_hex(digest)});
  client.complete(id, r);

  auto log = client.get_log(id);
  CHECK(log.bytes == std::string("bin\0ary\n", 8));
  CHECK(log.state == "succeeded");
  CHECK(client.get_log(id, 4).bytes == "ary\n");
  CHECK(client.get_artifact(id, "a.txt") == "artifact\n");
  CHECK(client.list_artifacts(id)["entries"].size() == 1);
  CHECK(client.get_build(build_id)["status"] == "succeeded");
  CHECK(client.list_builds("lab/exp").size() == 1);
  CHECK(client.ledger("lab/exp", commit).size() == 1);
  CHECK(client.get_job(id)["state"] == "succeeded");
  CHECK(code_of([&] { client.get_job(999); }) == Errc::kNotFound);
  CHECK(code_of([&] { client.trigger("lab/exp", std::string(64, 'e'), std::nullopt); }) == Errc::kUnknownCommit);

  runner::HttpClient bad("127.0.0.1:" + std::to_string(http.port()), "wrong");
  CHECK(code_of([&] { bad.claim({}); }) == Errc::kAuth);
  http.stop();
  CHECK(code_of([&] { client.get_job(id); }) == Errc::kNetwork);
}

TEST_CASE("http: a taken address is reported") {
  ServerFixture f;
  HttpService a(f.coord, "127.0.0.1", 0);
  a.start();
  HttpService b(f.coord, "127.0.0.1", a.port());
  CHECK(code_of([&] { b.start(); }) == Errc::kAddressInUse);
}
