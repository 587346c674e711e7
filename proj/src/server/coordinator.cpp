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

#include "server/coordinator.hpp"

#include <openssl/rand.h>
#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <mutex>

#include "common/error.hpp"
#include "common/fsutil.hpp"

namespace labci::server {

using nlohmann::json;
using pipeline::JobEvent;

std::string_view build_status_name(BuildStatus s) noexcept {
  switch (s) {
    case BuildStatus::kPending: return "pending";
    case BuildStatus::kRunning: return "running";
    case BuildStatus::kSucceeded: return "succeeded";
    case BuildStatus::kFailed: return "failed";
    case BuildStatus::kTimedOut: return "timed_out";
    case BuildStatus::kCanceled: return "canceled";
    case BuildStatus::kConfigError: return "config_error";
  }
  return "pending";
}

BuildStatus derive_build_status(bool config_error, const std::vector<JobState>& jobs) {
  if (config_error) return BuildStatus::kConfigError;
  if (jobs.empty()) return BuildStatus::kSucceeded;
  bool all_queued = true;
  bool any_open = false;
  bool failed = false, timed_out = false, canceled = false;
  for (auto s : jobs) {
    if (s != JobState::kQueued) all_queued = false;
    if (!pipeline::is_terminal(s)) any_open = true;
    failed |= s == JobState::kFailed;
    timed_out |= s == JobState::kTimedOut;
    canceled |= s == JobState::kCanceled;
  }
  if (all_queued) return BuildStatus::kPending;
  if (any_open) return BuildStatus::kRunning;
  if (failed) return BuildStatus::kFailed;
  if (timed_out) return BuildStatus::kTimedOut;
  if (canceled) return BuildStatus::kCanceled;
  return BuildStatus::kSucceeded;
}

namespace {

json optional_time(const std::optional<Timestamp>& t) { return t ? json(format_rfc3339(*t)) : json(nullptr); }

std::optional<Timestamp> optional_time_from(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return parse_rfc3339(j.at(key).get<std::string>());
}

Timestamp time_from(const json& j, const char* key) {
  auto t = parse_rfc3339(j.at(key).get<std::string>());
  if (!t) throw Error(Errc::kInvalidArgument, std::string("bad timestamp in ") + key);
  return *t;
}

std::string random_token() {
  unsigned char raw[32];
  if (RAND_bytes(raw, sizeof raw) != 1) throw Error(Errc::kInternal, "random source unavailable");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned char c : raw) {
    out.push_back(hex[c >> 4]);
    out.push_back(hex[c & 15]);
  }
  return out;
}

std::string hash_token(const std::string& token) { return Digest::of(token).hex(); }

Digest parse_commit(const std::string& commit_id, Errc missing) {
  auto d = Digest::from_hex(commit_id);
  if (!d) throw Error(missing, "not a commit id: " + commit_id);
  return *d;
}

void validate_repo_id(const std::string& repo) {
  if (repo.empty() || repo.size() > 200) throw Error(Errc::kInvalidArgument, "repo_id must be 1-200 characters");
  for (char c : repo) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.' || c == '/')) {
      throw Error(Errc::kInvalidArgument, "repo_id may only contain letters, digits, '-', '_', '.', '/'");
    }
  }
}

}  // namespace

json to_json(const RunnerCapabilities& c) { return json{{"os", c.os}, {"tags", c.tags}}; }

RunnerCapabilities capabilities_from_json(const json& j) {
  RunnerCapabilities c;
  if (j.is_null()) return c;
  c.os = j.value("os", std::string("linux"));
  if (auto os = config::parse_os(c.os)) c.os = std::string(config::os_name(*os));
  c.tags = j.value("tags", std::vector<std::string>{});
  return c;
}

json to_json(const JobView& j) {
  return json{{"job_id", j.job_id},
              {"build_id", j.build_id},
              {"repo_id", j.repo_id},
              {"commit_id", j.commit_id},
              {"matrix_index", j.matrix_index},
              {"state", pipeline::state_name(j.state)},
              {"assigned_runner", j.assigned_runner ? json(*j.assigned_runner) : json(nullptr)},
              {"reason", j.reason},
              {"cancel_requested", j.cancel_requested},
              {"spec", config::to_json(j.spec)},
              {"log_size", j.log_size},
              {"artifacts", store::to_json(j.artifacts)},
              {"result", j.result ? pipeline::to_json(*j.result) : json(nullptr)},
              {"created_at", format_rfc3339(j.created_at)},
              {"claimed_at", optional_time(j.claimed_at)},
              {"finished_at", optional_time(j.finished_at)}};
}

JobView job_view_from_json(const json& j) {
  JobView v;
  v.job_id = j.at("job_id").get<std::int64_t>();
  v.build_id = j.at("build_id").get<std::int64_t>();
  v.repo_id = j.at("repo_id").get<std::string>();
  v.commit_id = j.at("commit_id").get<std::string>();
  v.matrix_index = j.at("matrix_index").get<int>();
  auto state = pipeline::parse_state(j.at("state").get<std::string>());
  if (!state) throw Error(Errc::kInvalidArgument, "bad job state");
  v.state = *state;
  if (!j.at("assigned_runner").is_null()) v.assigned_runner = j.at("assigned_runner").get<std::int64_t>();
  v.reason = j.value("reason", std::string());
  v.cancel_requested = j.value("cancel_requested", false);
  v.spec = config::job_spec_from_json(j.at("spec"));
  v.log_size = j.value("log_size", std::uint64_t{0});
  if (j.contains("artifacts") && !j.at("artifacts").is_null()) {
    v.artifacts = store::artifact_manifest_from_json(j.at("artifacts"));
  }
  if (j.contains("result") && !j.at("result").is_null()) v.result = pipeline::job_result_from_json(j.at("result"));
  v.created_at = time_from(j, "created_at");
  v.claimed_at = optional_time_from(j, "claimed_at");
  v.finished_at = optional_time_from(j, "finished_at");
  return v;
}

json to_json(const BuildView& b) {
  json jobs = json::array();
  for (const auto& j : b.jobs) jobs.push_back(to_json(j));
  return json{{"build_id", b.build_id},
              {"number", b.number},
              {"repo_id", b.repo_id},
              {"commit_id", b.commit_id},
              {"created_at", format_rfc3339(b.created_at)},
              {"status", build_status_name(b.status)},
              {"event_id", b.event_id},
              {"only_stages", b.only_stages},
              {"config_log", b.config_log},
              {"jobs", jobs}};
}

BuildView build_view_from_json(const json& j) {
  BuildView b;
  b.build_id = j.at("build_id").get<std::int64_t>();
  b.number = j.value("number", std::int64_t{0});
  b.repo_id = j.at("repo_id").get<std::string>();
  b.commit_id = j.at("commit_id").get<std::string>();
  b.created_at = time_from(j, "created_at");
  const auto status = j.at("status").get<std::string>();
  for (auto s : {BuildStatus::kPending, BuildStatus::kRunning, BuildStatus::kSucceeded, BuildStatus::kFailed,
                 BuildStatus::kTimedOut, BuildStatus::kCanceled, BuildStatus::kConfigError}) {
    if (build_status_name(s) == status) b.status = s;
  }
  b.event_id = j.value("event_id", std::string());
  b.only_stages = j.value("only_stages", std::vector<std::string>{});
  b.config_log = j.value("config_log", std::string());
  if (j.contains("jobs")) {
    for (const auto& job : j.at("jobs")) b.jobs.push_back(job_view_from_json(job));
  }
  return b;
}

json to_json(const SchedulerView& s) {
  return json{{"parallel_cap", s.parallel_cap},
              {"active_jobs", s.active_jobs},
              {"queued", s.queued},
              {"peak_active", s.peak_active}};
}

// ---- Coordinator ----

Coordinator::Coordinator(CoordinatorOptions options)
    : options_(std::move(options)),
      blobs_(options_.data_dir / "blobs"),
      snapshots_(options_.data_dir, blobs_),
      ledger_(options_.data_dir / "ledger.jsonl"),
      journal_(options_.data_dir / "journal.jsonl") {
  if (options_.parallel_cap < 1) throw Error(Errc::kInvalidArgument, "parallel cap must be at least 1");
  fs::create_directories(options_.data_dir / "logs");

  std::unique_lock lock(mu_);
  for (const auto& record : journal_.recovered()) replay(record);
  journal_.release_recovered();

  const Timestamp now = Clock::now();
  for (auto& [id, r] : runners_) r.last_seen = now;
  for (auto& [id, job] : jobs_) {
    // Bytes past the last acknowledged chunk were never committed.
    auto path = log_path(id);
    std::error_code ec;
    auto on_disk = fs::exists(path, ec) ? fs::file_size(path, ec) : 0;
    if (on_disk > job.view.log_size) {
      if (::truncate(path.c_str(), static_cast<off_t>(job.view.log_size)) != 0) {
        throw Error(Errc::kStorage, "cannot truncate log " + path.string());
      }
    } else if (on_disk < job.view.log_size) {
      job.view.log_size = on_disk;
    }
  }
  // A crash between the journal record and the ledger append leaves the
  // ledger one entry short; fill it in.
  for (const auto& [id, job] : jobs_) {
    if (pipeline::is_terminal(job.view.state) && !ledger_.contains_job(id)) append_ledger_for(job);
  }
}

Coordinator::~Coordinator() = default;

fs::path Coordinator::log_path(std::int64_t job_id) const {
  return options_.data_dir / "logs" / (std::to_string(job_id) + ".log");
}

void Coordinator::replay(const json& record) {
  const auto type = record.at("t").get<std::string>();
  if (type == "runner") {
    Runner r;
    r.id = record.at("runner_id").get<std::int64_t>();
    r.token_hash = record.at("token_sha256").get<std::string>();
    r.kind = pipeline::parse_runner_kind(record.at("kind").get<std::string>()).value_or(RunnerKind::kCloud);
    r.caps = capabilities_from_json(record.at("capabilities"));
    runner_by_token_[r.token_hash] = r.id;
    next_runner_id_ = std::max(next_runner_id_, r.id + 1);
    runners_[r.id] = std::move(r);
  } else if (type == "build") {
    Build b;
    b.view = build_view_from_json(record.at("build"));
    b.config_error = record.at("config_error").get<bool>();
    for (const auto& jr : record.at("jobs")) {
      Job job;
      job.view.job_id = jr.at("job_id").get<std::int64_t>();
      job.view.build_id = b.view.build_id;
      job.view.repo_id = b.view.repo_id;
      job.view.commit_id = b.view.commit_id;
      job.view.matrix_index = jr.at("matrix_index").get<int>();
      job.view.spec = config::job_spec_from_json(jr.at("spec"));
      job.view.created_at = b.view.created_at;
      job.view.artifacts.job_id = job.view.job_id;
      b.job_ids.push_back(job.view.job_id);
      next_job_id_ = std::max(next_job_id_, job.view.job_id + 1);
      jobs_[job.view.job_id] = std::move(job);
    }
    if (!b.view.event_id.empty()) build_by_event_[b.view.event_id] = b.view.build_id;
    builds_per_repo_[b.view.repo_id] = std::max(builds_per_repo_[b.view.repo_id], b.view.number);
    next_build_id_ = std::max(next_build_id_, b.view.build_id + 1);
    builds_[b.view.build_id] = std::move(b);
  } else {
    auto& job = jobs_.at(record.at("job").get<std::int64_t>());
    if (type == "claim") {
      job.view.state = JobState::kClaimed;
      job.view.assigned_runner = record.at("runner").get<std::int64_t>();
      job.view.claimed_at = time_from(record, "at");
    } else if (type == "start") {
      job.view.state = JobState::kRunning;
    } else if (type == "log") {
      job.next_seq = record.at("seq").get<std::int64_t>() + 1;
      job.view.log_size = record.at("size").get<std::uint64_t>();
    } else if (type == "artifact") {
      auto digest = Digest::from_hex(record.at("digest").get<std::string>());
      job.view.artifacts.record({record.at("path").get<std::string>(), record.at("size").get<std::uint64_t>(),
                                 digest.value_or(Digest())});
    } else if (type == "cancel") {
      job.view.cancel_requested = true;
    } else if (type == "complete") {
      job.view.result = pipeline::job_result_from_json(record.at("result"));
      job.view.result->artifacts = job.view.artifacts;
      job.view.state = job.view.result->overall;
      job.view.finished_at = time_from(record, "at");
    } else if (type == "state") {
      job.view.state = pipeline::parse_state(record.at("state").get<std::string>()).value_or(JobState::kFailed);
      job.view.reason = record.value("reason", std::string());
      job.view.finished_at = time_from(record, "at");
    } else {
      throw Error(Errc::kStorage, "unknown journal record type " + type);
    }
  }
}

BuildView Coordinator::ingest_push(const PushEvent& event) {
  validate_repo_id(event.repo_id);
  if (event.event_id.empty()) throw Error(Errc::kInvalidArgument, "event_id is required");
  {
    std::shared_lock lock(mu_);
    if (auto it = build_by_event_.find(event.event_id); it != build_by_event_.end()) {
      return view_of(builds_.at(it->second));
    }
  }

  std::optional<Digest> commit;
  if (!event.commit_id.empty()) commit = parse_commit(event.commit_id, Errc::kInvalidArgument);
  const auto& ref = event.snapshot_ref;
  if (!ref.empty() && !(commit && ref == commit->hex() && snapshots_.contains(*commit))) {
    std::optional<store::SnapshotStore::Imported> imported;
    std::error_code ec;
    if (Digest::is_hex(ref)) {
      auto blob = *Digest::from_hex(ref);
      if (!blobs_.contains(blob)) throw Error(Errc::kSnapshotNotFound, "no uploaded tarball with digest " + ref);
      imported = snapshots_.import_tar(blobs_.get(blob));
    } else if (fs::is_directory(ref, ec)) {
      imported = snapshots_.import_directory(ref);
    } else {
      throw Error(Errc::kSnapshotNotFound, "snapshot_ref does not resolve: " + ref);
    }
    if (commit && imported->commit_id != *commit) {
      throw Error(Errc::kDigestMismatch, "snapshot digest " + imported->commit_id.hex() + " does not match commit_id " +
                                             commit->hex());
    }
    commit = imported->commit_id;
  }
  if (!commit) throw Error(Errc::kInvalidArgument, "commit_id or snapshot_ref is required");
  if (!snapshots_.contains(*commit)) throw Error(Errc::kSnapshotNotFound, "snapshot not stored: " + commit->hex());

  std::unique_lock lock(mu_);
  if (auto it = build_by_event_.find(event.event_id); it != build_by_event_.end()) {
    return view_of(builds_.at(it->second));
  }
  return create_build(event.repo_id, *commit, event.event_id, std::nullopt);
}

BuildView Coordinator::trigger_build(const std::string& repo_id, const std::string& commit_id,
                                     const std::optional<std::vector<config::Stage>>& only_stages) {
  validate_repo_id(repo_id);
  Digest commit = parse_commit(commit_id, Errc::kUnknownCommit);
  if (!snapshots_.contains(commit)) throw Error(Errc::kUnknownCommit, "unknown commit " + commit_id);
  std::unique_lock lock(mu_);
  return create_build(repo_id, commit, "", only_stages);
}

BuildView Coordinator::create_build(const std::string& repo_id, const Digest& commit, const std::string& event_id,
                                    const std::optional<std::vector<config::Stage>>& only_stages) {
  Build b;
  b.view.repo_id = repo_id;
  b.view.commit_id = commit.hex();
  b.view.created_at = Clock::now();
  b.view.event_id = event_id;
  if (only_stages) {
    for (auto s : *only_stages) b.view.only_stages.emplace_back(config::stage_name(s));
  }

  std::vector<config::JobSpec> specs;
  auto text = snapshots_.read_file(commit, config::kConfigFileName);
  if (!text) {
    b.config_error = true;
    b.view.config_log = std::string("error: no ") + std::string(config::kConfigFileName) + " in snapshot\n";
  } else {
    try {
      auto cfg = config::parse_config(*text);
      for (const auto& w : cfg.warnings) {
        b.view.config_log += "warning: line " + std::to_string(w.line) + ": " + w.message + "\n";
      }
      specs = config::expand_matrix(cfg);
    } catch (const Error& e) {
      if (e.code() != Errc::kSyntax && e.code() != Errc::kValidation) throw;
      b.config_error = true;
      b.view.config_log += std::string("error: ") + e.what() + "\n";
    }
  }
  // Filtering errors reject the trigger before anything is recorded.
  if (only_stages && !b.config_error) {
    for (auto& spec : specs) spec = config::filter_stages(spec, *only_stages);
  }

  b.view.build_id = next_build_id_;
  b.view.number = builds_per_repo_[repo_id] + 1;
  json jobs = json::array();
  for (std::size_t i = 0; i < specs.size(); ++i) {
    jobs.push_back({{"job_id", next_job_id_ + static_cast<std::int64_t>(i)},
                    {"matrix_index", specs[i].matrix_index},
                    {"spec", config::to_json(specs[i])}});
  }
  json record{{"t", "build"}, {"build", to_json(b.view)}, {"config_error", b.config_error}, {"jobs", jobs}};
  journal_.append(record);
  replay(record);
  return view_of(builds_.at(b.view.build_id));
}

Registration Coordinator::register_runner(RunnerKind kind, const RunnerCapabilities& caps) {
  std::unique_lock lock(mu_);
  Registration reg{next_runner_id_, random_token()};
  json record{{"t", "runner"},
              {"runner_id", reg.runner_id},
              {"token_sha256", hash_token(reg.token)},
              {"kind", pipeline::runner_kind_name(kind)},
              {"capabilities", to_json(caps)},
              {"at", format_rfc3339(Clock::now())}};
  journal_.append(record);
  replay(record);
  runners_.at(reg.runner_id).last_seen = Clock::now();
  return reg;
}

Coordinator::Runner& Coordinator::authenticate(const std::string& token) {
  auto it = runner_by_token_.find(hash_token(token));
  if (token.empty() || it == runner_by_token_.end()) throw Error(Errc::kAuth, "invalid runner token");
  auto& r = runners_.at(it->second);
  r.last_seen = Clock::now();
  return r;
}

Coordinator::Job& Coordinator::owned_job(Runner& runner, std::int64_t job_id) {
  auto it = jobs_.find(job_id);
  if (it == jobs_.end()) throw Error(Errc::kNotFound, "no job " + std::to_string(job_id));
  if (it->second.view.assigned_runner != runner.id) {
    throw Error(Errc::kAuth, "job " + std::to_string(job_id) + " is not assigned to this runner");
  }
  return it->second;
}

int Coordinator::active_count() const {
  int n = 0;
  for (const auto& [id, job] : jobs_) {
    if (job.view.state == JobState::kClaimed || job.view.state == JobState::kRunning) ++n;
  }
  return n;
}

std::optional<JobView> Coordinator::claim_job(const std::string& token,
                                              const std::optional<RunnerCapabilities>& caps) {
  std::unique_lock lock(mu_);
  Runner& runner = authenticate(token);
  const RunnerCapabilities& effective = caps ? *caps : runner.caps;
  int active = active_count();
  if (active >= options_.parallel_cap) return std::nullopt;
  for (auto& [id, job] : jobs_) {
    if (job.view.state != JobState::kQueued) continue;
    if (config::os_name(job.view.spec.env.os) != effective.os) continue;
    JobState next = pipeline::advance(job.view.state, JobEvent::claimed());
    const Timestamp now = Clock::now();
    journal_.append({{"t", "claim"}, {"job", id}, {"runner", runner.id}, {"at", format_rfc3339(now)}});
    job.view.state = next;
    job.view.assigned_runner = runner.id;
    job.view.claimed_at = now;
    peak_active_ = std::max(peak_active_, active + 1);
    return job.view;
  }
  return std::nullopt;
}

void Coordinator::mark_running(Job& job) {
  if (job.view.state != JobState::kClaimed) return;
  JobState next = pipeline::advance(job.view.state, JobEvent::started());
  journal_.append({{"t", "start"}, {"job", job.view.job_id}});
  job.view.state = next;
}

void Coordinator::append_log(const std::string& token, std::int64_t job_id, std::int64_t seq,
                             std::string_view bytes) {
  std::unique_lock lock(mu_);
  Runner& runner = authenticate(token);
  Job& job = owned_job(runner, job_id);
  if (job.view.state != JobState::kClaimed && job.view.state != JobState::kRunning) {
    throw Error(Errc::kJobNotRunning, "job " + std::to_string(job_id) + " is " +
                                          std::string(pipeline::state_name(job.view.state)));
  }
  if (seq < 0) throw Error(Errc::kInvalidArgument, "seq must be non-negative");
  if (seq < job.next_seq) return;  // already applied
  if (seq > job.next_seq) {
    throw Error(Errc::kOutOfOrderChunk,
                "expected chunk " + std::to_string(job.next_seq) + ", got " + std::to_string(seq));
  }
  mark_running(job);
  fsutil::append_durable(log_path(job_id), bytes);
  const std::uint64_t size = job.view.log_size + bytes.size();
  journal_.append({{"t", "log"}, {"job", job_id}, {"seq", seq}, {"size", size}});
  job.view.log_size = size;
  job.next_seq = seq + 1;
}

Digest Coordinator::upload_artifact(const std::string& token, std::int64_t job_id, const std::string& path,
                                    std::string_view bytes) {
  try {
    store::validate_relative_path(path);
  } catch (const Error&) {
    throw Error(Errc::kPathEscapesWorkspace, "artifact path escapes the workspace: " + path);
  }
  std::unique_lock lock(mu_);
  Runner& runner = authenticate(token);
  Job& job = owned_job(runner, job_id);
  if (job.view.state != JobState::kClaimed && job.view.state != JobState::kRunning) {
    throw Error(Errc::kJobNotRunning, "job " + std::to_string(job_id) + " is " +
                                          std::string(pipeline::state_name(job.view.state)));
  }
  Digest digest = blobs_.put(bytes);
  const auto* existing = job.view.artifacts.find(path);
  if (existing != nullptr && existing->digest == digest) return digest;
  journal_.append({{"t", "artifact"}, {"job", job_id}, {"path", path}, {"digest", digest.hex()}, {"size", bytes.size()}});
  job.view.artifacts.record({path, bytes.size(), digest});
  return digest;
}

void Coordinator::complete_job(const std::string& token, std::int64_t job_id, const pipeline::JobResult& result) {
  std::unique_lock lock(mu_);
  Runner& runner = authenticate(token);
  Job& job = owned_job(runner, job_id);
  if (!pipeline::is_terminal(result.overall)) throw Error(Errc::kInvalidArgument, "overall must be terminal");
  pipeline::advance(job.view.state, JobEvent::completed(result.overall));
  for (const auto& e : result.artifacts.entries) {
    const auto* uploaded = job.view.artifacts.find(e.path);
    if (uploaded == nullptr || uploaded->digest != e.digest) {
      throw Error(Errc::kInvalidArgument, "artifact " + e.path + " was not uploaded with that content");
    }
  }
  const Timestamp now = Clock::now();
  json record{{"t", "complete"}, {"job", job_id}, {"result", pipeline::to_json(result)}, {"at", format_rfc3339(now)}};
  journal_.append(record);
  replay(record);
  append_ledger_for(job);
}

bool Coordinator::heartbeat(const std::string& token, std::int64_t job_id) {
  std::unique_lock lock(mu_);
  Runner& runner = authenticate(token);
  Job& job = owned_job(runner, job_id);
  if (pipeline::is_terminal(job.view.state)) return true;
  mark_running(job);
  return job.view.cancel_requested;
}

void Coordinator::finish(Job& job, JobState outcome, const std::string& reason, const Timestamp& when, bool journal) {
  JobEvent event = outcome == JobState::kCanceled ? JobEvent::cancel_requested() : JobEvent::completed(outcome);
  JobState next = pipeline::advance(job.view.state, event);
  if (journal) {
    journal_.append({{"t", "state"},
                     {"job", job.view.job_id},
                     {"state", pipeline::state_name(next)},
                     {"reason", reason},
                     {"at", format_rfc3339(when)}});
  }
  job.view.state = next;
  job.view.reason = reason;
  job.view.finished_at = when;
  append_ledger_for(job);
}

void Coordinator::cancel_build(std::int64_t build_id) {
  std::unique_lock lock(mu_);
  auto it = builds_.find(build_id);
  if (it == builds_.end()) throw Error(Errc::kNotFound, "no build " + std::to_string(build_id));
  for (auto id : it->second.job_ids) {
    Job& job = jobs_.at(id);
    if (job.view.state == JobState::kQueued) {
      finish(job, JobState::kCanceled, "canceled", Clock::now(), true);
    } else if (!pipeline::is_terminal(job.view.state) && !job.view.cancel_requested) {
      journal_.append({{"t", "cancel"}, {"job", id}});
      job.view.cancel_requested = true;
    }
  }
}

int Coordinator::sweep_lost_runners(Timestamp now) {
  std::unique_lock lock(mu_);
  int failed = 0;
  const auto limit = 3 * options_.heartbeat_interval;
  for (auto& [id, job] : jobs_) {
    if (job.view.state != JobState::kClaimed && job.view.state != JobState::kRunning) continue;
    const auto& runner = runners_.at(*job.view.assigned_runner);
    if (now - runner.last_seen <= limit) continue;
    finish(job, JobState::kFailed, "runner_lost", now, true);
    ++failed;
  }
  return failed;
}

void Coordinator::append_ledger_for(const Job& job) {
  if (ledger_.contains_job(job.view.job_id)) return;
  store::LedgerEntry e;
  e.repo_id = job.view.repo_id;
  e.commit_id = job.view.commit_id;
  e.build_id = job.view.build_id;
  e.job_id = job.view.job_id;
  e.matrix_index = job.view.matrix_index;
  e.overall = std::string(pipeline::state_name(job.view.state));
  if (job.view.result && job.view.result->fingerprint) {
    e.fingerprint_digest = blobs_.put(pipeline::to_json(*job.view.result->fingerprint).dump()).hex();
  }
  std::string log;
  std::error_code ec;
  if (fs::exists(log_path(job.view.job_id), ec)) log = fsutil::read_file(log_path(job.view.job_id));
  log.resize(std::min<std::size_t>(log.size(), job.view.log_size));
  e.log_digest = blobs_.put(log).hex();
  e.artifact_manifest_digest = blobs_.put(store::canonical_bytes(job.view.artifacts)).hex();
  e.completed_at = format_rfc3339(job.view.finished_at.value_or(Clock::now()));
  ledger_.append(e);
}

BuildView Coordinator::view_of(const Build& b) const {
  BuildView v = b.view;
  std::vector<JobState> states;
  for (auto id : b.job_ids) {
    const auto& job = jobs_.at(id).view;
    states.push_back(job.state);
    v.jobs.push_back(job);
  }
  v.status = derive_build_status(b.config_error, states);
  return v;
}

std::vector<BuildView> Coordinator::list_builds(const std::string& repo_id) const {
  std::shared_lock lock(mu_);
  std::vector<BuildView> out;
  for (const auto& [id, b] : builds_) {
    if (b.view.repo_id == repo_id) out.push_back(view_of(b));
  }
  return out;
}

BuildView Coordinator::get_build(std::int64_t build_id) const {
  std::shared_lock lock(mu_);
  auto it = builds_.find(build_id);
  if (it == builds_.end()) throw Error(Errc::kNotFound, "no build " + std::to_string(build_id));
  return view_of(it->second);
}

JobView Coordinator::get_job(std::int64_t job_id) const {
  std::shared_lock lock(mu_);
  auto it = jobs_.find(job_id);
  if (it == jobs_.end()) throw Error(Errc::kNotFound, "no job " + std::to_string(job_id));
  return it->second.view;
}

std::string Coordinator::get_log(std::int64_t job_id, std::uint64_t offset) const {
  std::uint64_t committed = get_job(job_id).log_size;
  if (offset >= committed) return {};
  std::ifstream in(log_path(job_id), std::ios::binary);
  if (!in) throw Error(Errc::kStorage, "log file missing for job " + std::to_string(job_id));
  std::string out(committed - offset, '\0');
  in.seekg(static_cast<std::streamoff>(offset));
  in.read(out.data(), static_cast<std::streamsize>(out.size()));
  out.resize(static_cast<std::size_t>(in.gcount()));
  return out;
}

std::string Coordinator::get_artifact(std::int64_t job_id, const std::string& path) const {
  JobView job = get_job(job_id);
  const auto* e = job.artifacts.find(path);
  if (e == nullptr) throw Error(Errc::kNotFound, "job " + std::to_string(job_id) + " has no artifact " + path);
  return blobs_.get(e->digest);
}

pipeline::EnvironmentFingerprint Coordinator::get_fingerprint(std::int64_t job_id) const {
  JobView job = get_job(job_id);
  if (!job.result || !job.result->fingerprint) {
    throw Error(Errc::kNotFound, "job " + std::to_string(job_id) + " has no fingerprint yet");
  }
  return *job.result->fingerprint;
}

std::vector<store::LedgerEntry> Coordinator::ledger(const std::string& repo_id, const std::string& commit_id) const {
  return ledger_.query(repo_id, commit_id);
}

store::ReproReport Coordinator::compare(std::int64_t build_a, std::int64_t build_b, bool allow_cross_commit) const {
  auto to_compared = [](const BuildView& b) {
    store::ComparedBuild c;
    c.build_id = b.build_id;
    c.commit_id = b.commit_id;
    c.terminal = b.status != BuildStatus::kPending && b.status != BuildStatus::kRunning;
    for (const auto& j : b.jobs) {
      store::ComparedJob cj;
      cj.job_id = j.job_id;
      cj.matrix_index = j.matrix_index;
      cj.state = std::string(pipeline::state_name(j.state));
      cj.artifacts = j.artifacts;
      cj.fingerprint = j.result && j.result->fingerprint ? pipeline::to_json(*j.result->fingerprint) : json(nullptr);
      c.jobs.push_back(std::move(cj));
    }
    return c;
  };
  return store::compare_builds(to_compared(get_build(build_a)), to_compared(get_build(build_b)), allow_cross_commit);
}

SchedulerView Coordinator::scheduler() const {
  std::shared_lock lock(mu_);
  SchedulerView s;
  s.parallel_cap = options_.parallel_cap;
  s.peak_active = peak_active_;
  for (const auto& [id, job] : jobs_) {
    if (job.view.state == JobState::kClaimed || job.view.state == JobState::kRunning) s.active_jobs.push_back(id);
    if (job.view.state == JobState::kQueued) ++s.queued;
  }
  return s;
}

std::string Coordinator::snapshot_tar(const std::string& commit_id) const {
  Digest commit = parse_commit(commit_id, Errc::kNotFound);
  if (!snapshots_.contains(commit)) throw Error(Errc::kSnapshotNotFound, "unknown snapshot " + commit_id);
  return snapshots_.export_tar(commit);
}

std::string Coordinator::put_snapshot_tar(std::string_view tar) { return snapshots_.import_tar(tar).commit_id.hex(); }

std::string Coordinator::put_blob(std::string_view bytes) { return blobs_.put(bytes).hex(); }

}  // namespace labci::server
