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

#include "runner/client.hpp"

#include "common/digest.hpp"
#include "common/error.hpp"
#include "httplib.h"

namespace labci::runner {

using nlohmann::json;

// ---- LocalClient ----

LocalClient::LocalClient(server::Coordinator& coordinator, std::string token)
    : coordinator_(coordinator), token_(std::move(token)) {}

server::Registration LocalClient::register_runner(pipeline::RunnerKind kind, const RunnerCapabilities& caps) {
  return coordinator_.register_runner(kind, caps);
}

std::optional<JobView> LocalClient::claim(const RunnerCapabilities& caps) { return coordinator_.claim_job(token_, caps); }

std::string LocalClient::fetch_snapshot(const std::string& commit_id) { return coordinator_.snapshot_tar(commit_id); }

void LocalClient::append_log(std::int64_t job_id, std::int64_t seq, const std::string& bytes) {
  coordinator_.append_log(token_, job_id, seq, bytes);
}

std::string LocalClient::upload_artifact(std::int64_t job_id, const std::string& path, const std::string& bytes) {
  return coordinator_.upload_artifact(token_, job_id, path, bytes).hex();
}

void LocalClient::complete(std::int64_t job_id, const pipeline::JobResult& result) {
  coordinator_.complete_job(token_, job_id, result);
}

bool LocalClient::heartbeat(std::int64_t job_id) { return coordinator_.heartbeat(token_, job_id); }

// ---- HttpClient ----

namespace {

[[noreturn]] void raise_for(int status, const std::string& body) {
  Errc code = Errc::kInternal;
  std::string message = "HTTP " + std::to_string(status);
  try {
    auto j = json::parse(body);
    code = parse_errc(j.value("error", std::string()));
    message = j.value("message", message);
  } catch (const json::exception&) {
    if (status == 401) code = Errc::kAuth;
    if (status == 404) code = Errc::kNotFound;
  }
  throw Error(code, message);
}

}  // namespace

HttpClient::HttpClient(std::string base_url, std::string token) : base_url_(std::move(base_url)), token_(std::move(token)) {
  while (!base_url_.empty() && base_url_.back() == '/') base_url_.pop_back();
  if (base_url_.find("://") == std::string::npos) base_url_ = "http://" + base_url_;
}

HttpClient::Reply HttpClient::get(const std::string& path) const {
  httplib::Client cli(base_url_);
  cli.set_connection_timeout(std::chrono::seconds(5));
  cli.set_read_timeout(std::chrono::seconds(60));
  auto res = cli.Get(path);
  if (!res) throw Error(Errc::kNetwork, "GET " + base_url_ + path + ": " + httplib::to_string(res.error()));
  return {res->status, res->body, res->get_header_value("X-Labci-Job-State")};
}

HttpClient::Reply HttpClient::post(const std::string& path, const std::string& body, const std::string& content_type,
                                   bool auth) const {
  httplib::Client cli(base_url_);
  cli.set_connection_timeout(std::chrono::seconds(5));
  cli.set_read_timeout(std::chrono::seconds(60));
  httplib::Headers headers;
  if (auth) headers.emplace("Authorization", "Bearer " + token_);
  auto res = cli.Post(path, headers, body, content_type);
  if (!res) throw Error(Errc::kNetwork, "POST " + base_url_ + path + ": " + httplib::to_string(res.error()));
  return {res->status, res->body, {}};
}

json HttpClient::post_json(const std::string& path, const json& body, bool auth) const {
  auto r = post(path, body.dump(), "application/json", auth);
  if (r.status >= 400) raise_for(r.status, r.body);
  if (r.body.empty()) return json();
  return json::parse(r.body);
}

server::Registration HttpClient::register_runner(pipeline::RunnerKind kind, const RunnerCapabilities& caps) {
  auto j = post_json("/api/v1/runners/register",
                     json{{"kind", pipeline::runner_kind_name(kind)}, {"capabilities", server::to_json(caps)}}, false);
  return {j.at("runner_id").get<std::int64_t>(), j.at("token").get<std::string>()};
}

std::optional<JobView> HttpClient::claim(const RunnerCapabilities& caps) {
  auto r = post("/api/v1/jobs/claim", json{{"capabilities", server::to_json(caps)}}.dump(), "application/json", true);
  if (r.status == 204) return std::nullopt;
  if (r.status >= 400) raise_for(r.status, r.body);
  return server::job_view_from_json(json::parse(r.body));
}

std::string HttpClient::fetch_snapshot(const std::string& commit_id) {
  auto r = get("/api/v1/snapshots/" + commit_id);
  if (r.status >= 400) raise_for(r.status, r.body);
  return r.body;
}

void HttpClient::append_log(std::int64_t job_id, std::int64_t seq, const std::string& bytes) {
  post_json("/api/v1/jobs/" + std::to_string(job_id) + "/logs", json{{"seq", seq}, {"data_base64", base64_encode(bytes)}},
            true);
}

std::string HttpClient::upload_artifact(std::int64_t job_id, const std::string& path, const std::string& bytes) {
  auto j = post_json("/api/v1/jobs/" + std::to_string(job_id) + "/artifacts",
                     json{{"path", path}, {"data_base64", base64_encode(bytes)}}, true);
  return j.at("digest").get<std::string>();
}

void HttpClient::complete(std::int64_t job_id, const pipeline::JobResult& result) {
  post_json("/api/v1/jobs/" + std::to_string(job_id) + "/complete", pipeline::to_json(result), true);
}

bool HttpClient::heartbeat(std::int64_t job_id) {
  auto j = post_json("/api/v1/jobs/" + std::to_string(job_id) + "/heartbeat", json::object(), true);
  return j.value("cancel_requested", false);
}

json HttpClient::push_event(const std::string& repo_id, const std::string& commit_id, const std::string& snapshot_ref,
                            const std::string& event_id) {
  return post_json("/api/v1/events/push",
                   json{{"repo_id", repo_id}, {"commit_id", commit_id}, {"snapshot_ref", snapshot_ref}, {"event_id", event_id}},
                   false);
}

json HttpClient::trigger(const std::string& repo_id, const std::string& commit_id,
                         const std::optional<std::vector<std::string>>& only_stages) {
  json body{{"repo_id", repo_id}, {"commit_id", commit_id}};
  if (only_stages) body["only_stages"] = *only_stages;
  return post_json("/api/v1/builds/trigger", body, false);
}

json HttpClient::cancel_build(std::int64_t build_id) {
  return post_json("/api/v1/builds/" + std::to_string(build_id) + "/cancel", json::object(), false);
}

namespace {

json parse_reply(int status, const std::string& body) {
  if (status >= 400) raise_for(status, body);
  return json::parse(body);
}

}  // namespace

json HttpClient::get_build(std::int64_t build_id) {
  auto r = get("/api/v1/builds/" + std::to_string(build_id));
  return parse_reply(r.status, r.body);
}

json HttpClient::list_builds(const std::string& repo_id) {
  auto r = get("/api/v1/repos/" + repo_id + "/builds");
  return parse_reply(r.status, r.body);
}

json HttpClient::get_job(std::int64_t job_id) {
  auto r = get("/api/v1/jobs/" + std::to_string(job_id));
  return parse_reply(r.status, r.body);
}

LogChunk HttpClient::get_log(std::int64_t job_id, std::uint64_t offset) {
  auto r = get("/api/v1/jobs/" + std::to_string(job_id) + "/log?offset=" + std::to_string(offset));
  if (r.status >= 400) raise_for(r.status, r.body);
  return {r.body, r.job_state};
}

json HttpClient::list_artifacts(std::int64_t job_id) {
  auto r = get("/api/v1/jobs/" + std::to_string(job_id) + "/artifacts");
  return parse_reply(r.status, r.body);
}

std::string HttpClient::get_artifact(std::int64_t job_id, const std::string& path) {
  auto r = get("/api/v1/jobs/" + std::to_string(job_id) + "/artifacts/" + path);
  if (r.status >= 400) raise_for(r.status, r.body);
  return r.body;
}

json HttpClient::get_fingerprint(std::int64_t job_id) {
  auto r = get("/api/v1/jobs/" + std::to_string(job_id) + "/fingerprint");
  return parse_reply(r.status, r.body);
}

json HttpClient::ledger(const std::string& repo_id, const std::string& commit_id) {
  auto r = get("/api/v1/repos/" + repo_id + "/ledger?commit=" + commit_id);
  return parse_reply(r.status, r.body);
}

json HttpClient::compare(std::int64_t build_a, std::int64_t build_b, bool cross_commit) {
  auto r = get("/api/v1/compare?a=" + std::to_string(build_a) + "&b=" + std::to_string(build_b) +
               "&cross_commit=" + (cross_commit ? "1" : "0"));
  return parse_reply(r.status, r.body);
}

json HttpClient::scheduler() {
  auto r = get("/api/v1/scheduler");
  return parse_reply(r.status, r.body);
}

std::string HttpClient::upload_snapshot(const std::string& tar) {
  auto r = post("/api/v1/snapshots", tar, "application/x-tar", false);
  return parse_reply(r.status, r.body).at("commit_id").get<std::string>();
}

}  // namespace labci::runner
