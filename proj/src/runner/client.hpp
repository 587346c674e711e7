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

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pipeline/job_result.hpp"
#include "server/coordinator.hpp"

namespace labci::runner {

using server::JobView;
using server::RunnerCapabilities;

// What a runner needs from the coordination service. Failures surface as
// Error: kNetwork for transport trouble (retryable), kAuth for a bad token,
// anything else as reported by the server.
class ServerClient {
 public:
  virtual ~ServerClient() = default;

  virtual server::Registration register_runner(pipeline::RunnerKind kind, const RunnerCapabilities& caps) = 0;
  virtual std::optional<JobView> claim(const RunnerCapabilities& caps) = 0;
  virtual std::string fetch_snapshot(const std::string& commit_id) = 0;
  virtual void append_log(std::int64_t job_id, std::int64_t seq, const std::string& bytes) = 0;
  virtual std::string upload_artifact(std::int64_t job_id, const std::string& path, const std::string& bytes) = 0;
  virtual void complete(std::int64_t job_id, const pipeline::JobResult& result) = 0;
  virtual bool heartbeat(std::int64_t job_id) = 0;

  virtual void set_token(std::string token) = 0;
};

// In-process client bound directly to a Coordinator.
class LocalClient : public ServerClient {
 public:
  explicit LocalClient(server::Coordinator& coordinator, std::string token = {});

  server::Registration register_runner(pipeline::RunnerKind kind, const RunnerCapabilities& caps) override;
  std::optional<JobView> claim(const RunnerCapabilities& caps) override;
  std::string fetch_snapshot(const std::string& commit_id) override;
  void append_log(std::int64_t job_id, std::int64_t seq, const std::string& bytes) override;
  std::string upload_artifact(std::int64_t job_id, const std::string& path, const std::string& bytes) override;
  void complete(std::int64_t job_id, const pipeline::JobResult& result) override;
  bool heartbeat(std::int64_t job_id) override;
  void set_token(std::string token) override { token_ = std::move(token); }

 private:
  server::Coordinator& coordinator_;
  std::string token_;
};

struct LogChunk {
  std::string bytes;
  std::string state;  // job state when the read was served
};

// HTTP+JSON client for both the runner protocol and the public read API.
// Safe to call from several threads; each request uses its own connection.
class HttpClient : public ServerClient {
 public:
  explicit HttpClient(std::string base_url, std::string token = {});

  server::Registration register_runner(pipeline::RunnerKind kind, const RunnerCapabilities& caps) override;
  std::optional<JobView> claim(const RunnerCapabilities& caps) override;
  std::string fetch_snapshot(const std::string& commit_id) override;
  void append_log(std::int64_t job_id, std::int64_t seq, const std::string& bytes) override;
  std::string upload_artifact(std::int64_t job_id, const std::string& path, const std::string& bytes) override;
  void complete(std::int64_t job_id, const pipeline::JobResult& result) override;
  bool heartbeat(std::int64_t job_id) override;
  void set_token(std::string token) override { token_ = std::move(token); }

  // Public API.
  nlohmann::json push_event(const std::string& repo_id, const std::string& commit_id, const std::string& snapshot_ref,
                            const std::string& event_id);
  nlohmann::json trigger(const std::string& repo_id, const std::string& commit_id,
                         const std::optional<std::vector<std::string>>& only_stages);
  nlohmann::json cancel_build(std::int64_t build_id);
  nlohmann::json get_build(std::int64_t build_id);
  nlohmann::json list_builds(const std::string& repo_id);
  nlohmann::json get_job(std::int64_t job_id);
  LogChunk get_log(std::int64_t job_id, std::uint64_t offset = 0);
  nlohmann::json list_artifacts(std::int64_t job_id);
  std::string get_artifact(std::int64_t job_id, const std::string& path);
  nlohmann::json get_fingerprint(std::int64_t job_id);
  nlohmann::json ledger(const std::string& repo_id, const std::string& commit_id);
  nlohmann::json compare(std::int64_t build_a, std::int64_t build_b, bool cross_commit);
  nlohmann::json scheduler();
  std::string upload_snapshot(const std::string& tar);

  const std::string& base_url() const noexcept { return base_url_; }

 private:
  struct Reply {
    int status = 0;
    std::string body;
    std::string job_state;
  };
  Reply get(const std::string& path) const;
  Reply post(const std::string& path, const std::string& body, const std::string& content_type, bool auth) const;
  nlohmann::json post_json(const std::string& path, const nlohmann::json& body, bool auth) const;

  std::string base_url_;
  std::string token_;
};

}  // namespace labci::runner
