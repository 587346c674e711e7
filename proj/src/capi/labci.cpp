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

#include "labci/labci.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <mutex>
#include <new>
#include <stop_token>
#include <string>

#include "common/error.hpp"
#include "common/fsutil.hpp"
#include "config/pipeline_config.hpp"
#include "json.hpp"
#include "runner/agent.hpp"
#include "runner/client.hpp"
#include "runner/local_run.hpp"
#include "server/coordinator.hpp"
#include "server/http_api.hpp"
#include "store/snapshot.hpp"

using nlohmann::json;
using namespace labci;

struct labci_server {
  std::unique_ptr<server::Coordinator> coordinator;
  std::unique_ptr<server::HttpService> http;
};

struct labci_client {
  std::unique_ptr<runner::HttpClient> http;
};

struct labci_runner {
  runner::RunnerConfig config;
  std::unique_ptr<runner::HttpClient> client;
  std::unique_ptr<runner::Agent> agent;
  std::mutex mu;
  std::stop_source stop;
};

namespace {

thread_local std::string g_error;
thread_local int g_error_line = 0;

labci_status fail(Errc code, const std::string& msg, int line = 0) {
  g_error = msg;
  g_error_line = line;
  return static_cast<labci_status>(code);
}

template <typename F>
labci_status guarded(F&& f) {
  g_error.clear();
  g_error_line = 0;
  try {
    f();
    return LABCI_OK;
  } catch (const Error& e) {
    return fail(e.code(), e.what(), e.line());
  } catch (const json::exception& e) {
    return fail(Errc::kInvalidArgument, e.what());
  } catch (const std::bad_alloc&) {
    return fail(Errc::kInternal, "out of memory");
  } catch (const std::exception& e) {
    return fail(Errc::kInternal, e.what());
  }
}

char* dup_bytes(std::string_view s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (p == nullptr) throw std::bad_alloc();
  std::memcpy(p, s.data(), s.size());
  p[s.size()] = '\0';
  return p;
}

void put(char** out, std::string_view s) {
  if (out != nullptr) *out = dup_bytes(s);
}

void put(char** out, size_t* len, std::string_view s) {
  if (out != nullptr) *out = dup_bytes(s);
  if (len != nullptr) *len = s.size();
}

void require(const void* p, const char* what) {
  if (p == nullptr) throw Error(Errc::kInvalidArgument, std::string(what) + " must not be NULL");
}

std::string str(const char* s) { return s == nullptr ? std::string() : std::string(s); }

json parse_options(const char* text) {
  if (text == nullptr || *text == '\0') return json::object();
  json j = json::parse(text);
  if (!j.is_object()) throw Error(Errc::kInvalidArgument, "options must be a JSON object");
  return j;
}

std::vector<config::Stage> parse_stage_list(const json& list) {
  std::vector<config::Stage> out;
  for (const auto& v : list) {
    auto s = config::parse_stage(v.get<std::string>());
    if (!s) throw Error(Errc::kInvalidArgument, "unknown stage " + v.get<std::string>());
    out.push_back(*s);
  }
  return out;
}

json validation_report(std::string_view text) {
  config::PipelineConfig cfg = config::parse_config(text);
  json warnings = json::array();
  for (const auto& w : cfg.warnings) warnings.push_back(config::to_json(w));
  for (const auto& w : config::lint(cfg)) warnings.push_back(config::to_json(w));
  json jobs = json::array();
  for (const auto& spec : config::expand_matrix(cfg)) {
    json stages = json::array();
    for (auto s : config::effective_stages(spec)) stages.push_back(config::stage_name(s));
    jobs.push_back({{"matrix_index", spec.matrix_index}, {"stages", stages}, {"spec", config::to_json(spec)}});
  }
  return json{{"warnings", warnings}, {"jobs", jobs}};
}

}  // namespace

extern "C" {

const char* labci_version(void) { return LABCI_VERSION; }

const char* labci_status_name(labci_status status) {
  // errc_name returns views into string literals.
  return errc_name(static_cast<Errc>(status)).data();
}

const char* labci_last_error(void) { return g_error.c_str(); }
int labci_last_error_line(void) { return g_error_line; }
void labci_free(void* buffer) { std::free(buffer); }

labci_status labci_validate_file(const char* path, char** report_json) {
  return guarded([&] {
    require(path, "path");
    std::string text;
    try {
      text = fsutil::read_file(path);
    } catch (const Error& e) {
      throw Error(Errc::kInvalidArgument, e.what());
    }
    put(report_json, validation_report(text).dump());
  });
}

labci_status labci_validate_text(const char* text, size_t len, char** report_json) {
  return guarded([&] {
    require(text, "text");
    put(report_json, validation_report(std::string_view(text, len)).dump());
  });
}

labci_status labci_snapshot_digest(const char* dir, char** commit_hex) {
  return guarded([&] {
    require(dir, "dir");
    put(commit_hex, store::scan_directory(dir).digest().hex());
  });
}

labci_status labci_run_local(const char* source_dir, const char* options_json, char** build_json) {
  return guarded([&] {
    require(source_dir, "source_dir");
    json o = parse_options(options_json);
    runner::LocalRunOptions opts;
    opts.source_dir = source_dir;
    opts.data_dir = o.value("data_dir", std::string(".labci"));
    opts.repo_id = o.value("repo_id", std::string());
    if (o.contains("only")) opts.only_stages = parse_stage_list(o.at("only"));
    if (o.contains("backend")) {
      auto b = runner::parse_backend_kind(o.at("backend").get<std::string>());
      if (!b) throw Error(Errc::kInvalidArgument, "unknown backend " + o.at("backend").get<std::string>());
      opts.backend = *b;
    }
    if (o.contains("timeout_unit_ms")) {
      opts.run_options.timeout_unit = std::chrono::milliseconds(o.at("timeout_unit_ms").get<std::int64_t>());
    }
    if (o.contains("scheduler")) opts.scheduler = runner::scheduler_config_from_json(o.at("scheduler"));
    put(build_json, server::to_json(runner::run_local(opts)).dump());
  });
}

// ---- server ----

labci_status labci_server_open(const char* data_dir, int parallel_cap, int heartbeat_ms, labci_server** out) {
  return guarded([&] {
    require(data_dir, "data_dir");
    require(out, "out");
    if (parallel_cap < 1) throw Error(Errc::kInvalidArgument, "parallel cap must be >= 1");
    if (heartbeat_ms < 1) throw Error(Errc::kInvalidArgument, "heartbeat interval must be >= 1 ms");
    auto s = std::make_unique<labci_server>();
    s->coordinator = std::make_unique<server::Coordinator>(
        server::CoordinatorOptions{data_dir, parallel_cap, std::chrono::milliseconds(heartbeat_ms)});
    *out = s.release();
  });
}

labci_status labci_server_listen(labci_server* server, const char* addr, int* bound_port) {
  return guarded([&] {
    require(server, "server");
    if (server->http) throw Error(Errc::kInvalidArgument, "server is already listening");
    auto [host, port] = server::parse_addr(addr == nullptr ? server::kDefaultAddr : std::string_view(addr));
    auto http = std::make_unique<server::HttpService>(*server->coordinator, host, port);
    http->start();
    if (bound_port != nullptr) *bound_port = http->port();
    server->http = std::move(http);
  });
}

void labci_server_close(labci_server* server) {
  if (server == nullptr) return;
  if (server->http) server->http->stop();
  delete server;
}

labci_status labci_server_push(labci_server* server, const char* repo_id, const char* commit_id,
                               const char* snapshot_ref, const char* event_id, char** build_json) {
  return guarded([&] {
    require(server, "server");
    auto b = server->coordinator->ingest_push({str(repo_id), str(commit_id), str(snapshot_ref), str(event_id)});
    put(build_json, server::to_json(b).dump());
  });
}

labci_status labci_server_get_build(labci_server* server, int64_t build_id, char** build_json) {
  return guarded([&] {
    require(server, "server");
    put(build_json, server::to_json(server->coordinator->get_build(build_id)).dump());
  });
}

labci_status labci_server_get_log(labci_server* server, int64_t job_id, char** bytes, size_t* len) {
  return guarded([&] {
    require(server, "server");
    put(bytes, len, server->coordinator->get_log(job_id));
  });
}

labci_status labci_server_ledger(labci_server* server, const char* repo_id, const char* commit_id,
                                 char** entries_json) {
  return guarded([&] {
    require(server, "server");
    json arr = json::array();
    for (const auto& e : server->coordinator->ledger(str(repo_id), str(commit_id))) arr.push_back(store::to_json(e));
    put(entries_json, arr.dump());
  });
}

// ---- client ----

labci_status labci_client_open(const char* base_url, const char* token, labci_client** out) {
  return guarded([&] {
    require(base_url, "base_url");
    require(out, "out");
    auto c = std::make_unique<labci_client>();
    c->http = std::make_unique<runner::HttpClient>(base_url, str(token));
    *out = c.release();
  });
}

void labci_client_close(labci_client* client) { delete client; }

labci_status labci_client_upload_dir(labci_client* client, const char* dir, char** commit_hex) {
  return guarded([&] {
    require(client, "client");
    require(dir, "dir");
    put(commit_hex, client->http->upload_snapshot(store::pack_directory(dir)));
  });
}

labci_status labci_client_push(labci_client* client, const char* repo_id, const char* commit_id,
                               const char* snapshot_ref, const char* event_id, char** build_json) {
  return guarded([&] {
    require(client, "client");
    put(build_json, client->http->push_event(str(repo_id), str(commit_id), str(snapshot_ref), str(event_id)).dump());
  });
}

labci_status labci_client_trigger(labci_client* client, const char* repo_id, const char* commit_id,
                                  const char* only_csv, char** build_json) {
  return guarded([&] {
    require(client, "client");
    std::optional<std::vector<std::string>> only;
    if (only_csv != nullptr) {
      only.emplace();
      std::string_view rest(only_csv);
      while (!rest.empty()) {
        auto comma = rest.find(',');
        std::string_view item = rest.substr(0, comma);
        if (!item.empty()) only->emplace_back(item);
        if (comma == std::string_view::npos) break;
        rest.remove_prefix(comma + 1);
      }
    }
    put(build_json, client->http->trigger(str(repo_id), str(commit_id), only).dump());
  });
}

labci_status labci_client_cancel(labci_client* client, int64_t build_id, char** build_json) {
  return guarded([&] {
    require(client, "client");
    put(build_json, client->http->cancel_build(build_id).dump());
  });
}

labci_status labci_client_build(labci_client* client, int64_t build_id, char** build_json) {
  return guarded([&] {
    require(client, "client");
    put(build_json, client->http->get_build(build_id).dump());
  });
}

labci_status labci_client_builds(labci_client* client, const char* repo_id, char** builds_json) {
  return guarded([&] {
    require(client, "client");
    put(builds_json, client->http->list_builds(str(repo_id)).dump());
  });
}

labci_status labci_client_job(labci_client* client, int64_t job_id, char** job_json) {
  return guarded([&] {
    require(client, "client");
    put(job_json, client->http->get_job(job_id).dump());
  });
}

labci_status labci_client_log(labci_client* client, int64_t job_id, uint64_t offset, char** bytes, size_t* len,
                              char** state) {
  return guarded([&] {
    require(client, "client");
    auto chunk = client->http->get_log(job_id, offset);
    put(bytes, len, chunk.bytes);
    put(state, chunk.state);
  });
}

labci_status labci_client_artifacts(labci_client* client, int64_t job_id, char** manifest_json) {
  return guarded([&] {
    require(client, "client");
    put(manifest_json, client->http->list_artifacts(job_id).dump());
  });
}

labci_status labci_client_artifact(labci_client* client, int64_t job_id, const char* path, char** bytes,
                                   size_t* len) {
  return guarded([&] {
    require(client, "client");
    require(path, "path");
    put(bytes, len, client->http->get_artifact(job_id, path));
  });
}

labci_status labci_client_fingerprint(labci_client* client, int64_t job_id, char** fingerprint_json) {
  return guarded([&] {
    require(client, "client");
    put(fingerprint_json, client->http->get_fingerprint(job_id).dump());
  });
}

labci_status labci_client_ledger(labci_client* client, const char* repo_id, const char* commit_id,
                                 char** entries_json) {
  return guarded([&] {
    require(client, "client");
    put(entries_json, client->http->ledger(str(repo_id), str(commit_id)).dump());
  });
}

labci_status labci_client_compare(labci_client* client, int64_t build_a, int64_t build_b, int cross_commit,
                                  char** report_json, char** text) {
  return guarded([&] {
    require(client, "client");
    json report = client->http->compare(build_a, build_b, cross_commit != 0);
    std::string rendered = store::render_text(store::repro_report_from_json(report));
    put(report_json, report.dump());
    put(text, rendered);
  });
}

labci_status labci_client_scheduler(labci_client* client, char** scheduler_json) {
  return guarded([&] {
    require(client, "client");
    put(scheduler_json, client->http->scheduler().dump());
  });
}

// ---- runner ----

labci_status labci_runner_create(const char* config_json, labci_runner** out) {
  return guarded([&] {
    require(out, "out");
    json o = parse_options(config_json);
    auto r = std::make_unique<labci_runner>();
    auto& c = r->config;
    c.server_url = o.value("server", std::string(server::kDefaultAddr));
    c.token = o.value("token", std::string());
    const std::string backend = o.value("backend", std::string("local"));
    auto b = runner::parse_backend_kind(backend);
    if (!b) throw Error(Errc::kInvalidArgument, "unknown backend " + backend);
    c.backend = *b;
    const std::string kind = o.value("kind", std::string(c.backend == runner::BackendKind::kLocal ? "cloud" : "selfhosted"));
    auto k = pipeline::parse_runner_kind(kind);
    if (!k) throw Error(Errc::kInvalidArgument, "unknown runner kind " + kind);
    c.kind = *k;
    c.workspace_root = o.value("workspace", std::string());
    c.poll_interval = std::chrono::milliseconds(o.value("poll_ms", std::int64_t{2000}));
    c.heartbeat_interval = std::chrono::milliseconds(
        o.value("heartbeat_ms", std::max<std::int64_t>(10000, c.poll_interval.count())));
    if (o.contains("os") || o.contains("tags")) {
      c.capabilities = server::capabilities_from_json(json{{"os", o.value("os", std::string("linux"))},
                                                           {"tags", o.value("tags", json::array())}});
    }
    if (o.contains("timeout_unit_ms")) {
      c.run_options.timeout_unit = std::chrono::milliseconds(o.at("timeout_unit_ms").get<std::int64_t>());
    }
    if (o.contains("scheduler_config")) {
      c.scheduler = runner::load_scheduler_config(o.at("scheduler_config").get<std::string>());
    }
    runner::validate(c);
    r->client = std::make_unique<runner::HttpClient>(c.server_url, c.token);
    *out = r.release();
  });
}

labci_status labci_runner_run(labci_runner* runner, int until_idle, int* jobs_run) {
  return guarded([&] {
    require(runner, "runner");
    int count = 0;
    {
      std::lock_guard lock(runner->mu);
      if (!runner->agent) {
        if (runner->config.token.empty()) {
          auto reg = runner->client->register_runner(runner->config.kind, runner->config.capabilities);
          runner->config.token = reg.token;
          runner->client->set_token(reg.token);
        }
        runner->agent = std::make_unique<runner::Agent>(runner->config, *runner->client);
      }
    }
    auto& agent = *runner->agent;
    agent.on_job_done = [&count](const server::JobView&, const runner::JobOutcome&) { ++count; };
    struct Reset {
      runner::Agent& a;
      ~Reset() { a.on_job_done = nullptr; }
    } reset{agent};
    if (until_idle != 0) {
      agent.run_until_idle();
    } else {
      agent.attach(runner->stop.get_token());
    }
    if (jobs_run != nullptr) *jobs_run = count;
  });
}

void labci_runner_stop(labci_runner* runner) {
  if (runner != nullptr) runner->stop.request_stop();
}

void labci_runner_destroy(labci_runner* runner) { delete runner; }

}  // extern "C"
