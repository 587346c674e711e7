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

#include "server/http_api.hpp"

#include <charconv>

#include "common/digest.hpp"
#include "httplib.h"

namespace labci::server {

using nlohmann::json;

namespace {

constexpr const char* kJson = "application/json";

std::int64_t id_param(const httplib::Request& req, std::size_t i = 1) {
  std::int64_t v = 0;
  const std::string s = req.matches[i];
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw Error(Errc::kInvalidArgument, "bad id " + s);
  return v;
}

std::string bearer(const httplib::Request& req) {
  const std::string h = req.get_header_value("Authorization");
  constexpr std::string_view prefix = "Bearer ";
  if (h.rfind(prefix, 0) != 0) throw Error(Errc::kAuth, "missing bearer token");
  return h.substr(prefix.size());
}

json body_json(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  try {
    return json::parse(req.body);
  } catch (const json::exception& e) {
    throw Error(Errc::kInvalidArgument, std::string("request body is not JSON: ") + e.what());
  }
}

void send_json(httplib::Response& res, const json& j, int status = 200) {
  res.status = status;
  res.set_content(j.dump(), kJson);
}

void send_error(httplib::Response& res, Errc code, const std::string& message) {
  send_json(res, json{{"error", errc_name(code)}, {"message", message}}, http_status_for(code));
}

// Runs a handler and maps every failure onto an error response.
template <typename F>
httplib::Server::Handler guarded(F f) {
  return [f](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const Error& e) {
      send_error(res, e.code(), e.what());
    } catch (const json::exception& e) {
      send_error(res, Errc::kInvalidArgument, e.what());
    } catch (const std::logic_error& e) {
      send_error(res, Errc::kInvalidArgument, e.what());
    } catch (const std::exception& e) {
      send_error(res, Errc::kInternal, e.what());
    }
  };
}

std::vector<config::Stage> parse_stage_list(const json& j) {
  std::vector<config::Stage> out;
  for (const auto& item : j) {
    auto name = item.get<std::string>();
    auto s = config::parse_stage(name);
    if (!s || *s == config::Stage::kInfo) throw Error(Errc::kInvalidArgument, "unknown stage " + name);
    out.push_back(*s);
  }
  return out;
}

}  // namespace

std::pair<std::string, int> parse_addr(std::string_view addr) {
  std::string host = "127.0.0.1";
  std::string_view port_text = addr;
  if (auto colon = addr.rfind(':'); colon != std::string_view::npos) {
    host = std::string(addr.substr(0, colon));
    port_text = addr.substr(colon + 1);
  }
  int port = -1;
  auto [p, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), port);
  if (ec != std::errc() || p != port_text.data() + port_text.size() || port < 0 || port > 65535 || host.empty()) {
    throw Error(Errc::kInvalidArgument, "bad address '" + std::string(addr) + "', expected host:port");
  }
  return {host, port};
}

int http_status_for(Errc code) noexcept {
  switch (code) {
    case Errc::kOk: return 200;
    case Errc::kAuth: return 401;
    case Errc::kNotFound:
    case Errc::kSnapshotNotFound:
    case Errc::kUnknownCommit: return 404;
    case Errc::kIllegalTransition:
    case Errc::kOutOfOrderChunk:
    case Errc::kJobNotRunning:
    case Errc::kDuplicateJob:
    case Errc::kNotTerminal: return 409;
    case Errc::kEmptyStagePlan:
    case Errc::kMatrixShapeMismatch:
    case Errc::kCrossCommit: return 422;
    case Errc::kStorage:
    case Errc::kCorruptBlob:
    case Errc::kInternal: return 500;
    default: return 400;
  }
}

HttpService::HttpService(Coordinator& coordinator, std::string host, int port)
    : coordinator_(coordinator), host_(std::move(host)), port_(port), http_(std::make_unique<httplib::Server>()) {
  http_->new_task_queue = [] { return new httplib::ThreadPool(16); };
  // httplib's default sets SO_REUSEPORT, which would let a second server
  // share the port silently.
  http_->set_socket_options([](socket_t sock) {
    int yes = 1;
    ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });
  install_routes();
}

HttpService::~HttpService() { stop(); }

void HttpService::start() {
  if (started_) return;
  if (port_ == 0) {
    port_ = http_->bind_to_any_port(host_);
    if (port_ < 0) throw Error(Errc::kAddressInUse, "cannot bind " + host_);
  } else if (!http_->bind_to_port(host_, port_)) {
    throw Error(Errc::kAddressInUse, "cannot bind " + host_ + ":" + std::to_string(port_) + " (address in use?)");
  }
  started_ = true;
  listener_ = std::thread([this] { http_->listen_after_bind(); });
  sweeper_ = std::thread([this] { sweep_loop(); });
  http_->wait_until_ready();
}

void HttpService::stop() {
  if (!started_) return;
  {
    std::lock_guard lock(mu_);
    stopping_ = true;
  }
  cv_.notify_all();
  http_->stop();
  if (listener_.joinable()) listener_.join();
  if (sweeper_.joinable()) sweeper_.join();
  started_ = false;
}

void HttpService::sweep_loop() {
  auto period = std::max<std::chrono::milliseconds>(std::chrono::milliseconds(100),
                                                    coordinator_.options().heartbeat_interval / 2);
  std::unique_lock lock(mu_);
  while (!cv_.wait_for(lock, period, [this] { return stopping_; })) {
    lock.unlock();
    try {
      coordinator_.sweep_lost_runners();
    } catch (const std::exception&) {
      // Storage trouble; retried next period.
    }
    lock.lock();
  }
}

void HttpService::install_routes() {
  auto& s = *http_;
  Coordinator& c = coordinator_;

  s.Get("/api/v1/health", guarded([](const auto&, auto& res) { send_json(res, json{{"ok", true}}); }));

  s.Post("/api/v1/events/push", guarded([&c](const auto& req, auto& res) {
           json j = body_json(req);
           PushEvent e{j.at("repo_id").template get<std::string>(), j.value("commit_id", std::string()),
                       j.value("snapshot_ref", std::string()), j.at("event_id").template get<std::string>()};
           send_json(res, to_json(c.ingest_push(e)), 201);
         }));

  s.Post("/api/v1/builds/trigger", guarded([&c](const auto& req, auto& res) {
           json j = body_json(req);
           std::optional<std::vector<config::Stage>> only;
           if (j.contains("only_stages") && !j.at("only_stages").is_null()) only = parse_stage_list(j.at("only_stages"));
           auto b = c.trigger_build(j.at("repo_id").template get<std::string>(),
                                    j.at("commit_id").template get<std::string>(), only);
           send_json(res, to_json(b), 201);
         }));

  s.Post(R"(/api/v1/builds/(\d+)/cancel)", guarded([&c](const auto& req, auto& res) {
           auto id = id_param(req);
           c.cancel_build(id);
           send_json(res, to_json(c.get_build(id)));
         }));

  s.Post("/api/v1/runners/register", guarded([&c](const auto& req, auto& res) {
           json j = body_json(req);
           auto kind = pipeline::parse_runner_kind(j.value("kind", std::string("cloud")));
           if (!kind) throw Error(Errc::kInvalidArgument, "kind must be cloud or selfhosted");
           auto caps = capabilities_from_json(j.value("capabilities", json(nullptr)));
           auto reg = c.register_runner(*kind, caps);
           send_json(res, json{{"runner_id", reg.runner_id}, {"token", reg.token}});
         }));

  s.Post("/api/v1/jobs/claim", guarded([&c](const auto& req, auto& res) {
           json j = body_json(req);
           std::optional<RunnerCapabilities> caps;
           if (j.contains("capabilities") && !j.at("capabilities").is_null()) {
             caps = capabilities_from_json(j.at("capabilities"));
           }
           auto job = c.claim_job(bearer(req), caps);
           if (!job) {
             res.status = 204;
             return;
           }
           send_json(res, to_json(*job));
         }));

  s.Post(R"(/api/v1/jobs/(\d+)/logs)", guarded([&c](const auto& req, auto& res) {
           json j = body_json(req);
           auto seq = j.at("seq").template get<std::int64_t>();
           auto data = base64_decode(j.at("data_base64").template get<std::string>());
           c.append_log(bearer(req), id_param(req), seq, data);
           send_json(res, json{{"ack", seq}});
         }));

  s.Post(R"(/api/v1/jobs/(\d+)/artifacts)", guarded([&c](const auto& req, auto& res) {
           json j = body_json(req);
           auto data = base64_decode(j.at("data_base64").template get<std::string>());
           auto digest = c.upload_artifact(bearer(req), id_param(req), j.at("path").template get<std::string>(), data);
           send_json(res, json{{"digest", digest.hex()}, {"size", data.size()}});
         }));

  s.Post(R"(/api/v1/jobs/(\d+)/complete)", guarded([&c](const auto& req, auto& res) {
           auto result = pipeline::job_result_from_json(body_json(req));
           auto id = id_param(req);
           c.complete_job(bearer(req), id, result);
           send_json(res, json{{"state", pipeline::state_name(c.get_job(id).state)}});
         }));

  s.Post(R"(/api/v1/jobs/(\d+)/heartbeat)", guarded([&c](const auto& req, auto& res) {
           bool cancel = c.heartbeat(bearer(req), id_param(req));
           send_json(res, json{{"cancel_requested", cancel}});
         }));

  s.Post("/api/v1/snapshots", guarded([&c](const auto& req, auto& res) {
           send_json(res, json{{"commit_id", c.put_snapshot_tar(req.body)}}, 201);
         }));

  s.Post("/api/v1/blobs", guarded([&c](const auto& req, auto& res) {
           send_json(res, json{{"digest", c.put_blob(req.body)}}, 201);
         }));

  // ---- public reads ----

  s.Get(R"(/api/v1/repos/(.+)/builds)", guarded([&c](const auto& req, auto& res) {
          json out = json::array();
          for (const auto& b : c.list_builds(req.matches[1])) out.push_back(to_json(b));
          send_json(res, out);
        }));

  s.Get(R"(/api/v1/repos/(.+)/ledger)", guarded([&c](const auto& req, auto& res) {
          json out = json::array();
          for (const auto& e : c.ledger(req.matches[1], req.get_param_value("commit"))) out.push_back(store::to_json(e));
          send_json(res, out);
        }));

  s.Get(R"(/api/v1/builds/(\d+))", guarded([&c](const auto& req, auto& res) {
          send_json(res, to_json(c.get_build(id_param(req))));
        }));

  s.Get(R"(/api/v1/jobs/(\d+))", guarded([&c](const auto& req, auto& res) {
          send_json(res, to_json(c.get_job(id_param(req))));
        }));

  s.Get(R"(/api/v1/jobs/(\d+)/log)", guarded([&c](const auto& req, auto& res) {
          auto id = id_param(req);
          std::uint64_t offset = 0;
          if (req.has_param("offset")) offset = std::stoull(req.get_param_value("offset"));
          // State first: a terminal state guarantees the log read after it is complete.
          auto state = c.get_job(id).state;
          res.set_header("X-Labci-Job-State", std::string(pipeline::state_name(state)));
          res.set_content(c.get_log(id, offset), "text/plain; charset=utf-8");
        }));

  s.Get(R"(/api/v1/jobs/(\d+)/artifacts)", guarded([&c](const auto& req, auto& res) {
          send_json(res, store::to_json(c.get_job(id_param(req)).artifacts));
        }));

  s.Get(R"(/api/v1/jobs/(\d+)/artifacts/(.+))", guarded([&c](const auto& req, auto& res) {
          res.set_content(c.get_artifact(id_param(req), req.matches[2]), "application/octet-stream");
        }));

  s.Get(R"(/api/v1/jobs/(\d+)/fingerprint)", guarded([&c](const auto& req, auto& res) {
          send_json(res, pipeline::to_json(c.get_fingerprint(id_param(req))));
        }));

  s.Get(R"(/api/v1/snapshots/([0-9a-f]{64}))", guarded([&c](const auto& req, auto& res) {
          res.set_content(c.snapshot_tar(req.matches[1]), "application/x-tar");
        }));

  s.Get("/api/v1/compare", guarded([&c](const auto& req, auto& res) {
          auto a = std::stoll(req.get_param_value("a"));
          auto b = std::stoll(req.get_param_value("b"));
          bool cross = req.get_param_value("cross_commit") == "1" || req.get_param_value("cross_commit") == "true";
          send_json(res, store::to_json(c.compare(a, b, cross)));
        }));

  s.Get("/api/v1/scheduler", guarded([&c](const auto&, auto& res) { send_json(res, to_json(c.scheduler())); }));
}

}  // namespace labci::server
