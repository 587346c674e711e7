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

#include <condition_variable>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <thread>
#include <utility>

#include "common/error.hpp"
#include "server/coordinator.hpp"

namespace httplib {
class Server;
}

namespace labci::server {

inline constexpr std::string_view kDefaultAddr = "127.0.0.1:8975";

// "host:port"; a bare port means 127.0.0.1. Throws Error(kInvalidArgument).
std::pair<std::string, int> parse_addr(std::string_view addr);

int http_status_for(Errc code) noexcept;

// HTTP+JSON front end for a Coordinator, plus the background sweep that
// fails jobs of silent runners.
class HttpService {
 public:
  HttpService(Coordinator& coordinator, std::string host, int port);
  ~HttpService();
  HttpService(const HttpService&) = delete;
  HttpService& operator=(const HttpService&) = delete;

  // Binds and starts serving in background threads. Port 0 picks a free
  // port. Throws Error(kAddressInUse) when the address is taken.
  void start();
  void stop();
  int port() const noexcept { return port_; }
  const std::string& host() const noexcept { return host_; }

 private:
  void install_routes();
  void sweep_loop();

  Coordinator& coordinator_;
  std::string host_;
  int port_;
  std::unique_ptr<httplib::Server> http_;
  std::thread listener_;
  std::thread sweeper_;
  std::mutex mu_;
  std::condition_variable cv_;
  bool stopping_ = false;
  bool started_ = false;
};

}  // namespace labci::server
