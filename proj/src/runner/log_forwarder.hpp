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
#include <condition_variable>
#include <cstdint>
#include <mutex>
#include <string>
#include <string_view>
#include <thread>

#include "runner/client.hpp"

namespace labci::runner {

struct ForwarderOptions {
  std::chrono::milliseconds flush_interval = std::chrono::milliseconds(200);
  std::size_t max_chunk = 64 * 1024;
  std::chrono::milliseconds backoff_cap = std::chrono::seconds(60);
  // Stop retrying a chunk after this long without a successful send.
  std::chrono::milliseconds give_up_after = std::chrono::minutes(10);
};

// Ships a job's log bytes to the server as chunks numbered 0, 1, 2, ...
// from a background thread. A chunk is retried (same seq, same bytes) until
// acknowledged, so the server-side log is exactly the pushed byte stream.
class LogForwarder {
 public:
  LogForwarder(ServerClient& client, std::int64_t job_id, ForwarderOptions options = {});
  ~LogForwarder();
  LogForwarder(const LogForwarder&) = delete;
  LogForwarder& operator=(const LogForwarder&) = delete;

  void push(std::string_view bytes);
  // Blocks until everything pushed so far is acknowledged. Returns false
  // when the server stopped accepting chunks (job ended, token revoked).
  bool flush();
  // Flushes and stops the background thread.
  bool close();

  std::string transcript() const;
  std::int64_t next_seq() const;

 private:
  void loop();
  // Sends pending bytes; called with send_mu_ held.
  void drain();

  ServerClient& client_;
  std::int64_t job_id_;
  ForwarderOptions options_;

  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::string pending_;
  std::string transcript_;
  bool closing_ = false;
  bool refused_ = false;
  std::int64_t seq_ = 0;

  std::mutex send_mu_;
  std::thread thread_;
};

}  // namespace labci::runner
