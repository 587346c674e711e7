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

#include "runner/log_forwarder.hpp"

#include "common/error.hpp"

namespace labci::runner {

LogForwarder::LogForwarder(ServerClient& client, std::int64_t job_id, ForwarderOptions options)
    : client_(client), job_id_(job_id), options_(options) {
  thread_ = std::thread([this] { loop(); });
}

LogForwarder::~LogForwarder() {
  {
    std::lock_guard lock(mu_);
    closing_ = true;
  }
  cv_.notify_all();
  if (thread_.joinable()) thread_.join();
}

void LogForwarder::push(std::string_view bytes) {
  bool wake = false;
  {
    std::lock_guard lock(mu_);
    pending_.append(bytes);
    transcript_.append(bytes);
    wake = pending_.size() >= options_.max_chunk;
  }
  if (wake) cv_.notify_all();
}

void LogForwarder::loop() {
  std::unique_lock lock(mu_);
  while (!closing_) {
    cv_.wait_for(lock, options_.flush_interval,
                 [this] { return closing_ || pending_.size() >= options_.max_chunk; });
    if (pending_.empty() || refused_) continue;
    lock.unlock();
    {
      std::lock_guard send(send_mu_);
      drain();
    }
    lock.lock();
  }
}

void LogForwarder::drain() {
  while (true) {
    std::string chunk;
    std::int64_t seq = 0;
    {
      std::lock_guard lock(mu_);
      if (pending_.empty() || refused_) return;
      chunk = pending_.substr(0, options_.max_chunk);
      seq = seq_;
    }
    auto backoff = std::min<std::chrono::milliseconds>(std::chrono::milliseconds(50), options_.backoff_cap);
    auto give_up = std::chrono::steady_clock::now() + options_.give_up_after;
    while (true) {
      try {
        client_.append_log(job_id_, seq, chunk);
        break;
      } catch (const Error& e) {
        if (e.code() == Errc::kNetwork && std::chrono::steady_clock::now() < give_up) {
          std::this_thread::sleep_for(backoff);
          backoff = std::min(backoff * 2, options_.backoff_cap);
          continue;
        }
        std::lock_guard lock(mu_);
        refused_ = true;
        return;
      }
    }
    std::lock_guard lock(mu_);
    pending_.erase(0, chunk.size());
    ++seq_;
  }
}

bool LogForwarder::flush() {
  std::lock_guard send(send_mu_);
  drain();
  std::lock_guard lock(mu_);
  return !refused_;
}

bool LogForwarder::close() {
  bool ok = flush();
  {
    std::lock_guard lock(mu_);
    closing_ = true;
  }
  cv_.notify_all();
  if (thread_.joinable()) thread_.join();
  return ok;
}

std::string LogForwarder::transcript() const {
  std::lock_guard lock(mu_);
  return transcript_;
}

std::int64_t LogForwarder::next_seq() const {
  std::lock_guard lock(mu_);
  return seq_;
}

}  // namespace labci::runner
