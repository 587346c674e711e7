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

#include "pipeline/process.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/resource.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <map>
#include <thread>

#include "common/error.hpp"

extern char** environ;

namespace labci::pipeline {

namespace {

using namespace std::chrono_literals;
using SteadyClock = std::chrono::steady_clock;

class Fd {
 public:
  Fd() = default;
  explicit Fd(int fd) : fd_(fd) {}
  ~Fd() { reset(); }
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;

  int get() const noexcept { return fd_; }
  void reset() noexcept {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

 private:
  int fd_ = -1;
};

std::vector<std::string> build_environment(const ProcessSpec& spec) {
  std::map<std::string, std::string> merged;
  std::vector<std::string> order;
  for (char** e = environ; e != nullptr && *e != nullptr; ++e) {
    std::string_view kv(*e);
    auto eq = kv.find('=');
    if (eq == std::string_view::npos) continue;
    std::string key(kv.substr(0, eq));
    if (merged.emplace(key, std::string(kv.substr(eq + 1))).second) order.push_back(key);
  }
  for (const auto& [k, v] : spec.env) {
    if (merged.count(k) == 0) order.push_back(k);
    merged[k] = v;
  }
  std::vector<std::string> out;
  out.reserve(order.size());
  for (const auto& k : order) out.push_back(k + "=" + merged[k]);
  return out;
}

class LineSplitter {
 public:
  explicit LineSplitter(const LineSink& sink) : sink_(sink) {}

  void feed(const char* data, std::size_t n) {
    buffer_.append(data, n);
    std::size_t start = 0;
    for (auto nl = buffer_.find('\n'); nl != std::string::npos; nl = buffer_.find('\n', start)) {
      sink_(std::string_view(buffer_).substr(start, nl - start));
      start = nl + 1;
    }
    buffer_.erase(0, start);
  }

  void finish() {
    if (!buffer_.empty()) sink_(buffer_);
    buffer_.clear();
  }

 private:
  const LineSink& sink_;
  std::string buffer_;
};

}  // namespace

ProcessOutcome run_process(const ProcessSpec& spec, const LineSink& on_line, Timestamp deadline,
                           std::stop_token cancel, std::chrono::milliseconds grace) {
  if (spec.argv.empty()) throw Error(Errc::kInvalidArgument, "empty command line");
  int pipefd[2];
  if (::pipe2(pipefd, O_CLOEXEC) != 0) throw Error(Errc::kBackendUnavailable, std::string("pipe: ") + std::strerror(errno));
  Fd read_end(pipefd[0]);
  Fd write_end(pipefd[1]);

  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_addopen(&actions, 0, "/dev/null", O_RDONLY, 0);
  posix_spawn_file_actions_adddup2(&actions, write_end.get(), 1);
  posix_spawn_file_actions_adddup2(&actions, write_end.get(), 2);
  if (!spec.cwd.empty()) posix_spawn_file_actions_addchdir_np(&actions, spec.cwd.c_str());

  posix_spawnattr_t attr;
  posix_spawnattr_init(&attr);
  sigset_t none, defaults;
  sigemptyset(&none);
  sigemptyset(&defaults);
  sigaddset(&defaults, SIGPIPE);
  sigaddset(&defaults, SIGINT);
  sigaddset(&defaults, SIGTERM);
  posix_spawnattr_setsigmask(&attr, &none);
  posix_spawnattr_setsigdefault(&attr, &defaults);
  posix_spawnattr_setpgroup(&attr, 0);
  posix_spawnattr_setflags(&attr, POSIX_SPAWN_SETPGROUP | POSIX_SPAWN_SETSIGMASK | POSIX_SPAWN_SETSIGDEF);

  std::vector<std::string> env_strings = build_environment(spec);
  std::vector<char*> envp;
  for (auto& s : env_strings) envp.push_back(s.data());
  envp.push_back(nullptr);
  std::vector<std::string> argv_strings = spec.argv;
  std::vector<char*> argv;
  for (auto& s : argv_strings) argv.push_back(s.data());
  argv.push_back(nullptr);

  pid_t pid = -1;
  int rc = ::posix_spawnp(&pid, argv[0], &actions, &attr, argv.data(), envp.data());
  posix_spawn_file_actions_destroy(&actions);
  posix_spawnattr_destroy(&attr);
  if (rc != 0) {
    throw Error(rc == ENOENT ? Errc::kWorkspaceMissing : Errc::kBackendUnavailable,
                std::string("spawn ") + spec.argv[0] + ": " + std::strerror(rc));
  }
  write_end.reset();

  ProcessOutcome outcome;
  LineSplitter splitter(on_line);
  std::optional<ProcessOutcome::End> forced;
  std::optional<SteadyClock::time_point> term_sent;
  std::optional<SteadyClock::time_point> reaped_at;
  bool killed = false;
  bool eof = false;
  int status = 0;
  rusage usage{};

  auto steady_deadline = SteadyClock::now() + std::chrono::duration_cast<SteadyClock::duration>(
                                                   deadline - Clock::now());

  char buf[8192];
  while (!eof || !reaped_at) {
    if (!eof) {
      pollfd pfd{read_end.get(), POLLIN, 0};
      int pr = ::poll(&pfd, 1, 50);
      if (pr > 0) {
        ssize_t n = ::read(read_end.get(), buf, sizeof buf);
        if (n > 0) {
          splitter.feed(buf, static_cast<std::size_t>(n));
        } else if (n == 0 || (errno != EINTR && errno != EAGAIN)) {
          eof = true;
        }
      }
    } else {
      std::this_thread::sleep_for(10ms);
    }

    if (!reaped_at) {
      pid_t w = ::wait4(pid, &status, WNOHANG, &usage);
      if (w == pid) {
        reaped_at = SteadyClock::now();
        // Stragglers left in the group would keep the pipe open.
        ::kill(-pid, SIGKILL);
      }
    } else if (!eof && SteadyClock::now() - *reaped_at > 2s) {
      break;
    }

    auto now = SteadyClock::now();
    if (!forced && !reaped_at) {
      if (cancel.stop_requested()) {
        forced = ProcessOutcome::End::kCanceled;
      } else if (now >= steady_deadline) {
        forced = ProcessOutcome::End::kTimedOut;
      }
      if (forced) {
        ::kill(-pid, SIGTERM);
        term_sent = now;
      }
    }
    if (term_sent && !killed && !reaped_at && now - *term_sent >= grace) {
      ::kill(-pid, SIGKILL);
      killed = true;
    }
  }
  splitter.finish();

  outcome.peak_rss_kb = usage.ru_maxrss;
  if (forced) {
    outcome.end = *forced;
    outcome.code = WIFEXITED(status) ? WEXITSTATUS(status) : (WIFSIGNALED(status) ? WTERMSIG(status) : 0);
  } else if (WIFEXITED(status)) {
    outcome.end = ProcessOutcome::End::kExited;
    outcome.code = WEXITSTATUS(status);
  } else {
    outcome.end = ProcessOutcome::End::kSignaled;
    outcome.code = WIFSIGNALED(status) ? WTERMSIG(status) : -1;
  }
  return outcome;
}

}  // namespace labci::pipeline
