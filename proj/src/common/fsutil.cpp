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

#include "common/fsutil.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include "common/error.hpp"

namespace labci::fsutil {

namespace {

std::string errno_text(const std::string& what, const fs::path& p) {
  return what + " " + p.string() + ": " + std::strerror(errno);
}

void write_all(int fd, std::string_view data, const fs::path& p) {
  while (!data.empty()) {
    ssize_t n = ::write(fd, data.data(), data.size());
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(Errc::kStorage, errno_text("write", p));
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
}

std::string random_suffix() {
  static std::atomic<unsigned> counter{0};
  thread_local std::mt19937_64 rng(std::random_device{}());
  std::ostringstream os;
  os << std::hex << rng() << '-' << counter.fetch_add(1);
  return os.str();
}

}  // namespace

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::kNotFound, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw Error(Errc::kStorage, "read failed: " + path.string());
  return std::move(ss).str();
}

void fsync_dir(const fs::path& dir) {
  int fd = ::open(dir.c_str(), O_RDONLY | O_DIRECTORY | O_CLOEXEC);
  if (fd < 0) return;
  ::fsync(fd);
  ::close(fd);
}

void atomic_write(const fs::path& target, std::string_view data) {
  fs::create_directories(target.parent_path());
  fs::path tmp = target.parent_path() / (".tmp-" + random_suffix());
  int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_EXCL | O_CLOEXEC, 0644);
  if (fd < 0) throw Error(Errc::kStorage, errno_text("create", tmp));
  try {
    write_all(fd, data, tmp);
    if (::fsync(fd) != 0) throw Error(Errc::kStorage, errno_text("fsync", tmp));
  } catch (...) {
    ::close(fd);
    ::unlink(tmp.c_str());
    throw;
  }
  ::close(fd);
  if (::rename(tmp.c_str(), target.c_str()) != 0) {
    ::unlink(tmp.c_str());
    throw Error(Errc::kStorage, errno_text("rename", target));
  }
  fsync_dir(target.parent_path());
}

void append_durable(const fs::path& path, std::string_view data) {
  int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd < 0) throw Error(Errc::kStorage, errno_text("open", path));
  try {
    write_all(fd, data, path);
    if (::fsync(fd) != 0) throw Error(Errc::kStorage, errno_text("fsync", path));
  } catch (...) {
    ::close(fd);
    throw;
  }
  ::close(fd);
}

fs::path make_unique_dir(const fs::path& parent, std::string_view prefix) {
  fs::create_directories(parent);
  for (int attempt = 0; attempt < 100; ++attempt) {
    fs::path candidate = parent / (std::string(prefix) + random_suffix());
    std::error_code ec;
    if (fs::create_directory(candidate, ec)) return candidate;
  }
  throw Error(Errc::kStorage, "could not create a unique directory under " + parent.string());
}

}  // namespace labci::fsutil
