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

#include "store/snapshot.hpp"

#include <sys/stat.h>

#include <algorithm>

#include "common/error.hpp"
#include "common/fsutil.hpp"
#include "store/tar.hpp"

namespace labci::store {

namespace {

constexpr std::string_view kRegularMode = "100644";
constexpr std::string_view kExecutableMode = "100755";

struct WalkedFile {
  std::string path;
  FileMode mode;
  fs::path absolute;
};

std::vector<WalkedFile> walk(const fs::path& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw Error(Errc::kNotFound, "not a directory: " + dir.string());
  std::vector<WalkedFile> files;
  for (auto it = fs::recursive_directory_iterator(dir); it != fs::recursive_directory_iterator(); ++it) {
    auto status = it->symlink_status();
    auto rel = fs::relative(it->path(), dir).generic_string();
    if (fs::is_directory(status)) continue;
    if (!fs::is_regular_file(status)) throw Error(Errc::kPathRejected, "not a regular file: " + rel);
    validate_relative_path(rel);
    bool exec = (status.permissions() & fs::perms::owner_exec) != fs::perms::none;
    files.push_back({rel, exec ? FileMode::kExecutable : FileMode::kRegular, it->path()});
  }
  std::sort(files.begin(), files.end(), [](const auto& a, const auto& b) { return a.path < b.path; });
  return files;
}

void write_member(const fs::path& target, const SnapshotEntry& e, std::string_view bytes) {
  fs::path file = target / fs::path(e.path);
  fs::create_directories(file.parent_path());
  fsutil::atomic_write(file, bytes);
  ::chmod(file.c_str(), e.mode == FileMode::kExecutable ? 0755 : 0644);
}

}  // namespace

void validate_relative_path(std::string_view path) {
  if (path.empty()) throw Error(Errc::kPathRejected, "empty path");
  if (path.front() == '/') throw Error(Errc::kPathRejected, "absolute path: " + std::string(path));
  if (path.find('\\') != std::string_view::npos || path.find('\0') != std::string_view::npos) {
    throw Error(Errc::kPathRejected, "unsupported character in path: " + std::string(path));
  }
  std::size_t start = 0;
  while (true) {
    auto end = path.find('/', start);
    auto seg = path.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
    if (seg.empty() || seg == "." || seg == "..") {
      throw Error(Errc::kPathRejected, "unsafe path: " + std::string(path));
    }
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
}

std::string SnapshotManifest::canonical() const {
  std::string out;
  for (const auto& e : entries) {
    out += e.mode == FileMode::kExecutable ? kExecutableMode : kRegularMode;
    out += ' ';
    out += e.digest.hex();
    out += ' ';
    out += e.path;
    out += '\n';
  }
  return out;
}

Digest SnapshotManifest::digest() const { return Digest::of(canonical()); }

SnapshotManifest SnapshotManifest::parse(std::string_view text) {
  SnapshotManifest m;
  while (!text.empty()) {
    auto nl = text.find('\n');
    if (nl == std::string_view::npos) throw Error(Errc::kCorruptBlob, "manifest: missing trailing newline");
    auto line = text.substr(0, nl);
    text.remove_prefix(nl + 1);
    if (line.size() < 6 + 1 + 64 + 2 || line[6] != ' ' || line[71] != ' ') {
      throw Error(Errc::kCorruptBlob, "manifest: malformed line");
    }
    SnapshotEntry e;
    auto mode = line.substr(0, 6);
    if (mode == kRegularMode) {
      e.mode = FileMode::kRegular;
    } else if (mode == kExecutableMode) {
      e.mode = FileMode::kExecutable;
    } else {
      throw Error(Errc::kCorruptBlob, "manifest: bad mode");
    }
    auto d = Digest::from_hex(line.substr(7, 64));
    if (!d) throw Error(Errc::kCorruptBlob, "manifest: bad digest");
    e.digest = *d;
    e.path = std::string(line.substr(72));
    if (!m.entries.empty() && !(m.entries.back().path < e.path)) {
      throw Error(Errc::kCorruptBlob, "manifest: entries not sorted");
    }
    m.entries.push_back(std::move(e));
  }
  return m;
}

SnapshotManifest scan_directory(const fs::path& dir) {
  SnapshotManifest m;
  for (const auto& f : walk(dir)) {
    m.entries.push_back({f.path, f.mode, Digest::of(fsutil::read_file(f.absolute))});
  }
  return m;
}

std::string pack_directory(const fs::path& dir) {
  std::vector<TarEntry> members;
  for (const auto& f : walk(dir)) {
    members.push_back({f.path, f.mode == FileMode::kExecutable, fsutil::read_file(f.absolute)});
  }
  std::sort(members.begin(), members.end(), [](const auto& a, const auto& b) { return a.path < b.path; });
  return write_tar(members);
}

SnapshotStore::SnapshotStore(fs::path data_dir, BlobStore& blobs)
    : dir_(std::move(data_dir) / "snapshots"), blobs_(blobs) {
  fs::create_directories(dir_);
}

fs::path SnapshotStore::manifest_path(const Digest& commit_id) const {
  return dir_ / (commit_id.hex() + ".manifest");
}

SnapshotStore::Imported SnapshotStore::finish_import(std::vector<SnapshotEntry> entries) {
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) { return a.path < b.path; });
  for (std::size_t i = 1; i < entries.size(); ++i) {
    if (entries[i].path == entries[i - 1].path) {
      throw Error(Errc::kPathRejected, "duplicate path: " + entries[i].path);
    }
  }
  Imported out{SnapshotManifest{std::move(entries)}, {}};
  auto text = out.manifest.canonical();
  out.commit_id = Digest::of(text);
  if (!contains(out.commit_id)) fsutil::atomic_write(manifest_path(out.commit_id), text);
  return out;
}

SnapshotStore::Imported SnapshotStore::import_directory(const fs::path& dir) {
  std::vector<SnapshotEntry> entries;
  for (const auto& f : walk(dir)) {
    entries.push_back({f.path, f.mode, blobs_.put(fsutil::read_file(f.absolute))});
  }
  return finish_import(std::move(entries));
}

SnapshotStore::Imported SnapshotStore::import_tar(std::string_view archive) {
  std::vector<SnapshotEntry> entries;
  for (auto& m : read_tar(archive)) {
    entries.push_back({m.path, m.executable ? FileMode::kExecutable : FileMode::kRegular, blobs_.put(m.contents)});
  }
  return finish_import(std::move(entries));
}

bool SnapshotStore::contains(const Digest& commit_id) const {
  std::error_code ec;
  return fs::is_regular_file(manifest_path(commit_id), ec);
}

SnapshotManifest SnapshotStore::manifest(const Digest& commit_id) const {
  if (!contains(commit_id)) throw Error(Errc::kNotFound, "snapshot " + commit_id.hex() + " not found");
  auto text = fsutil::read_file(manifest_path(commit_id));
  if (Digest::of(text) != commit_id) {
    throw Error(Errc::kCorruptBlob, "snapshot manifest " + commit_id.hex() + " does not match its digest");
  }
  return SnapshotManifest::parse(text);
}

std::optional<std::string> SnapshotStore::read_file(const Digest& commit_id, std::string_view path) const {
  for (const auto& e : manifest(commit_id).entries) {
    if (e.path == path) return blobs_.get(e.digest);
  }
  return std::nullopt;
}

void SnapshotStore::export_to(const Digest& commit_id, const fs::path& target) const {
  auto m = manifest(commit_id);
  std::error_code ec;
  if (fs::exists(target, ec) && !fs::is_empty(target, ec)) {
    throw Error(Errc::kInvalidArgument, "export target is not empty: " + target.string());
  }
  fs::create_directories(target);
  for (const auto& e : m.entries) write_member(target, e, blobs_.get(e.digest));
}

std::string SnapshotStore::export_tar(const Digest& commit_id) const {
  std::vector<TarEntry> members;
  for (const auto& e : manifest(commit_id).entries) {
    members.push_back({e.path, e.mode == FileMode::kExecutable, blobs_.get(e.digest)});
  }
  return write_tar(members);
}

}  // namespace labci::store
