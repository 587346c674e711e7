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

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "common/digest.hpp"
#include "store/blob_store.hpp"

namespace labci::store {

enum class FileMode { kRegular, kExecutable };

struct SnapshotEntry {
  std::string path;
  FileMode mode = FileMode::kRegular;
  Digest digest;

  bool operator==(const SnapshotEntry&) const = default;
};

struct SnapshotManifest {
  // Sorted bytewise by path, unique.
  std::vector<SnapshotEntry> entries;

  // One `<mode> <hex digest> <path>\n` line per entry, mode 100644|100755.
  std::string canonical() const;
  Digest digest() const;
  // Throws Error(kCorruptBlob) on malformed text.
  static SnapshotManifest parse(std::string_view canonical);

  bool operator==(const SnapshotManifest&) const = default;
};

// Rejects absolute paths, `..`/`.` segments, empty segments and backslashes.
void validate_relative_path(std::string_view path);

// Manifest of a directory tree on disk without storing anything. Only regular
// files are allowed; symlinks and special files raise Error(kPathRejected).
SnapshotManifest scan_directory(const fs::path& dir);
// The same tree as a deterministic ustar archive.
std::string pack_directory(const fs::path& dir);

class SnapshotStore {
 public:
  // Manifests live in <data_dir>/snapshots, file bodies in `blobs`.
  SnapshotStore(fs::path data_dir, BlobStore& blobs);

  struct Imported {
    SnapshotManifest manifest;
    Digest commit_id;
  };

  Imported import_directory(const fs::path& dir);
  Imported import_tar(std::string_view archive);

  bool contains(const Digest& commit_id) const;
  // Throws Error(kNotFound).
  SnapshotManifest manifest(const Digest& commit_id) const;
  std::optional<std::string> read_file(const Digest& commit_id, std::string_view path) const;

  // `target` must be absent or an empty directory.
  void export_to(const Digest& commit_id, const fs::path& target) const;
  std::string export_tar(const Digest& commit_id) const;

 private:
  Imported finish_import(std::vector<SnapshotEntry> entries);
  fs::path manifest_path(const Digest& commit_id) const;

  fs::path dir_;
  BlobStore& blobs_;
};

}  // namespace labci::store
