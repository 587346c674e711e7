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

#include <string>
#include <string_view>
#include <vector>

namespace labci::store {

struct TarEntry {
  std::string path;
  bool executable = false;
  std::string contents;
};

// Deterministic POSIX ustar: regular files only, zero mtime/uid/gid, entries
// in the given order.
std::string write_tar(const std::vector<TarEntry>& entries);

// Accepts regular files and directory records (directories are dropped).
// Header checksum failures raise Error(kDigestMismatch); unsupported record
// types raise Error(kInvalidArgument); unsafe paths raise Error(kPathRejected).
std::vector<TarEntry> read_tar(std::string_view archive);

}  // namespace labci::store
