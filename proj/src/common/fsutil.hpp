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
#include <string>
#include <string_view>

namespace labci::fsutil {

namespace fs = std::filesystem;

std::string read_file(const fs::path& path);
// Writes to a sibling temp file, fsyncs it, then renames over `target`.
void atomic_write(const fs::path& target, std::string_view data);
// Appends and fsyncs before returning.
void append_durable(const fs::path& path, std::string_view data);
void fsync_dir(const fs::path& dir);

// Fresh uniquely-named directory under `parent`.
fs::path make_unique_dir(const fs::path& parent, std::string_view prefix);

}  // namespace labci::fsutil
