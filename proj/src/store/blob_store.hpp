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

#include "common/digest.hpp"

namespace labci::store {

namespace fs = std::filesystem;

// Content-addressed blobs laid out as <root>/<first 2 hex>/<remaining 62 hex>.
// Puts go through temp-file + rename, so concurrent writers of the same
// content converge on one physical file.
class BlobStore {
 public:
  explicit BlobStore(fs::path root);

  Digest put(std::string_view bytes);
  // Throws Error(kNotFound) or Error(kCorruptBlob) if the stored bytes no
  // longer hash to `digest`.
  std::string get(const Digest& digest) const;
  bool contains(const Digest& digest) const;
  fs::path path_of(const Digest& digest) const;

  const fs::path& root() const noexcept { return root_; }

 private:
  fs::path root_;
};

}  // namespace labci::store
