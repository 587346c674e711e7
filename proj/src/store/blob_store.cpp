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

#include "store/blob_store.hpp"

#include "common/error.hpp"
#include "common/fsutil.hpp"

namespace labci::store {

BlobStore::BlobStore(fs::path root) : root_(std::move(root)) { fs::create_directories(root_); }

fs::path BlobStore::path_of(const Digest& digest) const {
  auto hex = digest.hex();
  return root_ / hex.substr(0, 2) / hex.substr(2);
}

bool BlobStore::contains(const Digest& digest) const {
  std::error_code ec;
  return fs::is_regular_file(path_of(digest), ec);
}

Digest BlobStore::put(std::string_view bytes) {
  Digest d = Digest::of(bytes);
  if (!contains(d)) fsutil::atomic_write(path_of(d), bytes);
  return d;
}

std::string BlobStore::get(const Digest& digest) const {
  auto path = path_of(digest);
  if (!contains(digest)) throw Error(Errc::kNotFound, "blob " + digest.hex() + " not found");
  std::string bytes = fsutil::read_file(path);
  if (Digest::of(bytes) != digest) {
    throw Error(Errc::kCorruptBlob, "blob " + digest.hex() + " does not match its digest");
  }
  return bytes;
}

}  // namespace labci::store
