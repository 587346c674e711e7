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

#include "server/journal.hpp"

#include <unistd.h>

#include "common/error.hpp"
#include "common/fsutil.hpp"

namespace labci::server {

Journal::Journal(std::filesystem::path file) : file_(std::move(file)) {
  std::filesystem::create_directories(file_.parent_path());
  std::error_code ec;
  if (!std::filesystem::exists(file_, ec)) return;
  std::string text = fsutil::read_file(file_);
  std::size_t pos = 0;
  std::size_t good = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string::npos) break;
    try {
      recovered_.push_back(nlohmann::json::parse(text.substr(pos, nl - pos)));
    } catch (const nlohmann::json::exception&) {
      break;
    }
    pos = nl + 1;
    good = pos;
  }
  if (good != text.size() && ::truncate(file_.c_str(), static_cast<off_t>(good)) != 0) {
    throw Error(Errc::kStorage, "cannot truncate torn journal tail: " + file_.string());
  }
}

void Journal::append(const nlohmann::json& record) {
  std::lock_guard lock(mu_);
  fsutil::append_durable(file_, record.dump() + "\n");
}

}  // namespace labci::server
