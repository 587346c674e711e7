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
#include <mutex>
#include <vector>

#include "json.hpp"

namespace labci::server {

// Append-only JSONL record of coordinator mutations, replayed on startup to
// rebuild the in-memory index. Same torn-tail rule as the ledger: a partial
// last line is cut off when the file is opened.
class Journal {
 public:
  explicit Journal(std::filesystem::path file);

  // Records that survived the last shutdown, in append order.
  const std::vector<nlohmann::json>& recovered() const noexcept { return recovered_; }
  void release_recovered() { recovered_.clear(); recovered_.shrink_to_fit(); }

  // Durable before returning.
  void append(const nlohmann::json& record);

 private:
  std::filesystem::path file_;
  std::mutex mu_;
  std::vector<nlohmann::json> recovered_;
};

}  // namespace labci::server
