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

#include <stdexcept>
#include <string>
#include <string_view>

namespace labci {

// Numeric values are part of the C ABI (labci_status in labci.h).
enum class Errc : int {
  kOk = 0,
  kInvalidArgument = 1,
  kSyntax = 2,
  kValidation = 3,
  kNotFound = 4,
  kIllegalTransition = 5,
  kAuth = 6,
  kOutOfOrderChunk = 7,
  kJobNotRunning = 8,
  kPathEscapesWorkspace = 9,
  kPathRejected = 10,
  kDigestMismatch = 11,
  kCorruptBlob = 12,
  kDuplicateJob = 13,
  kNotTerminal = 14,
  kMatrixShapeMismatch = 15,
  kCrossCommit = 16,
  kEmptyStagePlan = 17,
  kUnknownCommit = 18,
  kSnapshotNotFound = 19,
  kStorage = 20,
  kBackendUnavailable = 21,
  kWorkspaceMissing = 22,
  kSubmissionRefused = 23,
  kBatchLost = 24,
  kFetchFailure = 25,
  kNetwork = 26,
  kAddressInUse = 27,
  kInternal = 28,
};

std::string_view errc_name(Errc code) noexcept;
// Inverse of errc_name; unknown names map to kInternal.
Errc parse_errc(std::string_view name) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message, int line = 0)
      : std::runtime_error(message), code_(code), line_(line) {}

  Errc code() const noexcept { return code_; }
  // 1-based source line for syntax/validation errors, 0 when not applicable.
  int line() const noexcept { return line_; }

 private:
  Errc code_;
  int line_;
};

}  // namespace labci
