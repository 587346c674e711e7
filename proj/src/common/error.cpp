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

#include "common/error.hpp"

namespace labci {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::kOk: return "ok";
    case Errc::kInvalidArgument: return "invalid_argument";
    case Errc::kSyntax: return "syntax_error";
    case Errc::kValidation: return "validation_error";
    case Errc::kNotFound: return "not_found";
    case Errc::kIllegalTransition: return "illegal_transition";
    case Errc::kAuth: return "auth_failure";
    case Errc::kOutOfOrderChunk: return "out_of_order_chunk";
    case Errc::kJobNotRunning: return "job_not_running";
    case Errc::kPathEscapesWorkspace: return "path_escapes_workspace";
    case Errc::kPathRejected: return "path_rejected";
    case Errc::kDigestMismatch: return "digest_mismatch";
    case Errc::kCorruptBlob: return "corrupt_blob";
    case Errc::kDuplicateJob: return "duplicate_job";
    case Errc::kNotTerminal: return "not_terminal";
    case Errc::kMatrixShapeMismatch: return "matrix_shape_mismatch";
    case Errc::kCrossCommit: return "cross_commit";
    case Errc::kEmptyStagePlan: return "empty_stage_plan";
    case Errc::kUnknownCommit: return "unknown_commit";
    case Errc::kSnapshotNotFound: return "snapshot_not_found";
    case Errc::kStorage: return "storage_failure";
    case Errc::kBackendUnavailable: return "backend_unavailable";
    case Errc::kWorkspaceMissing: return "workspace_missing";
    case Errc::kSubmissionRefused: return "submission_refused";
    case Errc::kBatchLost: return "batch_lost";
    case Errc::kFetchFailure: return "fetch_failure";
    case Errc::kNetwork: return "network_error";
    case Errc::kAddressInUse: return "address_in_use";
    case Errc::kInternal: return "internal";
  }
  return "unknown";
}

Errc parse_errc(std::string_view name) noexcept {
  for (int i = 0; i <= static_cast<int>(Errc::kInternal); ++i) {
    if (errc_name(static_cast<Errc>(i)) == name) return static_cast<Errc>(i);
  }
  return Errc::kInternal;
}

}  // namespace labci
