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

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "common/digest.hpp"
#include "json.hpp"

namespace labci::store {

struct ArtifactEntry {
  std::string path;
  std::uint64_t size = 0;
  Digest digest;

  bool operator==(const ArtifactEntry&) const = default;
};

struct ArtifactManifest {
  std::int64_t job_id = 0;
  // Sorted by path, unique.
  std::vector<ArtifactEntry> entries;

  // Inserts or replaces by path, keeping order.
  void record(ArtifactEntry entry);
  const ArtifactEntry* find(const std::string& path) const;

  bool operator==(const ArtifactManifest&) const = default;
};

nlohmann::json to_json(const ArtifactManifest& m);
ArtifactManifest artifact_manifest_from_json(const nlohmann::json& j);

// Compact JSON rendering hashed for the ledger.
std::string canonical_bytes(const ArtifactManifest& m);

// ---- build comparison ----

// What compare_builds needs to know about one job.
struct ComparedJob {
  std::int64_t job_id = 0;
  int matrix_index = 0;
  std::string state;
  ArtifactManifest artifacts;
  nlohmann::json fingerprint;  // object, or null when the job never ran
};

struct ComparedBuild {
  std::int64_t build_id = 0;
  std::string commit_id;
  bool terminal = false;
  std::vector<ComparedJob> jobs;
};

enum class PathVerdict { kIdentical, kDiffers, kOnlyInA, kOnlyInB };
std::string_view path_verdict_name(PathVerdict v) noexcept;

struct PathComparison {
  std::string path;
  PathVerdict verdict = PathVerdict::kIdentical;
  std::optional<Digest> digest_a;
  std::optional<Digest> digest_b;

  bool operator==(const PathComparison&) const = default;
};

struct FieldDiff {
  std::string field;
  nlohmann::json a;
  nlohmann::json b;

  bool operator==(const FieldDiff&) const = default;
};

struct JobPairReport {
  int matrix_index = 0;
  std::int64_t job_a = 0;
  std::int64_t job_b = 0;
  std::vector<PathComparison> paths;
  std::vector<FieldDiff> fingerprint_diffs;
};

struct ReproReport {
  std::int64_t build_a = 0;
  std::int64_t build_b = 0;
  std::vector<JobPairReport> pairs;
  bool reproduced = true;
};

// Pairs jobs by matrix_index and diffs their artifact manifests by digest.
// Fingerprint differences are reported but never affect the verdict.
// Errors: kNotTerminal, kMatrixShapeMismatch, kCrossCommit (unless allowed).
ReproReport compare_builds(const ComparedBuild& a, const ComparedBuild& b, bool allow_cross_commit = false);

nlohmann::json to_json(const ReproReport& r);
ReproReport repro_report_from_json(const nlohmann::json& j);
std::string render_text(const ReproReport& r);

}  // namespace labci::store
