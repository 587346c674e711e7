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

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

namespace labci::config {

enum class OsKind { kLinux, kMacos, kWindows };

std::string_view os_name(OsKind os) noexcept;
std::optional<OsKind> parse_os(std::string_view text) noexcept;

// Canonical execution order. Info is implicit and never configured.
enum class Stage { kInfo, kInstall, kBuild, kTest, kDeploy, kRun, kReport };

inline constexpr std::array<Stage, 6> kConfigurableStages = {
    Stage::kInstall, Stage::kBuild, Stage::kTest, Stage::kDeploy, Stage::kRun, Stage::kReport};

std::string_view stage_name(Stage s) noexcept;
std::optional<Stage> parse_stage(std::string_view text) noexcept;

// Insertion-ordered name -> value list; names are unique.
using EnvVars = std::vector<std::pair<std::string, std::string>>;

struct EnvironmentSpec {
  OsKind os = OsKind::kLinux;
  std::optional<std::string> dist;
  std::optional<std::string> language;
  std::optional<std::string> language_version;
  EnvVars env_vars;

  bool operator==(const EnvironmentSpec&) const = default;
};

// A matrix entry: every present field replaces the base, env_vars merge key-wise.
struct EnvironmentOverride {
  std::optional<OsKind> os;
  std::optional<std::string> dist;
  std::optional<std::string> language;
  std::optional<std::string> language_version;
  EnvVars env_vars;

  bool operator==(const EnvironmentOverride&) const = default;
};

struct StageScripts {
  // Indexed by position in kConfigurableStages.
  std::array<std::vector<std::string>, 6> commands;

  const std::vector<std::string>& of(Stage s) const;
  std::vector<std::string>& of(Stage s);
  bool empty() const noexcept;

  bool operator==(const StageScripts&) const = default;
};

struct MatrixSpec {
  std::vector<EnvironmentOverride> entries;
  bool operator==(const MatrixSpec&) const = default;
};

struct ArtifactSpec {
  std::vector<std::string> patterns;
  bool operator==(const ArtifactSpec&) const = default;
};

struct Diagnostic {
  std::string code;
  std::string message;
  int line = 0;

  bool operator==(const Diagnostic&) const = default;
};

struct PipelineConfig {
  EnvironmentSpec base_env;
  StageScripts stages;
  MatrixSpec matrix;
  ArtifactSpec artifacts;
  int timeout_minutes = 50;
  // Non-fatal parse warnings (unknown keys). Not part of equality.
  std::vector<Diagnostic> warnings;

  bool operator==(const PipelineConfig& o) const {
    return base_env == o.base_env && stages == o.stages && matrix == o.matrix &&
           artifacts == o.artifacts && timeout_minutes == o.timeout_minutes;
  }
};

struct StagePlanEntry {
  Stage stage;
  std::vector<std::string> commands;
  bool operator==(const StagePlanEntry&) const = default;
};

struct JobSpec {
  EnvironmentSpec env;
  // Configurable stages only; info is implied ahead of these.
  std::vector<StagePlanEntry> stage_plan;
  ArtifactSpec artifacts;
  int timeout_minutes = 50;
  int matrix_index = 0;

  bool operator==(const JobSpec&) const = default;
};

inline constexpr std::string_view kConfigFileName = ".labci.yml";

// Throws Error(kSyntax) with a 1-based line for malformed documents and
// Error(kValidation) for schema violations.
PipelineConfig parse_config(std::string_view text);

std::vector<Stage> effective_stages(const PipelineConfig& cfg);
std::vector<Stage> effective_stages(const JobSpec& spec);

std::vector<JobSpec> expand_matrix(const PipelineConfig& cfg);

// Keeps only the requested stages; throws Error(kEmptyStagePlan) if nothing remains.
JobSpec filter_stages(const JobSpec& spec, const std::vector<Stage>& only);

std::vector<Diagnostic> lint(const PipelineConfig& cfg);

// Canonical YAML rendering; parse_config(serialize_config(c)) == c.
std::string serialize_config(const PipelineConfig& cfg);

nlohmann::json to_json(const EnvironmentSpec& env);
EnvironmentSpec environment_from_json(const nlohmann::json& j);
nlohmann::json to_json(const JobSpec& spec);
JobSpec job_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Diagnostic& d);

}  // namespace labci::config
