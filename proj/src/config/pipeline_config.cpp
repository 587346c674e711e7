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

#include "config/pipeline_config.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <regex>
#include <set>

#include "common/error.hpp"
#include "config/yaml_tree.hpp"

namespace labci::config {

namespace {

using nlohmann::json;

// Version-shorthand keys recognised as toolchain names (`python: 3.6`).
const std::set<std::string, std::less<>> kToolchainKeys = {
    "python", "ruby", "node_js", "go", "rust", "jdk", "java", "r", "julia", "perl",
    "php", "dart", "elixir", "ghc", "haskell", "scala", "dotnet", "crystal", "d", "swift"};

const std::set<std::string, std::less<>> kReservedKeys = {
    "os", "dist", "language", "env", "install", "build", "test", "deploy", "run", "script",
    "report", "matrix", "artifacts", "timeout_minutes"};

std::size_t stage_slot(Stage s) {
  for (std::size_t i = 0; i < kConfigurableStages.size(); ++i) {
    if (kConfigurableStages[i] == s) return i;
  }
  throw Error(Errc::kInternal, "info has no configurable command list");
}

[[noreturn]] void fail(Errc code, int line, const std::string& msg) {
  std::string text = line > 0 ? "line " + std::to_string(line) + ": " + msg : msg;
  throw Error(code, text, line);
}

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

const std::string& expect_scalar(const YamlNode& n, std::string_view key) {
  if (!n.is_scalar()) fail(Errc::kValidation, n.line, "`" + std::string(key) + "` must be a scalar");
  return n.scalar;
}

bool valid_env_name(std::string_view name) {
  static const std::regex kName("[A-Za-z_][A-Za-z0-9_]*");
  return std::regex_match(name.begin(), name.end(), kName);
}

bool valid_language_name(std::string_view name) {
  static const std::regex kLang("[A-Za-z][A-Za-z0-9_+.-]*");
  return std::regex_match(name.begin(), name.end(), kLang) && !kReservedKeys.contains(name);
}

OsKind parse_os_node(const YamlNode& n) {
  auto os = parse_os(expect_scalar(n, "os"));
  if (!os) fail(Errc::kValidation, n.line, "unsupported os `" + n.scalar + "`");
  return *os;
}

std::string parse_language(const YamlNode& n) {
  const auto& lang = expect_scalar(n, "language");
  if (!valid_language_name(lang)) fail(Errc::kValidation, n.line, "invalid language name `" + lang + "`");
  return lang;
}

EnvVars parse_env(const YamlNode& n) {
  EnvVars vars;
  if (n.is_null()) return vars;
  if (!n.is_map()) fail(Errc::kValidation, n.line, "`env` must be a mapping of NAME: value");
  for (const auto& [k, v] : n.entries) {
    if (!valid_env_name(k.scalar)) fail(Errc::kValidation, k.line, "bad env var name `" + k.scalar + "`");
    bool dup = std::any_of(vars.begin(), vars.end(), [&](const auto& p) { return p.first == k.scalar; });
    if (dup) fail(Errc::kValidation, k.line, "duplicate env var `" + k.scalar + "`");
    if (!v.is_null() && !v.is_scalar()) fail(Errc::kValidation, v.line, "env var `" + k.scalar + "` must be a scalar");
    vars.emplace_back(k.scalar, v.is_null() ? std::string() : v.scalar);
  }
  return vars;
}

std::vector<std::string> parse_string_list(const YamlNode& n, std::string_view key) {
  std::vector<std::string> out;
  auto take = [&](const YamlNode& item) {
    if (!item.is_scalar()) fail(Errc::kValidation, item.line, "`" + std::string(key) + "` entries must be strings");
    if (trim(item.scalar).empty()) fail(Errc::kValidation, item.line, "empty entry in `" + std::string(key) + "`");
    out.push_back(item.scalar);
  };
  if (n.is_null()) return out;
  if (n.is_scalar()) {
    take(n);
  } else if (n.is_sequence()) {
    for (const auto& item : n.items) take(item);
  } else {
    fail(Errc::kValidation, n.line, "`" + std::string(key) + "` must be a list of strings");
  }
  return out;
}

void check_artifact_pattern(const std::string& p, int line) {
  if (p.front() == '/') fail(Errc::kValidation, line, "artifact pattern `" + p + "` is absolute");
  std::size_t start = 0;
  while (start <= p.size()) {
    auto end = p.find('/', start);
    if (end == std::string::npos) end = p.size();
    if (p.compare(start, end - start, "..") == 0) {
      fail(Errc::kValidation, line, "artifact pattern `" + p + "` contains `..`");
    }
    start = end + 1;
  }
}

int parse_timeout(const YamlNode& n) {
  const auto& s = expect_scalar(n, "timeout_minutes");
  int value = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || p != s.data() + s.size() || value < 1) {
    fail(Errc::kValidation, n.line, "timeout_minutes must be a positive integer");
  }
  return value;
}

// Key-wise env merge: base order kept, overridden values replaced in place,
// new names appended in override order.
EnvVars merge_env(const EnvVars& base, const EnvVars& over) {
  EnvVars out = base;
  for (const auto& [name, value] : over) {
    auto it = std::find_if(out.begin(), out.end(), [&](const auto& p) { return p.first == name; });
    if (it != out.end()) {
      it->second = value;
    } else {
      out.emplace_back(name, value);
    }
  }
  return out;
}

EnvironmentSpec apply_override(const EnvironmentSpec& base, const EnvironmentOverride& o) {
  EnvironmentSpec env = base;
  if (o.os) env.os = *o.os;
  if (o.dist) env.dist = o.dist;
  if (o.language) env.language = o.language;
  if (o.language_version) env.language_version = o.language_version;
  env.env_vars = merge_env(base.env_vars, o.env_vars);
  return env;
}

// Order-insensitive identity of an environment, for duplicate detection.
std::string environment_key(const EnvironmentSpec& env) {
  json j = to_json(env);
  std::map<std::string, std::string> sorted(env.env_vars.begin(), env.env_vars.end());
  j["env_vars"] = sorted;
  return j.dump();
}

EnvironmentOverride parse_matrix_entry(const YamlNode& n, const EnvironmentSpec& base,
                                       std::vector<Diagnostic>& warnings) {
  if (!n.is_map()) fail(Errc::kValidation, n.line, "matrix entries must be mappings");
  EnvironmentOverride o;
  for (const auto& [k, v] : n.entries) {
    if (k.scalar == "language") o.language = parse_language(v);
  }
  std::optional<std::string> lang = o.language ? o.language : base.language;
  std::set<std::string> seen;
  for (const auto& [k, v] : n.entries) {
    const std::string& key = k.scalar;
    if (!seen.insert(key).second) fail(Errc::kValidation, k.line, "duplicate key `" + key + "`");
    if (key == "os") {
      o.os = parse_os_node(v);
    } else if (key == "dist") {
      o.dist = expect_scalar(v, key);
    } else if (key == "language") {
      // handled above
    } else if (key == "env") {
      o.env_vars = parse_env(v);
    } else if (lang && key == *lang) {
      o.language_version = expect_scalar(v, key);
    } else if (kToolchainKeys.contains(key)) {
      fail(Errc::kValidation, k.line,
           "toolchain shorthand `" + key + "` does not match language `" + lang.value_or("") + "`");
    } else {
      warnings.push_back({"unknown-key", "unknown matrix key `" + key + "` ignored", k.line});
    }
  }
  return o;
}

void emit_string(std::string& out, std::string_view s) {
  static constexpr char kHex[] = "0123456789abcdef";
  out.push_back('"');
  for (unsigned char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default:
        if (c < 0x20 || c == 0x7f) {
          out += "\\x";
          out.push_back(kHex[c >> 4]);
          out.push_back(kHex[c & 0xF]);
        } else {
          out.push_back(static_cast<char>(c));
        }
    }
  }
  out.push_back('"');
}

void emit_list(std::string& out, std::string_view indent, const std::vector<std::string>& items) {
  for (const auto& item : items) {
    out += indent;
    out += "- ";
    emit_string(out, item);
    out += '\n';
  }
}

void emit_env(std::string& out, std::string_view indent, const EnvVars& vars) {
  for (const auto& [name, value] : vars) {
    out += indent;
    out += name;
    out += ": ";
    emit_string(out, value);
    out += '\n';
  }
}

json opt_json(const std::optional<std::string>& v) { return v ? json(*v) : json(nullptr); }

std::optional<std::string> opt_from(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<std::string>();
}

}  // namespace

std::string_view os_name(OsKind os) noexcept {
  switch (os) {
    case OsKind::kLinux: return "linux";
    case OsKind::kMacos: return "macos";
    case OsKind::kWindows: return "windows";
  }
  return "linux";
}

std::optional<OsKind> parse_os(std::string_view text) noexcept {
  if (text == "linux") return OsKind::kLinux;
  if (text == "macos" || text == "osx") return OsKind::kMacos;
  if (text == "windows") return OsKind::kWindows;
  return std::nullopt;
}

std::string_view stage_name(Stage s) noexcept {
  switch (s) {
    case Stage::kInfo: return "info";
    case Stage::kInstall: return "install";
    case Stage::kBuild: return "build";
    case Stage::kTest: return "test";
    case Stage::kDeploy: return "deploy";
    case Stage::kRun: return "run";
    case Stage::kReport: return "report";
  }
  return "info";
}

std::optional<Stage> parse_stage(std::string_view text) noexcept {
  for (Stage s : {Stage::kInfo, Stage::kInstall, Stage::kBuild, Stage::kTest, Stage::kDeploy,
                  Stage::kRun, Stage::kReport}) {
    if (stage_name(s) == text) return s;
  }
  return std::nullopt;
}

const std::vector<std::string>& StageScripts::of(Stage s) const { return commands[stage_slot(s)]; }
std::vector<std::string>& StageScripts::of(Stage s) { return commands[stage_slot(s)]; }

bool StageScripts::empty() const noexcept {
  return std::all_of(commands.begin(), commands.end(), [](const auto& c) { return c.empty(); });
}

PipelineConfig parse_config(std::string_view text) {
  YamlNode root = parse_yaml_subset(text);
  PipelineConfig cfg;
  if (root.is_null()) fail(Errc::kValidation, 0, "no stage commands");
  if (!root.is_map()) fail(Errc::kSyntax, root.line, "top level of the pipeline file must be a mapping");

  std::set<std::string> seen;
  for (const auto& [k, v] : root.entries) {
    if (!seen.insert(k.scalar).second) fail(Errc::kValidation, k.line, "duplicate key `" + k.scalar + "`");
    if (k.scalar == "language") cfg.base_env.language = parse_language(v);
  }
  if (seen.contains("run") && seen.contains("script")) {
    fail(Errc::kValidation, 0, "`script` and `run` are aliases; use only one");
  }

  const YamlNode* matrix_node = nullptr;
  for (const auto& [k, v] : root.entries) {
    const std::string& key = k.scalar;
    if (key == "os") {
      cfg.base_env.os = parse_os_node(v);
    } else if (key == "dist") {
      cfg.base_env.dist = expect_scalar(v, key);
    } else if (key == "language") {
      // handled above
    } else if (key == "env") {
      cfg.base_env.env_vars = parse_env(v);
    } else if (key == "script") {
      cfg.stages.of(Stage::kRun) = parse_string_list(v, key);
    } else if (auto stage = parse_stage(key); stage && *stage != Stage::kInfo) {
      cfg.stages.of(*stage) = parse_string_list(v, key);
    } else if (key == "matrix") {
      matrix_node = &v;
    } else if (key == "artifacts") {
      cfg.artifacts.patterns = parse_string_list(v, key);
      for (const auto& p : cfg.artifacts.patterns) check_artifact_pattern(p, v.line);
    } else if (key == "timeout_minutes") {
      cfg.timeout_minutes = parse_timeout(v);
    } else if (cfg.base_env.language && key == *cfg.base_env.language) {
      cfg.base_env.language_version = expect_scalar(v, key);
    } else if (kToolchainKeys.contains(key)) {
      fail(Errc::kValidation, k.line,
           "toolchain shorthand `" + key + "` does not match language `" +
               cfg.base_env.language.value_or("") + "`");
    } else {
      cfg.warnings.push_back({"unknown-key", "unknown key `" + key + "` ignored", k.line});
    }
  }

  if (matrix_node != nullptr && !matrix_node->is_null()) {
    if (!matrix_node->is_sequence()) fail(Errc::kValidation, matrix_node->line, "`matrix` must be a list of mappings");
    std::set<std::string> expanded;
    for (const auto& entry : matrix_node->items) {
      auto o = parse_matrix_entry(entry, cfg.base_env, cfg.warnings);
      if (!expanded.insert(environment_key(apply_override(cfg.base_env, o))).second) {
        fail(Errc::kValidation, entry.line, "duplicate matrix entry");
      }
      cfg.matrix.entries.push_back(std::move(o));
    }
  }

  if (cfg.stages.empty()) fail(Errc::kValidation, 0, "no stage commands");
  return cfg;
}

std::vector<Stage> effective_stages(const PipelineConfig& cfg) {
  std::vector<Stage> out{Stage::kInfo};
  for (Stage s : kConfigurableStages) {
    if (!cfg.stages.of(s).empty()) out.push_back(s);
  }
  return out;
}

std::vector<Stage> effective_stages(const JobSpec& spec) {
  std::vector<Stage> out{Stage::kInfo};
  for (const auto& e : spec.stage_plan) out.push_back(e.stage);
  return out;
}

std::vector<JobSpec> expand_matrix(const PipelineConfig& cfg) {
  std::vector<StagePlanEntry> plan;
  for (Stage s : kConfigurableStages) {
    if (!cfg.stages.of(s).empty()) plan.push_back({s, cfg.stages.of(s)});
  }
  auto make = [&](EnvironmentSpec env, int index) {
    JobSpec spec;
    spec.env = std::move(env);
    spec.stage_plan = plan;
    spec.artifacts = cfg.artifacts;
    spec.timeout_minutes = cfg.timeout_minutes;
    spec.matrix_index = index;
    return spec;
  };
  std::vector<JobSpec> jobs;
  if (cfg.matrix.entries.empty()) {
    jobs.push_back(make(cfg.base_env, 0));
    return jobs;
  }
  int index = 0;
  for (const auto& entry : cfg.matrix.entries) {
    jobs.push_back(make(apply_override(cfg.base_env, entry), index++));
  }
  return jobs;
}

JobSpec filter_stages(const JobSpec& spec, const std::vector<Stage>& only) {
  JobSpec out = spec;
  out.stage_plan.clear();
  for (const auto& e : spec.stage_plan) {
    if (std::find(only.begin(), only.end(), e.stage) != only.end()) out.stage_plan.push_back(e);
  }
  if (out.stage_plan.empty()) {
    throw Error(Errc::kEmptyStagePlan, "stage filter leaves no stages to run");
  }
  return out;
}

std::vector<Diagnostic> lint(const PipelineConfig& cfg) {
  std::vector<Diagnostic> out;
  auto jobs = expand_matrix(cfg);
  std::set<std::string> unpinned;
  std::set<OsKind> systems;
  for (const auto& job : jobs) {
    systems.insert(job.env.os);
    if (job.env.language && !job.env.language_version) unpinned.insert(*job.env.language);
  }
  for (const auto& lang : unpinned) {
    out.push_back({"unpinned-toolchain",
                   "unpinned toolchain version: language `" + lang + "` has no version pin"});
  }
  if (systems.size() == 1) {
    out.push_back({"single-os", "single-OS matrix: every job runs on " +
                                    std::string(os_name(*systems.begin()))});
  }
  bool has_run = !cfg.stages.of(Stage::kRun).empty();
  if (has_run && cfg.artifacts.patterns.empty()) {
    out.push_back({"no-artifacts", "no artifacts declared while a run stage exists"});
  }
  if (!has_run) out.push_back({"no-run-stage", "no run stage"});
  return out;
}

std::string serialize_config(const PipelineConfig& cfg) {
  std::string out;
  out += "os: ";
  out += os_name(cfg.base_env.os);
  out += '\n';
  if (cfg.base_env.dist) {
    out += "dist: ";
    emit_string(out, *cfg.base_env.dist);
    out += '\n';
  }
  if (cfg.base_env.language) {
    out += "language: " + *cfg.base_env.language + "\n";
    if (cfg.base_env.language_version) {
      out += *cfg.base_env.language + ": ";
      emit_string(out, *cfg.base_env.language_version);
      out += '\n';
    }
  }
  if (!cfg.base_env.env_vars.empty()) {
    out += "env:\n";
    emit_env(out, "  ", cfg.base_env.env_vars);
  }
  for (Stage s : kConfigurableStages) {
    const auto& cmds = cfg.stages.of(s);
    if (cmds.empty()) continue;
    out += stage_name(s);
    out += ":\n";
    emit_list(out, "  ", cmds);
  }
  if (!cfg.matrix.entries.empty()) {
    out += "matrix:\n";
    for (const auto& e : cfg.matrix.entries) {
      std::vector<std::string> lines;
      if (e.os) lines.push_back("os: " + std::string(os_name(*e.os)) + "\n");
      if (e.dist) {
        std::string l = "dist: ";
        emit_string(l, *e.dist);
        lines.push_back(l + "\n");
      }
      if (e.language) lines.push_back("language: " + *e.language + "\n");
      if (e.language_version) {
        std::string l = e.language.value_or(cfg.base_env.language.value_or("")) + ": ";
        emit_string(l, *e.language_version);
        lines.push_back(l + "\n");
      }
      if (!e.env_vars.empty()) {
        std::string l = "env:\n";
        emit_env(l, "      ", e.env_vars);
        lines.push_back(l);
      }
      if (lines.empty()) {
        out += "  - {}\n";
        continue;
      }
      for (std::size_t i = 0; i < lines.size(); ++i) {
        out += i == 0 ? "  - " : "    ";
        out += lines[i];
      }
    }
  }
  if (!cfg.artifacts.patterns.empty()) {
    out += "artifacts:\n";
    emit_list(out, "  ", cfg.artifacts.patterns);
  }
  out += "timeout_minutes: " + std::to_string(cfg.timeout_minutes) + "\n";
  return out;
}

json to_json(const EnvironmentSpec& env) {
  json vars = json::array();
  for (const auto& [name, value] : env.env_vars) vars.push_back({{"name", name}, {"value", value}});
  return json{{"os", os_name(env.os)},
              {"dist", opt_json(env.dist)},
              {"language", opt_json(env.language)},
              {"language_version", opt_json(env.language_version)},
              {"env_vars", vars}};
}

EnvironmentSpec environment_from_json(const json& j) {
  EnvironmentSpec env;
  auto os = parse_os(j.at("os").get<std::string>());
  if (!os) throw Error(Errc::kInvalidArgument, "bad os in environment");
  env.os = *os;
  env.dist = opt_from(j, "dist");
  env.language = opt_from(j, "language");
  env.language_version = opt_from(j, "language_version");
  if (j.contains("env_vars")) {
    for (const auto& v : j.at("env_vars")) {
      env.env_vars.emplace_back(v.at("name").get<std::string>(), v.at("value").get<std::string>());
    }
  }
  return env;
}

json to_json(const JobSpec& spec) {
  json plan = json::array();
  for (const auto& e : spec.stage_plan) plan.push_back({{"stage", stage_name(e.stage)}, {"commands", e.commands}});
  return json{{"env", to_json(spec.env)},
              {"stage_plan", plan},
              {"artifacts", spec.artifacts.patterns},
              {"timeout_minutes", spec.timeout_minutes},
              {"matrix_index", spec.matrix_index}};
}

JobSpec job_spec_from_json(const json& j) {
  JobSpec spec;
  spec.env = environment_from_json(j.at("env"));
  for (const auto& e : j.at("stage_plan")) {
    auto s = parse_stage(e.at("stage").get<std::string>());
    if (!s || *s == Stage::kInfo) throw Error(Errc::kInvalidArgument, "bad stage in stage_plan");
    spec.stage_plan.push_back({*s, e.at("commands").get<std::vector<std::string>>()});
  }
  spec.artifacts.patterns = j.at("artifacts").get<std::vector<std::string>>();
  spec.timeout_minutes = j.at("timeout_minutes").get<int>();
  spec.matrix_index = j.at("matrix_index").get<int>();
  return spec;
}

json to_json(const Diagnostic& d) {
  return json{{"code", d.code}, {"message", d.message}, {"line", d.line}};
}

}  // namespace labci::config
