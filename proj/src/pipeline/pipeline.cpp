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

#include "pipeline/pipeline.hpp"

#include <fnmatch.h>

#include <algorithm>
#include <cstdio>

#include "common/error.hpp"
#include "common/fsutil.hpp"

namespace labci::pipeline {

using config::Stage;

std::string format_log_line(Timestamp t, std::string_view stage, std::string_view line) {
  std::string out = format_rfc3339(t);
  out.reserve(out.size() + stage.size() + line.size() + 5);
  out += " [";
  out += stage;
  out += "] ";
  out += line;
  out += '\n';
  return out;
}

JobLog::JobLog(Sink sink, TimeSource now) : sink_(std::move(sink)), now_(std::move(now)) {
  if (!now_) now_ = [] { return Clock::now(); };
}

void JobLog::write(std::string_view stage, std::string_view line) {
  std::string record = format_log_line(now_(), stage, line);
  std::lock_guard lock(mu_);
  size_ += record.size();
  if (sink_) sink_(record);
}

std::uint64_t JobLog::size() const {
  std::lock_guard lock(mu_);
  return size_;
}

namespace {

std::vector<std::string_view> split_segments(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    auto slash = s.find('/', start);
    if (slash == std::string_view::npos) slash = s.size();
    if (slash > start) out.push_back(s.substr(start, slash - start));
    start = slash + 1;
  }
  return out;
}

bool segment_match(std::string_view pattern, std::string_view name) {
  return ::fnmatch(std::string(pattern).c_str(), std::string(name).c_str(), 0) == 0;
}

bool match_from(const std::vector<std::string_view>& pat, std::size_t pi, const std::vector<std::string_view>& path,
                std::size_t si) {
  if (pi == pat.size()) return si == path.size();
  if (pat[pi] == "**") {
    for (std::size_t k = si; k <= path.size(); ++k) {
      if (match_from(pat, pi + 1, path, k)) return true;
    }
    return false;
  }
  if (si == path.size()) return false;
  return segment_match(pat[pi], path[si]) && match_from(pat, pi + 1, path, si + 1);
}

std::vector<std::string_view> split_dots(std::string_view v) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto dot = v.find('.', start);
    out.push_back(v.substr(start, dot == std::string_view::npos ? std::string_view::npos : dot - start));
    if (dot == std::string_view::npos) break;
    start = dot + 1;
  }
  return out;
}

// "3.8.10" cut down to as many components as "3.6" has -> "3.8".
std::string truncate_like(std::string_view detected, std::string_view requested) {
  auto want = split_dots(requested).size();
  auto parts = split_dots(detected);
  std::string out;
  for (std::size_t i = 0; i < parts.size() && i < want; ++i) {
    if (i > 0) out += '.';
    out += parts[i];
  }
  return out;
}

StageResult skipped_entry(std::string stage, const JobLog& log) {
  StageResult r;
  r.stage = std::move(stage);
  r.status = StageStatus::kSkipped;
  r.started_at = r.ended_at = Clock::now();
  r.log_offset = log.size();
  r.log_length = 0;
  return r;
}

std::string format_peak(long kb) {
  char buf[64];
  if (kb >= 1024 * 1024) {
    std::snprintf(buf, sizeof buf, "peak rss %.1fGB", static_cast<double>(kb) / (1024.0 * 1024.0));
  } else {
    std::snprintf(buf, sizeof buf, "peak rss %.1fMB", static_cast<double>(kb) / 1024.0);
  }
  return buf;
}

}  // namespace

bool glob_match(std::string_view pattern, std::string_view path) {
  return match_from(split_segments(pattern), 0, split_segments(path), 0);
}

std::vector<std::string> match_artifacts(const fs::path& root, const std::vector<std::string>& patterns) {
  std::vector<std::string> out;
  if (patterns.empty()) return out;
  std::error_code ec;
  fs::recursive_directory_iterator it(root, fs::directory_options::skip_permission_denied, ec);
  if (ec) throw Error(Errc::kWorkspaceMissing, "cannot scan workspace: " + ec.message());
  for (; it != fs::recursive_directory_iterator(); it.increment(ec)) {
    if (ec) throw Error(Errc::kStorage, "workspace scan failed: " + ec.message());
    const auto& entry = *it;
    if (entry.is_symlink(ec) || !entry.is_regular_file(ec)) continue;
    std::string rel = entry.path().lexically_relative(root).generic_string();
    for (const auto& p : patterns) {
      if (glob_match(p, rel)) {
        out.push_back(rel);
        break;
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

store::ArtifactManifest collect_artifacts(const fs::path& workspace, const std::vector<std::string>& patterns) {
  store::ArtifactManifest manifest;
  for (const auto& rel : match_artifacts(workspace, patterns)) {
    std::string data = fsutil::read_file(workspace / rel);
    manifest.record({rel, data.size(), Digest::of(data)});
  }
  return manifest;
}

bool toolchain_matches(std::string_view requested, std::string_view detected) {
  auto want = split_dots(requested);
  auto have = split_dots(detected);
  if (want.size() > have.size()) return false;
  return std::equal(want.begin(), want.end(), have.begin());
}

EnvironmentFingerprint collect_info(ExecutorBackend& backend, const config::JobSpec& spec,
                                    const fs::path& workspace, JobLog& log) {
  const std::string_view stage = config::stage_name(Stage::kInfo);
  HostFacts facts = backend.host_facts();
  BackendIdentity id = backend.identity();

  EnvironmentFingerprint fp;
  fp.os_name = facts.os_name;
  fp.os_version = facts.os_version;
  fp.cpu_count = std::max(1, facts.cpu_count);
  fp.mem_total_mb = std::max<std::int64_t>(1, facts.mem_total_mb);
  fp.hostname = facts.hostname;
  fp.runner_kind = id.kind;

  std::optional<std::string> detected;
  const auto& language = spec.env.language;
  if (language) {
    detected = backend.probe_toolchain(*language, workspace);
    if (detected) fp.toolchain_reports[*language] = *detected;
  }
  fp.captured_at = Clock::now();

  for (const auto& line : fp.to_lines()) log.write(stage, line);
  log.write(stage, "backend=" + id.name);
  const auto& requested = spec.env.language_version;
  if (language && requested) {
    if (!detected) {
      log.write(stage, "toolchain probe unavailable for " + *language);
    } else if (!toolchain_matches(*requested, *detected)) {
      log.write(stage, "toolchain mismatch: requested " + *requested + ", found " + truncate_like(*detected, *requested));
    }
  }
  return fp;
}

config::EnvVars ci_variables(const config::JobSpec& spec, const JobContext& ctx, Stage stage) {
  return {
      {"CI", "true"},
      {"LABCI_JOB_ID", std::to_string(ctx.job_id)},
      {"LABCI_BUILD_ID", std::to_string(ctx.build_id)},
      {"LABCI_COMMIT", ctx.commit_id},
      {"LABCI_STAGE", std::string(config::stage_name(stage))},
      {"LABCI_MATRIX_INDEX", std::to_string(spec.matrix_index)},
  };
}

StageResult execute_stage(ExecutorBackend& backend, const fs::path& workspace, Stage stage,
                          const std::vector<std::string>& commands, const config::EnvVars& env,
                          Timestamp deadline, JobLog& log, std::stop_token cancel) {
  std::error_code ec;
  if (!fs::is_directory(workspace, ec)) throw Error(Errc::kWorkspaceMissing, "workspace missing: " + workspace.string());
  const std::string name(config::stage_name(stage));

  StageResult result;
  result.stage = name;
  result.log_offset = log.size();
  result.started_at = Clock::now();

  StageRequest request{workspace, name, commands, env, deadline};
  StageOutcome outcome =
      backend.run_stage(request, [&](std::string_view line) { log.write(name, line); }, std::move(cancel));

  result.ended_at = std::max(Clock::now(), result.started_at);
  result.status = outcome.status;
  result.exit_code = outcome.status == StageStatus::kSkipped ? std::nullopt : outcome.exit_code;
  result.note = outcome.note;
  result.peak_rss_kb = outcome.peak_rss_kb;
  result.log_length = log.size() - result.log_offset;
  return result;
}

JobResult run_job(const config::JobSpec& spec, ExecutorBackend& backend, const fs::path& workspace,
                  const JobContext& ctx, JobLog& log, std::stop_token cancel, const RunOptions& options) {
  JobResult result;
  result.overall = JobState::kSucceeded;

  std::vector<Stage> stages = {Stage::kInfo};
  for (const auto& entry : spec.stage_plan) stages.push_back(entry.stage);

  const Timestamp job_start = Clock::now();
  const Timestamp deadline = job_start + options.timeout_unit * spec.timeout_minutes;

  bool stopped = false;
  long peak_kb = 0;
  std::optional<std::string> internal_error;

  for (std::size_t i = 0; i < stages.size(); ++i) {
    const Stage stage = stages[i];
    const std::string name(config::stage_name(stage));
    if (!stopped && cancel.stop_requested()) {
      stopped = true;
      result.overall = JobState::kCanceled;
    }
    if (stopped) {
      result.stage_results.push_back(skipped_entry(name, log));
      continue;
    }
    try {
      if (stage == Stage::kInfo) {
        StageResult info;
        info.stage = name;
        info.log_offset = log.size();
        info.started_at = Clock::now();
        result.fingerprint = collect_info(backend, spec, workspace, log);
        info.ended_at = std::max(Clock::now(), info.started_at);
        info.status = StageStatus::kSucceeded;
        info.exit_code = 0;
        info.log_length = log.size() - info.log_offset;
        result.stage_results.push_back(std::move(info));
        continue;
      }
      config::EnvVars env = spec.env.env_vars;
      for (auto& kv : ci_variables(spec, ctx, stage)) {
        auto it = std::find_if(env.begin(), env.end(), [&](const auto& e) { return e.first == kv.first; });
        if (it != env.end()) {
          it->second = kv.second;
        } else {
          env.push_back(std::move(kv));
        }
      }
      StageResult r = execute_stage(backend, workspace, stage, spec.stage_plan[i - 1].commands, env, deadline, log, cancel);
      if (r.status == StageStatus::kTimedOut) {
        result.overall = JobState::kTimedOut;
        stopped = true;
      } else if (r.status == StageStatus::kFailed) {
        result.overall = r.note == "canceled" ? JobState::kCanceled : JobState::kFailed;
        stopped = true;
      }
      peak_kb = std::max(peak_kb, r.peak_rss_kb);
      result.stage_results.push_back(std::move(r));
    } catch (const std::exception& e) {
      internal_error = std::string(name) + ": " + e.what();
      result.overall = JobState::kFailed;
      stopped = true;
      result.stage_results.push_back(skipped_entry(name, log));
    }
  }

  try {
    result.artifacts = collect_artifacts(workspace, spec.artifacts.patterns);
  } catch (const std::exception& e) {
    if (internal_error) {
      log.write("internal", std::string("artifact collection failed: ") + e.what());
    } else if (result.overall == JobState::kSucceeded) {
      internal_error = std::string("artifact collection failed: ") + e.what();
      result.overall = JobState::kFailed;
    } else {
      log.write("internal", std::string("artifact collection failed: ") + e.what());
    }
  }
  result.artifacts.job_id = ctx.job_id;
  if (peak_kb > 0) result.peak_note = format_peak(peak_kb);

  if (internal_error) {
    StageResult internal;
    internal.stage = "internal";
    internal.status = StageStatus::kFailed;
    internal.log_offset = log.size();
    internal.started_at = Clock::now();
    log.write("internal", *internal_error);
    internal.ended_at = internal.started_at;
    internal.log_length = log.size() - internal.log_offset;
    internal.note = *internal_error;
    result.stage_results.push_back(std::move(internal));
  }
  return result;
}

}  // namespace labci::pipeline
