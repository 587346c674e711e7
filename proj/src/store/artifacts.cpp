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

#include "store/artifacts.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "common/error.hpp"

namespace labci::store {

using nlohmann::json;

void ArtifactManifest::record(ArtifactEntry entry) {
  auto it = std::lower_bound(entries.begin(), entries.end(), entry.path,
                             [](const ArtifactEntry& e, const std::string& p) { return e.path < p; });
  if (it != entries.end() && it->path == entry.path) {
    *it = std::move(entry);
  } else {
    entries.insert(it, std::move(entry));
  }
}

const ArtifactEntry* ArtifactManifest::find(const std::string& path) const {
  auto it = std::lower_bound(entries.begin(), entries.end(), path,
                             [](const ArtifactEntry& e, const std::string& p) { return e.path < p; });
  return it != entries.end() && it->path == path ? &*it : nullptr;
}

json to_json(const ArtifactManifest& m) {
  json entries = json::array();
  for (const auto& e : m.entries) {
    entries.push_back({{"path", e.path}, {"size", e.size}, {"digest", e.digest.hex()}});
  }
  return json{{"job_id", m.job_id}, {"entries", entries}};
}

ArtifactManifest artifact_manifest_from_json(const json& j) {
  ArtifactManifest m;
  m.job_id = j.value("job_id", std::int64_t{0});
  for (const auto& e : j.at("entries")) {
    auto d = Digest::from_hex(e.at("digest").get<std::string>());
    if (!d) throw Error(Errc::kInvalidArgument, "artifact manifest: bad digest");
    m.record({e.at("path").get<std::string>(), e.at("size").get<std::uint64_t>(), *d});
  }
  return m;
}

std::string canonical_bytes(const ArtifactManifest& m) { return to_json(m).dump(); }

std::string_view path_verdict_name(PathVerdict v) noexcept {
  switch (v) {
    case PathVerdict::kIdentical: return "identical";
    case PathVerdict::kDiffers: return "differs";
    case PathVerdict::kOnlyInA: return "only_in_a";
    case PathVerdict::kOnlyInB: return "only_in_b";
  }
  return "identical";
}

namespace {

std::vector<FieldDiff> diff_fingerprints(const json& a, const json& b) {
  std::vector<FieldDiff> out;
  if (!a.is_object() || !b.is_object()) {
    if (a != b) out.push_back({"fingerprint", a, b});
    return out;
  }
  std::set<std::string> keys;
  for (const auto& [k, _] : a.items()) keys.insert(k);
  for (const auto& [k, _] : b.items()) keys.insert(k);
  for (const auto& k : keys) {
    if (k == "captured_at") continue;  // differs on every run
    json va = a.contains(k) ? a.at(k) : json(nullptr);
    json vb = b.contains(k) ? b.at(k) : json(nullptr);
    if (va != vb) out.push_back({k, va, vb});
  }
  return out;
}

std::vector<PathComparison> diff_manifests(const ArtifactManifest& a, const ArtifactManifest& b) {
  std::vector<PathComparison> out;
  auto ia = a.entries.begin();
  auto ib = b.entries.begin();
  while (ia != a.entries.end() || ib != b.entries.end()) {
    if (ib == b.entries.end() || (ia != a.entries.end() && ia->path < ib->path)) {
      out.push_back({ia->path, PathVerdict::kOnlyInA, ia->digest, std::nullopt});
      ++ia;
    } else if (ia == a.entries.end() || ib->path < ia->path) {
      out.push_back({ib->path, PathVerdict::kOnlyInB, std::nullopt, ib->digest});
      ++ib;
    } else {
      auto v = ia->digest == ib->digest ? PathVerdict::kIdentical : PathVerdict::kDiffers;
      out.push_back({ia->path, v, ia->digest, ib->digest});
      ++ia;
      ++ib;
    }
  }
  return out;
}

json opt_digest(const std::optional<Digest>& d) { return d ? json(d->hex()) : json(nullptr); }

}  // namespace

ReproReport compare_builds(const ComparedBuild& a, const ComparedBuild& b, bool allow_cross_commit) {
  if (!a.terminal || !b.terminal) {
    throw Error(Errc::kNotTerminal, "both builds must be finished before comparing");
  }
  if (a.commit_id != b.commit_id && !allow_cross_commit) {
    throw Error(Errc::kCrossCommit, "builds are of different commits (" + a.commit_id.substr(0, 12) + " vs " +
                                        b.commit_id.substr(0, 12) + "); pass --cross-commit to compare anyway");
  }
  if (a.jobs.size() != b.jobs.size()) {
    throw Error(Errc::kMatrixShapeMismatch, "builds have " + std::to_string(a.jobs.size()) + " and " +
                                                std::to_string(b.jobs.size()) + " jobs");
  }
  std::map<int, const ComparedJob*> by_index;
  for (const auto& j : b.jobs) by_index[j.matrix_index] = &j;

  ReproReport report;
  report.build_a = a.build_id;
  report.build_b = b.build_id;
  std::vector<const ComparedJob*> ordered;
  for (const auto& j : a.jobs) ordered.push_back(&j);
  std::sort(ordered.begin(), ordered.end(), [](auto* x, auto* y) { return x->matrix_index < y->matrix_index; });
  for (const auto* ja : ordered) {
    auto it = by_index.find(ja->matrix_index);
    if (it == by_index.end()) {
      throw Error(Errc::kMatrixShapeMismatch, "no job with matrix index " + std::to_string(ja->matrix_index));
    }
    const ComparedJob* jb = it->second;
    JobPairReport pair;
    pair.matrix_index = ja->matrix_index;
    pair.job_a = ja->job_id;
    pair.job_b = jb->job_id;
    pair.paths = diff_manifests(ja->artifacts, jb->artifacts);
    pair.fingerprint_diffs = diff_fingerprints(ja->fingerprint, jb->fingerprint);
    for (const auto& p : pair.paths) {
      if (p.verdict != PathVerdict::kIdentical) report.reproduced = false;
    }
    report.pairs.push_back(std::move(pair));
  }
  return report;
}

json to_json(const ReproReport& r) {
  json pairs = json::array();
  for (const auto& p : r.pairs) {
    json paths = json::array();
    for (const auto& c : p.paths) {
      paths.push_back({{"path", c.path},
                       {"verdict", path_verdict_name(c.verdict)},
                       {"digest_a", opt_digest(c.digest_a)},
                       {"digest_b", opt_digest(c.digest_b)}});
    }
    json diffs = json::array();
    for (const auto& d : p.fingerprint_diffs) diffs.push_back({{"field", d.field}, {"a", d.a}, {"b", d.b}});
    pairs.push_back({{"matrix_index", p.matrix_index},
                     {"job_a", p.job_a},
                     {"job_b", p.job_b},
                     {"paths", paths},
                     {"fingerprint_diffs", diffs}});
  }
  return json{{"build_a", r.build_a},
              {"build_b", r.build_b},
              {"pairs", pairs},
              {"verdict", r.reproduced ? "reproduced" : "diverged"}};
}

ReproReport repro_report_from_json(const json& j) {
  auto digest_of = [](const json& v) -> std::optional<Digest> {
    if (v.is_null()) return std::nullopt;
    auto d = Digest::from_hex(v.get<std::string>());
    if (!d) throw Error(Errc::kInvalidArgument, "bad digest in report");
    return d;
  };
  try {
    ReproReport r;
    r.build_a = j.at("build_a").get<std::int64_t>();
    r.build_b = j.at("build_b").get<std::int64_t>();
    r.reproduced = j.at("verdict").get<std::string>() == "reproduced";
    for (const auto& p : j.at("pairs")) {
      JobPairReport pr;
      pr.matrix_index = p.at("matrix_index").get<int>();
      pr.job_a = p.at("job_a").get<std::int64_t>();
      pr.job_b = p.at("job_b").get<std::int64_t>();
      for (const auto& c : p.at("paths")) {
        PathComparison pc;
        pc.path = c.at("path").get<std::string>();
        const auto v = c.at("verdict").get<std::string>();
        bool known = false;
        for (auto cand : {PathVerdict::kIdentical, PathVerdict::kDiffers, PathVerdict::kOnlyInA, PathVerdict::kOnlyInB}) {
          if (path_verdict_name(cand) == v) {
            pc.verdict = cand;
            known = true;
          }
        }
        if (!known) throw Error(Errc::kInvalidArgument, "unknown path verdict " + v);
        pc.digest_a = digest_of(c.at("digest_a"));
        pc.digest_b = digest_of(c.at("digest_b"));
        pr.paths.push_back(std::move(pc));
      }
      for (const auto& d : p.at("fingerprint_diffs")) {
        pr.fingerprint_diffs.push_back({d.at("field").get<std::string>(), d.at("a"), d.at("b")});
      }
      r.pairs.push_back(std::move(pr));
    }
    return r;
  } catch (const json::exception& e) {
    throw Error(Errc::kInvalidArgument, std::string("malformed compare report: ") + e.what());
  }
}

std::string render_text(const ReproReport& r) {
  std::ostringstream os;
  os << "compare build " << r.build_a << " vs build " << r.build_b << "\n";
  for (const auto& p : r.pairs) {
    os << "  matrix " << p.matrix_index << ": job " << p.job_a << " vs job " << p.job_b << "\n";
    if (p.paths.empty()) os << "    (no artifacts)\n";
    for (const auto& c : p.paths) {
      os << "    " << path_verdict_name(c.verdict) << "  " << c.path;
      if (c.verdict == PathVerdict::kIdentical) os << "  " << c.digest_a->hex();
      if (c.verdict == PathVerdict::kDiffers) os << "  " << c.digest_a->hex() << " != " << c.digest_b->hex();
      os << "\n";
    }
    for (const auto& d : p.fingerprint_diffs) {
      os << "    fingerprint " << d.field << ": " << d.a.dump() << " vs " << d.b.dump() << "\n";
    }
  }
  os << "verdict: " << (r.reproduced ? "reproduced" : "diverged") << "\n";
  return os.str();
}

}  // namespace labci::store
