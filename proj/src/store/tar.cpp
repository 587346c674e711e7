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

#include "store/tar.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>

#include "common/error.hpp"
#include "store/snapshot.hpp"

namespace labci::store {

namespace {

constexpr std::size_t kBlock = 512;

struct Field {
  std::size_t offset;
  std::size_t size;
};

constexpr Field kName{0, 100};
constexpr Field kMode{100, 8};
constexpr Field kUid{108, 8};
constexpr Field kGid{116, 8};
constexpr Field kSize{124, 12};
constexpr Field kMtime{136, 12};
constexpr Field kChecksum{148, 8};
constexpr std::size_t kTypeflag = 156;
constexpr Field kMagic{257, 6};
constexpr Field kVersion{263, 2};
constexpr Field kPrefix{345, 155};

void put_octal(char* block, Field f, unsigned long long value) {
  // size-1 octal digits followed by NUL
  std::snprintf(block + f.offset, f.size, "%0*llo", static_cast<int>(f.size - 1), value);
}

void put_text(char* block, Field f, std::string_view text) {
  std::memcpy(block + f.offset, text.data(), std::min(text.size(), f.size));
}

unsigned long long header_checksum(const char* block) {
  unsigned long long sum = 0;
  for (std::size_t i = 0; i < kBlock; ++i) {
    bool in_checksum = i >= kChecksum.offset && i < kChecksum.offset + kChecksum.size;
    sum += in_checksum ? static_cast<unsigned char>(' ') : static_cast<unsigned char>(block[i]);
  }
  return sum;
}

unsigned long long get_octal(const char* block, Field f) {
  std::size_t i = 0;
  while (i < f.size && block[f.offset + i] == ' ') ++i;
  unsigned long long value = 0;
  for (; i < f.size; ++i) {
    char c = block[f.offset + i];
    if (c == '\0' || c == ' ') break;
    if (c < '0' || c > '7') throw Error(Errc::kDigestMismatch, "corrupt archive: bad octal field");
    value = value * 8 + static_cast<unsigned long long>(c - '0');
  }
  for (; i < f.size; ++i) {
    char c = block[f.offset + i];
    if (c != '\0' && c != ' ') throw Error(Errc::kDigestMismatch, "corrupt archive: bad octal field");
  }
  return value;
}

std::string get_text(const char* block, Field f) {
  const char* p = block + f.offset;
  return std::string(p, strnlen(p, f.size));
}

void split_path(const std::string& path, std::string& prefix, std::string& name) {
  if (path.size() <= kName.size) {
    prefix.clear();
    name = path;
    return;
  }
  for (std::size_t pos = path.find('/'); pos != std::string::npos; pos = path.find('/', pos + 1)) {
    if (pos <= kPrefix.size && path.size() - pos - 1 <= kName.size && pos > 0) {
      prefix = path.substr(0, pos);
      name = path.substr(pos + 1);
      return;
    }
  }
  throw Error(Errc::kPathRejected, "path too long for ustar: " + path);
}

}  // namespace

std::string write_tar(const std::vector<TarEntry>& entries) {
  std::string out;
  for (const auto& e : entries) {
    char block[kBlock] = {};
    std::string prefix, name;
    split_path(e.path, prefix, name);
    put_text(block, kName, name);
    put_octal(block, kMode, e.executable ? 0755 : 0644);
    put_octal(block, kUid, 0);
    put_octal(block, kGid, 0);
    put_octal(block, kSize, e.contents.size());
    put_octal(block, kMtime, 0);
    block[kTypeflag] = '0';
    std::memcpy(block + kMagic.offset, "ustar", 6);
    std::memcpy(block + kVersion.offset, "00", 2);
    put_text(block, kPrefix, prefix);
    std::snprintf(block + kChecksum.offset, 7, "%06llo", header_checksum(block));
    block[kChecksum.offset + 7] = ' ';
    out.append(block, kBlock);
    out += e.contents;
    out.append((kBlock - e.contents.size() % kBlock) % kBlock, '\0');
  }
  out.append(2 * kBlock, '\0');
  return out;
}

std::vector<TarEntry> read_tar(std::string_view archive) {
  std::vector<TarEntry> entries;
  std::size_t pos = 0;
  while (true) {
    if (pos + kBlock > archive.size()) throw Error(Errc::kDigestMismatch, "corrupt archive: truncated");
    const char* block = archive.data() + pos;
    bool zero = std::all_of(block, block + kBlock, [](char c) { return c == '\0'; });
    if (zero) break;
    if (get_octal(block, kChecksum) != header_checksum(block)) {
      throw Error(Errc::kDigestMismatch, "corrupt archive: header checksum mismatch");
    }
    std::string name = get_text(block, kName);
    std::string prefix = std::memcmp(block + kMagic.offset, "ustar", 5) == 0 ? get_text(block, kPrefix) : "";
    std::string path = prefix.empty() ? name : prefix + "/" + name;
    auto size = get_octal(block, kSize);
    auto mode = get_octal(block, kMode);
    char type = block[kTypeflag];
    pos += kBlock;
    if (pos + size > archive.size()) throw Error(Errc::kDigestMismatch, "corrupt archive: truncated member");
    if (type == '0' || type == '\0') {
      validate_relative_path(path);
      entries.push_back({path, (mode & 0111) != 0, std::string(archive.substr(pos, size))});
    } else if (type != '5') {
      throw Error(Errc::kInvalidArgument, std::string("unsupported archive member type '") + type + "'");
    }
    pos += (size + kBlock - 1) / kBlock * kBlock;
  }
  return entries;
}

}  // namespace labci::store
