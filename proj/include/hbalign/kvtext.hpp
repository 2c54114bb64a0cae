// SPDX-License-Identifier: Apache-2.0
//
// hbalign - learned hierarchical beam alignment for mmWave arrays
// Copyright (C) 2026 hbalign contributors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

#include <cstdint>
#include <cstdio>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace hbalign {

// Ordered key=value map used for config files, dataset footers and report
// summaries.  std::map keeps emission order stable (alphabetical), which in
// turn keeps emitted files byte-identical across runs.
using KvMap = std::map<std::string, std::string>;

inline std::string kv_trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

// Parses "key = value" lines.  '#' starts a comment; blank lines are skipped.
inline KvMap parse_kv(const std::string& text) {
  KvMap out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = kv_trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("kvtext: line without '=': " + line);
    const std::string key = kv_trim(line.substr(0, eq));
    const std::string val = kv_trim(line.substr(eq + 1));
    if (key.empty()) throw std::invalid_argument("kvtext: empty key");
    out[key] = val;
  }
  return out;
}

inline std::string emit_kv(const KvMap& kv) {
  std::string out;
  for (const auto& [k, v] : kv) {
    out += k;
    out += " = ";
    out += v;
    out += '\n';
  }
  return out;
}

// Shortest round-trippable decimal rendering of a double.  %.17g guarantees
// the value parses back bit-exactly, which report determinism relies on.
inline std::string fmt_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

inline bool kv_has(const KvMap& kv, const std::string& key) {
  return kv.find(key) != kv.end();
}

inline std::string kv_get(const KvMap& kv, const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end())
    throw std::invalid_argument("kvtext: missing key '" + key + "'");
  return it->second;
}

inline std::string kv_get(const KvMap& kv, const std::string& key,
                          const std::string& fallback) {
  auto it = kv.find(key);
  return it == kv.end() ? fallback : it->second;
}

inline double kv_get_double(const KvMap& kv, const std::string& key) {
  return std::stod(kv_get(kv, key));
}

inline double kv_get_double(const KvMap& kv, const std::string& key,
                            double fallback) {
  auto it = kv.find(key);
  return it == kv.end() ? fallback : std::stod(it->second);
}

inline long long kv_get_int(const KvMap& kv, const std::string& key) {
  return std::stoll(kv_get(kv, key));
}

inline long long kv_get_int(const KvMap& kv, const std::string& key,
                            long long fallback) {
  auto it = kv.find(key);
  return it == kv.end() ? fallback : std::stoll(it->second);
}

// Comma-separated list helpers for config values like "3,3;4,4".
inline std::vector<std::string> split_list(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(kv_trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  cur = kv_trim(cur);
  if (!cur.empty() || !out.empty()) out.push_back(cur);
  while (!out.empty() && out.back().empty()) out.pop_back();
  return out;
}

// FNV-1a 64-bit hash; used for config fingerprints in report summaries.
inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(x));
  return buf;
}

}  // namespace hbalign
