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

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "hbalign/channel.hpp"  // io_error + byte helpers
#include "hbalign/kvtext.hpp"
#include "hbalign/mat.hpp"

namespace hbalign {

// Named-tensor checkpoint ("BFNN").  Layout (little-endian):
//   magic "BFNN" | u16 version | u32 meta length | meta (key=value text)
//   | u32 tensor count | per tensor: u32 name length, name bytes,
//   u32 rows, u32 cols, rows*cols f64 values (row-major).
// Values are stored as raw 64-bit doubles, so save/load round-trips are
// bit-exact.

struct TensorBundle {
  KvMap meta;
  std::vector<std::pair<std::string, Mat>> tensors;

  const Mat& get(const std::string& name) const {
    for (const auto& [n, t] : tensors)
      if (n == name) return t;
    throw io_error(io_error::Code::corrupt,
                   "checkpoint: missing tensor '" + name + "'");
  }

  bool has(const std::string& name) const {
    for (const auto& [n, t] : tensors)
      if (n == name) return true;
    return false;
  }
};

inline bool operator==(const TensorBundle& a, const TensorBundle& b) {
  return a.meta == b.meta && a.tensors == b.tensors;
}

namespace detail {
inline constexpr std::uint16_t kCheckpointVersion = 1;
}

inline void save_bundle(const TensorBundle& bundle, std::ostream& os) {
  os.write("BFNN", 4);
  detail::put_u16(os, detail::kCheckpointVersion);
  const std::string meta = emit_kv(bundle.meta);
  detail::put_u32(os, static_cast<std::uint32_t>(meta.size()));
  os.write(meta.data(), static_cast<std::streamsize>(meta.size()));
  detail::put_u32(os, static_cast<std::uint32_t>(bundle.tensors.size()));
  for (const auto& [name, t] : bundle.tensors) {
    detail::put_u32(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::put_u32(os, static_cast<std::uint32_t>(t.rows));
    detail::put_u32(os, static_cast<std::uint32_t>(t.cols));
    for (double v : t.d) detail::put_f64(os, v);
  }
  if (!os) throw io_error(io_error::Code::open_failed, "checkpoint write failed");
}

inline TensorBundle load_bundle(std::istream& is) {
  char magic[4];
  detail::get_bytes(is, magic, 4, "magic");
  if (std::memcmp(magic, "BFNN", 4) != 0)
    throw io_error(io_error::Code::bad_magic, "not a checkpoint file");
  const std::uint16_t version = detail::get_u16(is, "version");
  if (version != detail::kCheckpointVersion)
    throw io_error(io_error::Code::version_mismatch,
                   "unsupported checkpoint version " + std::to_string(version));
  TensorBundle bundle;
  const std::uint32_t meta_len = detail::get_u32(is, "meta length");
  std::string meta(meta_len, '\0');
  if (meta_len > 0) detail::get_bytes(is, meta.data(), meta_len, "meta");
  bundle.meta = parse_kv(meta);
  const std::uint32_t count = detail::get_u32(is, "tensor count");
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = detail::get_u32(is, "tensor name length");
    std::string name(name_len, '\0');
    if (name_len > 0) detail::get_bytes(is, name.data(), name_len, "tensor name");
    const std::uint32_t rows = detail::get_u32(is, "tensor rows");
    const std::uint32_t cols = detail::get_u32(is, "tensor cols");
    Mat t(static_cast<int>(rows), static_cast<int>(cols));
    for (auto& v : t.d) v = detail::get_f64(is, "tensor data");
    bundle.tensors.emplace_back(std::move(name), std::move(t));
  }
  return bundle;
}

inline void save_bundle(const TensorBundle& bundle, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw io_error(io_error::Code::open_failed, "cannot open " + path);
  save_bundle(bundle, f);
}

inline TensorBundle load_bundle(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw io_error(io_error::Code::open_failed, "cannot open " + path);
  return load_bundle(f);
}

inline std::string bundle_to_bytes(const TensorBundle& bundle) {
  std::ostringstream os(std::ios::binary);
  save_bundle(bundle, os);
  return os.str();
}

}  // namespace hbalign
