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

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hbalign/kvtext.hpp"
#include "hbalign/mat.hpp"
#include "hbalign/rng.hpp"

namespace hbalign {

// ---------------------------------------------------------------------------
// System configuration
// ---------------------------------------------------------------------------

// Static link parameters.  Power quantities are kept in watts internally; the
// dBm/dBm-per-Hz fields are the human-facing configuration surface.  The watt
// conversions are computed once in finalize() and cached.
struct SystemConfig {
  int tx_antennas = 64;        // transmit ULA size
  int rx_antennas = 1;         // receive ULA size (1 = single-antenna user)
  int tx_codebook_size = 128;  // transmit DFT codebook size
  int rx_codebook_size = 1;    // receive DFT codebook size
  double spacing = 0.5;        // antenna spacing in wavelengths
  double tx_power_dbm = 10.0;
  double noise_psd_dbm_hz = -161.0;  // -inf selects exact zero noise
  double bandwidth_hz = 1.0e8;

  // Cached watt-domain values (filled by finalize()).
  double tx_power_watts = 0.0;
  double noise_variance_watts = 0.0;

  SystemConfig& finalize() {
    validate();
    tx_power_watts = std::pow(10.0, (tx_power_dbm - 30.0) / 10.0);
    if (std::isinf(noise_psd_dbm_hz) && noise_psd_dbm_hz < 0) {
      noise_variance_watts = 0.0;
    } else {
      const double noise_dbm = noise_psd_dbm_hz + 10.0 * std::log10(bandwidth_hz);
      noise_variance_watts = std::pow(10.0, (noise_dbm - 30.0) / 10.0);
    }
    return *this;
  }

  void validate() const {
    if (tx_antennas < 2) throw std::invalid_argument("config: tx_antennas < 2");
    if (rx_antennas < 1) throw std::invalid_argument("config: rx_antennas < 1");
    if (tx_codebook_size < tx_antennas)
      throw std::invalid_argument("config: tx codebook smaller than array");
    if (rx_antennas > 1 && rx_codebook_size < rx_antennas)
      throw std::invalid_argument("config: rx codebook smaller than array");
    if (spacing <= 0.0) throw std::invalid_argument("config: spacing <= 0");
    if (bandwidth_hz <= 0.0) throw std::invalid_argument("config: bandwidth <= 0");
  }

  bool mimo() const { return rx_antennas > 1; }

  // Returns a copy with a different noise PSD (re-finalized).
  SystemConfig with_noise_psd(double psd) const {
    SystemConfig c = *this;
    c.noise_psd_dbm_hz = psd;
    return c.finalize();
  }

  KvMap to_kv() const {
    KvMap kv;
    kv["tx_antennas"] = std::to_string(tx_antennas);
    kv["rx_antennas"] = std::to_string(rx_antennas);
    kv["tx_codebook_size"] = std::to_string(tx_codebook_size);
    kv["rx_codebook_size"] = std::to_string(rx_codebook_size);
    kv["spacing"] = fmt_double(spacing);
    kv["tx_power_dbm"] = fmt_double(tx_power_dbm);
    kv["noise_psd_dbm_hz"] = fmt_double(noise_psd_dbm_hz);
    kv["bandwidth_hz"] = fmt_double(bandwidth_hz);
    return kv;
  }

  static SystemConfig from_kv(const KvMap& kv) {
    SystemConfig c;
    c.tx_antennas = static_cast<int>(kv_get_int(kv, "tx_antennas"));
    c.rx_antennas = static_cast<int>(kv_get_int(kv, "rx_antennas"));
    c.tx_codebook_size = static_cast<int>(kv_get_int(kv, "tx_codebook_size"));
    c.rx_codebook_size = static_cast<int>(kv_get_int(kv, "rx_codebook_size"));
    c.spacing = kv_get_double(kv, "spacing");
    c.tx_power_dbm = kv_get_double(kv, "tx_power_dbm");
    c.noise_psd_dbm_hz = kv_get_double(kv, "noise_psd_dbm_hz");
    c.bandwidth_hz = kv_get_double(kv, "bandwidth_hz");
    return c.finalize();
  }
};

inline bool operator==(const SystemConfig& a, const SystemConfig& b) {
  return a.tx_antennas == b.tx_antennas && a.rx_antennas == b.rx_antennas &&
         a.tx_codebook_size == b.tx_codebook_size &&
         a.rx_codebook_size == b.rx_codebook_size && a.spacing == b.spacing &&
         a.tx_power_dbm == b.tx_power_dbm &&
         a.noise_psd_dbm_hz == b.noise_psd_dbm_hz &&
         a.bandwidth_hz == b.bandwidth_hz;
}

// ---------------------------------------------------------------------------
// Scenario (synthetic propagation geometry)
// ---------------------------------------------------------------------------

// A "blob" is one angular hot-spot in sine space: LoS departures concentrate
// around aod_center and the matching arrival around aoa_center.  A scenario
// with several well-separated blobs produces naturally clusterable users.
struct ScenarioBlob {
  double aod_center = 0.0;
  double aod_halfwidth = 1.0;
  double aoa_center = 0.0;
  double aoa_halfwidth = 1.0;
};

struct Scenario {
  int num_paths = 3;       // total paths per user (LoS counts as one)
  double los_prob = 0.85;  // probability a user has a line-of-sight path
  double los_gain = 1e-4;  // LoS gain magnitude (uniform random phase)
  double nlos_gain_scale = 0.35e-4;  // per-NLoS-path complex-normal scale
  std::vector<ScenarioBlob> blobs = {ScenarioBlob{}};
  // NLoS scatterers are spread uniformly over these sine ranges.
  double nlos_aod_min = -0.95, nlos_aod_max = 0.95;
  double nlos_aoa_min = -0.95, nlos_aoa_max = 0.95;

  void validate() const {
    if (num_paths < 1) throw std::invalid_argument("scenario: num_paths < 1");
    if (blobs.empty()) throw std::invalid_argument("scenario: no blobs");
    for (const auto& b : blobs) {
      if (b.aod_halfwidth < 0.0 || b.aoa_halfwidth < 0.0)
        throw std::invalid_argument("scenario: negative blob halfwidth");
    }
    if (nlos_aod_min > nlos_aod_max || nlos_aoa_min > nlos_aoa_max)
      throw std::invalid_argument("scenario: empty angle range");
    if (los_prob < 0.0 || los_prob > 1.0)
      throw std::invalid_argument("scenario: los_prob outside [0,1]");
    if (los_gain < 0.0 || nlos_gain_scale < 0.0)
      throw std::invalid_argument("scenario: negative gain scale");
    // The strongest expected path must be the LoS one when it exists.
    if (los_prob > 0.0 && los_gain < nlos_gain_scale)
      throw std::invalid_argument("scenario: LoS gain below NLoS scale");
  }

  KvMap to_kv() const {
    KvMap kv;
    kv["num_paths"] = std::to_string(num_paths);
    kv["los_prob"] = fmt_double(los_prob);
    kv["los_gain"] = fmt_double(los_gain);
    kv["nlos_gain_scale"] = fmt_double(nlos_gain_scale);
    kv["nlos_aod_min"] = fmt_double(nlos_aod_min);
    kv["nlos_aod_max"] = fmt_double(nlos_aod_max);
    kv["nlos_aoa_min"] = fmt_double(nlos_aoa_min);
    kv["nlos_aoa_max"] = fmt_double(nlos_aoa_max);
    std::string bl;
    for (std::size_t i = 0; i < blobs.size(); ++i) {
      if (i) bl += ";";
      bl += fmt_double(blobs[i].aod_center) + "," +
            fmt_double(blobs[i].aod_halfwidth) + "," +
            fmt_double(blobs[i].aoa_center) + "," +
            fmt_double(blobs[i].aoa_halfwidth);
    }
    kv["blobs"] = bl;
    return kv;
  }

  static Scenario from_kv(const KvMap& kv) {
    Scenario s;
    s.num_paths = static_cast<int>(kv_get_int(kv, "num_paths", s.num_paths));
    s.los_prob = kv_get_double(kv, "los_prob", s.los_prob);
    s.los_gain = kv_get_double(kv, "los_gain", s.los_gain);
    s.nlos_gain_scale = kv_get_double(kv, "nlos_gain_scale", s.nlos_gain_scale);
    s.nlos_aod_min = kv_get_double(kv, "nlos_aod_min", s.nlos_aod_min);
    s.nlos_aod_max = kv_get_double(kv, "nlos_aod_max", s.nlos_aod_max);
    s.nlos_aoa_min = kv_get_double(kv, "nlos_aoa_min", s.nlos_aoa_min);
    s.nlos_aoa_max = kv_get_double(kv, "nlos_aoa_max", s.nlos_aoa_max);
    if (kv_has(kv, "blobs")) {
      s.blobs.clear();
      for (const auto& item : split_list(kv_get(kv, "blobs"), ';')) {
        auto f = split_list(item, ',');
        if (f.size() != 4)
          throw std::invalid_argument("scenario: malformed blob '" + item + "'");
        s.blobs.push_back(ScenarioBlob{std::stod(f[0]), std::stod(f[1]),
                                       std::stod(f[2]), std::stod(f[3])});
      }
    }
    s.validate();
    return s;
  }
};

// ---------------------------------------------------------------------------
// Samples and datasets
// ---------------------------------------------------------------------------

// Ground-truth path metadata kept by the synthesizer.  Ingested datasets have
// no such metadata; it is excluded from equality and from the on-disk format.
struct PathComponent {
  double aod_rad = 0.0;
  double aoa_rad = 0.0;
  cplx gain{0.0, 0.0};
  bool line_of_sight = false;
};

struct ChannelSample {
  std::uint64_t sample_id = 0;
  CMat h;  // tx_antennas x rx_antennas, column-major over receive antennas
  std::vector<PathComponent> paths;  // synthesis metadata only
};

inline bool operator==(const ChannelSample& a, const ChannelSample& b) {
  return a.sample_id == b.sample_id && a.h == b.h;
}

enum class Split : std::uint8_t { train = 0, val = 1, test = 2 };

struct ChannelDataset {
  SystemConfig cfg;
  std::vector<ChannelSample> samples;
  std::vector<std::uint8_t> split_tags;  // one tag per sample

  std::vector<int> indices_of(Split s) const {
    std::vector<int> out;
    for (std::size_t i = 0; i < split_tags.size(); ++i)
      if (split_tags[i] == static_cast<std::uint8_t>(s))
        out.push_back(static_cast<int>(i));
    return out;
  }
};

inline bool operator==(const ChannelDataset& a, const ChannelDataset& b) {
  return a.cfg == b.cfg && a.samples == b.samples && a.split_tags == b.split_tags;
}

// ---------------------------------------------------------------------------
// Synthesis
// ---------------------------------------------------------------------------

// Rounds through 32-bit float; synthesized channels carry exactly the
// precision the on-disk format stores, so save/load round-trips bit-exactly.
// The volatile store forces the narrowing: some vectorizers (GCC 11 at -O3)
// otherwise elide the double->float->double rounding inside loops.
inline double quantize_f32(double x) {
  volatile float f = static_cast<float>(x);
  return static_cast<double>(f);
}

// Draws one multipath channel: an optional LoS path from a random blob plus
// uniformly scattered NLoS paths.  The transmit response at sine s has phase
// increment 2*pi*spacing*s per antenna; the receive side enters conjugated.
inline ChannelSample synth_channel(const SystemConfig& cfg,
                                   const Scenario& scenario, Rng& rng,
                                   std::uint64_t sample_id = 0) {
  cfg.validate();
  scenario.validate();
  const int mt = cfg.tx_antennas;
  const int mr = cfg.rx_antennas;
  const double two_pi_d = 2.0 * std::numbers::pi * cfg.spacing;

  ChannelSample out;
  out.sample_id = sample_id;
  out.h = CMat(mt, mr);

  const bool has_los = rng.uniform01() < scenario.los_prob;
  const int num_nlos = scenario.num_paths - (has_los ? 1 : 0);

  auto clamp_sine = [](double s) { return std::min(1.0, std::max(-1.0, s)); };

  struct Draw {
    double aod_sin, aoa_sin;
    cplx gain;
    bool los;
  };
  std::vector<Draw> draws;
  if (has_los) {
    const auto& blob =
        scenario.blobs[rng.uniform_int(static_cast<int>(scenario.blobs.size()))];
    const double aod =
        clamp_sine(blob.aod_center +
                   rng.uniform(-blob.aod_halfwidth, blob.aod_halfwidth));
    const double aoa =
        clamp_sine(blob.aoa_center +
                   rng.uniform(-blob.aoa_halfwidth, blob.aoa_halfwidth));
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    draws.push_back({aod, aoa,
                     scenario.los_gain * cplx{std::cos(phase), std::sin(phase)},
                     true});
  }
  for (int l = 0; l < num_nlos; ++l) {
    const double aod = rng.uniform(scenario.nlos_aod_min, scenario.nlos_aod_max);
    const double aoa = rng.uniform(scenario.nlos_aoa_min, scenario.nlos_aoa_max);
    const cplx g =
        rng.cnormal(scenario.nlos_gain_scale * scenario.nlos_gain_scale);
    draws.push_back({aod, aoa, g, false});
  }

  for (const auto& dr : draws) {
    const double wt = two_pi_d * dr.aod_sin;
    const double wr = two_pi_d * dr.aoa_sin;
    for (int q = 0; q < mr; ++q) {
      const cplx rx_conj{std::cos(wr * q), -std::sin(wr * q)};
      for (int p = 0; p < mt; ++p) {
        const cplx tx{std::cos(wt * p), std::sin(wt * p)};
        out.h(p, q) += dr.gain * tx * rx_conj;
      }
    }
    out.paths.push_back(PathComponent{std::asin(clamp_sine(dr.aod_sin)),
                                      std::asin(clamp_sine(dr.aoa_sin)), dr.gain,
                                      dr.los});
  }

  bool any_nonzero = false;
  for (auto& v : out.h.d) {
    v = cplx{quantize_f32(v.real()), quantize_f32(v.imag())};
    if (v != cplx{0.0, 0.0}) any_nonzero = true;
  }
  if (!any_nonzero)
    throw std::invalid_argument("synth_channel: all-zero channel");
  return out;
}

// Generates a dataset with a deterministic 60/20/20 train/val/test split.
// Validation and test sizes are floor(n/5); the remainder goes to train.
// Per-sample randomness derives from (seed, sample index), so generation is
// reproducible regardless of evaluation order.
inline ChannelDataset gen_dataset(const SystemConfig& cfg,
                                  const Scenario& scenario, int n_samples,
                                  std::uint64_t seed) {
  if (n_samples < 10)
    throw std::invalid_argument("gen_dataset: need at least 10 samples");
  ChannelDataset ds;
  ds.cfg = cfg;
  ds.cfg.finalize();
  ds.samples.reserve(static_cast<std::size_t>(n_samples));
  for (int i = 0; i < n_samples; ++i) {
    Rng rng(derive_seed(seed, stream::channel, static_cast<std::uint64_t>(i)));
    ds.samples.push_back(
        synth_channel(ds.cfg, scenario, rng, static_cast<std::uint64_t>(i)));
  }

  const int n_val = n_samples / 5;
  const int n_test = n_samples / 5;
  const int n_train = n_samples - n_val - n_test;
  std::vector<int> order(static_cast<std::size_t>(n_samples));
  for (int i = 0; i < n_samples; ++i) order[static_cast<std::size_t>(i)] = i;
  Rng split_rng(derive_seed(seed, stream::split));
  split_rng.shuffle(order);
  ds.split_tags.assign(static_cast<std::size_t>(n_samples), 0);
  for (int pos = 0; pos < n_samples; ++pos) {
    Split s = Split::train;
    if (pos >= n_train && pos < n_train + n_val) s = Split::val;
    if (pos >= n_train + n_val) s = Split::test;
    ds.split_tags[static_cast<std::size_t>(order[static_cast<std::size_t>(pos)])] =
        static_cast<std::uint8_t>(s);
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Binary dataset format ("BFCH")
// ---------------------------------------------------------------------------
//
// Layout (little-endian):
//   magic "BFCH" | u16 version | u16 flags | u32 tx_antennas | u32 rx_antennas
//   | u64 n_samples | per sample: tx*rx complex entries as f32 (re,im) pairs,
//   column-major over receive antennas | one split tag byte per sample
//   | key=value config footer (text, to end of file).

struct io_error : std::runtime_error {
  enum class Code { bad_magic, version_mismatch, truncated, corrupt, open_failed };
  Code code;
  io_error(Code c, const std::string& msg) : std::runtime_error(msg), code(c) {}
};

namespace detail {

inline constexpr std::uint16_t kDatasetVersion = 1;

inline void put_bytes(std::ostream& os, const void* p, std::size_t n) {
  os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

inline void put_u16(std::ostream& os, std::uint16_t v) {
  unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>(v >> 8)};
  put_bytes(os, b, 2);
}

inline void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  put_bytes(os, b, 4);
}

inline void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  put_bytes(os, b, 8);
}

inline void put_f32(std::ostream& os, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(os, bits);
}

inline void put_f64(std::ostream& os, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(os, bits);
}

inline void get_bytes(std::istream& is, void* p, std::size_t n,
                      const char* what) {
  is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(is.gcount()) != n)
    throw io_error(io_error::Code::truncated,
                   std::string("truncated while reading ") + what);
}

inline std::uint16_t get_u16(std::istream& is, const char* what) {
  unsigned char b[2];
  get_bytes(is, b, 2, what);
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

inline std::uint32_t get_u32(std::istream& is, const char* what) {
  unsigned char b[4];
  get_bytes(is, b, 4, what);
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

inline std::uint64_t get_u64(std::istream& is, const char* what) {
  unsigned char b[8];
  get_bytes(is, b, 8, what);
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

inline float get_f32(std::istream& is, const char* what) {
  const std::uint32_t bits = get_u32(is, what);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

inline double get_f64(std::istream& is, const char* what) {
  const std::uint64_t bits = get_u64(is, what);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

}  // namespace detail

inline void save_dataset(const ChannelDataset& ds, std::ostream& os) {
  if (ds.samples.size() != ds.split_tags.size())
    throw std::invalid_argument("save_dataset: split tag count mismatch");
  os.write("BFCH", 4);
  detail::put_u16(os, detail::kDatasetVersion);
  detail::put_u16(os, 0);  // flags, reserved
  detail::put_u32(os, static_cast<std::uint32_t>(ds.cfg.tx_antennas));
  detail::put_u32(os, static_cast<std::uint32_t>(ds.cfg.rx_antennas));
  detail::put_u64(os, static_cast<std::uint64_t>(ds.samples.size()));
  for (const auto& s : ds.samples) {
    if (s.h.rows != ds.cfg.tx_antennas || s.h.cols != ds.cfg.rx_antennas)
      throw std::invalid_argument("save_dataset: sample dimension mismatch");
    for (const auto& v : s.h.d) {  // column-major over receive antennas
      detail::put_f32(os, static_cast<float>(v.real()));
      detail::put_f32(os, static_cast<float>(v.imag()));
    }
  }
  for (std::uint8_t tag : ds.split_tags)
    os.put(static_cast<char>(tag));
  const std::string footer = emit_kv(ds.cfg.to_kv());
  os.write(footer.data(), static_cast<std::streamsize>(footer.size()));
  if (!os) throw io_error(io_error::Code::open_failed, "write failed");
}

inline ChannelDataset load_dataset(std::istream& is) {
  char magic[4];
  detail::get_bytes(is, magic, 4, "magic");
  if (std::memcmp(magic, "BFCH", 4) != 0)
    throw io_error(io_error::Code::bad_magic, "not a channel dataset file");
  const std::uint16_t version = detail::get_u16(is, "version");
  if (version != detail::kDatasetVersion)
    throw io_error(io_error::Code::version_mismatch,
                   "unsupported dataset version " + std::to_string(version));
  detail::get_u16(is, "flags");
  const std::uint32_t mt = detail::get_u32(is, "tx_antennas");
  const std::uint32_t mr = detail::get_u32(is, "rx_antennas");
  const std::uint64_t n = detail::get_u64(is, "n_samples");
  if (mt == 0 || mr == 0)
    throw io_error(io_error::Code::corrupt, "zero antenna count in header");

  ChannelDataset ds;
  ds.samples.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    ChannelSample s;
    s.sample_id = i;
    s.h = CMat(static_cast<int>(mt), static_cast<int>(mr));
    for (auto& v : s.h.d) {
      const double re = detail::get_f32(is, "sample payload");
      const double im = detail::get_f32(is, "sample payload");
      v = cplx{re, im};
    }
    ds.samples.push_back(std::move(s));
  }
  ds.split_tags.resize(n);
  for (auto& tag : ds.split_tags) {
    char c;
    detail::get_bytes(is, &c, 1, "split tags");
    tag = static_cast<std::uint8_t>(c);
    if (tag > 2) throw io_error(io_error::Code::corrupt, "bad split tag");
  }
  std::string footer((std::istreambuf_iterator<char>(is)),
                     std::istreambuf_iterator<char>());
  SystemConfig cfg;
  try {
    cfg = SystemConfig::from_kv(parse_kv(footer));
  } catch (const std::exception& e) {
    throw io_error(io_error::Code::truncated,
                   std::string("bad config footer: ") + e.what());
  }
  if (cfg.tx_antennas != static_cast<int>(mt) ||
      cfg.rx_antennas != static_cast<int>(mr))
    throw io_error(io_error::Code::corrupt, "footer disagrees with header");
  ds.cfg = cfg;
  return ds;
}

inline void save_dataset(const ChannelDataset& ds, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw io_error(io_error::Code::open_failed, "cannot open " + path);
  save_dataset(ds, f);
}

inline ChannelDataset load_dataset(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw io_error(io_error::Code::open_failed, "cannot open " + path);
  return load_dataset(f);
}

inline std::string dataset_to_bytes(const ChannelDataset& ds) {
  std::ostringstream os(std::ios::binary);
  save_dataset(ds, os);
  return os.str();
}

}  // namespace hbalign
