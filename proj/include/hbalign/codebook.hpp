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
#include <complex>
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
// Beams and codebooks
// ---------------------------------------------------------------------------

// One analog beamforming vector.  Phase-shifter hardware imposes constant
// modulus: every weight has magnitude 1/sqrt(m).
struct Beam {
  std::vector<cplx> w;

  int antennas() const { return static_cast<int>(w.size()); }
};

// Largest deviation of any weight magnitude from 1/sqrt(m).
inline double beam_modulus_deviation(const Beam& b) {
  const double target = 1.0 / std::sqrt(static_cast<double>(b.w.size()));
  double dev = 0.0;
  for (const auto& c : b.w) dev = std::max(dev, std::abs(std::abs(c) - target));
  return dev;
}

enum class CodebookKind { dft, oversampled_dft, wide, probing };

struct Codebook {
  CodebookKind kind = CodebookKind::dft;
  std::vector<Beam> beams;

  int size() const { return static_cast<int>(beams.size()); }
  int antennas() const { return beams.empty() ? 0 : beams[0].antennas(); }
};

// Unnormalized array response at a given sine of the steering angle; entry k
// has phase k * 2*pi*spacing*sine.
inline std::vector<cplx> steering_response(int m, double spacing, double sine) {
  std::vector<cplx> a(static_cast<std::size_t>(m));
  const double mu = 2.0 * std::numbers::pi * spacing * sine;
  for (int k = 0; k < m; ++k)
    a[static_cast<std::size_t>(k)] = cplx{std::cos(mu * k), std::sin(mu * k)};
  return a;
}

// Constant-modulus steering beam with per-antenna phase increment omega.
inline Beam steering_vector(int m, double omega) {
  if (m < 1) throw std::invalid_argument("steering_vector: m < 1");
  Beam b;
  b.w.resize(static_cast<std::size_t>(m));
  const double scale = 1.0 / std::sqrt(static_cast<double>(m));
  for (int k = 0; k < m; ++k)
    b.w[static_cast<std::size_t>(k)] =
        scale * cplx{std::cos(omega * k), std::sin(omega * k)};
  return b;
}

// Steering sine of DFT beam i (0-based) in a codebook of n beams: the grid
// {-1, -1 + 2/n, ..., 1 - 2/n}.
inline double dft_sine(int n, int i) {
  return static_cast<double>(2 * i - n) / static_cast<double>(n);
}

// n-beam DFT codebook for an m-antenna array; beam i steers to dft_sine(n, i).
// n > m yields the oversampled variant used for direction estimation.
inline Codebook dft_codebook(int m, int n, double spacing = 0.5) {
  if (m < 2) throw std::invalid_argument("dft_codebook: m < 2");
  if (n < m) throw std::invalid_argument("dft_codebook: n < m");
  Codebook cb;
  cb.kind = (n > m) ? CodebookKind::oversampled_dft : CodebookKind::dft;
  cb.beams.reserve(static_cast<std::size_t>(n));
  const double mu = 2.0 * std::numbers::pi * spacing;
  for (int i = 0; i < n; ++i)
    cb.beams.push_back(steering_vector(m, mu * dft_sine(n, i)));
  return cb;
}

inline cplx beam_inner(const Beam& a, const Beam& b) {
  if (a.w.size() != b.w.size())
    throw std::invalid_argument("beam_inner: size mismatch");
  cplx acc{0.0, 0.0};
  for (std::size_t k = 0; k < a.w.size(); ++k) acc += std::conj(a.w[k]) * b.w[k];
  return acc;
}

// ---------------------------------------------------------------------------
// Wide (sector) beams
// ---------------------------------------------------------------------------

// Synthesizes a constant-modulus beam with an approximately flat gain over
// the sine sector [sin_lo, sin_hi) by alternating projection: project the
// pattern onto the flat-sector target (keeping phases), then back onto the
// constant-modulus set.  The pattern is evaluated on a 4x-oversampled sine
// grid.  Runs `iters` iterations from each of a few starts (a quadratic-phase
// chirp sweeping the sector, then random phases) and returns the iterate with
// the best in-sector ripple, penalizing out-of-sector leakage.
inline Beam wide_beam_synthesize(int m, double sin_lo, double sin_hi, int iters,
                                 Rng& rng) {
  if (m < 2) throw std::invalid_argument("wide_beam: m < 2");
  if (!(sin_lo < sin_hi)) throw std::invalid_argument("wide_beam: empty sector");
  if (iters < 1) throw std::invalid_argument("wide_beam: iters < 1");

  const int grid = 4 * m;
  const double mu = 2.0 * std::numbers::pi * 0.5;  // pattern grid at half-wave spacing
  std::vector<double> sines(static_cast<std::size_t>(grid));
  std::vector<bool> in_sector(static_cast<std::size_t>(grid));
  int n_in = 0;
  for (int q = 0; q < grid; ++q) {
    sines[static_cast<std::size_t>(q)] = dft_sine(grid, q);
    const double s = sines[static_cast<std::size_t>(q)];
    in_sector[static_cast<std::size_t>(q)] = (s >= sin_lo && s < sin_hi);
    if (in_sector[static_cast<std::size_t>(q)]) ++n_in;
  }
  if (n_in == 0)
    throw std::invalid_argument("wide_beam: sector narrower than pattern grid");

  // Flat target amplitude: total grid energy of a unit-norm beam is ~grid.
  const double target =
      std::sqrt(static_cast<double>(grid) / static_cast<double>(n_in));
  const double scale = 1.0 / std::sqrt(static_cast<double>(m));

  std::vector<cplx> w(static_cast<std::size_t>(m));
  std::vector<cplx> resp(static_cast<std::size_t>(grid));
  auto eval_response = [&] {
    for (int q = 0; q < grid; ++q) {
      cplx acc{0.0, 0.0};
      const double ang = mu * sines[static_cast<std::size_t>(q)];
      for (int k = 0; k < m; ++k)
        acc += w[static_cast<std::size_t>(k)] *
               cplx{std::cos(ang * k), -std::sin(ang * k)};
      resp[static_cast<std::size_t>(q)] = acc;
    }
  };
  auto score = [&] {
    double mn = std::numeric_limits<double>::infinity();
    double mean_in = 0.0, mean_out = 0.0;
    for (int q = 0; q < grid; ++q) {
      const double p = std::norm(resp[static_cast<std::size_t>(q)]);
      if (in_sector[static_cast<std::size_t>(q)]) {
        mn = std::min(mn, p);
        mean_in += p;
      } else {
        mean_out += p;
      }
    }
    mean_in /= n_in;
    if (grid > n_in) mean_out /= (grid - n_in);
    if (mean_in <= 0.0) return -std::numeric_limits<double>::infinity();
    return mn / mean_in - mean_out / mean_in;
  };

  Beam best;
  double best_score = -std::numeric_limits<double>::infinity();
  auto keep_best = [&] {
    eval_response();
    const double sc = score();
    if (sc > best_score) {
      best_score = sc;
      best.w = w;
    }
  };

  // Alternating projection stalls in poor local optima from some starts, so
  // try several.  The chirp start sweeps the instantaneous steering sine
  // linearly from sin_lo to sin_hi across the aperture (restart 0); the rest
  // use random phases.
  const int restarts = 4;
  for (int r = 0; r < restarts; ++r) {
    if (r == 0) {
      const double slope = m > 1 ? (sin_hi - sin_lo) / (2.0 * (m - 1)) : 0.0;
      for (int k = 0; k < m; ++k) {
        const double ph = mu * k * (sin_lo + slope * k);
        w[static_cast<std::size_t>(k)] = scale * cplx{std::cos(ph), std::sin(ph)};
      }
    } else {
      for (auto& c : w) {
        const double ph = rng.uniform(-std::numbers::pi, std::numbers::pi);
        c = scale * cplx{std::cos(ph), std::sin(ph)};
      }
    }
    for (int it = 0; it < iters; ++it) {
      keep_best();
      // Pattern-domain projection: impose the flat-sector magnitude.
      std::vector<cplx> goal(static_cast<std::size_t>(grid));
      for (int q = 0; q < grid; ++q) {
        if (!in_sector[static_cast<std::size_t>(q)]) continue;
        const cplx resp_q = resp[static_cast<std::size_t>(q)];
        const double mag = std::abs(resp_q);
        goal[static_cast<std::size_t>(q)] =
            mag > 0.0 ? target * resp_q / mag : cplx{target, 0.0};
      }
      // Weight-domain projection: adjoint map, then constant modulus.
      for (int k = 0; k < m; ++k) {
        cplx acc{0.0, 0.0};
        for (int q = 0; q < grid; ++q) {
          if (!in_sector[static_cast<std::size_t>(q)]) continue;
          const double ang = mu * sines[static_cast<std::size_t>(q)] * k;
          acc += goal[static_cast<std::size_t>(q)] *
                 cplx{std::cos(ang), std::sin(ang)};
        }
        const double mag = std::abs(acc);
        w[static_cast<std::size_t>(k)] =
            mag > 0.0 ? scale * acc / mag : w[static_cast<std::size_t>(k)];
      }
    }
    keep_best();
  }
  return best;
}

// ---------------------------------------------------------------------------
// Hierarchical codebooks
// ---------------------------------------------------------------------------

struct SectorRange {
  double lo = -1.0;
  double hi = 1.0;
};

// Tiered codebook: tiers[0] is the widest, the last tier is always the DFT
// codebook.  children[t][j] lists the next-tier beams under beam j of tier t;
// the final tier has no children.  sectors[t][j] is the sine span of beam j.
struct HierarchicalCodebook {
  std::vector<Codebook> tiers;
  std::vector<std::vector<std::vector<int>>> children;
  std::vector<std::vector<SectorRange>> sectors;

  int tier_count() const { return static_cast<int>(tiers.size()); }
};

// Two-tier codebook: n_wide sector beams over equal sine sectors, each parent
// to a contiguous block of DFT beams.  Block sizes are floor(n_t/n_wide) or
// ceil(n_t/n_wide); a beam whose sine falls on a sector boundary opens the
// upper sector (half-open sector convention).
inline HierarchicalCodebook build_two_tier(int m, int n_t, int n_wide,
                                           int gs_iters = 200) {
  if (n_wide < 1) throw std::invalid_argument("two_tier: n_wide < 1");
  if (n_wide > n_t) throw std::invalid_argument("two_tier: n_wide > n_t");
  HierarchicalCodebook hc;
  hc.tiers.resize(2);
  hc.children.resize(2);
  hc.sectors.resize(2);

  Codebook wides;
  wides.kind = CodebookKind::wide;
  hc.children[0].resize(static_cast<std::size_t>(n_wide));
  for (int k = 0; k < n_wide; ++k) {
    const double lo = -1.0 + 2.0 * k / n_wide;
    const double hi = -1.0 + 2.0 * (k + 1) / n_wide;
    Rng rng(derive_seed(static_cast<std::uint64_t>(m), stream::widebeam,
                        static_cast<std::uint64_t>(n_wide),
                        static_cast<std::uint64_t>(k)));
    wides.beams.push_back(wide_beam_synthesize(m, lo, hi, gs_iters, rng));
    hc.sectors[0].push_back(SectorRange{lo, hi});
  }
  hc.tiers[0] = std::move(wides);

  hc.tiers[1] = dft_codebook(m, n_t);
  for (int i = 0; i < n_t; ++i) {
    // Integer form of floor((dft_sine + 1)/2 * n_wide): exact, no rounding.
    const int k = static_cast<int>(
        (static_cast<long long>(i) * n_wide) / n_t);
    hc.children[0][static_cast<std::size_t>(k)].push_back(i);
    const double s = dft_sine(n_t, i);
    hc.sectors[1].push_back(SectorRange{s - 1.0 / n_t, s + 1.0 / n_t});
  }
  hc.children[1].assign(static_cast<std::size_t>(n_t), {});
  return hc;
}

// Binary hierarchy: tier t (0-based) holds 2^(t+1) beams over halved sectors;
// the last tier is the DFT codebook itself.  Requires n_t to be a power of
// two; yields log2(n_t) tiers.
inline HierarchicalCodebook build_binary(int m, int n_t, int gs_iters = 200) {
  if (n_t < 2 || (n_t & (n_t - 1)) != 0)
    throw std::invalid_argument("binary codebook: n_t must be a power of two");
  int depth = 0;
  for (int v = n_t; v > 1; v >>= 1) ++depth;  // log2(n_t)

  HierarchicalCodebook hc;
  hc.tiers.resize(static_cast<std::size_t>(depth));
  hc.children.resize(static_cast<std::size_t>(depth));
  hc.sectors.resize(static_cast<std::size_t>(depth));
  for (int t = 0; t < depth; ++t) {
    const int beams = 1 << (t + 1);
    hc.sectors[static_cast<std::size_t>(t)].resize(
        static_cast<std::size_t>(beams));
    for (int j = 0; j < beams; ++j)
      hc.sectors[static_cast<std::size_t>(t)][static_cast<std::size_t>(j)] =
          SectorRange{-1.0 + 2.0 * j / beams, -1.0 + 2.0 * (j + 1) / beams};

    if (t == depth - 1) {
      hc.tiers[static_cast<std::size_t>(t)] = dft_codebook(m, n_t);
      hc.children[static_cast<std::size_t>(t)].assign(
          static_cast<std::size_t>(n_t), {});
      for (int i = 0; i < n_t; ++i) {
        const double s = dft_sine(n_t, i);
        hc.sectors[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)] =
            SectorRange{s - 1.0 / n_t, s + 1.0 / n_t};
      }
      continue;
    }
    Codebook cb;
    cb.kind = CodebookKind::wide;
    for (int j = 0; j < beams; ++j) {
      const auto sec =
          hc.sectors[static_cast<std::size_t>(t)][static_cast<std::size_t>(j)];
      Rng rng(derive_seed(static_cast<std::uint64_t>(m), stream::widebeam,
                          static_cast<std::uint64_t>(1000 + t),
                          static_cast<std::uint64_t>(j)));
      cb.beams.push_back(wide_beam_synthesize(m, sec.lo, sec.hi, gs_iters, rng));
    }
    hc.tiers[static_cast<std::size_t>(t)] = std::move(cb);
    hc.children[static_cast<std::size_t>(t)].resize(
        static_cast<std::size_t>(beams));
    for (int j = 0; j < beams; ++j)
      hc.children[static_cast<std::size_t>(t)][static_cast<std::size_t>(j)] = {
          2 * j, 2 * j + 1};
  }
  return hc;
}

// ---------------------------------------------------------------------------
// Text export (inspection / plotting)
// ---------------------------------------------------------------------------

inline const char* codebook_kind_name(CodebookKind k) {
  switch (k) {
    case CodebookKind::dft: return "dft";
    case CodebookKind::oversampled_dft: return "oversampled_dft";
    case CodebookKind::wide: return "wide";
    case CodebookKind::probing: return "probing";
  }
  return "unknown";
}

inline CodebookKind codebook_kind_from_name(const std::string& s) {
  if (s == "dft") return CodebookKind::dft;
  if (s == "oversampled_dft") return CodebookKind::oversampled_dft;
  if (s == "wide") return CodebookKind::wide;
  if (s == "probing") return CodebookKind::probing;
  throw std::invalid_argument("unknown codebook kind '" + s + "'");
}

inline void export_codebook(const Codebook& cb, std::ostream& os) {
  os << "# hbalign-codebook v1\n";
  os << "# kind = " << codebook_kind_name(cb.kind) << "\n";
  os << "# beams = " << cb.size() << "\n";
  os << "# antennas = " << cb.antennas() << "\n";
  for (const auto& b : cb.beams) {
    for (std::size_t k = 0; k < b.w.size(); ++k) {
      if (k) os << '\t';
      os << fmt_double(b.w[k].real()) << '\t' << fmt_double(b.w[k].imag());
    }
    os << '\n';
  }
}

inline Codebook parse_codebook(std::istream& is) {
  Codebook cb;
  std::string line;
  while (std::getline(is, line)) {
    line = kv_trim(line);
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq != std::string::npos && line.find("kind") != std::string::npos)
        cb.kind = codebook_kind_from_name(kv_trim(line.substr(eq + 1)));
      continue;
    }
    std::istringstream row(line);
    std::vector<double> vals;
    double v;
    while (row >> v) vals.push_back(v);
    if (vals.size() % 2 != 0)
      throw std::invalid_argument("codebook text: odd value count in row");
    Beam b;
    for (std::size_t k = 0; k + 1 < vals.size(); k += 2)
      b.w.push_back(cplx{vals[k], vals[k + 1]});
    cb.beams.push_back(std::move(b));
  }
  return cb;
}

}  // namespace hbalign
