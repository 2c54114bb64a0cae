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
//
// Classical sweep-based alignment baselines: exhaustive search, hierarchical
// (wide-beam) descent, and their two-sided variants.  The search logic is
// templated on a measurement functor so tests can inject ideal analytic
// sector responses; the public entry points measure real beams through the
// sweep module with fresh noise per slot.
//
// BaselineResult.sweep_count always reports the method's nominal measurement
// budget (the closed-form complexity figure), which for unequal group sizes
// is the worst-case path; `measurements` holds what the realized path used.

#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "hbalign/channel.hpp"
#include "hbalign/codebook.hpp"
#include "hbalign/labels.hpp"
#include "hbalign/sweep.hpp"

namespace hbalign {

struct BaselineResult {
  BeamLabel beam;
  int sweep_count = 0;
  std::vector<double> measurements;  // realized, in sweep order
};

// ---------------------------------------------------------------------------
// Closed-form sweep counts
// ---------------------------------------------------------------------------

inline int ceil_div(int a, int b) { return (a + b - 1) / b; }

inline int ilog2(int n) {
  if (n < 1 || (n & (n - 1)) != 0)
    throw std::invalid_argument("ilog2: not a power of two");
  int l = 0;
  while ((1 << l) < n) ++l;
  return l;
}

inline int exhaustive_count(int n_t) { return n_t; }
inline int exhaustive_count_pairs(int n_t, int n_r) { return n_t * n_r; }

// Wide tier plus the largest child group; singleton child groups are taken
// without a redundant sweep.
inline int two_tier_count(int n_t, int n_wide) {
  const int kids = ceil_div(n_t, n_wide);
  return n_wide + (kids > 1 ? kids : 0);
}

inline int binary_count(int n_t) { return 2 * ilog2(n_t); }

inline int two_tier_joint_count(int n_t, int n_r, int nw_t, int nw_r) {
  const int kt = ceil_div(n_t, nw_t), kr = ceil_div(n_r, nw_r);
  return nw_t * nw_r + (kt * kr > 1 ? kt * kr : 0);
}

inline int two_tier_hybrid_count(int n_t, int n_r, int nw_t, int nw_r) {
  const int kt = ceil_div(n_t, nw_t), kr = ceil_div(n_r, nw_r);
  return nw_t * nw_r + (kt > 1 ? kt : 0) + (kr > 1 ? kr : 0);
}

// Both sides descend jointly (4 pairs per level) until the shallower
// hierarchy bottoms out, then the deeper side descends alone (2 per level).
inline int binary_joint_count(int n_t, int n_r) {
  const int dt = ilog2(n_t), dr = ilog2(n_r);
  const int shared = dt < dr ? dt : dr;
  return 4 * shared + 2 * ((dt > dr ? dt : dr) - shared);
}

// ---------------------------------------------------------------------------
// Search logic over an injected measurement functor
// ---------------------------------------------------------------------------

// measure(i) -> power of transmit beam i.  Ties take the lowest index.
template <typename F>
BaselineResult exhaustive_search_impl(int n, F&& measure) {
  if (n < 1) throw std::invalid_argument("exhaustive: empty codebook");
  BaselineResult res;
  res.measurements.reserve(static_cast<std::size_t>(n));
  int best = 0;
  for (int i = 0; i < n; ++i) {
    res.measurements.push_back(measure(i));
    if (res.measurements[static_cast<std::size_t>(i)] >
        res.measurements[static_cast<std::size_t>(best)])
      best = i;
  }
  res.beam.tx_index = best;
  res.sweep_count = exhaustive_count(n);
  return res;
}

// measure(tier, index) -> power of that tier's beam.  Descends the hierarchy
// tier by tier: sweep the current node's children, follow the argmax.
// Singleton child groups are followed without measuring.
template <typename F>
BaselineResult hierarchy_descend_impl(const HierarchicalCodebook& hc,
                                      F&& measure) {
  if (hc.tier_count() < 1) throw std::invalid_argument("descend: no tiers");
  BaselineResult res;
  int cur = 0;
  {
    const int n0 = hc.tiers[0].size();
    double best = 0.0;
    for (int i = 0; i < n0; ++i) {
      const double z = measure(0, i);
      res.measurements.push_back(z);
      if (i == 0 || z > best) {
        best = z;
        cur = i;
      }
    }
  }
  for (int t = 1; t < hc.tier_count(); ++t) {
    const auto& kids = hc.children[static_cast<std::size_t>(t - 1)]
                                  [static_cast<std::size_t>(cur)];
    if (kids.empty()) throw std::invalid_argument("descend: childless node");
    if (kids.size() == 1) {
      cur = kids[0];
      continue;
    }
    double best = 0.0;
    int pick = kids[0];
    for (std::size_t j = 0; j < kids.size(); ++j) {
      const double z = measure(t, kids[j]);
      res.measurements.push_back(z);
      if (j == 0 || z > best) {
        best = z;
        pick = kids[j];
      }
    }
    cur = pick;
  }
  res.beam.tx_index = cur;
  return res;
}

// measure(i, j) -> power of transmit beam i paired with receive beam j.
template <typename F>
BaselineResult exhaustive_pair_search_impl(int n_t, int n_r, F&& measure) {
  if (n_t < 1 || n_r < 1)
    throw std::invalid_argument("exhaustive: empty codebook");
  BaselineResult res;
  res.measurements.reserve(static_cast<std::size_t>(n_t * n_r));
  double best = 0.0;
  for (int i = 0; i < n_t; ++i)
    for (int j = 0; j < n_r; ++j) {
      const double z = measure(i, j);
      res.measurements.push_back(z);
      if ((i == 0 && j == 0) || z > best) {
        best = z;
        res.beam = BeamLabel{i, j};
      }
    }
  res.sweep_count = exhaustive_count_pairs(n_t, n_r);
  return res;
}

// ---------------------------------------------------------------------------
// Real-measurement entry points (single-antenna user)
// ---------------------------------------------------------------------------

namespace detail {

inline double measure_beam(const ChannelSample& s, const Beam& v,
                           const SystemConfig& cfg, Rng& rng) {
  const cplx n = cfg.noise_variance_watts > 0.0
                     ? rng.cnormal(cfg.noise_variance_watts)
                     : cplx{0.0, 0.0};
  return std::norm(rx_amplitude_miso(s.h, v, cfg.tx_power_watts) + n);
}

inline double measure_pair(const ChannelSample& s, const Beam& v, const Beam& w,
                           const SystemConfig& cfg, Rng& rng) {
  const auto noise = draw_noise(rng, s.h.cols, cfg.noise_variance_watts);
  cplx combined{0.0, 0.0};
  for (int q = 0; q < s.h.cols; ++q)
    combined +=
        std::conj(w.w[static_cast<std::size_t>(q)]) * noise[static_cast<std::size_t>(q)];
  return std::norm(rx_amplitude_mimo(s.h, v, w, cfg.tx_power_watts) + combined);
}

}  // namespace detail

inline BaselineResult exhaustive_search(const ChannelSample& s,
                                        const Codebook& tx_book,
                                        const SystemConfig& cfg, Rng& rng) {
  return exhaustive_search_impl(tx_book.size(), [&](int i) {
    return detail::measure_beam(s, tx_book.beams[static_cast<std::size_t>(i)],
                                cfg, rng);
  });
}

// Two-tier (or deeper) hierarchical sweep over real wide/leaf beams.
inline BaselineResult two_tier_search(const ChannelSample& s,
                                      const HierarchicalCodebook& hc,
                                      const SystemConfig& cfg, Rng& rng) {
  BaselineResult res = hierarchy_descend_impl(hc, [&](int t, int i) {
    return detail::measure_beam(
        s,
        hc.tiers[static_cast<std::size_t>(t)].beams[static_cast<std::size_t>(i)],
        cfg, rng);
  });
  const int n_t = hc.tiers.back().size();
  const int n_wide = hc.tiers[0].size();
  res.sweep_count = hc.tier_count() == 2 ? two_tier_count(n_t, n_wide)
                                         : binary_count(n_t);
  return res;
}

inline BaselineResult binary_search(const ChannelSample& s,
                                    const HierarchicalCodebook& hc,
                                    const SystemConfig& cfg, Rng& rng) {
  return two_tier_search(s, hc, cfg, rng);
}

// ---------------------------------------------------------------------------
// Real-measurement entry points (two-sided)
// ---------------------------------------------------------------------------

inline BaselineResult exhaustive_search_mimo(const ChannelSample& s,
                                             const Codebook& tx_book,
                                             const Codebook& rx_book,
                                             const SystemConfig& cfg,
                                             Rng& rng) {
  return exhaustive_pair_search_impl(
      tx_book.size(), rx_book.size(), [&](int i, int j) {
        return detail::measure_pair(
            s, tx_book.beams[static_cast<std::size_t>(i)],
            rx_book.beams[static_cast<std::size_t>(j)], cfg, rng);
      });
}

// Sweeps every wide beam pair, then every child pair of the winning sectors.
inline BaselineResult two_tier_joint(const ChannelSample& s,
                                     const HierarchicalCodebook& hc_t,
                                     const HierarchicalCodebook& hc_r,
                                     const SystemConfig& cfg, Rng& rng) {
  if (hc_t.tier_count() != 2 || hc_r.tier_count() != 2)
    throw std::invalid_argument("two_tier_joint: need two-tier hierarchies");
  BaselineResult res;
  const int nw_t = hc_t.tiers[0].size(), nw_r = hc_r.tiers[0].size();
  int best_kt = 0, best_kr = 0;
  double best = 0.0;
  for (int kt = 0; kt < nw_t; ++kt)
    for (int kr = 0; kr < nw_r; ++kr) {
      const double z = detail::measure_pair(
          s, hc_t.tiers[0].beams[static_cast<std::size_t>(kt)],
          hc_r.tiers[0].beams[static_cast<std::size_t>(kr)], cfg, rng);
      res.measurements.push_back(z);
      if ((kt == 0 && kr == 0) || z > best) {
        best = z;
        best_kt = kt;
        best_kr = kr;
      }
    }
  const auto& kids_t = hc_t.children[0][static_cast<std::size_t>(best_kt)];
  const auto& kids_r = hc_r.children[0][static_cast<std::size_t>(best_kr)];
  res.beam = BeamLabel{kids_t[0], kids_r[0]};
  if (kids_t.size() * kids_r.size() > 1) {
    bool first = true;
    for (int i : kids_t)
      for (int j : kids_r) {
        const double z = detail::measure_pair(
            s, hc_t.tiers[1].beams[static_cast<std::size_t>(i)],
            hc_r.tiers[1].beams[static_cast<std::size_t>(j)], cfg, rng);
        res.measurements.push_back(z);
        if (first || z > best) {
          best = z;
          res.beam = BeamLabel{i, j};
          first = false;
        }
      }
  }
  res.sweep_count = two_tier_joint_count(hc_t.tiers[1].size(),
                                         hc_r.tiers[1].size(), nw_t, nw_r);
  return res;
}

// Sweeps every wide beam pair; the user then holds its wide beam while the
// transmit side sweeps its children, and finally the transmit side holds the
// chosen child while the user sweeps its own children.
inline BaselineResult two_tier_hybrid(const ChannelSample& s,
                                      const HierarchicalCodebook& hc_t,
                                      const HierarchicalCodebook& hc_r,
                                      const SystemConfig& cfg, Rng& rng) {
  if (hc_t.tier_count() != 2 || hc_r.tier_count() != 2)
    throw std::invalid_argument("two_tier_hybrid: need two-tier hierarchies");
  BaselineResult res;
  const int nw_t = hc_t.tiers[0].size(), nw_r = hc_r.tiers[0].size();
  int best_kt = 0, best_kr = 0;
  double best = 0.0;
  for (int kt = 0; kt < nw_t; ++kt)
    for (int kr = 0; kr < nw_r; ++kr) {
      const double z = detail::measure_pair(
          s, hc_t.tiers[0].beams[static_cast<std::size_t>(kt)],
          hc_r.tiers[0].beams[static_cast<std::size_t>(kr)], cfg, rng);
      res.measurements.push_back(z);
      if ((kt == 0 && kr == 0) || z > best) {
        best = z;
        best_kt = kt;
        best_kr = kr;
      }
    }
  const auto& kids_t = hc_t.children[0][static_cast<std::size_t>(best_kt)];
  const auto& kids_r = hc_r.children[0][static_cast<std::size_t>(best_kr)];
  int pick_t = kids_t[0];
  if (kids_t.size() > 1) {
    bool first = true;
    for (int i : kids_t) {
      const double z = detail::measure_pair(
          s, hc_t.tiers[1].beams[static_cast<std::size_t>(i)],
          hc_r.tiers[0].beams[static_cast<std::size_t>(best_kr)], cfg, rng);
      res.measurements.push_back(z);
      if (first || z > best) {
        best = z;
        pick_t = i;
        first = false;
      }
    }
  }
  int pick_r = kids_r[0];
  if (kids_r.size() > 1) {
    bool first = true;
    for (int j : kids_r) {
      const double z = detail::measure_pair(
          s, hc_t.tiers[1].beams[static_cast<std::size_t>(pick_t)],
          hc_r.tiers[1].beams[static_cast<std::size_t>(j)], cfg, rng);
      res.measurements.push_back(z);
      if (first || z > best) {
        best = z;
        pick_r = j;
        first = false;
      }
    }
  }
  res.beam = BeamLabel{pick_t, pick_r};
  res.sweep_count = two_tier_hybrid_count(hc_t.tiers[1].size(),
                                          hc_r.tiers[1].size(), nw_t, nw_r);
  return res;
}

// Joint binary descent: both sides step down one tier per level (4 candidate
// pairs); once the shallower side reaches its leaves it holds its beam while
// the other side finishes descending (2 candidates per level).
inline BaselineResult binary_search_mimo(const ChannelSample& s,
                                         const HierarchicalCodebook& hc_t,
                                         const HierarchicalCodebook& hc_r,
                                         const SystemConfig& cfg, Rng& rng) {
  BaselineResult res;
  const int tiers_t = hc_t.tier_count(), tiers_r = hc_r.tier_count();
  const int levels = tiers_t > tiers_r ? tiers_t : tiers_r;
  int cur_t = -1, cur_r = -1;
  for (int level = 0; level < levels; ++level) {
    std::vector<int> cand_t, cand_r;
    if (level == 0)
      for (int i = 0; i < hc_t.tiers[0].size(); ++i) cand_t.push_back(i);
    else if (level < tiers_t)
      cand_t = hc_t.children[static_cast<std::size_t>(level - 1)]
                            [static_cast<std::size_t>(cur_t)];
    else
      cand_t = {cur_t};
    if (level == 0)
      for (int j = 0; j < hc_r.tiers[0].size(); ++j) cand_r.push_back(j);
    else if (level < tiers_r)
      cand_r = hc_r.children[static_cast<std::size_t>(level - 1)]
                            [static_cast<std::size_t>(cur_r)];
    else
      cand_r = {cur_r};

    const int t_tier = level < tiers_t ? level : tiers_t - 1;
    const int r_tier = level < tiers_r ? level : tiers_r - 1;
    if (cand_t.size() * cand_r.size() == 1) {
      cur_t = cand_t[0];
      cur_r = cand_r[0];
      continue;
    }
    double best = 0.0;
    bool first = true;
    for (int i : cand_t)
      for (int j : cand_r) {
        const double z = detail::measure_pair(
            s,
            hc_t.tiers[static_cast<std::size_t>(t_tier)]
                .beams[static_cast<std::size_t>(i)],
            hc_r.tiers[static_cast<std::size_t>(r_tier)]
                .beams[static_cast<std::size_t>(j)],
            cfg, rng);
        res.measurements.push_back(z);
        if (first || z > best) {
          best = z;
          cur_t = i;
          cur_r = j;
          first = false;
        }
      }
  }
  res.beam = BeamLabel{cur_t, cur_r};
  res.sweep_count =
      binary_joint_count(hc_t.tiers.back().size(), hc_r.tiers.back().size());
  return res;
}

}  // namespace hbalign
