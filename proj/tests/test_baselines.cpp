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

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "hbalign/baselines.hpp"
#include "hbalign/labels.hpp"
#include "test_util.hpp"

using namespace hbalign;

namespace {

// Ideal sector measurement: full power iff the target sine falls inside the
// swept beam's sector, plus a small leaf-sharpening term so deeper tiers
// still discriminate.  Isolates the descent logic from synthesized-beam
// quality.
double ideal_sector(const HierarchicalCodebook& hc, int tier, int index,
                    double target) {
  const SectorRange sec =
      hc.sectors[static_cast<std::size_t>(tier)][static_cast<std::size_t>(index)];
  if (target < sec.lo || target >= sec.hi) return 0.0;
  return 1.0 / (1e-9 + sec.hi - sec.lo);  // narrower sector = stronger pick
}

}  // namespace

TEST_CASE("closed-form sweep budgets at deployment sizes", "[baselines]") {
  // Single-antenna link, 128 transmit beams.
  REQUIRE(exhaustive_count(128) == 128);
  REQUIRE(two_tier_count(128, 11) == 23);  // 11 wide + ceil(128/11) = 12
  REQUIRE(binary_count(128) == 14);        // 2 per halving

  // Two-sided link, 128 x 32 beams, 16 x 4 wide pairs.
  REQUIRE(exhaustive_count_pairs(128, 32) == 4096);
  REQUIRE(two_tier_joint_count(128, 32, 16, 4) == 128);  // 64 + 8*8
  REQUIRE(two_tier_hybrid_count(128, 32, 16, 4) == 80);  // 64 + 8 + 8
  REQUIRE(binary_joint_count(128, 32) == 24);            // 4*5 + 2*2

  // Work-desk sizes.
  REQUIRE(two_tier_count(32, 5) == 12);
  REQUIRE(binary_count(32) == 10);
  REQUIRE(binary_joint_count(32, 8) == 16);

  // Degenerate cases: singleton children cost no second sweep.
  REQUIRE(two_tier_count(16, 16) == 16);
  REQUIRE(two_tier_joint_count(16, 4, 16, 4) == 64);
  REQUIRE_THROWS_AS(binary_count(24), std::invalid_argument);
}

TEST_CASE("exhaustive search follows the injected measurements",
          "[baselines]") {
  const std::vector<double> z = {0.1, 0.9, 0.4, 0.9};
  const BaselineResult res = exhaustive_search_impl(
      4, [&](int i) { return z[static_cast<std::size_t>(i)]; });
  REQUIRE(res.beam.tx_index == 1);  // tie with 3 resolves to the lower index
  REQUIRE(res.sweep_count == 4);
  REQUIRE(res.measurements == z);

  const BaselineResult pair = exhaustive_pair_search_impl(
      2, 3, [&](int i, int j) { return i == 1 && j == 2 ? 5.0 : 1.0; });
  REQUIRE(pair.beam.tx_index == 1);
  REQUIRE(pair.beam.rx_index == 2);
  REQUIRE(pair.sweep_count == 6);
  REQUIRE(pair.measurements.size() == 6u);
}

TEST_CASE("hierarchical descent with ideal sector beams finds the target",
          "[baselines]") {
  {  // two-tier
    const HierarchicalCodebook hc = build_two_tier(16, 32, 5);
    for (int leaf = 0; leaf < 32; ++leaf) {
      const double target = dft_sine(32, leaf) + 1e-6;  // inside leaf's sector
      const BaselineResult res = hierarchy_descend_impl(
          hc, [&](int t, int i) { return ideal_sector(hc, t, i, target); });
      REQUIRE(res.beam.tx_index == leaf);
    }
  }
  {  // binary
    const HierarchicalCodebook hc = build_binary(16, 32);
    for (int leaf = 0; leaf < 32; ++leaf) {
      const double target = dft_sine(32, leaf) + 1e-6;
      const BaselineResult res = hierarchy_descend_impl(
          hc, [&](int t, int i) { return ideal_sector(hc, t, i, target); });
      REQUIRE(res.beam.tx_index == leaf);
      REQUIRE(res.measurements.size() == 10u);  // 2 per level, 5 levels
    }
  }
}

TEST_CASE("noise-free exhaustive search recovers the label", "[baselines]") {
  const SystemConfig cfg = testutil::make_cfg(16, 32);  // zero noise
  const ChannelDataset ds = gen_dataset(cfg, testutil::multipath_blobs(), 60, 19);
  const Codebook tx = dft_codebook(16, 32);

  Rng rng(4);
  for (const auto& s : ds.samples) {
    const BaselineResult res = exhaustive_search(s, tx, cfg, rng);
    const BeamLabel want = optimal_beam(s, tx);
    REQUIRE(res.beam.tx_index == want.tx_index);
    REQUIRE(res.measurements.size() == 32u);
  }
}

TEST_CASE("noise-free pair exhaustive search recovers the pair label",
          "[baselines]") {
  const SystemConfig cfg = testutil::make_cfg(16, 32, 4, 8);
  const ChannelDataset ds = gen_dataset(cfg, testutil::multipath_blobs(), 40, 20);
  const Codebook tx = dft_codebook(16, 32);
  const Codebook rx = dft_codebook(4, 8);

  Rng rng(5);
  for (const auto& s : ds.samples) {
    const BaselineResult res = exhaustive_search_mimo(s, tx, rx, cfg, rng);
    const BeamLabel want = optimal_beam(s, tx, rx);
    REQUIRE(res.beam == want);
    REQUIRE(res.sweep_count == 256);
  }
}

TEST_CASE("realized hierarchical searches stay on budget", "[baselines]") {
  const SystemConfig cfg =
      testutil::make_cfg(16, 32, 1, 1, testutil::kUnitNoisePsd);
  const ChannelSample s = testutil::los_miso(16, 0.31, cplx{2.0, 1.0});

  {  // two-tier: realized measurement count equals the closed form
    const HierarchicalCodebook hc = build_two_tier(16, 32, 5);
    Rng rng(6);
    const BaselineResult res = two_tier_search(s, hc, cfg, rng);
    REQUIRE(res.sweep_count == two_tier_count(32, 5));
    // 5 wide sweeps plus the winner's child group (6 or 7 leaves).
    REQUIRE(res.measurements.size() >= 11u);
    REQUIRE(res.measurements.size() <= static_cast<std::size_t>(res.sweep_count));
    REQUIRE(res.beam.tx_index >= 0);
    REQUIRE(res.beam.tx_index < 32);
  }
  {  // singleton children: only the wide tier is ever measured
    const HierarchicalCodebook hc = build_two_tier(16, 32, 32);
    Rng rng(7);
    const BaselineResult res = two_tier_search(s, hc, cfg, rng);
    REQUIRE(res.sweep_count == 32);
    REQUIRE(res.measurements.size() == 32u);
  }
  {  // binary
    const HierarchicalCodebook hc = build_binary(16, 32);
    Rng rng(8);
    const BaselineResult res = binary_search(s, hc, cfg, rng);
    REQUIRE(res.sweep_count == 10);
    REQUIRE(res.measurements.size() == 10u);
  }
}

TEST_CASE("baseline searches are deterministic given the seed", "[baselines]") {
  const SystemConfig cfg =
      testutil::make_cfg(16, 32, 1, 1, testutil::kUnitNoisePsd);
  const ChannelSample s = testutil::los_miso(16, -0.42, cplx{1.5, -0.5});
  const Codebook tx = dft_codebook(16, 32);

  Rng ra(9), rb(9);
  const BaselineResult a = exhaustive_search(s, tx, cfg, ra);
  const BaselineResult b = exhaustive_search(s, tx, cfg, rb);
  REQUIRE(a.beam == b.beam);
  REQUIRE(a.measurements == b.measurements);
}

TEST_CASE("two-tier beats binary on clean line-of-sight channels",
          "[baselines]") {
  // Zero noise, single path: a head-to-head over the same samples.  The
  // two-tier search measures every leaf under the winning sector, so it can
  // only lose through wide-beam selection; binary accumulates a mistake per
  // level.
  const SystemConfig cfg = testutil::make_cfg(16, 32);
  Scenario sc = testutil::los_blobs();  // pure line of sight
  const ChannelDataset ds = gen_dataset(cfg, sc, 150, 23);
  const Codebook tx = dft_codebook(16, 32);

  const HierarchicalCodebook two = build_two_tier(16, 32, 5);
  const HierarchicalCodebook bin = build_binary(16, 32);

  Rng rng(10);
  int hits_two = 0, hits_bin = 0;
  for (const auto& s : ds.samples) {
    const int want = optimal_beam(s, tx).tx_index;
    if (two_tier_search(s, two, cfg, rng).beam.tx_index == want) hits_two++;
    if (binary_search(s, bin, cfg, rng).beam.tx_index == want) hits_bin++;
  }
  REQUIRE(hits_two >= hits_bin);
  REQUIRE(hits_two > 100);  // and both are far above chance
}

TEST_CASE("joint and hybrid two-tier searches agree with brute force on "
          "ideal channels", "[baselines]") {
  const SystemConfig cfg = testutil::make_cfg(16, 32, 4, 8);
  const Codebook tx = dft_codebook(16, 32);
  const Codebook rx = dft_codebook(4, 8);
  const HierarchicalCodebook hct = build_two_tier(16, 32, 8);
  const HierarchicalCodebook hcr = build_two_tier(4, 8, 2);

  // Strong on-grid rank-one channels: every hierarchical method should match
  // the exhaustive pair label.  Leaves are drawn away from sector boundaries:
  // a leaf exactly on a boundary is covered equally by both adjacent wide
  // beams, so any sector descent may defensibly open the neighbour block and
  // the comparison against the exhaustive label becomes ill-posed.
  Rng rng(11);
  int joint_ok = 0, hybrid_ok = 0, bin_ok = 0;
  const int reps = 24;
  for (int r = 0; r < reps; ++r) {
    const int it = 4 * rng.uniform_int(8) + 1 + rng.uniform_int(3);
    const int ir = 4 * rng.uniform_int(2) + 1 + rng.uniform_int(3);
    const ChannelSample s = testutil::los_mimo(
        16, 4, dft_sine(32, it), dft_sine(8, ir), cplx{1.0, 0.0},
        static_cast<std::uint64_t>(r));
    const BeamLabel want = optimal_beam(s, tx, rx);

    Rng r1(100 + r), r2(200 + r), r3(300 + r);
    if (two_tier_joint(s, hct, hcr, cfg, r1).beam == want) joint_ok++;
    if (two_tier_hybrid(s, hct, hcr, cfg, r2).beam == want) hybrid_ok++;
    const HierarchicalCodebook bt = build_binary(16, 32);
    const HierarchicalCodebook br = build_binary(4, 8);
    if (binary_search_mimo(s, bt, br, cfg, r3).beam == want) bin_ok++;
  }
  // Wide-beam ripple allows a couple of misses; nearly all must land.
  REQUIRE(joint_ok >= reps - 2);
  REQUIRE(hybrid_ok >= reps - 2);
  REQUIRE(bin_ok >= reps - 3);

  // Budget bookkeeping for the same books.
  const ChannelSample probe =
      testutil::los_mimo(16, 4, 0.1, 0.2, cplx{1.0, 0.0});
  Rng r4(12), r5(13), r6(14);
  REQUIRE(two_tier_joint(probe, hct, hcr, cfg, r4).sweep_count ==
          two_tier_joint_count(32, 8, 8, 2));
  REQUIRE(two_tier_hybrid(probe, hct, hcr, cfg, r5).sweep_count ==
          two_tier_hybrid_count(32, 8, 8, 2));
  REQUIRE(binary_search_mimo(probe, build_binary(16, 32), build_binary(4, 8),
                             cfg, r6)
              .sweep_count == binary_joint_count(32, 8));
}
