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
#include <numbers>
#include <set>

#include "hbalign/codebook.hpp"
#include "hbalign/rng.hpp"

using namespace hbalign;
using Catch::Matchers::WithinAbs;

TEST_CASE("steering vectors at pinned angles", "[codebook]") {
  {  // broadside: all entries 1/sqrt(m)
    const Beam b = steering_vector(4, 0.0);
    for (const cplx& w : b.w) {
      REQUIRE_THAT(w.real(), WithinAbs(0.5, 1e-15));
      REQUIRE_THAT(w.imag(), WithinAbs(0.0, 1e-15));
    }
  }
  {  // end-fire: alternating sign at omega = pi
    const Beam b = steering_vector(2, std::numbers::pi);
    const double r = 1.0 / std::sqrt(2.0);
    REQUIRE_THAT(b.w[0].real(), WithinAbs(r, 1e-12));
    REQUIRE_THAT(b.w[0].imag(), WithinAbs(0.0, 1e-12));
    REQUIRE_THAT(b.w[1].real(), WithinAbs(-r, 1e-12));
    REQUIRE_THAT(b.w[1].imag(), WithinAbs(0.0, 1e-12));
  }
}

TEST_CASE("DFT grid sines and phases", "[codebook]") {
  // dft_sine(n, i) = (2i - n) / n.
  REQUIRE(dft_sine(4, 0) == -1.0);
  REQUIRE(dft_sine(4, 1) == -0.5);
  REQUIRE(dft_sine(4, 2) == 0.0);
  REQUIRE(dft_sine(4, 3) == 0.5);

  // A 4-beam book over a 4-element array covers omega in {-pi,-pi/2,0,pi/2}
  // at half-wavelength spacing.
  const Codebook book = dft_codebook(4, 4);
  const double expected_omega[4] = {-std::numbers::pi, -std::numbers::pi / 2,
                                    0.0, std::numbers::pi / 2};
  for (int i = 0; i < 4; ++i) {
    const Beam& b = book.beams[static_cast<std::size_t>(i)];
    for (int k = 0; k < 4; ++k) {
      const cplx want =
          cplx{std::cos(expected_omega[i] * k), std::sin(expected_omega[i] * k)} / 2.0;
      REQUIRE_THAT(b.w[static_cast<std::size_t>(k)].real(),
                   WithinAbs(want.real(), 1e-12));
      REQUIRE_THAT(b.w[static_cast<std::size_t>(k)].imag(),
                   WithinAbs(want.imag(), 1e-12));
    }
  }
}

TEST_CASE("DFT codebook invariants", "[codebook]") {
  const Codebook book = dft_codebook(8, 16);
  for (const Beam& b : book.beams)
    REQUIRE(beam_modulus_deviation(b) <= 1e-9);

  REQUIRE_THROWS_AS(dft_codebook(1, 4), std::invalid_argument);
  REQUIRE_THROWS_AS(dft_codebook(8, 4), std::invalid_argument);

  // Critically-sampled book is orthonormal: Gram matrix = identity.
  const Codebook square = dft_codebook(8, 8);
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) {
      const double want = i == j ? 1.0 : 0.0;
      REQUIRE_THAT(std::abs(beam_inner(square.beams[static_cast<std::size_t>(i)],
                                       square.beams[static_cast<std::size_t>(j)])),
                   WithinAbs(want, 1e-9));
    }
}

TEST_CASE("adjacent oversampled beams correlate more than skips", "[codebook]") {
  const Codebook book = dft_codebook(64, 128);
  for (int i = 0; i + 2 < 128; ++i) {
    const double c1 = std::abs(beam_inner(book.beams[static_cast<std::size_t>(i)],
                                          book.beams[static_cast<std::size_t>(i + 1)]));
    const double c2 = std::abs(beam_inner(book.beams[static_cast<std::size_t>(i)],
                                          book.beams[static_cast<std::size_t>(i + 2)]));
    REQUIRE(c1 > c2);
  }
}

TEST_CASE("synthesized wide beams cover their sector", "[codebook]") {
  const int m = 8;
  Rng rng(11);

  {  // full sector: nearly flat response expected
    const Beam wide = wide_beam_synthesize(m, -1.0, 1.0, 200, rng);
    REQUIRE(beam_modulus_deviation(wide) <= 1e-12);

    const int grid = 4 * m;
    std::vector<double> gain;
    double mean = 0.0;
    for (int i = 0; i < grid; ++i) {
      const double sine = dft_sine(grid, i);
      const Beam probe = steering_vector(m, 2.0 * std::numbers::pi * 0.5 * sine);
      const double g = std::abs(beam_inner(probe, wide));
      gain.push_back(g);
      mean += g / grid;
    }
    for (double g : gain) REQUIRE(g >= 0.5 * mean);
  }

  {  // narrow sector of width 2/m: behaves like the matched narrow beam
    const Beam wide = wide_beam_synthesize(m, -1.0 / m, 1.0 / m, 200, rng);
    const Beam center = steering_vector(m, 0.0);
    REQUIRE(std::abs(beam_inner(center, wide)) >= 0.8);
  }
}

TEST_CASE("two-tier hierarchy partitions the leaf book", "[codebook]") {
  const HierarchicalCodebook hc = build_two_tier(64, 128, 11);
  REQUIRE(hc.tier_count() == 2);
  REQUIRE(hc.tiers[0].size() == 11);
  REQUIRE(hc.tiers[1].size() == 128);

  // Child groups partition the 128 leaves; the largest has ceil(128/11) = 12.
  std::set<int> seen;
  std::size_t largest = 0;
  for (const auto& kids : hc.children[0]) {
    largest = std::max(largest, kids.size());
    for (int c : kids) REQUIRE(seen.insert(c).second);
  }
  REQUIRE(seen.size() == 128u);
  REQUIRE(largest == 12u);

  for (const Beam& b : hc.tiers[0].beams)
    REQUIRE(beam_modulus_deviation(b) <= 1e-9);

  // Wide sectors are contiguous, ordered left to right.
  for (std::size_t k = 0; k + 1 < hc.sectors[0].size(); ++k)
    REQUIRE(hc.sectors[0][k].hi <= hc.sectors[0][k + 1].lo + 1e-12);
}

TEST_CASE("degenerate two-tier with one leaf per sector", "[codebook]") {
  const HierarchicalCodebook hc = build_two_tier(8, 16, 16);
  for (const auto& kids : hc.children[0]) REQUIRE(kids.size() == 1);
}

TEST_CASE("binary hierarchy shape", "[codebook]") {
  const HierarchicalCodebook hc = build_binary(64, 128);
  REQUIRE(hc.tier_count() == 7);  // log2(128) halvings
  for (int t = 0; t < 7; ++t)
    REQUIRE(hc.tiers[static_cast<std::size_t>(t)].size() == (2 << t));

  // Every tier's child lists are a partition of the next tier.
  for (int t = 0; t + 1 < 7; ++t) {
    std::set<int> seen;
    for (const auto& kids : hc.children[static_cast<std::size_t>(t)])
      for (int c : kids) REQUIRE(seen.insert(c).second);
    REQUIRE(static_cast<int>(seen.size()) ==
            hc.tiers[static_cast<std::size_t>(t + 1)].size());
  }

  // Each leaf is reachable through exactly one root-to-leaf path: walk all
  // paths and count leaf visits.
  std::vector<int> visits(128, 0);
  struct Node { int tier, idx; };
  std::vector<Node> stack;
  for (int r = 0; r < hc.tiers[0].size(); ++r) stack.push_back({0, r});
  while (!stack.empty()) {
    const Node n = stack.back();
    stack.pop_back();
    if (n.tier == 6) {
      visits[static_cast<std::size_t>(n.idx)]++;
      continue;
    }
    for (int c : hc.children[static_cast<std::size_t>(n.tier)][static_cast<std::size_t>(n.idx)])
      stack.push_back({n.tier + 1, c});
  }
  for (int v : visits) REQUIRE(v == 1);

  REQUIRE_THROWS_AS(build_binary(8, 24), std::invalid_argument);  // not 2^k
}

TEST_CASE("binary hierarchy over two leaves is the leaf book", "[codebook]") {
  const HierarchicalCodebook hc = build_binary(2, 2);
  REQUIRE(hc.tier_count() == 1);
  const Codebook leaf = dft_codebook(2, 2);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t k = 0; k < 2; ++k)
      REQUIRE(hc.tiers[0].beams[i].w[k] == leaf.beams[i].w[k]);
}
