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

#include <complex>
#include <sstream>

#include "hbalign/channel.hpp"
#include "hbalign/codebook.hpp"
#include "test_util.hpp"

using namespace hbalign;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// Scenario with a single deterministic line-of-sight path at a fixed
// departure sine; gain magnitude 1 (phase stays random).
Scenario pinned_los(double aod_sine) {
  Scenario sc;
  sc.num_paths = 1;
  sc.los_prob = 1.0;
  sc.los_gain = 1.0;
  sc.nlos_gain_scale = 0.5;
  sc.blobs = {ScenarioBlob{aod_sine, 0.0, 0.0, 0.0}};
  return sc;
}

}  // namespace

TEST_CASE("single on-grid path puts all power in the matched DFT beam",
          "[channel]") {
  const int m = 16;
  const int n = 16;
  const SystemConfig cfg = testutil::make_cfg(m, n);
  const int grid_index = 12;                       // sine (2*12-16)/16 = 0.5
  const double sine = dft_sine(n, grid_index);
  const Scenario sc = pinned_los(sine);

  Rng rng(42);
  const ChannelSample s = synth_channel(cfg, sc, rng, 0);
  const Codebook book = dft_codebook(m, n);

  // |h^H v|^2 for a matched unit-gain path equals the array size.
  std::vector<double> power(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    cplx acc = 0.0;
    for (int p = 0; p < m; ++p)
      acc += std::conj(s.h(p, 0)) * book.beams[static_cast<std::size_t>(i)].w[static_cast<std::size_t>(p)];
    power[static_cast<std::size_t>(i)] = std::norm(acc);
  }
  REQUIRE_THAT(power[grid_index], WithinRel(static_cast<double>(m), 1e-5));
  for (int i = 0; i < n; ++i)
    if (i != grid_index) REQUIRE(power[static_cast<std::size_t>(i)] < power[grid_index]);
}

TEST_CASE("an all-zero channel draw is rejected", "[channel]") {
  const SystemConfig cfg = testutil::make_cfg(4, 4);
  Scenario sc = pinned_los(0.25);
  sc.los_gain = 0.0;  // zero-gain path: the only contribution vanishes
  sc.nlos_gain_scale = 0.0;
  Rng rng(7);
  REQUIRE_THROWS_AS(synth_channel(cfg, sc, rng, 0), std::invalid_argument);
}

TEST_CASE("dataset generation is deterministic in the seed", "[channel]") {
  const SystemConfig cfg = testutil::make_cfg(8, 16);
  const Scenario sc = testutil::multipath_blobs();
  const ChannelDataset a = gen_dataset(cfg, sc, 40, 123);
  const ChannelDataset b = gen_dataset(cfg, sc, 40, 123);
  const ChannelDataset c = gen_dataset(cfg, sc, 40, 124);

  REQUIRE(a.samples.size() == 40);
  REQUIRE(a.split_tags == b.split_tags);
  for (std::size_t i = 0; i < a.samples.size(); ++i)
    REQUIRE(a.samples[i].h == b.samples[i].h);

  bool any_diff = false;
  for (std::size_t i = 0; i < a.samples.size(); ++i)
    if (!(a.samples[i].h == c.samples[i].h)) any_diff = true;
  REQUIRE(any_diff);
}

TEST_CASE("train/val/test split arithmetic", "[channel]") {
  const SystemConfig cfg = testutil::make_cfg(4, 4);
  const Scenario sc = testutil::multipath_blobs();

  auto counts = [&](int n) {
    const ChannelDataset ds = gen_dataset(cfg, sc, n, 5);
    return std::array<std::size_t, 3>{ds.indices_of(Split::train).size(),
                                      ds.indices_of(Split::val).size(),
                                      ds.indices_of(Split::test).size()};
  };

  // Validation and test each get floor(n/5); the remainder goes to train.
  {
    const auto c10 = counts(10);
    REQUIRE(c10[0] == 6);
    REQUIRE(c10[1] == 2);
    REQUIRE(c10[2] == 2);
  }
  {
    const auto c11 = counts(11);
    REQUIRE(c11[0] == 7);
    REQUIRE(c11[1] == 2);
    REQUIRE(c11[2] == 2);
  }
  {
    const auto c25 = counts(25);
    REQUIRE(c25[0] == 15);
    REQUIRE(c25[1] == 5);
    REQUIRE(c25[2] == 5);
  }
  // Below ten samples the split would starve; generation refuses.
  REQUIRE_THROWS_AS(gen_dataset(cfg, sc, 5, 5), std::invalid_argument);
}

TEST_CASE("split indices are disjoint and cover the dataset", "[channel]") {
  const SystemConfig cfg = testutil::make_cfg(4, 8);
  const ChannelDataset ds = gen_dataset(cfg, testutil::multipath_blobs(), 37, 9);
  std::vector<int> seen(37, 0);
  for (Split sp : {Split::train, Split::val, Split::test})
    for (int i : ds.indices_of(sp)) seen[static_cast<std::size_t>(i)]++;
  for (int c : seen) REQUIRE(c == 1);
}

TEST_CASE("dataset file round-trip is bit-exact", "[channel]") {
  const SystemConfig cfg = testutil::make_cfg(4, 8, 2, 4, -161.0);
  const ChannelDataset ds = gen_dataset(cfg, testutil::multipath_blobs(), 17, 3);

  std::stringstream buf(std::ios::in | std::ios::out | std::ios::binary);
  save_dataset(ds, buf);
  const ChannelDataset back = load_dataset(buf);

  REQUIRE(back.cfg == ds.cfg);
  REQUIRE(back.split_tags == ds.split_tags);
  REQUIRE(back.samples.size() == ds.samples.size());
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    REQUIRE(back.samples[i].sample_id == ds.samples[i].sample_id);
    REQUIRE(back.samples[i].h == ds.samples[i].h);  // exact f32 payload
  }

  // Saving the loaded copy reproduces the original byte stream.
  std::stringstream buf2(std::ios::in | std::ios::out | std::ios::binary);
  save_dataset(back, buf2);
  REQUIRE(buf2.str() == buf.str());
}

TEST_CASE("dataset loader rejects malformed files", "[channel]") {
  const SystemConfig cfg = testutil::make_cfg(4, 8);
  const ChannelDataset ds = gen_dataset(cfg, testutil::multipath_blobs(), 12, 3);
  std::ostringstream os(std::ios::binary);
  save_dataset(ds, os);
  const std::string good = os.str();

  auto load_str = [](std::string bytes) {
    std::istringstream is(std::move(bytes), std::ios::binary);
    return load_dataset(is);
  };

  {  // wrong magic
    std::string bad = good;
    bad[0] = 'X';
    try {
      load_str(bad);
      FAIL("expected bad_magic");
    } catch (const io_error& e) {
      REQUIRE(e.code == io_error::Code::bad_magic);
    }
  }
  {  // unsupported version
    std::string bad = good;
    bad[4] = 99;
    try {
      load_str(bad);
      FAIL("expected version_mismatch");
    } catch (const io_error& e) {
      REQUIRE(e.code == io_error::Code::version_mismatch);
    }
  }
  {  // truncated mid-payload
    std::string bad = good.substr(0, 40);
    try {
      load_str(bad);
      FAIL("expected truncated");
    } catch (const io_error& e) {
      REQUIRE(e.code == io_error::Code::truncated);
    }
  }
}

TEST_CASE("sample payload is eight bytes per complex entry", "[channel]") {
  // One 2x1 sample: 24-byte header, 16-byte payload, 1 split tag, text footer.
  SystemConfig cfg = testutil::make_cfg(2, 2);
  ChannelDataset ds;
  ds.cfg = cfg;
  ds.samples = {testutil::los_miso(2, 0.0, cplx{1.0, 0.0})};
  ds.split_tags = {0};

  std::ostringstream os(std::ios::binary);
  save_dataset(ds, os);
  const std::string footer = emit_kv(cfg.to_kv());
  REQUIRE(os.str().size() == 24 + 16 + 1 + footer.size());
}

TEST_CASE("system and scenario key-value round-trips", "[channel]") {
  SystemConfig cfg = testutil::make_cfg(8, 16, 4, 8, -158.5);
  REQUIRE(SystemConfig::from_kv(cfg.to_kv()) == cfg);

  // -inf noise PSD selects exact zero noise power.
  const SystemConfig quiet = cfg.with_noise_psd(-testutil::kInf);
  REQUIRE(quiet.noise_variance_watts == 0.0);
  const SystemConfig rt = SystemConfig::from_kv(quiet.to_kv());
  REQUIRE(rt.noise_variance_watts == 0.0);

  const Scenario sc = testutil::multipath_blobs();
  const Scenario sc2 = Scenario::from_kv(sc.to_kv());
  REQUIRE(sc2.num_paths == sc.num_paths);
  REQUIRE(sc2.los_prob == sc.los_prob);
  REQUIRE(sc2.blobs.size() == sc.blobs.size());
  for (std::size_t i = 0; i < sc.blobs.size(); ++i) {
    REQUIRE(sc2.blobs[i].aod_center == sc.blobs[i].aod_center);
    REQUIRE(sc2.blobs[i].aod_halfwidth == sc.blobs[i].aod_halfwidth);
    REQUIRE(sc2.blobs[i].aoa_center == sc.blobs[i].aoa_center);
    REQUIRE(sc2.blobs[i].aoa_halfwidth == sc.blobs[i].aoa_halfwidth);
  }

  // Config validation rejects a codebook smaller than the array.
  SystemConfig bad = cfg;
  bad.tx_codebook_size = bad.tx_antennas - 1;
  REQUIRE_THROWS_AS(bad.validate(), std::invalid_argument);
}
