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
#include <complex>
#include <numbers>

#include "hbalign/codebook.hpp"
#include "hbalign/sweep.hpp"
#include "test_util.hpp"

using namespace hbalign;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("noise-free matched sweep captures the full array gain", "[sweep]") {
  const int m = 16, n = 16;
  const SystemConfig cfg = testutil::make_cfg(m, n);  // 1 W, zero noise
  const int idx = 12;
  const ChannelSample s =
      testutil::los_miso(m, dft_sine(n, idx), cplx{1.0, 0.0});
  const Codebook book = dft_codebook(m, n);

  Rng rng(1);
  const auto y = rx_signal_miso(s.h, book, cfg, rng);
  REQUIRE(y.size() == static_cast<std::size_t>(n));

  // Matched beam: |y|^2 = tx_power * m; orthogonal beams: exactly zero up to
  // rounding (critically sampled DFT).
  REQUIRE_THAT(std::norm(y[static_cast<std::size_t>(idx)]),
               WithinRel(cfg.tx_power_watts * m, 1e-10));
  for (int i = 0; i < n; ++i)
    if (i != idx)
      REQUIRE(std::abs(y[static_cast<std::size_t>(i)]) <= 1e-9 * m);
}

TEST_CASE("sweep noise has the configured variance", "[sweep]") {
  const int m = 4, n = 4;
  // -50 dBm/Hz over 100 MHz = 1 W noise variance.
  const SystemConfig cfg = testutil::make_cfg(m, n, 1, 1, testutil::kUnitNoisePsd);
  REQUIRE_THAT(cfg.noise_variance_watts, WithinRel(1.0, 1e-12));

  const ChannelSample s = testutil::los_miso(m, 0.3, cplx{0.7, -0.2});
  const Codebook book = dft_codebook(m, n);

  // Noise-free reference amplitudes.
  const SystemConfig quiet = cfg.with_noise_psd(-testutil::kInf);
  Rng r0(5);
  const auto clean = rx_signal_miso(s.h, book, quiet, r0);

  Rng rng(99);
  const int reps = 25000;  // 100k scalar draws across the 4 beams
  double acc = 0.0, mean_re = 0.0;
  for (int r = 0; r < reps; ++r) {
    const auto y = rx_signal_miso(s.h, book, cfg, rng);
    for (int i = 0; i < n; ++i) {
      const cplx noise = y[static_cast<std::size_t>(i)] - clean[static_cast<std::size_t>(i)];
      acc += std::norm(noise);
      mean_re += noise.real();
    }
  }
  const double var = acc / (reps * n);
  REQUIRE_THAT(var, WithinRel(cfg.noise_variance_watts, 0.03));
  REQUIRE_THAT(mean_re / (reps * n), WithinAbs(0.0, 0.02));
}

TEST_CASE("combined receive noise keeps the configured variance", "[sweep]") {
  const int mt = 4, mr = 2;
  const SystemConfig cfg =
      testutil::make_cfg(mt, 4, mr, 2, testutil::kUnitNoisePsd);
  const ChannelSample s = testutil::los_mimo(mt, mr, 0.3, -0.4, cplx{1.0, 0.5});

  std::vector<BeamPair> pairs;
  const Codebook tx = dft_codebook(mt, 4);
  const Codebook rx = dft_codebook(mr, 2);
  for (const Beam& v : tx.beams)
    for (const Beam& w : rx.beams) pairs.push_back(BeamPair{&v, &w});

  const SystemConfig quiet = cfg.with_noise_psd(-testutil::kInf);
  Rng r0(5);
  const auto clean = rx_signal_mimo(s.h, pairs, quiet, r0);

  Rng rng(81);
  const int reps = 12500;  // 100k pair draws
  double acc = 0.0;
  for (int r = 0; r < reps; ++r) {
    const auto y = rx_signal_mimo(s.h, pairs, cfg, rng);
    for (std::size_t i = 0; i < pairs.size(); ++i)
      acc += std::norm(y[i] - clean[i]);
  }
  // w^H n with unit-norm w preserves the per-antenna variance.
  REQUIRE_THAT(acc / (reps * static_cast<double>(pairs.size())),
               WithinRel(cfg.noise_variance_watts, 0.03));
}

TEST_CASE("matched rank-one pair collects both array gains", "[sweep]") {
  const int mt = 8, mr = 4;
  const SystemConfig cfg = testutil::make_cfg(mt, 8, mr, 4);
  const int it = 6, ir = 1;
  const ChannelSample s = testutil::los_mimo(mt, mr, dft_sine(8, it),
                                             dft_sine(4, ir), cplx{1.0, 0.0});
  const Codebook tx = dft_codebook(mt, 8);
  const Codebook rx = dft_codebook(mr, 4);

  std::vector<BeamPair> pairs;
  for (const Beam& v : tx.beams)
    for (const Beam& w : rx.beams) pairs.push_back(BeamPair{&v, &w});

  Rng rng(3);
  const auto y = rx_signal_mimo(s.h, pairs, cfg, rng);
  std::size_t best = 0;
  for (std::size_t i = 1; i < y.size(); ++i)
    if (std::norm(y[i]) > std::norm(y[best])) best = i;

  REQUIRE(best == static_cast<std::size_t>(it * 4 + ir));
  REQUIRE_THAT(std::norm(y[best]), WithinRel(cfg.tx_power_watts * mt * mr, 1e-9));
}

TEST_CASE("single receive antenna reduces the pair sweep to the plain sweep",
          "[sweep]") {
  const int m = 4, n = 4;
  const SystemConfig cfg = testutil::make_cfg(m, n, 1, 1, testutil::kUnitNoisePsd);
  const ChannelSample s = testutil::los_miso(m, 0.21, cplx{0.9, 0.1});
  const Codebook tx = dft_codebook(m, n);
  Beam w1;
  w1.w = {cplx{1.0, 0.0}};
  std::vector<BeamPair> pairs;
  for (const Beam& v : tx.beams) pairs.push_back(BeamPair{&v, &w1});

  Rng ra(17), rb(17);
  const auto ya = rx_signal_miso(s.h, tx, cfg, ra);
  const auto yb = rx_signal_mimo(s.h, pairs, cfg, rb);
  REQUIRE(ya.size() == yb.size());
  for (std::size_t i = 0; i < ya.size(); ++i) {
    REQUIRE_THAT(yb[i].real(), WithinAbs(ya[i].real(), 1e-12));
    REQUIRE_THAT(yb[i].imag(), WithinAbs(ya[i].imag(), 1e-12));
  }
}

TEST_CASE("power feedback squares amplitudes", "[sweep]") {
  const std::vector<cplx> y = {cplx{1.0, 1.0}, cplx{2.0, 0.0}, cplx{0.0, 0.0}};
  const Measurement m = power_feedback(y, SweepTier::coarse, 42);
  REQUIRE(m.z.size() == 3);
  REQUIRE(m.z[0] == 2.0);
  REQUIRE(m.z[1] == 4.0);
  REQUIRE(m.z[2] == 0.0);
  REQUIRE(m.tier == SweepTier::coarse);
  REQUIRE(m.noise_seed == 42);
}

TEST_CASE("post-alignment signal-to-noise ratio", "[sweep]") {
  const int m = 8, n = 8;
  const SystemConfig cfg = testutil::make_cfg(m, n, 1, 1, testutil::kUnitNoisePsd);
  const int idx = 5;
  const ChannelSample s = testutil::los_miso(m, dft_sine(n, idx), cplx{1.0, 0.0});
  const Codebook book = dft_codebook(m, n);

  const double matched = snr_miso(s.h, book.beams[static_cast<std::size_t>(idx)], cfg);
  REQUIRE_THAT(matched, WithinRel(cfg.tx_power_watts * m / cfg.noise_variance_watts,
                                  1e-9));

  // Doubling transmit power doubles the ratio.
  SystemConfig hot = cfg;
  hot.tx_power_dbm = cfg.tx_power_dbm + 10.0 * std::log10(2.0);
  hot.finalize();
  REQUIRE_THAT(snr_miso(s.h, book.beams[static_cast<std::size_t>(idx)], hot),
               WithinRel(2.0 * matched, 1e-9));

  // The ratio orders beams exactly like received power.
  const ChannelSample mixed = testutil::los_miso(m, 0.17, cplx{0.8, 0.3});
  int best_snr = 0, best_pow = 0;
  for (int i = 0; i < n; ++i) {
    const Beam& b = book.beams[static_cast<std::size_t>(i)];
    if (snr_miso(mixed.h, b, cfg) > snr_miso(mixed.h, book.beams[static_cast<std::size_t>(best_snr)], cfg))
      best_snr = i;
    const double p = std::norm(rx_amplitude_miso(mixed.h, b, cfg.tx_power_watts));
    if (p > std::norm(rx_amplitude_miso(mixed.h, book.beams[static_cast<std::size_t>(best_pow)],
                                        cfg.tx_power_watts)))
      best_pow = i;
  }
  REQUIRE(best_snr == best_pow);

  // Zero noise power makes the ratio undefined.
  const SystemConfig quiet = cfg.with_noise_psd(-testutil::kInf);
  REQUIRE_THROWS_AS(snr_miso(s.h, book.beams[0], quiet), std::invalid_argument);
}

TEST_CASE("spectral efficiency at pinned ratios", "[sweep]") {
  REQUIRE(spectral_efficiency(0.0) == 0.0);
  REQUIRE_THAT(spectral_efficiency(1.0), WithinAbs(1.0, 1e-15));
  REQUIRE_THAT(spectral_efficiency(3.0), WithinAbs(2.0, 1e-15));
  REQUIRE_THROWS_AS(spectral_efficiency(-0.5), std::invalid_argument);
}

TEST_CASE("scaling the channel scales noise-free power quadratically",
          "[sweep]") {
  const int m = 8;
  const SystemConfig cfg = testutil::make_cfg(m, 8);
  const ChannelSample s = testutil::los_miso(m, 0.4, cplx{0.6, -0.8});
  ChannelSample s3 = s;
  for (auto& v : s3.h.d) v *= 3.0;

  const Beam b = steering_vector(m, 1.1);
  const double p1 = std::norm(rx_amplitude_miso(s.h, b, cfg.tx_power_watts));
  const double p3 = std::norm(rx_amplitude_miso(s3.h, b, cfg.tx_power_watts));
  REQUIRE_THAT(p3, WithinRel(9.0 * p1, 1e-9));
}
