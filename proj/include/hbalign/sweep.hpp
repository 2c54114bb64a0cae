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
#include <stdexcept>
#include <vector>

#include "hbalign/channel.hpp"
#include "hbalign/codebook.hpp"
#include "hbalign/mat.hpp"
#include "hbalign/rng.hpp"

namespace hbalign {

// A transmit/receive beam pair swept together during one pilot slot.
struct BeamPair {
  const Beam* tx = nullptr;
  const Beam* rx = nullptr;
};

enum class SweepTier { coarse, fine, other };

// One probing sweep's power feedback, plus bookkeeping for reproducibility.
struct Measurement {
  std::vector<double> z;  // received powers |y_i|^2, in watts
  SweepTier tier = SweepTier::other;
  std::uint64_t noise_seed = 0;
};

// Draws n i.i.d. complex-normal noise values with per-value variance sigma2.
// Both the sweep simulator and the trainable probing layers consume noise in
// this exact order, so their outputs can be compared draw-for-draw.
inline std::vector<cplx> draw_noise(Rng& rng, int n, double sigma2) {
  std::vector<cplx> out(static_cast<std::size_t>(n));
  for (auto& v : out) v = sigma2 > 0.0 ? rng.cnormal(sigma2) : cplx{0.0, 0.0};
  return out;
}

// Noise-free received amplitude sqrt(rho) * h^H v for a single-antenna user.
inline cplx rx_amplitude_miso(const CMat& h, const Beam& v, double tx_power) {
  if (h.cols != 1) throw std::invalid_argument("rx_miso: channel is not MISO");
  if (h.rows != v.antennas())
    throw std::invalid_argument("rx_miso: beam/channel size mismatch");
  cplx acc{0.0, 0.0};
  for (int p = 0; p < h.rows; ++p)
    acc += std::conj(h(p, 0)) * v.w[static_cast<std::size_t>(p)];
  return std::sqrt(tx_power) * acc;
}

// Noise-free combined amplitude sqrt(rho) * w^H H^H v for a beam pair.
inline cplx rx_amplitude_mimo(const CMat& h, const Beam& v, const Beam& w,
                              double tx_power) {
  if (h.rows != v.antennas() || h.cols != w.antennas())
    throw std::invalid_argument("rx_mimo: beam/channel size mismatch");
  cplx acc{0.0, 0.0};
  for (int q = 0; q < h.cols; ++q) {
    cplx col{0.0, 0.0};  // (H^H v)_q = sum_p conj(H(p,q)) v_p
    for (int p = 0; p < h.rows; ++p)
      col += std::conj(h(p, q)) * v.w[static_cast<std::size_t>(p)];
    acc += std::conj(w.w[static_cast<std::size_t>(q)]) * col;
  }
  return std::sqrt(tx_power) * acc;
}

// Sweeps every beam of a codebook over a MISO channel with a unit pilot;
// beam i sees y_i = sqrt(rho) h^H v_i + n_i with fresh noise per slot.
inline std::vector<cplx> rx_signal_miso(const CMat& h, const Codebook& cb,
                                        const SystemConfig& cfg, Rng& rng) {
  std::vector<cplx> y;
  y.reserve(static_cast<std::size_t>(cb.size()));
  for (const auto& v : cb.beams) {
    cplx n = cfg.noise_variance_watts > 0.0
                 ? rng.cnormal(cfg.noise_variance_watts)
                 : cplx{0.0, 0.0};
    y.push_back(rx_amplitude_miso(h, v, cfg.tx_power_watts) + n);
  }
  return y;
}

// Sweeps beam pairs over a MIMO channel.  Per pair the receiver draws a full
// antenna-noise vector and combines it: y = sqrt(rho) w^H H^H v + w^H n.
inline std::vector<cplx> rx_signal_mimo(const CMat& h,
                                        const std::vector<BeamPair>& pairs,
                                        const SystemConfig& cfg, Rng& rng) {
  std::vector<cplx> y;
  y.reserve(pairs.size());
  for (const auto& pr : pairs) {
    if (pr.tx == nullptr || pr.rx == nullptr)
      throw std::invalid_argument("rx_mimo: null beam in pair");
    const auto noise = draw_noise(rng, h.cols, cfg.noise_variance_watts);
    cplx combined{0.0, 0.0};
    for (int q = 0; q < h.cols; ++q)
      combined += std::conj(pr.rx->w[static_cast<std::size_t>(q)]) *
                  noise[static_cast<std::size_t>(q)];
    y.push_back(rx_amplitude_mimo(h, *pr.tx, *pr.rx, cfg.tx_power_watts) +
                combined);
  }
  return y;
}

// Power feedback reported by the user: z_i = |y_i|^2, kept in watts.
inline Measurement power_feedback(const std::vector<cplx>& y,
                                  SweepTier tier = SweepTier::other,
                                  std::uint64_t noise_seed = 0) {
  Measurement m;
  m.tier = tier;
  m.noise_seed = noise_seed;
  m.z.reserve(y.size());
  for (const auto& v : y) m.z.push_back(std::norm(v));
  return m;
}

// Post-combining SNR of a chosen beam (noise-free signal power over noise
// power).  Zero noise variance is rejected: the ratio is undefined.
inline double snr_miso(const CMat& h, const Beam& v, const SystemConfig& cfg) {
  if (cfg.noise_variance_watts <= 0.0)
    throw std::invalid_argument("snr: zero noise variance");
  return std::norm(rx_amplitude_miso(h, v, cfg.tx_power_watts)) /
         cfg.noise_variance_watts;
}

inline double snr_mimo(const CMat& h, const Beam& v, const Beam& w,
                       const SystemConfig& cfg) {
  if (cfg.noise_variance_watts <= 0.0)
    throw std::invalid_argument("snr: zero noise variance");
  return std::norm(rx_amplitude_mimo(h, v, w, cfg.tx_power_watts)) /
         cfg.noise_variance_watts;
}

inline double spectral_efficiency(double snr) {
  if (snr < 0.0) throw std::invalid_argument("spectral_efficiency: snr < 0");
  return std::log2(1.0 + snr);
}

}  // namespace hbalign
