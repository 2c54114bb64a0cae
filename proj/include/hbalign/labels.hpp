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

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hbalign/channel.hpp"
#include "hbalign/codebook.hpp"
#include "hbalign/rng.hpp"
#include "hbalign/sweep.hpp"

namespace hbalign {

// ---------------------------------------------------------------------------
// Ground-truth beam labels (noise-free exhaustive search)
// ---------------------------------------------------------------------------

// Index labels are 0-based; rx_index is -1 for single-antenna users.
struct BeamLabel {
  int tx_index = -1;
  int rx_index = -1;
};

inline bool operator==(const BeamLabel& a, const BeamLabel& b) {
  return a.tx_index == b.tx_index && a.rx_index == b.rx_index;
}

inline std::vector<double> one_hot(int index, int n) {
  if (index < 0 || index >= n) throw std::invalid_argument("one_hot: bad index");
  std::vector<double> v(static_cast<std::size_t>(n), 0.0);
  v[static_cast<std::size_t>(index)] = 1.0;
  return v;
}

// Best transmit beam, by noise-free received power; ties take the lowest
// index (strict > comparison).
inline BeamLabel optimal_beam(const ChannelSample& s, const Codebook& tx_book) {
  BeamLabel out;
  double best = -1.0;
  for (int i = 0; i < tx_book.size(); ++i) {
    const double p = std::norm(rx_amplitude_miso(
        s.h, tx_book.beams[static_cast<std::size_t>(i)], 1.0));
    if (p > best) {
      best = p;
      out.tx_index = i;
    }
  }
  return out;
}

// Best transmit/receive beam pair.  Staged as (H^H v) reuse across receive
// beams; equivalent to the full double loop over pairs.
inline BeamLabel optimal_beam(const ChannelSample& s, const Codebook& tx_book,
                              const Codebook& rx_book) {
  BeamLabel out;
  double best = -1.0;
  const int mr = s.h.cols;
  std::vector<cplx> col(static_cast<std::size_t>(mr));
  for (int i = 0; i < tx_book.size(); ++i) {
    const Beam& v = tx_book.beams[static_cast<std::size_t>(i)];
    for (int q = 0; q < mr; ++q) {
      cplx acc{0.0, 0.0};
      for (int p = 0; p < s.h.rows; ++p)
        acc += std::conj(s.h(p, q)) * v.w[static_cast<std::size_t>(p)];
      col[static_cast<std::size_t>(q)] = acc;
    }
    for (int j = 0; j < rx_book.size(); ++j) {
      const Beam& w = rx_book.beams[static_cast<std::size_t>(j)];
      cplx y{0.0, 0.0};
      for (int q = 0; q < mr; ++q)
        y += std::conj(w.w[static_cast<std::size_t>(q)]) *
             col[static_cast<std::size_t>(q)];
      const double p = std::norm(y);
      if (p > best) {
        best = p;
        out.tx_index = i;
        out.rx_index = j;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dominant-direction features
// ---------------------------------------------------------------------------

// Steering sine of the strongest beam in an oversampled DFT codebook; the
// clustering feature for single-antenna users.
inline double beam_direction(const ChannelSample& s,
                             const Codebook& oversampled_tx) {
  const BeamLabel l = optimal_beam(s, oversampled_tx);
  return dft_sine(oversampled_tx.size(), l.tx_index);
}

// Departure/arrival sine pair of the strongest beam pair (multi-antenna
// users).
inline std::array<double, 2> beam_direction(const ChannelSample& s,
                                            const Codebook& oversampled_tx,
                                            const Codebook& oversampled_rx) {
  const BeamLabel l = optimal_beam(s, oversampled_tx, oversampled_rx);
  return {dft_sine(oversampled_tx.size(), l.tx_index),
          dft_sine(oversampled_rx.size(), l.rx_index)};
}

// ---------------------------------------------------------------------------
// K-means in sine space
// ---------------------------------------------------------------------------

// Cluster points are sine features: 1-D (x only, y = 0) or 2-D (x, y).
using SinePoint = std::array<double, 2>;

struct ClusterModel {
  int dim = 1;  // 1 or 2
  std::vector<SinePoint> centers;
  double inertia = 0.0;

  int groups() const { return static_cast<int>(centers.size()); }
};

namespace detail {

inline double point_dist2(const SinePoint& a, const SinePoint& b, int dim) {
  const double dx = a[0] - b[0];
  const double dy = dim == 2 ? a[1] - b[1] : 0.0;
  return dx * dx + dy * dy;
}

}  // namespace detail

// Nearest center; equidistant points go to the lower group index.
inline int assign_cluster(const ClusterModel& model, const SinePoint& p) {
  if (model.centers.empty())
    throw std::invalid_argument("assign_cluster: empty model");
  int best = 0;
  double best_d = detail::point_dist2(p, model.centers[0], model.dim);
  for (int k = 1; k < model.groups(); ++k) {
    const double d =
        detail::point_dist2(p, model.centers[static_cast<std::size_t>(k)],
                            model.dim);
    if (d < best_d) {  // strict <: ties keep the lower index
      best_d = d;
      best = k;
    }
  }
  return best;
}

namespace detail {

// One Lloyd run from greedy D^2 ("k-means++") seeds drawn via rng: each
// seeding step samples a few candidates proportionally to squared distance
// and keeps the one with the lowest resulting potential.  Farthest-point
// seeding is deliberately avoided, and plain D^2 sampling tempered, because
// both latch onto outliers -- which sine features have whenever a scattered
// path wins the direction estimate.
inline ClusterModel kmeans_once(const std::vector<SinePoint>& points, int dim,
                                int g, Rng& rng, int max_iters) {
  const int n = static_cast<int>(points.size());
  int trials = 2;  // candidate draws per seed step: 2 + floor(log2(g))
  for (int v = g; v > 1; v >>= 1) ++trials;

  ClusterModel model;
  model.dim = dim;
  model.centers.push_back(points[static_cast<std::size_t>(rng.uniform_int(n))]);
  std::vector<double> d2(static_cast<std::size_t>(n));
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    d2[static_cast<std::size_t>(i)] =
        point_dist2(points[static_cast<std::size_t>(i)], model.centers[0], dim);
    total += d2[static_cast<std::size_t>(i)];
  }
  while (static_cast<int>(model.centers.size()) < g) {
    int best_pick = 0;
    double best_potential = std::numeric_limits<double>::infinity();
    for (int t = 0; t < trials; ++t) {
      // Sample proportionally to squared distance; the cursor walk is
      // deterministic for a given draw.  total > 0 is guaranteed while
      // centers are fewer than the distinct points.
      double cursor = rng.uniform(0.0, total);
      int pick = n - 1;
      for (int i = 0; i < n; ++i) {
        cursor -= d2[static_cast<std::size_t>(i)];
        if (cursor <= 0.0) {
          pick = i;
          break;
        }
      }
      double potential = 0.0;
      for (int i = 0; i < n; ++i)
        potential += std::min(
            d2[static_cast<std::size_t>(i)],
            point_dist2(points[static_cast<std::size_t>(i)],
                        points[static_cast<std::size_t>(pick)], dim));
      if (potential < best_potential) {
        best_potential = potential;
        best_pick = pick;
      }
    }
    model.centers.push_back(points[static_cast<std::size_t>(best_pick)]);
    total = 0.0;
    for (int i = 0; i < n; ++i) {
      d2[static_cast<std::size_t>(i)] = std::min(
          d2[static_cast<std::size_t>(i)],
          point_dist2(points[static_cast<std::size_t>(i)],
                      points[static_cast<std::size_t>(best_pick)], dim));
      total += d2[static_cast<std::size_t>(i)];
    }
  }

  std::vector<int> assign(static_cast<std::size_t>(n), -1);
  for (int iter = 0; iter < max_iters; ++iter) {
    bool changed = false;
    for (int i = 0; i < n; ++i) {
      const int k = assign_cluster(model, points[static_cast<std::size_t>(i)]);
      if (k != assign[static_cast<std::size_t>(i)]) {
        assign[static_cast<std::size_t>(i)] = k;
        changed = true;
      }
    }
    if (!changed) break;

    std::vector<SinePoint> sums(static_cast<std::size_t>(g), SinePoint{0, 0});
    std::vector<int> counts(static_cast<std::size_t>(g), 0);
    for (int i = 0; i < n; ++i) {
      const auto& p = points[static_cast<std::size_t>(i)];
      const int k = assign[static_cast<std::size_t>(i)];
      sums[static_cast<std::size_t>(k)][0] += p[0];
      sums[static_cast<std::size_t>(k)][1] += p[1];
      ++counts[static_cast<std::size_t>(k)];
    }
    for (int k = 0; k < g; ++k) {
      if (counts[static_cast<std::size_t>(k)] == 0) {
        // Empty cluster: reseed at the point farthest from its own center.
        int far_idx = 0;
        double far_d = -1.0;
        for (int i = 0; i < n; ++i) {
          const double d = point_dist2(
              points[static_cast<std::size_t>(i)],
              model.centers[static_cast<std::size_t>(
                  assign[static_cast<std::size_t>(i)])],
              dim);
          if (d > far_d) {
            far_d = d;
            far_idx = i;
          }
        }
        model.centers[static_cast<std::size_t>(k)] =
            points[static_cast<std::size_t>(far_idx)];
        continue;
      }
      model.centers[static_cast<std::size_t>(k)] = {
          sums[static_cast<std::size_t>(k)][0] /
              counts[static_cast<std::size_t>(k)],
          dim == 2 ? sums[static_cast<std::size_t>(k)][1] /
                         counts[static_cast<std::size_t>(k)]
                   : 0.0};
    }
  }

  std::sort(model.centers.begin(), model.centers.end());
  model.inertia = 0.0;
  for (const auto& p : points)
    model.inertia += point_dist2(
        p, model.centers[static_cast<std::size_t>(assign_cluster(model, p))],
        dim);
  return model;
}

}  // namespace detail

// Lloyd's algorithm with D^2 seeding, best inertia over a few restarts.
// Centers are sorted ascending on return so group numbering is deterministic;
// the rng draws are restart-ordered, so results are reproducible for a given
// seed and independent of the iteration cap.
inline ClusterModel kmeans(const std::vector<SinePoint>& points, int dim, int g,
                           Rng& rng, int max_iters = 100, int restarts = 8) {
  if (g < 1) throw std::invalid_argument("kmeans: g < 1");
  if (dim != 1 && dim != 2) throw std::invalid_argument("kmeans: dim not 1/2");
  if (restarts < 1) throw std::invalid_argument("kmeans: restarts < 1");
  std::set<SinePoint> distinct;
  for (const auto& p : points)
    distinct.insert(dim == 2 ? p : SinePoint{p[0], 0.0});
  if (static_cast<int>(distinct.size()) < g)
    throw std::invalid_argument("kmeans: fewer distinct points than groups");

  ClusterModel best;
  for (int r = 0; r < restarts; ++r) {
    ClusterModel m = detail::kmeans_once(points, dim, g, rng, max_iters);
    if (r == 0 || m.inertia < best.inertia) best = std::move(m);
  }
  return best;
}

// Elbow rule for the group count: runs kmeans per candidate and returns the
// interior candidate with the largest second difference of inertia (the
// knee).  Ties break toward the smaller candidate; on a knee-free (e.g.
// uniform) inertia curve this lands on the smallest interior candidate.
inline int elbow_select_g(const std::vector<SinePoint>& points, int dim,
                          const std::vector<int>& candidates, Rng& rng,
                          int max_iters = 100) {
  if (candidates.size() < 3)
    throw std::invalid_argument("elbow: need at least 3 candidates");
  for (std::size_t i = 1; i < candidates.size(); ++i)
    if (candidates[i] <= candidates[i - 1])
      throw std::invalid_argument("elbow: candidates not ascending");

  std::vector<double> inertia;
  inertia.reserve(candidates.size());
  for (int g : candidates) {
    Rng sub(derive_seed(rng.next_u64(), stream::cluster,
                        static_cast<std::uint64_t>(g)));
    inertia.push_back(kmeans(points, dim, g, sub, max_iters).inertia);
  }
  int best = candidates[1];
  double best_d2 = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i + 1 < candidates.size(); ++i) {
    const double d2 = inertia[i - 1] - 2.0 * inertia[i] + inertia[i + 1];
    if (d2 > best_d2) {  // strict >: ties keep the smaller candidate
      best_d2 = d2;
      best = candidates[i];
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Per-sample label records and the sidecar text format
// ---------------------------------------------------------------------------

struct SampleLabels {
  std::uint64_t sample_id = 0;
  int group = -1;
  BeamLabel beam;
};

inline void write_labels(const std::vector<SampleLabels>& labels,
                         std::ostream& os) {
  os << "# hbalign-labels v1\n";
  os << "# sample_id\tgroup\ttx_index\trx_index\n";
  for (const auto& l : labels)
    os << l.sample_id << '\t' << l.group << '\t' << l.beam.tx_index << '\t'
       << l.beam.rx_index << '\n';
}

inline std::vector<SampleLabels> read_labels(std::istream& is) {
  std::vector<SampleLabels> out;
  std::string line;
  while (std::getline(is, line)) {
    line = kv_trim(line);
    if (line.empty() || line[0] == '#') continue;
    std::istringstream row(line);
    SampleLabels l;
    long long id;
    if (!(row >> id >> l.group >> l.beam.tx_index >> l.beam.rx_index))
      throw std::invalid_argument("labels file: malformed row '" + line + "'");
    l.sample_id = static_cast<std::uint64_t>(id);
    out.push_back(l);
  }
  return out;
}

inline void write_labels(const std::vector<SampleLabels>& labels,
                         const std::string& path) {
  std::ofstream f(path);
  if (!f) throw io_error(io_error::Code::open_failed, "cannot open " + path);
  write_labels(labels, f);
}

inline std::vector<SampleLabels> read_labels(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw io_error(io_error::Code::open_failed, "cannot open " + path);
  return read_labels(f);
}

// ---------------------------------------------------------------------------
// Dataset-level labeling pipeline
// ---------------------------------------------------------------------------

struct DatasetLabels {
  std::vector<SampleLabels> per_sample;  // aligned with dataset samples
  ClusterModel clusters;
  std::vector<SinePoint> features;  // sine features, aligned with samples
};

// Computes beam labels, direction features and a k-means grouping for every
// sample.  groups == 0 selects the group count by the elbow rule over
// elbow_candidates.  The oversampled grids default to 4x the codebook sizes.
inline DatasetLabels label_dataset(const ChannelDataset& ds, int groups,
                                   std::uint64_t seed,
                                   const std::vector<int>& elbow_candidates =
                                       {2, 3, 4, 5, 6, 7, 8},
                                   int oversample = 4) {
  const auto& cfg = ds.cfg;
  DatasetLabels out;
  const Codebook tx_book =
      dft_codebook(cfg.tx_antennas, cfg.tx_codebook_size, cfg.spacing);
  const Codebook tx_over = dft_codebook(
      cfg.tx_antennas, oversample * cfg.tx_codebook_size, cfg.spacing);
  Codebook rx_book, rx_over;
  if (cfg.mimo()) {
    rx_book = dft_codebook(cfg.rx_antennas, cfg.rx_codebook_size, cfg.spacing);
    rx_over = dft_codebook(cfg.rx_antennas, oversample * cfg.rx_codebook_size,
                           cfg.spacing);
  }

  out.per_sample.reserve(ds.samples.size());
  out.features.reserve(ds.samples.size());
  for (const auto& s : ds.samples) {
    SampleLabels l;
    l.sample_id = s.sample_id;
    if (cfg.mimo()) {
      l.beam = optimal_beam(s, tx_book, rx_book);
      out.features.push_back(beam_direction(s, tx_over, rx_over));
    } else {
      l.beam = optimal_beam(s, tx_book);
      out.features.push_back(SinePoint{beam_direction(s, tx_over), 0.0});
    }
    out.per_sample.push_back(l);
  }

  const int dim = cfg.mimo() ? 2 : 1;
  int g = groups;
  if (g == 0) {
    Rng elbow_rng(derive_seed(seed, stream::cluster, 1));
    g = elbow_select_g(out.features, dim, elbow_candidates, elbow_rng);
  }
  Rng km_rng(derive_seed(seed, stream::cluster, 2));
  out.clusters = kmeans(out.features, dim, g, km_rng);
  for (std::size_t i = 0; i < out.per_sample.size(); ++i)
    out.per_sample[i].group = assign_cluster(out.clusters, out.features[i]);
  return out;
}

}  // namespace hbalign
