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
// Hierarchical beam-alignment networks and their two-step training:
//   step 1: jointly train the coarse probing codebook and the group selector
//           against k-means group labels (cross entropy);
//   step 2: freeze step 1, route samples through the selector, and jointly
//           train each group's fine probing codebook and beam predictor.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "hbalign/channel.hpp"
#include "hbalign/checkpoint.hpp"
#include "hbalign/codebook.hpp"
#include "hbalign/labels.hpp"
#include "hbalign/mat.hpp"
#include "hbalign/neural.hpp"
#include "hbalign/rng.hpp"
#include "hbalign/sweep.hpp"

namespace hbalign {

// ---------------------------------------------------------------------------
// Training configuration and curve
// ---------------------------------------------------------------------------

struct TrainConfig {
  std::uint64_t seed = 1;
  int batch_size = 256;
  int max_epochs = 50;
  double learning_rate = 1e-3;
  double tx_loss_weight = 0.7;  // transmit-head weight of the pair loss
  int patience = 5;             // early-stop patience on validation accuracy
  bool probe_noise = true;      // train on noisy probing measurements
  bool normalize_input = false; // per-sweep mean normalization of powers

  void validate() const {
    if (batch_size < 1) throw std::invalid_argument("train: batch_size < 1");
    if (max_epochs < 1) throw std::invalid_argument("train: max_epochs < 1");
    if (learning_rate <= 0.0) throw std::invalid_argument("train: lr <= 0");
    if (tx_loss_weight < 0.0 || tx_loss_weight > 1.0)
      throw std::invalid_argument("train: tx_loss_weight outside [0,1]");
    if (patience < 1) throw std::invalid_argument("train: patience < 1");
  }
};

struct CurvePoint {
  std::string phase;  // "coarse" or "fine"
  int epoch = 0;
  double loss = 0.0;
  double val_accuracy = 0.0;
};

using TrainCurve = std::vector<CurvePoint>;

inline void write_curve(const TrainCurve& curve, std::ostream& os) {
  os << "# hbalign-curve v1\n";
  os << "# phase\tepoch\tloss\tval_accuracy\n";
  for (const auto& c : curve)
    os << c.phase << '\t' << c.epoch << '\t' << fmt_double(c.loss) << '\t'
       << fmt_double(c.val_accuracy) << '\n';
}

// ---------------------------------------------------------------------------
// Batch helpers
// ---------------------------------------------------------------------------

namespace detail {

// Flattens dataset channels into a real/imag batch.  Row b holds sample
// idx[b]'s entries in column-major receive-antenna order, matching both the
// CMat layout and the on-disk format.
inline CBatch make_channel_batch(const ChannelDataset& ds,
                                 const std::vector<int>& idx) {
  const int width = ds.cfg.tx_antennas * ds.cfg.rx_antennas;
  CBatch out(static_cast<int>(idx.size()), width);
  for (std::size_t b = 0; b < idx.size(); ++b) {
    const auto& h = ds.samples[static_cast<std::size_t>(idx[b])].h;
    for (int j = 0; j < width; ++j) {
      out.re(static_cast<int>(b), j) = h.d[static_cast<std::size_t>(j)].real();
      out.im(static_cast<int>(b), j) = h.d[static_cast<std::size_t>(j)].imag();
    }
  }
  return out;
}

inline CBatch draw_noise_batch(Rng& rng, int rows, int cols, double sigma2,
                               bool enabled) {
  CBatch out(rows, cols);
  if (!enabled || sigma2 <= 0.0) return out;
  for (int b = 0; b < rows; ++b)
    for (int j = 0; j < cols; ++j) {
      const cplx n = rng.cnormal(sigma2);
      out.re(b, j) = n.real();
      out.im(b, j) = n.imag();
    }
  return out;
}

inline Mat gather_rows(const Mat& m, const std::vector<int>& rows) {
  Mat out(static_cast<int>(rows.size()), m.cols);
  for (std::size_t b = 0; b < rows.size(); ++b)
    for (int j = 0; j < m.cols; ++j)
      out(static_cast<int>(b), j) = m(rows[b], j);
  return out;
}

inline CBatch gather_rows(const CBatch& m, const std::vector<int>& rows) {
  CBatch out;
  out.re = gather_rows(m.re, rows);
  out.im = gather_rows(m.im, rows);
  return out;
}

inline Mat hconcat(const Mat& a, const Mat& b) {
  if (a.rows != b.rows) throw std::invalid_argument("hconcat: row mismatch");
  Mat out(a.rows, a.cols + b.cols);
  for (int r = 0; r < a.rows; ++r) {
    for (int j = 0; j < a.cols; ++j) out(r, j) = a(r, j);
    for (int j = 0; j < b.cols; ++j) out(r, a.cols + j) = b(r, j);
  }
  return out;
}

// Ties take the lowest index.
inline int argmax_row(const Mat& m, int row) {
  int best = 0;
  for (int j = 1; j < m.cols; ++j)
    if (m(row, j) > m(row, best)) best = j;
  return best;
}

inline std::vector<Mat> snapshot_params(const std::vector<Param*>& params) {
  std::vector<Mat> out;
  out.reserve(params.size());
  for (const Param* p : params) out.push_back(p->value);
  return out;
}

inline void restore_params(const std::vector<Param*>& params,
                           const std::vector<Mat>& snap) {
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = snap[i];
}

inline std::vector<double> normalize_mean_vec(const std::vector<double>& z) {
  double mu = 0.0;
  for (double v : z) mu += v;
  mu = mu / static_cast<double>(z.size()) + 1e-30;
  std::vector<double> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i] / mu;
  return out;
}

inline Mat row_from_vec(const std::vector<double>& v) {
  Mat m(1, static_cast<int>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) m(0, static_cast<int>(i)) = v[i];
  return m;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Alignment / evaluation result types
// ---------------------------------------------------------------------------

struct AlignResult {
  BeamLabel beam;
  int group = -1;
  int sweep_count = 0;
  Measurement coarse_m, fine_m;
};

struct EvalResult {
  double accuracy = 0.0;
  double tx_accuracy = 0.0;  // marginal accuracies (pair models)
  double rx_accuracy = 0.0;
  double mean_se = 0.0;  // spectral efficiency of the chosen beam(s)
  int sweep_count = 0;
  int n = 0;
};

// Spectral efficiency of a chosen beam; +inf when the configured noise
// variance is exactly zero (the SNR ratio is undefined there).
inline double se_of_choice_miso(const ChannelSample& s, const Beam& v,
                                const SystemConfig& cfg) {
  if (cfg.noise_variance_watts <= 0.0)
    return std::numeric_limits<double>::infinity();
  return spectral_efficiency(snr_miso(s.h, v, cfg));
}

inline double se_of_choice_mimo(const ChannelSample& s, const Beam& v,
                                const Beam& w, const SystemConfig& cfg) {
  if (cfg.noise_variance_watts <= 0.0)
    return std::numeric_limits<double>::infinity();
  return spectral_efficiency(snr_mimo(s.h, v, w, cfg));
}

// ---------------------------------------------------------------------------
// HBAN for single-antenna users
// ---------------------------------------------------------------------------

class HbanMiso {
 public:
  HbanMiso() = default;

  // Selector: one hidden layer of width n1.  Predictors: two hidden layers of
  // widths 2(n1+n2) and 3(n1+n2), outputting a likelihood over every transmit
  // codebook beam.
  HbanMiso(const SystemConfig& cfg, int n1, int n2, int groups,
           bool normalize_input, std::uint64_t seed)
      : cfg_(cfg),
        n1_(n1),
        n2_(n2),
        groups_(groups),
        normalize_input_(normalize_input) {
    cfg_.finalize();
    if (n1 < 1) throw std::invalid_argument("hban: n1 < 1");
    if (n2 < n1) throw std::invalid_argument("hban: n2 < n1");
    if (groups < 1) throw std::invalid_argument("hban: groups < 1");
    Rng init(derive_seed(seed, stream::init));
    coarse_ = ProbingLayer("coarse", cfg_.tx_antennas, n1, init);
    selector_ = Mlp("selector", {n1, n1, groups}, init);
    const int s = n1 + n2;
    for (int k = 0; k < groups; ++k) {
      fine_.emplace_back("fine" + std::to_string(k), cfg_.tx_antennas, n2, init);
      predictors_.emplace_back("pred" + std::to_string(k),
                               std::vector<int>{s, 2 * s, 3 * s,
                                                cfg_.tx_codebook_size},
                               init);
    }
  }

  const SystemConfig& config() const { return cfg_; }
  int coarse_size() const { return n1_; }
  int fine_size() const { return n2_; }
  int groups() const { return groups_; }
  bool normalize_input() const { return normalize_input_; }
  bool coarse_trained() const { return coarse_trained_; }
  bool fine_trained() const { return fine_trained_; }
  // For persistence adapters that restore an already-trained model.
  void set_trained(bool coarse, bool fine) {
    coarse_trained_ = coarse;
    fine_trained_ = fine;
  }
  ProbingLayer& coarse_layer() { return coarse_; }
  ProbingLayer& fine_layer(int k) { return fine_[static_cast<std::size_t>(k)]; }
  Mlp& selector() { return selector_; }
  Mlp& predictor(int k) { return predictors_[static_cast<std::size_t>(k)]; }

  // Replaces the probing codebooks with fixed (non-trainable) sector beams;
  // only the selector and predictors remain trainable afterwards.
  void freeze_probing_to(const Codebook& coarse_cb,
                         const std::vector<Codebook>& fine_cbs) {
    coarse_.set_from_codebook(coarse_cb);
    coarse_.theta().trainable = false;
    if (static_cast<int>(fine_cbs.size()) != groups_)
      throw std::invalid_argument("hban: fine codebook count mismatch");
    for (int k = 0; k < groups_; ++k) {
      fine_[static_cast<std::size_t>(k)].set_from_codebook(
          fine_cbs[static_cast<std::size_t>(k)]);
      fine_[static_cast<std::size_t>(k)].theta().trainable = false;
    }
  }

  std::vector<Param*> coarse_params() {
    std::vector<Param*> out{&coarse_.theta()};
    selector_.collect_params(out);
    return out;
  }

  std::vector<Param*> fine_params(int k) {
    std::vector<Param*> out{&fine_[static_cast<std::size_t>(k)].theta()};
    predictors_[static_cast<std::size_t>(k)].collect_params(out);
    return out;
  }

  std::vector<Param*> all_params() {
    std::vector<Param*> out = coarse_params();
    for (int k = 0; k < groups_; ++k) {
      auto f = fine_params(k);
      out.insert(out.end(), f.begin(), f.end());
    }
    return out;
  }

  // Group choice from a coarse power sweep (watts); applies the model's input
  // normalization, then the selector.  Ties take the lowest group.
  int select_codebook(const std::vector<double>& zc) {
    if (static_cast<int>(zc.size()) != n1_)
      throw std::invalid_argument("select_codebook: measurement size");
    Mat x = detail::row_from_vec(normalize_input_
                                     ? detail::normalize_mean_vec(zc)
                                     : zc);
    const SoftmaxOut out = selector_.forward(x);
    return detail::argmax_row(out.probs, 0);
  }

  // Beam likelihoods from the concatenated coarse+fine powers via group k's
  // predictor; returns the argmax index.
  int predict_beam(const std::vector<double>& zc, const std::vector<double>& zf,
                   int k) {
    if (k < 0 || k >= groups_)
      throw std::invalid_argument("predict_beam: bad group");
    if (static_cast<int>(zc.size()) != n1_ ||
        static_cast<int>(zf.size()) != n2_)
      throw std::invalid_argument("predict_beam: measurement size");
    std::vector<double> a = normalize_input_ ? detail::normalize_mean_vec(zc) : zc;
    std::vector<double> b = normalize_input_ ? detail::normalize_mean_vec(zf) : zf;
    a.insert(a.end(), b.begin(), b.end());
    Mat x = detail::row_from_vec(a);
    const SoftmaxOut out =
        predictors_[static_cast<std::size_t>(k)].forward(x);
    return detail::argmax_row(out.probs, 0);
  }

  // Runs the deployment procedure on one sample: sweep the coarse codebook,
  // select a group, sweep its fine codebook, predict the beam.  forced_group
  // >= 0 bypasses the selector (perfect-codebook-selection evaluation).
  AlignResult align(const ChannelSample& s, Rng& rng, int forced_group = -1) {
    if (!fine_trained_)
      throw std::logic_error("align: model not fully trained");
    AlignResult res;
    const Codebook coarse_cb = coarse_.beams();
    res.coarse_m = power_feedback(rx_signal_miso(s.h, coarse_cb, cfg_, rng),
                                  SweepTier::coarse);
    res.group = forced_group >= 0 ? forced_group : select_codebook(res.coarse_m.z);
    const Codebook fine_cb =
        fine_[static_cast<std::size_t>(res.group)].beams();
    res.fine_m = power_feedback(rx_signal_miso(s.h, fine_cb, cfg_, rng),
                                SweepTier::fine);
    res.beam.tx_index = predict_beam(res.coarse_m.z, res.fine_m.z, res.group);
    res.sweep_count = n1_ + n2_;
    return res;
  }

  TensorBundle to_bundle() const {
    TensorBundle b;
    b.meta["kind"] = "hban-miso";
    for (const auto& [k, v] : cfg_.to_kv()) b.meta["cfg." + k] = v;
    b.meta["n1"] = std::to_string(n1_);
    b.meta["n2"] = std::to_string(n2_);
    b.meta["groups"] = std::to_string(groups_);
    b.meta["normalize_input"] = normalize_input_ ? "1" : "0";
    b.meta["coarse_trained"] = coarse_trained_ ? "1" : "0";
    b.meta["fine_trained"] = fine_trained_ ? "1" : "0";
    b.meta["probing_frozen"] = coarse_.theta().trainable ? "0" : "1";
    auto* self = const_cast<HbanMiso*>(this);
    for (Param* p : self->all_params()) b.tensors.emplace_back(p->name, p->value);
    return b;
  }

  static HbanMiso from_bundle(const TensorBundle& b) {
    KvMap cfg_kv;
    for (const auto& [k, v] : b.meta)
      if (k.rfind("cfg.", 0) == 0) cfg_kv[k.substr(4)] = v;
    HbanMiso m(SystemConfig::from_kv(cfg_kv),
               static_cast<int>(kv_get_int(b.meta, "n1")),
               static_cast<int>(kv_get_int(b.meta, "n2")),
               static_cast<int>(kv_get_int(b.meta, "groups")),
               kv_get_int(b.meta, "normalize_input") != 0, /*seed=*/0);
    const bool frozen = kv_get_int(b.meta, "probing_frozen", 0) != 0;
    for (Param* p : m.all_params()) {
      p->value = b.get(p->name);
      if (frozen && (p->name.rfind("coarse", 0) == 0 ||
                     p->name.rfind("fine", 0) == 0))
        p->trainable = false;
    }
    m.coarse_trained_ = kv_get_int(b.meta, "coarse_trained") != 0;
    m.fine_trained_ = kv_get_int(b.meta, "fine_trained") != 0;
    return m;
  }

  friend TrainCurve train_coarse(HbanMiso&, const ChannelDataset&,
                                 const std::vector<int>&, const TrainConfig&);
  friend TrainCurve train_fine(HbanMiso&, const ChannelDataset&,
                               const std::vector<int>&, const TrainConfig&);

 private:
  SystemConfig cfg_;
  int n1_ = 0, n2_ = 0, groups_ = 0;
  bool normalize_input_ = false;
  bool coarse_trained_ = false, fine_trained_ = false;
  ProbingLayer coarse_;
  Mlp selector_;
  std::vector<ProbingLayer> fine_;
  std::vector<Mlp> predictors_;
};

// Step 1: jointly trains the coarse probing codebook and the selector with
// cross entropy against k-means group labels.  Early-stops on validation
// selector accuracy and restores the best epoch's parameters.
inline TrainCurve train_coarse(HbanMiso& model, const ChannelDataset& ds,
                               const std::vector<int>& group_labels,
                               const TrainConfig& tc) {
  tc.validate();
  if (group_labels.size() != ds.samples.size())
    throw std::invalid_argument("train_coarse: label count mismatch");
  for (int g : group_labels)
    if (g < 0 || g >= model.groups_)
      throw std::invalid_argument("train_coarse: group label out of range");

  const double rho = model.cfg_.tx_power_watts;
  const double sigma2 = model.cfg_.noise_variance_watts;
  std::vector<int> train_idx = ds.indices_of(Split::train);
  const std::vector<int> val_idx = ds.indices_of(Split::val);
  if (train_idx.empty()) throw std::invalid_argument("train_coarse: empty split");

  auto params = model.coarse_params();
  Adam opt(tc.learning_rate);
  PowerLayer power;
  NormalizeLayer norm;

  auto val_accuracy = [&](int epoch) {
    if (val_idx.empty()) return 0.0;
    Rng vrng(derive_seed(tc.seed, stream::valnoise,
                         static_cast<std::uint64_t>(epoch)));
    const CBatch h = detail::make_channel_batch(ds, val_idx);
    PowerLayer vp;
    NormalizeLayer vn;
    const CBatch noise = detail::draw_noise_batch(
        vrng, h.rows(), model.n1_, sigma2, tc.probe_noise);
    CBatch y = model.coarse_.forward(h, noise, rho);
    Mat z = vp.forward(y);
    if (tc.normalize_input) z = vn.forward(z);
    const SoftmaxOut out = model.selector_.forward(z);
    int correct = 0;
    for (std::size_t b = 0; b < val_idx.size(); ++b)
      if (detail::argmax_row(out.probs, static_cast<int>(b)) ==
          group_labels[static_cast<std::size_t>(val_idx[b])])
        ++correct;
    return static_cast<double>(correct) / static_cast<double>(val_idx.size());
  };

  TrainCurve curve;
  double best_acc = -1.0;
  int since_best = 0;
  std::vector<Mat> best_snap = detail::snapshot_params(params);
  for (int epoch = 0; epoch < tc.max_epochs; ++epoch) {
    Rng srng(derive_seed(tc.seed, stream::shuffle,
                         static_cast<std::uint64_t>(epoch)));
    Rng nrng(derive_seed(tc.seed, stream::noise,
                         static_cast<std::uint64_t>(epoch)));
    srng.shuffle(train_idx);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < train_idx.size();
         start += static_cast<std::size_t>(tc.batch_size)) {
      const std::size_t end =
          std::min(train_idx.size(), start + static_cast<std::size_t>(tc.batch_size));
      const std::vector<int> batch(train_idx.begin() + static_cast<long>(start),
                                   train_idx.begin() + static_cast<long>(end));
      const CBatch h = detail::make_channel_batch(ds, batch);
      std::vector<int> labels(batch.size());
      for (std::size_t b = 0; b < batch.size(); ++b)
        labels[b] = group_labels[static_cast<std::size_t>(batch[b])];

      zero_grads(params);
      const CBatch noise = detail::draw_noise_batch(
          nrng, h.rows(), model.n1_, sigma2, tc.probe_noise);
      CBatch y = model.coarse_.forward(h, noise, rho);
      Mat z = power.forward(y);
      Mat x = tc.normalize_input ? norm.forward(z) : z;
      const SoftmaxOut out = model.selector_.forward(x);
      const double loss = ce_loss(out, labels, model.groups_);
      loss_sum += loss * static_cast<double>(batch.size());

      Mat glog = ce_grad(out, labels, model.groups_);
      Mat gx = model.selector_.backward(glog);
      Mat gz = tc.normalize_input ? norm.backward(gx) : gx;
      CBatch gy = power.backward(gz);
      model.coarse_.backward(gy);
      opt.step(params);
    }
    const double acc = val_accuracy(epoch);
    curve.push_back({"coarse", epoch,
                     loss_sum / static_cast<double>(train_idx.size()), acc});
    if (acc > best_acc) {
      best_acc = acc;
      best_snap = detail::snapshot_params(params);
      since_best = 0;
    } else if (++since_best >= tc.patience) {
      break;
    }
  }
  detail::restore_params(params, best_snap);
  model.coarse_trained_ = true;
  return curve;
}

// Step 2: freezes the coarse codebook and selector, routes each training
// sample through the selector, and trains the routed group's fine codebook
// and predictor with cross entropy over the transmit codebook (divisor =
// codebook size).  Each group has its own optimizer, stepped only on batches
// that route samples to it.
inline TrainCurve train_fine(HbanMiso& model, const ChannelDataset& ds,
                             const std::vector<int>& beam_labels,
                             const TrainConfig& tc) {
  tc.validate();
  if (!model.coarse_trained_)
    throw std::logic_error("train_fine: coarse step has not been trained");
  if (beam_labels.size() != ds.samples.size())
    throw std::invalid_argument("train_fine: label count mismatch");
  for (int l : beam_labels)
    if (l < 0 || l >= model.cfg_.tx_codebook_size)
      throw std::invalid_argument("train_fine: beam label out of range");

  const double rho = model.cfg_.tx_power_watts;
  const double sigma2 = model.cfg_.noise_variance_watts;
  const int nt = model.cfg_.tx_codebook_size;
  std::vector<int> train_idx = ds.indices_of(Split::train);
  const std::vector<int> val_idx = ds.indices_of(Split::val);
  if (train_idx.empty()) throw std::invalid_argument("train_fine: empty split");

  std::vector<std::vector<Param*>> group_params;
  std::vector<Adam> opts;
  std::vector<Param*> all_fine;
  for (int k = 0; k < model.groups_; ++k) {
    group_params.push_back(model.fine_params(k));
    opts.emplace_back(tc.learning_rate);
    for (Param* p : group_params.back()) all_fine.push_back(p);
  }

  // Forward through the frozen step-1 stack: coarse powers (network-input
  // scaled) and routed groups.
  auto coarse_pass = [&](const CBatch& h, Rng& nrng, Mat& x_out,
                         std::vector<int>& route_out) {
    PowerLayer power;
    NormalizeLayer norm;
    const CBatch noise = detail::draw_noise_batch(
        nrng, h.rows(), model.n1_, sigma2, tc.probe_noise);
    CBatch y = model.coarse_.forward(h, noise, rho);
    Mat z = power.forward(y);
    x_out = tc.normalize_input ? norm.forward(z) : z;
    const SoftmaxOut sel = model.selector_.forward(x_out);
    route_out.resize(static_cast<std::size_t>(h.rows()));
    for (int b = 0; b < h.rows(); ++b)
      route_out[static_cast<std::size_t>(b)] = detail::argmax_row(sel.probs, b);
  };

  auto val_accuracy = [&](int epoch) {
    if (val_idx.empty()) return 0.0;
    Rng vrng(derive_seed(tc.seed, stream::valnoise,
                         static_cast<std::uint64_t>(epoch), 1));
    const CBatch h = detail::make_channel_batch(ds, val_idx);
    Mat xc;
    std::vector<int> route;
    coarse_pass(h, vrng, xc, route);
    int correct = 0;
    for (int k = 0; k < model.groups_; ++k) {
      std::vector<int> rows;
      for (std::size_t b = 0; b < route.size(); ++b)
        if (route[b] == k) rows.push_back(static_cast<int>(b));
      if (rows.empty()) continue;
      PowerLayer fp;
      NormalizeLayer fn;
      const CBatch hk = detail::gather_rows(h, rows);
      const CBatch noise = detail::draw_noise_batch(
          vrng, static_cast<int>(rows.size()), model.n2_, sigma2, tc.probe_noise);
      CBatch y = model.fine_[static_cast<std::size_t>(k)].forward(hk, noise, rho);
      Mat zf = fp.forward(y);
      if (tc.normalize_input) zf = fn.forward(zf);
      const Mat x = detail::hconcat(detail::gather_rows(xc, rows), zf);
      const SoftmaxOut out =
          model.predictors_[static_cast<std::size_t>(k)].forward(x);
      for (std::size_t r = 0; r < rows.size(); ++r)
        if (detail::argmax_row(out.probs, static_cast<int>(r)) ==
            beam_labels[static_cast<std::size_t>(val_idx[static_cast<std::size_t>(
                rows[r])])])
          ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(val_idx.size());
  };

  TrainCurve curve;
  double best_acc = -1.0;
  int since_best = 0;
  std::vector<Mat> best_snap = detail::snapshot_params(all_fine);
  for (int epoch = 0; epoch < tc.max_epochs; ++epoch) {
    Rng srng(derive_seed(tc.seed, stream::shuffle,
                         static_cast<std::uint64_t>(epoch), 1));
    Rng nrng(derive_seed(tc.seed, stream::noise,
                         static_cast<std::uint64_t>(epoch), 1));
    srng.shuffle(train_idx);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < train_idx.size();
         start += static_cast<std::size_t>(tc.batch_size)) {
      const std::size_t end =
          std::min(train_idx.size(), start + static_cast<std::size_t>(tc.batch_size));
      const std::vector<int> batch(train_idx.begin() + static_cast<long>(start),
                                   train_idx.begin() + static_cast<long>(end));
      const CBatch h = detail::make_channel_batch(ds, batch);
      Mat xc;
      std::vector<int> route;
      coarse_pass(h, nrng, xc, route);

      for (int k = 0; k < model.groups_; ++k) {
        std::vector<int> rows;
        for (std::size_t b = 0; b < batch.size(); ++b)
          if (route[b] == k) rows.push_back(static_cast<int>(b));
        if (rows.empty()) continue;
        std::vector<int> labels(rows.size());
        for (std::size_t r = 0; r < rows.size(); ++r)
          labels[r] =
              beam_labels[static_cast<std::size_t>(batch[static_cast<std::size_t>(
                  rows[r])])];

        zero_grads(group_params[static_cast<std::size_t>(k)]);
        PowerLayer fp;
        NormalizeLayer fn;
        const CBatch hk = detail::gather_rows(h, rows);
        const CBatch noise = detail::draw_noise_batch(
            nrng, static_cast<int>(rows.size()), model.n2_, sigma2,
            tc.probe_noise);
        CBatch y =
            model.fine_[static_cast<std::size_t>(k)].forward(hk, noise, rho);
        Mat zf_raw = fp.forward(y);
        Mat zf = tc.normalize_input ? fn.forward(zf_raw) : zf_raw;
        const Mat x = detail::hconcat(detail::gather_rows(xc, rows), zf);
        const SoftmaxOut out =
            model.predictors_[static_cast<std::size_t>(k)].forward(x);
        const double loss = ce_loss(out, labels, nt);
        loss_sum += loss * static_cast<double>(rows.size());

        Mat glog = ce_grad(out, labels, nt);
        Mat gx = model.predictors_[static_cast<std::size_t>(k)].backward(glog);
        // Only the fine-measurement half of the input carries gradient; the
        // coarse half feeds a frozen stack.
        Mat gzf(gx.rows, model.n2_);
        for (int r = 0; r < gx.rows; ++r)
          for (int j = 0; j < model.n2_; ++j)
            gzf(r, j) = gx(r, model.n1_ + j);
        Mat gz = tc.normalize_input ? fn.backward(gzf) : gzf;
        CBatch gy = fp.backward(gz);
        model.fine_[static_cast<std::size_t>(k)].backward(gy);
        opts[static_cast<std::size_t>(k)].step(
            group_params[static_cast<std::size_t>(k)]);
      }
    }
    const double acc = val_accuracy(epoch);
    curve.push_back({"fine", epoch,
                     loss_sum / static_cast<double>(train_idx.size()), acc});
    if (acc > best_acc) {
      best_acc = acc;
      best_snap = detail::snapshot_params(all_fine);
      since_best = 0;
    } else if (++since_best >= tc.patience) {
      break;
    }
  }
  detail::restore_params(all_fine, best_snap);
  model.fine_trained_ = true;
  return curve;
}

// Test-split evaluation with per-(sample, trial) derived noise streams.
// labels supplies the ground-truth transmit beam per dataset sample.
inline EvalResult evaluate(HbanMiso& model, const ChannelDataset& ds,
                           const std::vector<int>& beam_labels, Split split,
                           int trials, std::uint64_t eval_seed) {
  if (trials < 1) throw std::invalid_argument("evaluate: trials < 1");
  const std::vector<int> idx = ds.indices_of(split);
  const Codebook tx_book = dft_codebook(
      ds.cfg.tx_antennas, ds.cfg.tx_codebook_size, ds.cfg.spacing);
  EvalResult res;
  res.sweep_count = model.coarse_size() + model.fine_size();
  double se_sum = 0.0;
  int correct = 0, total = 0;
  for (int i : idx) {
    const auto& s = ds.samples[static_cast<std::size_t>(i)];
    for (int t = 0; t < trials; ++t) {
      Rng rng(derive_seed(eval_seed, stream::evalnoise, s.sample_id,
                          static_cast<std::uint64_t>(t)));
      const AlignResult a = model.align(s, rng);
      if (a.beam.tx_index == beam_labels[static_cast<std::size_t>(i)]) ++correct;
      se_sum += se_of_choice_miso(
          s, tx_book.beams[static_cast<std::size_t>(a.beam.tx_index)], ds.cfg);
      ++total;
    }
  }
  res.n = total;
  res.accuracy = total ? static_cast<double>(correct) / total : 0.0;
  res.tx_accuracy = res.accuracy;
  res.mean_se = total ? se_sum / total : 0.0;
  return res;
}

// Perfect-codebook-selection evaluation: the selector is bypassed and each
// sample's ground-truth group routes it to the fine stage.
inline EvalResult evaluate_pcs(HbanMiso& model, const ChannelDataset& ds,
                               const std::vector<int>& beam_labels,
                               const std::vector<int>& group_labels, Split split,
                               int trials, std::uint64_t eval_seed) {
  if (trials < 1) throw std::invalid_argument("evaluate: trials < 1");
  if (group_labels.size() != ds.samples.size())
    throw std::invalid_argument("evaluate_pcs: group label count");
  const std::vector<int> idx = ds.indices_of(split);
  const Codebook tx_book = dft_codebook(
      ds.cfg.tx_antennas, ds.cfg.tx_codebook_size, ds.cfg.spacing);
  EvalResult res;
  res.sweep_count = model.coarse_size() + model.fine_size();
  double se_sum = 0.0;
  int correct = 0, total = 0;
  for (int i : idx) {
    const auto& s = ds.samples[static_cast<std::size_t>(i)];
    for (int t = 0; t < trials; ++t) {
      Rng rng(derive_seed(eval_seed, stream::evalnoise, s.sample_id,
                          static_cast<std::uint64_t>(t)));
      const AlignResult a =
          model.align(s, rng, group_labels[static_cast<std::size_t>(i)]);
      if (a.beam.tx_index == beam_labels[static_cast<std::size_t>(i)]) ++correct;
      se_sum += se_of_choice_miso(
          s, tx_book.beams[static_cast<std::size_t>(a.beam.tx_index)], ds.cfg);
      ++total;
    }
  }
  res.n = total;
  res.accuracy = total ? static_cast<double>(correct) / total : 0.0;
  res.tx_accuracy = res.accuracy;
  res.mean_se = total ? se_sum / total : 0.0;
  return res;
}

}  // namespace hbalign
