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
// Learned comparison methods built from the same blocks as the hierarchical
// models:
//   - one-tier probing: a single flat probing codebook plus one predictor;
//   - fixed-probing hierarchy: HBAN whose probing codebooks are frozen
//     wide-beam sector codebooks instead of trained phases;
//   - separate two-sided alignment: independent transmit-side and
//     receive-side single-antenna hierarchies run sequentially.

#pragma once

#include <algorithm>
#include <stdexcept>
#include <string>
#include <vector>

#include "hbalign/hban.hpp"
#include "hbalign/hban_mimo.hpp"

namespace hbalign {

// ---------------------------------------------------------------------------
// One-tier probing codebook + predictor (flat learned search)
// ---------------------------------------------------------------------------

class OneTierPcMiso {
 public:
  OneTierPcMiso() = default;

  OneTierPcMiso(const SystemConfig& cfg, int n_probe, bool normalize_input,
                std::uint64_t seed)
      : cfg_(cfg), n_probe_(n_probe), normalize_input_(normalize_input) {
    cfg_.finalize();
    if (n_probe < 1) throw std::invalid_argument("one-tier: n_probe < 1");
    Rng init(derive_seed(seed, stream::init));
    probe_ = ProbingLayer("probe", cfg_.tx_antennas, n_probe, init);
    predictor_ = Mlp("pred",
                     std::vector<int>{n_probe, 2 * n_probe, 3 * n_probe,
                                      cfg_.tx_codebook_size},
                     init);
  }

  const SystemConfig& config() const { return cfg_; }
  int probe_count() const { return n_probe_; }
  bool normalize_input() const { return normalize_input_; }
  bool trained() const { return trained_; }
  ProbingLayer& probe_layer() { return probe_; }

  std::vector<Param*> params() {
    std::vector<Param*> out{&probe_.theta()};
    predictor_.collect_params(out);
    return out;
  }

  int predict_beam(const std::vector<double>& z) {
    if (static_cast<int>(z.size()) != n_probe_)
      throw std::invalid_argument("predict_beam: measurement size");
    Mat x = detail::row_from_vec(normalize_input_
                                     ? detail::normalize_mean_vec(z)
                                     : z);
    return detail::argmax_row(predictor_.forward(x).probs, 0);
  }

  AlignResult align(const ChannelSample& s, Rng& rng) {
    if (!trained_) throw std::logic_error("align: model not trained");
    AlignResult res;
    res.coarse_m = power_feedback(rx_signal_miso(s.h, probe_.beams(), cfg_, rng),
                                  SweepTier::other);
    res.beam.tx_index = predict_beam(res.coarse_m.z);
    res.group = 0;
    res.sweep_count = n_probe_;
    return res;
  }

  TensorBundle to_bundle() const {
    TensorBundle b;
    b.meta["kind"] = "onetier-miso";
    for (const auto& [k, v] : cfg_.to_kv()) b.meta["cfg." + k] = v;
    b.meta["n_probe"] = std::to_string(n_probe_);
    b.meta["normalize_input"] = normalize_input_ ? "1" : "0";
    b.meta["trained"] = trained_ ? "1" : "0";
    auto* self = const_cast<OneTierPcMiso*>(this);
    for (Param* p : self->params()) b.tensors.emplace_back(p->name, p->value);
    return b;
  }

  static OneTierPcMiso from_bundle(const TensorBundle& b) {
    KvMap cfg_kv;
    for (const auto& [k, v] : b.meta)
      if (k.rfind("cfg.", 0) == 0) cfg_kv[k.substr(4)] = v;
    OneTierPcMiso m(SystemConfig::from_kv(cfg_kv),
                    static_cast<int>(kv_get_int(b.meta, "n_probe")),
                    kv_get_int(b.meta, "normalize_input") != 0, /*seed=*/0);
    for (Param* p : m.params()) p->value = b.get(p->name);
    m.trained_ = kv_get_int(b.meta, "trained") != 0;
    return m;
  }

  friend TrainCurve train_one_tier(OneTierPcMiso&, const ChannelDataset&,
                                   const std::vector<int>&, const TrainConfig&);

 private:
  SystemConfig cfg_;
  int n_probe_ = 0;
  bool normalize_input_ = false;
  bool trained_ = false;
  ProbingLayer probe_;
  Mlp predictor_;
};

inline TrainCurve train_one_tier(OneTierPcMiso& model, const ChannelDataset& ds,
                                 const std::vector<int>& beam_labels,
                                 const TrainConfig& tc) {
  tc.validate();
  if (beam_labels.size() != ds.samples.size())
    throw std::invalid_argument("train_one_tier: label count mismatch");
  for (int l : beam_labels)
    if (l < 0 || l >= model.cfg_.tx_codebook_size)
      throw std::invalid_argument("train_one_tier: beam label out of range");

  const double rho = model.cfg_.tx_power_watts;
  const double sigma2 = model.cfg_.noise_variance_watts;
  const int nt = model.cfg_.tx_codebook_size;
  std::vector<int> train_idx = ds.indices_of(Split::train);
  const std::vector<int> val_idx = ds.indices_of(Split::val);
  if (train_idx.empty())
    throw std::invalid_argument("train_one_tier: empty split");

  auto params = model.params();
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
        vrng, h.rows(), model.n_probe_, sigma2, tc.probe_noise);
    CBatch y = model.probe_.forward(h, noise, rho);
    Mat z = vp.forward(y);
    if (tc.normalize_input) z = vn.forward(z);
    const SoftmaxOut out = model.predictor_.forward(z);
    int correct = 0;
    for (std::size_t b = 0; b < val_idx.size(); ++b)
      if (detail::argmax_row(out.probs, static_cast<int>(b)) ==
          beam_labels[static_cast<std::size_t>(val_idx[b])])
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
        labels[b] = beam_labels[static_cast<std::size_t>(batch[b])];

      zero_grads(params);
      const CBatch noise = detail::draw_noise_batch(
          nrng, h.rows(), model.n_probe_, sigma2, tc.probe_noise);
      CBatch y = model.probe_.forward(h, noise, rho);
      Mat z = power.forward(y);
      Mat x = tc.normalize_input ? norm.forward(z) : z;
      const SoftmaxOut out = model.predictor_.forward(x);
      const double loss = ce_loss(out, labels, nt);
      loss_sum += loss * static_cast<double>(batch.size());

      Mat glog = ce_grad(out, labels, nt);
      Mat gx = model.predictor_.backward(glog);
      Mat gz = tc.normalize_input ? norm.backward(gx) : gx;
      CBatch gy = power.backward(gz);
      model.probe_.backward(gy);
      opt.step(params);
    }
    const double acc = val_accuracy(epoch);
    curve.push_back({"onetier", epoch,
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
  model.trained_ = true;
  return curve;
}

inline EvalResult evaluate(OneTierPcMiso& model, const ChannelDataset& ds,
                           const std::vector<int>& beam_labels, Split split,
                           int trials, std::uint64_t eval_seed) {
  if (trials < 1) throw std::invalid_argument("evaluate: trials < 1");
  const std::vector<int> idx = ds.indices_of(split);
  const Codebook tx_book = dft_codebook(
      ds.cfg.tx_antennas, ds.cfg.tx_codebook_size, ds.cfg.spacing);
  EvalResult res;
  res.sweep_count = model.probe_count();
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

class OneTierPcMimo {
 public:
  OneTierPcMimo() = default;

  OneTierPcMimo(const SystemConfig& cfg, int n_probe, bool normalize_input,
                std::uint64_t seed)
      : cfg_(cfg), n_probe_(n_probe), normalize_input_(normalize_input) {
    cfg_.finalize();
    cfg_.validate();
    if (n_probe < 1) throw std::invalid_argument("one-tier: n_probe < 1");
    Rng init(derive_seed(seed, stream::init));
    probe_ = PairProbingLayer("probe", cfg_.tx_antennas, cfg_.rx_antennas,
                              n_probe, init);
    pred_tx_ = Mlp("predt",
                   std::vector<int>{n_probe, 2 * n_probe, 3 * n_probe,
                                    cfg_.tx_codebook_size},
                   init);
    pred_rx_ = Mlp("predr",
                   std::vector<int>{n_probe, 2 * n_probe, 3 * n_probe,
                                    cfg_.rx_codebook_size},
                   init);
  }

  const SystemConfig& config() const { return cfg_; }
  int probe_count() const { return n_probe_; }
  bool normalize_input() const { return normalize_input_; }
  bool trained() const { return trained_; }
  PairProbingLayer& probe_layer() { return probe_; }

  std::vector<Param*> params() {
    std::vector<Param*> out{&probe_.theta(), &probe_.phi()};
    pred_tx_.collect_params(out);
    pred_rx_.collect_params(out);
    return out;
  }

  BeamLabel predict_beam_pair(const std::vector<double>& z) {
    if (static_cast<int>(z.size()) != n_probe_)
      throw std::invalid_argument("predict_beam_pair: measurement size");
    Mat x = detail::row_from_vec(normalize_input_
                                     ? detail::normalize_mean_vec(z)
                                     : z);
    BeamLabel lab;
    lab.tx_index = detail::argmax_row(pred_tx_.forward(x).probs, 0);
    lab.rx_index = detail::argmax_row(pred_rx_.forward(x).probs, 0);
    return lab;
  }

  AlignResult align(const ChannelSample& s, Rng& rng) {
    if (!trained_) throw std::logic_error("align: model not trained");
    AlignResult res;
    const Codebook ptx = probe_.tx_beams();
    const Codebook prx = probe_.rx_beams();
    std::vector<BeamPair> pairs;
    pairs.reserve(ptx.beams.size());
    for (std::size_t i = 0; i < ptx.beams.size(); ++i)
      pairs.push_back({&ptx.beams[i], &prx.beams[i]});
    res.coarse_m = power_feedback(rx_signal_mimo(s.h, pairs, cfg_, rng),
                                  SweepTier::other);
    res.beam = predict_beam_pair(res.coarse_m.z);
    res.group = 0;
    res.sweep_count = n_probe_;
    return res;
  }

  TensorBundle to_bundle() const {
    TensorBundle b;
    b.meta["kind"] = "onetier-mimo";
    for (const auto& [k, v] : cfg_.to_kv()) b.meta["cfg." + k] = v;
    b.meta["n_probe"] = std::to_string(n_probe_);
    b.meta["normalize_input"] = normalize_input_ ? "1" : "0";
    b.meta["trained"] = trained_ ? "1" : "0";
    auto* self = const_cast<OneTierPcMimo*>(this);
    for (Param* p : self->params()) b.tensors.emplace_back(p->name, p->value);
    return b;
  }

  static OneTierPcMimo from_bundle(const TensorBundle& b) {
    KvMap cfg_kv;
    for (const auto& [k, v] : b.meta)
      if (k.rfind("cfg.", 0) == 0) cfg_kv[k.substr(4)] = v;
    OneTierPcMimo m(SystemConfig::from_kv(cfg_kv),
                    static_cast<int>(kv_get_int(b.meta, "n_probe")),
                    kv_get_int(b.meta, "normalize_input") != 0, /*seed=*/0);
    for (Param* p : m.params()) p->value = b.get(p->name);
    m.trained_ = kv_get_int(b.meta, "trained") != 0;
    return m;
  }

  friend TrainCurve train_one_tier(OneTierPcMimo&, const ChannelDataset&,
                                   const std::vector<BeamLabel>&,
                                   const TrainConfig&);

 private:
  SystemConfig cfg_;
  int n_probe_ = 0;
  bool normalize_input_ = false;
  bool trained_ = false;
  PairProbingLayer probe_;
  Mlp pred_tx_, pred_rx_;
};

inline TrainCurve train_one_tier(OneTierPcMimo& model, const ChannelDataset& ds,
                                 const std::vector<BeamLabel>& beam_labels,
                                 const TrainConfig& tc) {
  tc.validate();
  if (beam_labels.size() != ds.samples.size())
    throw std::invalid_argument("train_one_tier: label count mismatch");
  for (const BeamLabel& l : beam_labels)
    if (l.tx_index < 0 || l.tx_index >= model.cfg_.tx_codebook_size ||
        l.rx_index < 0 || l.rx_index >= model.cfg_.rx_codebook_size)
      throw std::invalid_argument("train_one_tier: beam label out of range");

  const double rho = model.cfg_.tx_power_watts;
  const double sigma2 = model.cfg_.noise_variance_watts;
  const double xi = tc.tx_loss_weight;
  const int nt = model.cfg_.tx_codebook_size;
  const int nr = model.cfg_.rx_codebook_size;
  const int mr = model.cfg_.rx_antennas;
  std::vector<int> train_idx = ds.indices_of(Split::train);
  const std::vector<int> val_idx = ds.indices_of(Split::val);
  if (train_idx.empty())
    throw std::invalid_argument("train_one_tier: empty split");

  auto params = model.params();
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
        vrng, h.rows(), model.n_probe_ * mr, sigma2, tc.probe_noise);
    CBatch y = model.probe_.forward(h, noise, rho);
    Mat z = vp.forward(y);
    if (tc.normalize_input) z = vn.forward(z);
    const SoftmaxOut out_t = model.pred_tx_.forward(z);
    const SoftmaxOut out_r = model.pred_rx_.forward(z);
    int correct = 0;
    for (std::size_t b = 0; b < val_idx.size(); ++b) {
      const BeamLabel& lab = beam_labels[static_cast<std::size_t>(val_idx[b])];
      if (detail::argmax_row(out_t.probs, static_cast<int>(b)) == lab.tx_index &&
          detail::argmax_row(out_r.probs, static_cast<int>(b)) == lab.rx_index)
        ++correct;
    }
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
      std::vector<int> lab_t(batch.size()), lab_r(batch.size());
      for (std::size_t b = 0; b < batch.size(); ++b) {
        const BeamLabel& lab = beam_labels[static_cast<std::size_t>(batch[b])];
        lab_t[b] = lab.tx_index;
        lab_r[b] = lab.rx_index;
      }

      zero_grads(params);
      const CBatch noise = detail::draw_noise_batch(
          nrng, h.rows(), model.n_probe_ * mr, sigma2, tc.probe_noise);
      CBatch y = model.probe_.forward(h, noise, rho);
      Mat z = power.forward(y);
      Mat x = tc.normalize_input ? norm.forward(z) : z;
      const SoftmaxOut out_t = model.pred_tx_.forward(x);
      const SoftmaxOut out_r = model.pred_rx_.forward(x);
      const double loss =
          xi * ce_loss(out_t, lab_t, nt) + (1.0 - xi) * ce_loss(out_r, lab_r, nr);
      loss_sum += loss * static_cast<double>(batch.size());

      Mat glog_t = ce_grad(out_t, lab_t, nt);
      for (double& v : glog_t.d) v *= xi;
      Mat glog_r = ce_grad(out_r, lab_r, nr);
      for (double& v : glog_r.d) v *= 1.0 - xi;
      Mat gx = model.pred_tx_.backward(glog_t);
      const Mat gx_r = model.pred_rx_.backward(glog_r);
      for (std::size_t j = 0; j < gx.d.size(); ++j) gx.d[j] += gx_r.d[j];
      Mat gz = tc.normalize_input ? norm.backward(gx) : gx;
      CBatch gy = power.backward(gz);
      model.probe_.backward(gy);
      opt.step(params);
    }
    const double acc = val_accuracy(epoch);
    curve.push_back({"onetier", epoch,
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
  model.trained_ = true;
  return curve;
}

inline EvalResult evaluate(OneTierPcMimo& model, const ChannelDataset& ds,
                           const std::vector<BeamLabel>& beam_labels,
                           Split split, int trials, std::uint64_t eval_seed) {
  if (trials < 1) throw std::invalid_argument("evaluate: trials < 1");
  const std::vector<int> idx = ds.indices_of(split);
  const Codebook tx_book = dft_codebook(
      ds.cfg.tx_antennas, ds.cfg.tx_codebook_size, ds.cfg.spacing);
  const Codebook rx_book = dft_codebook(
      ds.cfg.rx_antennas, ds.cfg.rx_codebook_size, ds.cfg.spacing);
  EvalResult res;
  res.sweep_count = model.probe_count();
  double se_sum = 0.0;
  int correct = 0, correct_t = 0, correct_r = 0, total = 0;
  for (int i : idx) {
    const auto& s = ds.samples[static_cast<std::size_t>(i)];
    for (int t = 0; t < trials; ++t) {
      Rng rng(derive_seed(eval_seed, stream::evalnoise, s.sample_id,
                          static_cast<std::uint64_t>(t)));
      const AlignResult a = model.align(s, rng);
      const BeamLabel& lab = beam_labels[static_cast<std::size_t>(i)];
      const bool ok_t = a.beam.tx_index == lab.tx_index;
      const bool ok_r = a.beam.rx_index == lab.rx_index;
      correct_t += ok_t;
      correct_r += ok_r;
      correct += ok_t && ok_r;
      se_sum += se_of_choice_mimo(
          s, tx_book.beams[static_cast<std::size_t>(a.beam.tx_index)],
          rx_book.beams[static_cast<std::size_t>(a.beam.rx_index)], ds.cfg);
      ++total;
    }
  }
  res.n = total;
  res.accuracy = total ? static_cast<double>(correct) / total : 0.0;
  res.tx_accuracy = total ? static_cast<double>(correct_t) / total : 0.0;
  res.rx_accuracy = total ? static_cast<double>(correct_r) / total : 0.0;
  res.mean_se = total ? se_sum / total : 0.0;
  return res;
}

// ---------------------------------------------------------------------------
// Fixed-probing hierarchy (frozen wide-beam sector codebooks)
// ---------------------------------------------------------------------------

// Group of a DFT beam index under the uniform-sector map used by the fixed
// coarse codebook (same child map as the two-tier search codebook).
inline std::vector<int> sector_group_labels(const std::vector<int>& beam_labels,
                                            int n_t, int groups) {
  std::vector<int> out(beam_labels.size());
  for (std::size_t i = 0; i < beam_labels.size(); ++i) {
    if (beam_labels[i] < 0 || beam_labels[i] >= n_t)
      throw std::invalid_argument("sector_group_labels: label out of range");
    out[i] = static_cast<int>((static_cast<long>(beam_labels[i]) * groups) / n_t);
  }
  return out;
}

// HBAN whose probing codebooks are frozen wide sector beams: the coarse tier
// holds n1 beams over equal sine sectors of [-1, 1); group k's fine codebook
// subdivides sector k into n2 sub-sector beams.  Only the selector and the
// predictors train (G = n1 by construction).
inline HbanMiso make_fixed_probing_hban(const SystemConfig& cfg, int n1, int n2,
                                        bool normalize_input,
                                        std::uint64_t seed,
                                        int gs_iters = 200) {
  HbanMiso model(cfg, n1, n2, /*groups=*/n1, normalize_input, seed);
  const int mt = cfg.tx_antennas;
  Codebook coarse;
  coarse.kind = CodebookKind::wide;
  std::vector<Codebook> fines;
  for (int k = 0; k < n1; ++k) {
    const double lo = -1.0 + 2.0 * k / n1;
    const double hi = -1.0 + 2.0 * (k + 1) / n1;
    Rng rng(derive_seed(static_cast<std::uint64_t>(mt), stream::widebeam,
                        static_cast<std::uint64_t>(n1),
                        static_cast<std::uint64_t>(k)));
    coarse.beams.push_back(wide_beam_synthesize(mt, lo, hi, gs_iters, rng));
    Codebook fine;
    fine.kind = CodebookKind::wide;
    const double width = (hi - lo) / n2;
    for (int j = 0; j < n2; ++j) {
      Rng frng(derive_seed(static_cast<std::uint64_t>(mt), stream::widebeam,
                           static_cast<std::uint64_t>(2000 + 64 * n1 + n2),
                           static_cast<std::uint64_t>(k * n2 + j)));
      fine.beams.push_back(wide_beam_synthesize(mt, lo + j * width,
                                                lo + (j + 1) * width, gs_iters,
                                                frng));
    }
    fines.push_back(std::move(fine));
  }
  model.freeze_probing_to(coarse, fines);
  return model;
}

// ---------------------------------------------------------------------------
// Separate two-sided alignment (sequential single-antenna hierarchies)
// ---------------------------------------------------------------------------

struct SeparateBudget {
  int n1t = 0, n2t = 0, n1r = 0, n2r = 0;
  int total() const { return n1t + n2t + n1r + n2r; }
};

// Runs HBAN-MISO independently at each end: the transmit side aligns against
// the user's first receive antenna, then the receive side aligns against the
// effective channel produced by the chosen transmit beam.  Joint accuracy is
// scored on the pair.
class SeparateHban {
 public:
  SeparateHban() = default;

  SeparateHban(const SystemConfig& cfg, const SeparateBudget& budget,
               bool normalize_input, std::uint64_t seed)
      : cfg_(cfg), budget_(budget), normalize_input_(normalize_input),
        seed_(seed) {
    cfg_.finalize();
    cfg_.validate();
    if (!cfg_.mimo())
      throw std::invalid_argument("separate: single-antenna user");
    if (budget.n1t < 1 || budget.n2t < budget.n1t || budget.n1r < 1 ||
        budget.n2r < budget.n1r)
      throw std::invalid_argument("separate: bad budget split");
    cfg_tx_ = cfg_;
    cfg_tx_.rx_antennas = 1;
    cfg_tx_.rx_codebook_size = 1;
    cfg_tx_.finalize();
    cfg_rx_ = cfg_;
    cfg_rx_.tx_antennas = cfg_.rx_antennas;
    cfg_rx_.tx_codebook_size = cfg_.rx_codebook_size;
    cfg_rx_.rx_antennas = 1;
    cfg_rx_.rx_codebook_size = 1;
    cfg_rx_.finalize();
    tx_book_ = dft_codebook(cfg_.tx_antennas, cfg_.tx_codebook_size,
                            cfg_.spacing);
  }

  const SystemConfig& config() const { return cfg_; }
  const SeparateBudget& budget() const { return budget_; }
  bool trained() const { return trained_; }
  HbanMiso& tx_side() { return tx_side_; }
  HbanMiso& rx_side() { return rx_side_; }

  // Stage-1 view: the channel column seen by the user's first antenna.
  ChannelSample stage1_sample(const ChannelSample& s) const {
    ChannelSample out;
    out.sample_id = s.sample_id;
    out.h = CMat(cfg_.tx_antennas, 1);
    for (int p = 0; p < cfg_.tx_antennas; ++p)
      out.h.d[static_cast<std::size_t>(p)] = s.h(p, 0);
    return out;
  }

  // Stage-2 view: effective receive-side channel for transmit beam index i,
  // g_q = (H^H v_i)_q.  Measuring it with a single-antenna sweep reproduces
  // the power of the combined two-sided measurement.
  ChannelSample stage2_sample(const ChannelSample& s, int tx_index) const {
    const Beam& v = tx_book_.beams[static_cast<std::size_t>(tx_index)];
    ChannelSample out;
    out.sample_id = s.sample_id;
    out.h = CMat(cfg_.rx_antennas, 1);
    for (int q = 0; q < cfg_.rx_antennas; ++q) {
      cplx acc{0.0, 0.0};
      for (int p = 0; p < cfg_.tx_antennas; ++p)
        acc += std::conj(s.h(p, q)) * v.w[static_cast<std::size_t>(p)];
      out.h.d[static_cast<std::size_t>(q)] = acc;
    }
    return out;
  }

  // Trains both sides.  Group counts of 0 select G per side with the elbow
  // rule.  Stage 2 trains against the effective channels of stage 1's own
  // (noisy) predictions so routing errors are seen during training.
  TrainCurve train(const ChannelDataset& ds, const TrainConfig& tc,
                   int groups_tx = 0, int groups_rx = 0) {
    if (ds.cfg != cfg_) throw std::invalid_argument("separate: config mismatch");
    const std::uint64_t seed_tx = derive_seed(tc.seed, stream::stage, 1);
    const std::uint64_t seed_rx = derive_seed(tc.seed, stream::stage, 2);

    ChannelDataset ds_tx;
    ds_tx.cfg = cfg_tx_;
    ds_tx.split_tags = ds.split_tags;
    ds_tx.samples.reserve(ds.samples.size());
    for (const auto& s : ds.samples) ds_tx.samples.push_back(stage1_sample(s));
    const DatasetLabels lab_tx = label_dataset(ds_tx, groups_tx, seed_tx);

    TrainConfig tc_tx = tc;
    tc_tx.seed = seed_tx;
    tx_side_ = HbanMiso(cfg_tx_, budget_.n1t, budget_.n2t,
                        lab_tx.clusters.groups(), normalize_input_, seed_tx);
    std::vector<int> groups(ds.samples.size()), beams(ds.samples.size());
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
      groups[i] = lab_tx.per_sample[i].group;
      beams[i] = lab_tx.per_sample[i].beam.tx_index;
    }
    TrainCurve curve = train_coarse(tx_side_, ds_tx, groups, tc_tx);
    TrainCurve fine_curve = train_fine(tx_side_, ds_tx, beams, tc_tx);
    curve.insert(curve.end(), fine_curve.begin(), fine_curve.end());
    for (auto& c : curve) c.phase = "tx-" + c.phase;

    ChannelDataset ds_rx;
    ds_rx.cfg = cfg_rx_;
    ds_rx.split_tags = ds.split_tags;
    ds_rx.samples.reserve(ds.samples.size());
    for (const auto& s : ds.samples) {
      Rng rng(derive_seed(tc.seed, stream::stage, 3, s.sample_id));
      const AlignResult a = tx_side_.align(stage1_sample(s), rng);
      ds_rx.samples.push_back(stage2_sample(s, a.beam.tx_index));
    }
    const DatasetLabels lab_rx = label_dataset(ds_rx, groups_rx, seed_rx);

    TrainConfig tc_rx = tc;
    tc_rx.seed = seed_rx;
    rx_side_ = HbanMiso(cfg_rx_, budget_.n1r, budget_.n2r,
                        lab_rx.clusters.groups(), normalize_input_, seed_rx);
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
      groups[i] = lab_rx.per_sample[i].group;
      beams[i] = lab_rx.per_sample[i].beam.tx_index;
    }
    TrainCurve rc = train_coarse(rx_side_, ds_rx, groups, tc_rx);
    TrainCurve rf = train_fine(rx_side_, ds_rx, beams, tc_rx);
    rc.insert(rc.end(), rf.begin(), rf.end());
    for (auto& c : rc) c.phase = "rx-" + c.phase;
    curve.insert(curve.end(), rc.begin(), rc.end());
    trained_ = true;
    return curve;
  }

  AlignResult align(const ChannelSample& s, Rng& rng) {
    if (!trained_) throw std::logic_error("align: model not trained");
    const AlignResult a1 = tx_side_.align(stage1_sample(s), rng);
    const AlignResult a2 =
        rx_side_.align(stage2_sample(s, a1.beam.tx_index), rng);
    AlignResult res;
    res.beam.tx_index = a1.beam.tx_index;
    res.beam.rx_index = a2.beam.tx_index;
    res.group = a1.group;
    res.sweep_count = budget_.total();
    res.coarse_m = a1.coarse_m;
    res.fine_m = a2.fine_m;
    return res;
  }

  TensorBundle to_bundle() const {
    TensorBundle b;
    b.meta["kind"] = "separate-hban";
    for (const auto& [k, v] : cfg_.to_kv()) b.meta["cfg." + k] = v;
    b.meta["n1t"] = std::to_string(budget_.n1t);
    b.meta["n2t"] = std::to_string(budget_.n2t);
    b.meta["n1r"] = std::to_string(budget_.n1r);
    b.meta["n2r"] = std::to_string(budget_.n2r);
    b.meta["groups_tx"] = std::to_string(tx_side_.groups());
    b.meta["groups_rx"] = std::to_string(rx_side_.groups());
    b.meta["normalize_input"] = normalize_input_ ? "1" : "0";
    b.meta["trained"] = trained_ ? "1" : "0";
    const TensorBundle bt = tx_side_.to_bundle();
    for (const auto& [name, t] : bt.tensors) b.tensors.emplace_back("tx." + name, t);
    const TensorBundle br = rx_side_.to_bundle();
    for (const auto& [name, t] : br.tensors) b.tensors.emplace_back("rx." + name, t);
    return b;
  }

  static SeparateHban from_bundle(const TensorBundle& b) {
    KvMap cfg_kv;
    for (const auto& [k, v] : b.meta)
      if (k.rfind("cfg.", 0) == 0) cfg_kv[k.substr(4)] = v;
    SeparateBudget budget;
    budget.n1t = static_cast<int>(kv_get_int(b.meta, "n1t"));
    budget.n2t = static_cast<int>(kv_get_int(b.meta, "n2t"));
    budget.n1r = static_cast<int>(kv_get_int(b.meta, "n1r"));
    budget.n2r = static_cast<int>(kv_get_int(b.meta, "n2r"));
    SeparateHban m(SystemConfig::from_kv(cfg_kv), budget,
                   kv_get_int(b.meta, "normalize_input") != 0, /*seed=*/0);
    m.tx_side_ = HbanMiso(m.cfg_tx_, budget.n1t, budget.n2t,
                          static_cast<int>(kv_get_int(b.meta, "groups_tx")),
                          m.normalize_input_, 0);
    m.rx_side_ = HbanMiso(m.cfg_rx_, budget.n1r, budget.n2r,
                          static_cast<int>(kv_get_int(b.meta, "groups_rx")),
                          m.normalize_input_, 0);
    for (Param* p : m.tx_side_.all_params()) p->value = b.get("tx." + p->name);
    for (Param* p : m.rx_side_.all_params()) p->value = b.get("rx." + p->name);
    m.trained_ = kv_get_int(b.meta, "trained") != 0;
    m.tx_side_.set_trained(m.trained_, m.trained_);
    m.rx_side_.set_trained(m.trained_, m.trained_);
    return m;
  }

 private:
  SystemConfig cfg_, cfg_tx_, cfg_rx_;
  SeparateBudget budget_;
  bool normalize_input_ = false;
  std::uint64_t seed_ = 0;
  bool trained_ = false;
  Codebook tx_book_;
  HbanMiso tx_side_, rx_side_;
};

inline EvalResult evaluate(SeparateHban& model, const ChannelDataset& ds,
                           const std::vector<BeamLabel>& beam_labels,
                           Split split, int trials, std::uint64_t eval_seed) {
  if (trials < 1) throw std::invalid_argument("evaluate: trials < 1");
  const std::vector<int> idx = ds.indices_of(split);
  const Codebook tx_book = dft_codebook(
      ds.cfg.tx_antennas, ds.cfg.tx_codebook_size, ds.cfg.spacing);
  const Codebook rx_book = dft_codebook(
      ds.cfg.rx_antennas, ds.cfg.rx_codebook_size, ds.cfg.spacing);
  EvalResult res;
  res.sweep_count = model.budget().total();
  double se_sum = 0.0;
  int correct = 0, correct_t = 0, correct_r = 0, total = 0;
  for (int i : idx) {
    const auto& s = ds.samples[static_cast<std::size_t>(i)];
    for (int t = 0; t < trials; ++t) {
      Rng rng(derive_seed(eval_seed, stream::evalnoise, s.sample_id,
                          static_cast<std::uint64_t>(t)));
      const AlignResult a = model.align(s, rng);
      const BeamLabel& lab = beam_labels[static_cast<std::size_t>(i)];
      const bool ok_t = a.beam.tx_index == lab.tx_index;
      const bool ok_r = a.beam.rx_index == lab.rx_index;
      correct_t += ok_t;
      correct_r += ok_r;
      correct += ok_t && ok_r;
      se_sum += se_of_choice_mimo(
          s, tx_book.beams[static_cast<std::size_t>(a.beam.tx_index)],
          rx_book.beams[static_cast<std::size_t>(a.beam.rx_index)], ds.cfg);
      ++total;
    }
  }
  res.n = total;
  res.accuracy = total ? static_cast<double>(correct) / total : 0.0;
  res.tx_accuracy = total ? static_cast<double>(correct_t) / total : 0.0;
  res.rx_accuracy = total ? static_cast<double>(correct_r) / total : 0.0;
  res.mean_se = total ? se_sum / total : 0.0;
  return res;
}

}  // namespace hbalign
