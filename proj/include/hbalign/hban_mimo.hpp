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
// Hierarchical alignment for multi-antenna users: every tier probes
// transmit/receive beam pairs, and each group carries two predictor heads
// (transmit beam and receive beam) trained with a weighted pair loss.

#pragma once

#include <algorithm>
#include <stdexcept>
#include <string>
#include <vector>

#include "hbalign/hban.hpp"

namespace hbalign {

class HbanMimo {
 public:
  HbanMimo() = default;

  HbanMimo(const SystemConfig& cfg, int n1, int n2, int groups,
           bool normalize_input, std::uint64_t seed)
      : cfg_(cfg),
        n1_(n1),
        n2_(n2),
        groups_(groups),
        normalize_input_(normalize_input) {
    cfg_.finalize();
    cfg_.validate();
    if (n1 < 1) throw std::invalid_argument("hban: n1 < 1");
    if (n2 < n1) throw std::invalid_argument("hban: n2 < n1");
    if (groups < 1) throw std::invalid_argument("hban: groups < 1");
    Rng init(derive_seed(seed, stream::init));
    coarse_ = PairProbingLayer("coarse", cfg_.tx_antennas, cfg_.rx_antennas,
                               n1, init);
    selector_ = Mlp("selector", {n1, n1, groups}, init);
    const int s = n1 + n2;
    for (int k = 0; k < groups; ++k) {
      fine_.emplace_back("fine" + std::to_string(k), cfg_.tx_antennas,
                         cfg_.rx_antennas, n2, init);
      pred_tx_.emplace_back("predt" + std::to_string(k),
                            std::vector<int>{s, 2 * s, 3 * s,
                                             cfg_.tx_codebook_size},
                            init);
      pred_rx_.emplace_back("predr" + std::to_string(k),
                            std::vector<int>{s, 2 * s, 3 * s,
                                             cfg_.rx_codebook_size},
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
  PairProbingLayer& coarse_layer() { return coarse_; }
  PairProbingLayer& fine_layer(int k) { return fine_[static_cast<std::size_t>(k)]; }
  Mlp& selector() { return selector_; }

  std::vector<Param*> coarse_params() {
    std::vector<Param*> out{&coarse_.theta(), &coarse_.phi()};
    selector_.collect_params(out);
    return out;
  }

  std::vector<Param*> fine_params(int k) {
    auto& f = fine_[static_cast<std::size_t>(k)];
    std::vector<Param*> out{&f.theta(), &f.phi()};
    pred_tx_[static_cast<std::size_t>(k)].collect_params(out);
    pred_rx_[static_cast<std::size_t>(k)].collect_params(out);
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

  int select_codebook(const std::vector<double>& zc) {
    if (static_cast<int>(zc.size()) != n1_)
      throw std::invalid_argument("select_codebook: measurement size");
    Mat x = detail::row_from_vec(normalize_input_
                                     ? detail::normalize_mean_vec(zc)
                                     : zc);
    const SoftmaxOut out = selector_.forward(x);
    return detail::argmax_row(out.probs, 0);
  }

  BeamLabel predict_beam_pair(const std::vector<double>& zc,
                              const std::vector<double>& zf, int k) {
    if (k < 0 || k >= groups_)
      throw std::invalid_argument("predict_beam_pair: bad group");
    if (static_cast<int>(zc.size()) != n1_ ||
        static_cast<int>(zf.size()) != n2_)
      throw std::invalid_argument("predict_beam_pair: measurement size");
    std::vector<double> a = normalize_input_ ? detail::normalize_mean_vec(zc) : zc;
    std::vector<double> b = normalize_input_ ? detail::normalize_mean_vec(zf) : zf;
    a.insert(a.end(), b.begin(), b.end());
    Mat x = detail::row_from_vec(a);
    BeamLabel lab;
    lab.tx_index = detail::argmax_row(
        pred_tx_[static_cast<std::size_t>(k)].forward(x).probs, 0);
    lab.rx_index = detail::argmax_row(
        pred_rx_[static_cast<std::size_t>(k)].forward(x).probs, 0);
    return lab;
  }

  AlignResult align(const ChannelSample& s, Rng& rng, int forced_group = -1) {
    if (!fine_trained_)
      throw std::logic_error("align: model not fully trained");
    AlignResult res;
    const Codebook ctx = coarse_.tx_beams();
    const Codebook crx = coarse_.rx_beams();
    res.coarse_m = power_feedback(
        rx_signal_mimo(s.h, make_pairs(ctx, crx), cfg_, rng),
        SweepTier::coarse);
    res.group = forced_group >= 0 ? forced_group : select_codebook(res.coarse_m.z);
    const auto& fl = fine_[static_cast<std::size_t>(res.group)];
    const Codebook ftx = fl.tx_beams();
    const Codebook frx = fl.rx_beams();
    res.fine_m = power_feedback(
        rx_signal_mimo(s.h, make_pairs(ftx, frx), cfg_, rng), SweepTier::fine);
    res.beam = predict_beam_pair(res.coarse_m.z, res.fine_m.z, res.group);
    res.sweep_count = n1_ + n2_;
    return res;
  }

  TensorBundle to_bundle() const {
    TensorBundle b;
    b.meta["kind"] = "hban-mimo";
    for (const auto& [k, v] : cfg_.to_kv()) b.meta["cfg." + k] = v;
    b.meta["n1"] = std::to_string(n1_);
    b.meta["n2"] = std::to_string(n2_);
    b.meta["groups"] = std::to_string(groups_);
    b.meta["normalize_input"] = normalize_input_ ? "1" : "0";
    b.meta["coarse_trained"] = coarse_trained_ ? "1" : "0";
    b.meta["fine_trained"] = fine_trained_ ? "1" : "0";
    auto* self = const_cast<HbanMimo*>(this);
    for (Param* p : self->all_params()) b.tensors.emplace_back(p->name, p->value);
    return b;
  }

  static HbanMimo from_bundle(const TensorBundle& b) {
    KvMap cfg_kv;
    for (const auto& [k, v] : b.meta)
      if (k.rfind("cfg.", 0) == 0) cfg_kv[k.substr(4)] = v;
    HbanMimo m(SystemConfig::from_kv(cfg_kv),
               static_cast<int>(kv_get_int(b.meta, "n1")),
               static_cast<int>(kv_get_int(b.meta, "n2")),
               static_cast<int>(kv_get_int(b.meta, "groups")),
               kv_get_int(b.meta, "normalize_input") != 0, /*seed=*/0);
    for (Param* p : m.all_params()) p->value = b.get(p->name);
    m.coarse_trained_ = kv_get_int(b.meta, "coarse_trained") != 0;
    m.fine_trained_ = kv_get_int(b.meta, "fine_trained") != 0;
    return m;
  }

  friend TrainCurve train_coarse(HbanMimo&, const ChannelDataset&,
                                 const std::vector<int>&, const TrainConfig&);
  friend TrainCurve train_fine(HbanMimo&, const ChannelDataset&,
                               const std::vector<BeamLabel>&,
                               const TrainConfig&);

 private:
  static std::vector<BeamPair> make_pairs(const Codebook& tx,
                                          const Codebook& rx) {
    std::vector<BeamPair> pairs;
    pairs.reserve(tx.beams.size());
    for (std::size_t i = 0; i < tx.beams.size(); ++i)
      pairs.push_back({&tx.beams[i], &rx.beams[i]});
    return pairs;
  }

  SystemConfig cfg_;
  int n1_ = 0, n2_ = 0, groups_ = 0;
  bool normalize_input_ = false;
  bool coarse_trained_ = false, fine_trained_ = false;
  PairProbingLayer coarse_;
  Mlp selector_;
  std::vector<PairProbingLayer> fine_;
  std::vector<Mlp> pred_tx_, pred_rx_;
};

inline TrainCurve train_coarse(HbanMimo& model, const ChannelDataset& ds,
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
  const int mr = model.cfg_.rx_antennas;
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
        vrng, h.rows(), model.n1_ * mr, sigma2, tc.probe_noise);
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
          nrng, h.rows(), model.n1_ * mr, sigma2, tc.probe_noise);
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

// Pair-beam step 2: each routed group trains its pair codebook and both
// predictor heads with loss  w * ce_tx / N_t + (1 - w) * ce_rx / N_r.
inline TrainCurve train_fine(HbanMimo& model, const ChannelDataset& ds,
                             const std::vector<BeamLabel>& beam_labels,
                             const TrainConfig& tc) {
  tc.validate();
  if (!model.coarse_trained_)
    throw std::logic_error("train_fine: coarse step has not been trained");
  if (beam_labels.size() != ds.samples.size())
    throw std::invalid_argument("train_fine: label count mismatch");
  for (const BeamLabel& l : beam_labels)
    if (l.tx_index < 0 || l.tx_index >= model.cfg_.tx_codebook_size ||
        l.rx_index < 0 || l.rx_index >= model.cfg_.rx_codebook_size)
      throw std::invalid_argument("train_fine: beam label out of range");

  const double rho = model.cfg_.tx_power_watts;
  const double sigma2 = model.cfg_.noise_variance_watts;
  const double xi = tc.tx_loss_weight;
  const int nt = model.cfg_.tx_codebook_size;
  const int nr = model.cfg_.rx_codebook_size;
  const int mr = model.cfg_.rx_antennas;
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

  auto coarse_pass = [&](const CBatch& h, Rng& nrng, Mat& x_out,
                         std::vector<int>& route_out) {
    PowerLayer power;
    NormalizeLayer norm;
    const CBatch noise = detail::draw_noise_batch(
        nrng, h.rows(), model.n1_ * mr, sigma2, tc.probe_noise);
    CBatch y = model.coarse_.forward(h, noise, rho);
    Mat z = power.forward(y);
    x_out = tc.normalize_input ? norm.forward(z) : z;
    const SoftmaxOut sel = model.selector_.forward(x_out);
    route_out.resize(static_cast<std::size_t>(h.rows()));
    for (int b = 0; b < h.rows(); ++b)
      route_out[static_cast<std::size_t>(b)] =
          detail::argmax_row(sel.probs, b);
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
          vrng, static_cast<int>(rows.size()), model.n2_ * mr, sigma2,
          tc.probe_noise);
      CBatch y = model.fine_[static_cast<std::size_t>(k)].forward(hk, noise, rho);
      Mat zf = fp.forward(y);
      if (tc.normalize_input) zf = fn.forward(zf);
      const Mat x = detail::hconcat(detail::gather_rows(xc, rows), zf);
      const SoftmaxOut out_t =
          model.pred_tx_[static_cast<std::size_t>(k)].forward(x);
      const SoftmaxOut out_r =
          model.pred_rx_[static_cast<std::size_t>(k)].forward(x);
      for (std::size_t r = 0; r < rows.size(); ++r) {
        const BeamLabel& lab = beam_labels[static_cast<std::size_t>(
            val_idx[static_cast<std::size_t>(rows[r])])];
        if (detail::argmax_row(out_t.probs, static_cast<int>(r)) ==
                lab.tx_index &&
            detail::argmax_row(out_r.probs, static_cast<int>(r)) ==
                lab.rx_index)
          ++correct;
      }
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
        std::vector<int> lab_t(rows.size()), lab_r(rows.size());
        for (std::size_t r = 0; r < rows.size(); ++r) {
          const BeamLabel& lab = beam_labels[static_cast<std::size_t>(
              batch[static_cast<std::size_t>(rows[r])])];
          lab_t[r] = lab.tx_index;
          lab_r[r] = lab.rx_index;
        }

        zero_grads(group_params[static_cast<std::size_t>(k)]);
        PowerLayer fp;
        NormalizeLayer fn;
        const CBatch hk = detail::gather_rows(h, rows);
        const CBatch noise = detail::draw_noise_batch(
            nrng, static_cast<int>(rows.size()), model.n2_ * mr, sigma2,
            tc.probe_noise);
        CBatch y =
            model.fine_[static_cast<std::size_t>(k)].forward(hk, noise, rho);
        Mat zf_raw = fp.forward(y);
        Mat zf = tc.normalize_input ? fn.forward(zf_raw) : zf_raw;
        const Mat x = detail::hconcat(detail::gather_rows(xc, rows), zf);
        const SoftmaxOut out_t =
            model.pred_tx_[static_cast<std::size_t>(k)].forward(x);
        const SoftmaxOut out_r =
            model.pred_rx_[static_cast<std::size_t>(k)].forward(x);
        const double loss =
            xi * ce_loss(out_t, lab_t, nt) + (1.0 - xi) * ce_loss(out_r, lab_r, nr);
        loss_sum += loss * static_cast<double>(rows.size());

        Mat glog_t = ce_grad(out_t, lab_t, nt);
        for (double& v : glog_t.d) v *= xi;
        Mat glog_r = ce_grad(out_r, lab_r, nr);
        for (double& v : glog_r.d) v *= 1.0 - xi;
        Mat gx = model.pred_tx_[static_cast<std::size_t>(k)].backward(glog_t);
        const Mat gx_r =
            model.pred_rx_[static_cast<std::size_t>(k)].backward(glog_r);
        for (std::size_t j = 0; j < gx.d.size(); ++j) gx.d[j] += gx_r.d[j];
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

inline EvalResult evaluate(HbanMimo& model, const ChannelDataset& ds,
                           const std::vector<BeamLabel>& beam_labels,
                           Split split, int trials, std::uint64_t eval_seed,
                           int forced_group_for = -2,
                           const std::vector<int>* group_labels = nullptr) {
  if (trials < 1) throw std::invalid_argument("evaluate: trials < 1");
  const std::vector<int> idx = ds.indices_of(split);
  const Codebook tx_book = dft_codebook(
      ds.cfg.tx_antennas, ds.cfg.tx_codebook_size, ds.cfg.spacing);
  const Codebook rx_book = dft_codebook(
      ds.cfg.rx_antennas, ds.cfg.rx_codebook_size, ds.cfg.spacing);
  EvalResult res;
  res.sweep_count = model.coarse_size() + model.fine_size();
  double se_sum = 0.0;
  int correct = 0, correct_t = 0, correct_r = 0, total = 0;
  for (int i : idx) {
    const auto& s = ds.samples[static_cast<std::size_t>(i)];
    for (int t = 0; t < trials; ++t) {
      Rng rng(derive_seed(eval_seed, stream::evalnoise, s.sample_id,
                          static_cast<std::uint64_t>(t)));
      const int forced =
          group_labels ? (*group_labels)[static_cast<std::size_t>(i)]
                       : forced_group_for >= 0 ? forced_group_for : -1;
      const AlignResult a = model.align(s, rng, forced);
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

inline EvalResult evaluate_pcs(HbanMimo& model, const ChannelDataset& ds,
                               const std::vector<BeamLabel>& beam_labels,
                               const std::vector<int>& group_labels, Split split,
                               int trials, std::uint64_t eval_seed) {
  if (group_labels.size() != ds.samples.size())
    throw std::invalid_argument("evaluate_pcs: group label count");
  return evaluate(model, ds, beam_labels, split, trials, eval_seed, -2,
                  &group_labels);
}

}  // namespace hbalign
