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
#include <map>
#include <sstream>

#include "hbalign/hban.hpp"
#include "hbalign/hban_mimo.hpp"
#include "hbalign/variants.hpp"
#include "test_util.hpp"

using namespace hbalign;
using Catch::Matchers::WithinAbs;

namespace {

std::vector<int> group_labels_of(const DatasetLabels& l) {
  std::vector<int> out;
  out.reserve(l.per_sample.size());
  for (const auto& s : l.per_sample) out.push_back(s.group);
  return out;
}

std::vector<int> tx_labels_of(const DatasetLabels& l) {
  std::vector<int> out;
  out.reserve(l.per_sample.size());
  for (const auto& s : l.per_sample) out.push_back(s.beam.tx_index);
  return out;
}

std::vector<BeamLabel> pair_labels_of(const DatasetLabels& l) {
  std::vector<BeamLabel> out;
  out.reserve(l.per_sample.size());
  for (const auto& s : l.per_sample) out.push_back(s.beam);
  return out;
}

TrainConfig quick_train(int epochs, std::uint64_t seed = 1) {
  TrainConfig tc;
  tc.seed = seed;
  tc.max_epochs = epochs;
  tc.normalize_input = true;
  // Test fixtures are a few thousand samples (a dozen batches per epoch), so
  // the shipping rate would need hundreds of epochs to move; scale it up.
  tc.learning_rate = 1e-2;
  return tc;
}

std::vector<Mat> values_of(std::vector<Param*> params) {
  std::vector<Mat> out;
  for (const Param* p : params) out.push_back(p->value);
  return out;
}

// Shared trained fixture (built once; several cases probe it).
struct MisoFixture {
  SystemConfig cfg = testutil::make_cfg(16, 32, 1, 1, -161.0);
  ChannelDataset ds = gen_dataset(cfg, testutil::multipath_blobs(), 4000, 7);
  DatasetLabels labels = label_dataset(ds, 4, 7);
  HbanMiso model{cfg, 3, 4, 4, true, 1};
  TrainCurve coarse_curve, fine_curve;

  MisoFixture() {
    const TrainConfig tc = quick_train(40);
    coarse_curve = train_coarse(model, ds, group_labels_of(labels), tc);
    fine_curve = train_fine(model, ds, tx_labels_of(labels), tc);
  }
};

MisoFixture& miso_fixture() {
  static MisoFixture f;
  return f;
}

}  // namespace

TEST_CASE("constructor validates the layer plan", "[hban]") {
  const SystemConfig cfg = testutil::make_cfg(8, 16);
  REQUIRE_THROWS_AS(HbanMiso(cfg, 0, 4, 2, false, 1), std::invalid_argument);
  REQUIRE_THROWS_AS(HbanMiso(cfg, 4, 2, 2, false, 1), std::invalid_argument);
  REQUIRE_THROWS_AS(HbanMiso(cfg, 2, 4, 0, false, 1), std::invalid_argument);

  TrainConfig tc;
  tc.batch_size = 0;
  REQUIRE_THROWS_AS(tc.validate(), std::invalid_argument);
  tc.batch_size = 16;
  tc.tx_loss_weight = 1.5;
  REQUIRE_THROWS_AS(tc.validate(), std::invalid_argument);
}

TEST_CASE("alignment requires a trained model", "[hban]") {
  const SystemConfig cfg = testutil::make_cfg(8, 16);
  HbanMiso model(cfg, 2, 3, 2, false, 1);
  const ChannelSample s = testutil::los_miso(8, 0.25, cplx{1.0, 0.0});
  Rng rng(1);
  REQUIRE_THROWS_AS(model.align(s, rng), std::logic_error);
}

TEST_CASE("group argmax ties break toward the lower index", "[hban]") {
  Mat p(1, 3);
  p(0, 0) = 0.1;
  p(0, 1) = 0.7;
  p(0, 2) = 0.2;
  REQUIRE(detail::argmax_row(p, 0) == 1);
  p.fill(1.0 / 3.0);
  REQUIRE(detail::argmax_row(p, 0) == 0);
}

TEST_CASE("selector learns the blob grouping under multipath", "[hban]") {
  MisoFixture& f = miso_fixture();
  REQUIRE(!f.coarse_curve.empty());
  REQUIRE(f.coarse_curve.front().phase == "coarse");
  REQUIRE(f.coarse_curve.back().loss < f.coarse_curve.front().loss);
  // Scattered paths win the direction estimate on a minority of samples and
  // blur the probing features, so the attainable accuracy sits well below
  // the pure line-of-sight ceiling (the next case).
  REQUIRE(f.coarse_curve.back().val_accuracy >= 0.80);
}

TEST_CASE("selector nails pure line-of-sight blobs", "[hban]") {
  const SystemConfig cfg = testutil::make_cfg(16, 32, 1, 1, -161.0);
  const ChannelDataset ds = gen_dataset(cfg, testutil::los_blobs(), 2000, 9);
  const DatasetLabels labels = label_dataset(ds, 4, 9);
  HbanMiso model(cfg, 3, 4, 4, true, 1);
  const TrainCurve cc =
      train_coarse(model, ds, group_labels_of(labels), quick_train(40));
  REQUIRE(cc.back().val_accuracy >= 0.95);
}

TEST_CASE("fine step leaves the frozen coarse half untouched", "[hban]") {
  // Retrain a copy from scratch to observe the step boundary.
  MisoFixture& f = miso_fixture();
  HbanMiso model(f.cfg, 3, 4, 4, true, 1);
  const TrainConfig tc = quick_train(8);
  train_coarse(model, f.ds, group_labels_of(f.labels), tc);
  const std::vector<Mat> before = values_of(model.coarse_params());
  train_fine(model, f.ds, tx_labels_of(f.labels), tc);
  const std::vector<Mat> after = values_of(model.coarse_params());
  REQUIRE(before.size() == after.size());
  for (std::size_t i = 0; i < before.size(); ++i)
    REQUIRE(before[i] == after[i]);  // bitwise
}

TEST_CASE("every group receives routed samples", "[hban]") {
  MisoFixture& f = miso_fixture();
  const SystemConfig quiet = f.cfg.with_noise_psd(-testutil::kInf);
  const Codebook coarse = f.model.coarse_layer().beams();

  std::map<int, int> hist;
  Rng rng(2);
  for (int i : f.ds.indices_of(Split::train)) {
    const auto y = rx_signal_miso(f.ds.samples[static_cast<std::size_t>(i)].h,
                                  coarse, quiet, rng);
    hist[f.model.select_codebook(power_feedback(y).z)]++;
  }
  for (int g = 0; g < 4; ++g) REQUIRE(hist[g] > 0);
}

TEST_CASE("deployment sweep cost is the two probing sweeps", "[hban]") {
  MisoFixture& f = miso_fixture();
  REQUIRE(f.model.coarse_size() + f.model.fine_size() == 7);
  Rng rng(3);
  const AlignResult res = f.model.align(f.ds.samples[0], rng);
  REQUIRE(res.sweep_count == 7);
  REQUIRE(res.coarse_m.z.size() == 3);
  REQUIRE(res.fine_m.z.size() == 4);
  REQUIRE(res.beam.tx_index >= 0);
  REQUIRE(res.beam.tx_index < 32);
}

TEST_CASE("training is bitwise deterministic", "[hban]") {
  MisoFixture& f = miso_fixture();
  HbanMiso m2(f.cfg, 3, 4, 4, true, 1);
  const TrainConfig tc = quick_train(40);
  train_coarse(m2, f.ds, group_labels_of(f.labels), tc);
  train_fine(m2, f.ds, tx_labels_of(f.labels), tc);

  const auto a = values_of(f.model.all_params());
  const auto b = values_of(m2.all_params());
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) REQUIRE(a[i] == b[i]);

  const EvalResult ea = evaluate(f.model, f.ds, tx_labels_of(f.labels),
                                 Split::test, 2, 99);
  const EvalResult eb = evaluate(m2, f.ds, tx_labels_of(f.labels),
                                 Split::test, 2, 99);
  REQUIRE(ea.accuracy == eb.accuracy);
  REQUIRE(ea.mean_se == eb.mean_se);
  REQUIRE(ea.n == eb.n);
}

TEST_CASE("perfect codebook selection does not hurt", "[hban]") {
  MisoFixture& f = miso_fixture();
  const EvalResult plain = evaluate(f.model, f.ds, tx_labels_of(f.labels),
                                    Split::test, 2, 99);
  const EvalResult pcs =
      evaluate_pcs(f.model, f.ds, tx_labels_of(f.labels),
                   group_labels_of(f.labels), Split::test, 2, 99);
  REQUIRE(pcs.sweep_count == plain.sweep_count);
  REQUIRE(pcs.accuracy >= plain.accuracy - 0.01);
}

TEST_CASE("hierarchical model beats its own coarse half", "[hban]") {
  MisoFixture& f = miso_fixture();
  OneTierPcMiso flat(f.cfg, 3, true, 1);  // same budget as the coarse sweep
  train_one_tier(flat, f.ds, tx_labels_of(f.labels), quick_train(40));
  const EvalResult flat_res =
      evaluate(flat, f.ds, tx_labels_of(f.labels), Split::test, 2, 99);
  const EvalResult full = evaluate(f.model, f.ds, tx_labels_of(f.labels),
                                   Split::test, 2, 99);
  REQUIRE(full.accuracy >= flat_res.accuracy - 0.02);
}

TEST_CASE("single-group training is trivially routed", "[hban]") {
  MisoFixture& f = miso_fixture();
  HbanMiso solo(f.cfg, 2, 3, 1, true, 1);
  const std::vector<int> zeros(f.ds.samples.size(), 0);
  const TrainCurve curve = train_coarse(solo, f.ds, zeros, quick_train(3));
  REQUIRE(curve.back().val_accuracy == 1.0);
  REQUIRE_THAT(curve.back().loss, WithinAbs(0.0, 1e-12));
  train_fine(solo, f.ds, tx_labels_of(f.labels), quick_train(6));

  // With one group, forcing the true group is a no-op: identical noise
  // streams give identical results.
  const EvalResult a =
      evaluate(solo, f.ds, tx_labels_of(f.labels), Split::test, 1, 99);
  const EvalResult b = evaluate_pcs(solo, f.ds, tx_labels_of(f.labels), zeros,
                                    Split::test, 1, 99);
  REQUIRE(a.accuracy == b.accuracy);
  REQUIRE(a.mean_se == b.mean_se);
}

TEST_CASE("noise-free training overfits a two-spot world", "[hban]") {
  SystemConfig cfg = testutil::make_cfg(16, 32);  // zero noise
  Scenario sc;
  sc.num_paths = 1;
  sc.los_prob = 1.0;
  sc.los_gain = 1e-4;
  sc.nlos_gain_scale = 0.35e-4;
  sc.blobs = {ScenarioBlob{dft_sine(32, 8), 0.0, 0.0, 0.0},
              ScenarioBlob{dft_sine(32, 24), 0.0, 0.0, 0.0}};

  const ChannelDataset ds = gen_dataset(cfg, sc, 50, 3);
  const DatasetLabels labels = label_dataset(ds, 2, 3);

  HbanMiso model(cfg, 2, 3, 2, true, 1);
  TrainConfig tc = quick_train(300);
  tc.batch_size = 16;
  tc.learning_rate = 5e-3;
  tc.patience = 1000;  // run the full schedule; this test wants memorization
  train_coarse(model, ds, group_labels_of(labels), tc);
  train_fine(model, ds, tx_labels_of(labels), tc);

  Rng rng(5);
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    const AlignResult res = model.align(ds.samples[i], rng);
    REQUIRE(res.beam.tx_index == labels.per_sample[i].beam.tx_index);
  }

  // Spectral efficiency is unbounded without noise.
  const EvalResult ev =
      evaluate(model, ds, tx_labels_of(labels), Split::test, 1, 99);
  REQUIRE(ev.accuracy == 1.0);
  REQUIRE(std::isinf(ev.mean_se));
}

TEST_CASE("checkpoint round-trip preserves behaviour", "[hban]") {
  MisoFixture& f = miso_fixture();
  const TensorBundle bundle = f.model.to_bundle();
  REQUIRE(bundle.meta.at("kind") == "hban-miso");

  std::stringstream buf(std::ios::in | std::ios::out | std::ios::binary);
  save_bundle(bundle, buf);
  HbanMiso back = HbanMiso::from_bundle(load_bundle(buf));

  REQUIRE(back.config() == f.model.config());
  const auto a = values_of(f.model.all_params());
  const auto b = values_of(back.all_params());
  for (std::size_t i = 0; i < a.size(); ++i) REQUIRE(a[i] == b[i]);

  for (int i : f.ds.indices_of(Split::test)) {
    const auto& s = f.ds.samples[static_cast<std::size_t>(i)];
    Rng ra(derive_seed(11, stream::evalnoise, s.sample_id));
    Rng rb(derive_seed(11, stream::evalnoise, s.sample_id));
    const AlignResult x = f.model.align(s, ra);
    const AlignResult y = back.align(s, rb);
    REQUIRE(x.beam.tx_index == y.beam.tx_index);
    REQUIRE(x.group == y.group);
  }

  // Second serialization is byte-identical.
  std::ostringstream buf2(std::ios::binary);
  save_bundle(back.to_bundle(), buf2);
  std::ostringstream buf1(std::ios::binary);
  save_bundle(f.model.to_bundle(), buf1);
  REQUIRE(buf1.str() == buf2.str());
}

TEST_CASE("random guessing sits at chance level", "[hban]") {
  // Oracle for the accuracy bookkeeping: guesses independent of the labels
  // land within 3 sigma of 1/N_t.
  MisoFixture& f = miso_fixture();
  const auto labels = tx_labels_of(f.labels);
  Rng rng(17);
  const int reps = 40;  // 40 passes over the test split
  int hits = 0, total = 0;
  for (int r = 0; r < reps; ++r)
    for (int i : f.ds.indices_of(Split::test)) {
      if (rng.uniform_int(32) == labels[static_cast<std::size_t>(i)]) hits++;
      total++;
    }
  const double p = 1.0 / 32.0;
  const double sigma = std::sqrt(p * (1.0 - p) / total);
  REQUIRE_THAT(static_cast<double>(hits) / total, WithinAbs(p, 3.0 * sigma));
}

TEST_CASE("pair model trains and keeps joint accuracy below the marginals",
          "[hban]") {
  const SystemConfig cfg = testutil::make_cfg(16, 32, 4, 8, -161.0);
  const ChannelDataset ds = gen_dataset(cfg, testutil::multipath_blobs(), 2500, 7);
  const DatasetLabels labels = label_dataset(ds, 4, 7);

  HbanMimo model(cfg, 4, 4, 4, true, 1);
  const TrainConfig tc = quick_train(40);
  const TrainCurve cc = train_coarse(model, ds, group_labels_of(labels), tc);
  REQUIRE(cc.back().val_accuracy >= 0.90);
  train_fine(model, ds, pair_labels_of(labels), tc);

  const EvalResult ev =
      evaluate(model, ds, pair_labels_of(labels), Split::test, 1, 99);
  REQUIRE(ev.sweep_count == 8);
  REQUIRE(ev.accuracy <= std::min(ev.tx_accuracy, ev.rx_accuracy) + 1e-12);
  REQUIRE(ev.accuracy > 1.0 / (32.0 * 8.0));  // clearly above chance

  // Round-trip through the checkpoint keeps deployment behaviour.
  std::stringstream buf(std::ios::in | std::ios::out | std::ios::binary);
  save_bundle(model.to_bundle(), buf);
  HbanMimo back = HbanMimo::from_bundle(load_bundle(buf));
  for (int i : ds.indices_of(Split::test)) {
    const auto& s = ds.samples[static_cast<std::size_t>(i)];
    Rng ra(derive_seed(12, stream::evalnoise, s.sample_id));
    Rng rb(derive_seed(12, stream::evalnoise, s.sample_id));
    const AlignResult x = model.align(s, ra);
    const AlignResult y = back.align(s, rb);
    REQUIRE(x.beam == y.beam);
  }
}

TEST_CASE("fixed-probing variant uses frozen sector sweeps", "[hban]") {
  const MisoFixture& f = miso_fixture();
  HbanMiso model = make_fixed_probing_hban(f.cfg, 2, 4, true, 1);
  REQUIRE(model.groups() == 2);  // one group per wide sector
  REQUIRE(!model.coarse_layer().theta().trainable);

  const std::vector<int> tx = tx_labels_of(f.labels);
  const std::vector<int> sectors = sector_group_labels(tx, 32, 2);
  for (std::size_t i = 0; i < tx.size(); ++i)
    REQUIRE(sectors[i] == (tx[i] * 2) / 32);

  const Mat theta0 = model.coarse_layer().theta().value;
  TrainConfig tc = quick_train(6);
  train_coarse(model, f.ds, sectors, tc);
  train_fine(model, f.ds, tx, tc);
  REQUIRE(model.coarse_layer().theta().value == theta0);  // stayed frozen
  for (int k = 0; k < model.groups(); ++k)
    REQUIRE(!model.fine_layer(k).theta().trainable);
}

TEST_CASE("staged transmit/receive model trains both sides", "[hban]") {
  const SystemConfig cfg = testutil::make_cfg(16, 32, 4, 8, -161.0);
  const ChannelDataset ds = gen_dataset(cfg, testutil::multipath_blobs(), 2000, 7);
  const DatasetLabels labels = label_dataset(ds, 4, 7);

  SeparateHban model(cfg, SeparateBudget{2, 4, 2, 2}, true, 1);
  REQUIRE(model.budget().total() == 10);
  const TrainCurve curve = model.train(ds, quick_train(25), 4, 2);

  bool saw_tx = false, saw_rx = false;
  for (const auto& c : curve) {
    if (c.phase.rfind("tx-", 0) == 0) saw_tx = true;
    if (c.phase.rfind("rx-", 0) == 0) saw_rx = true;
  }
  REQUIRE(saw_tx);
  REQUIRE(saw_rx);

  const EvalResult ev =
      evaluate(model, ds, pair_labels_of(labels), Split::test, 1, 99);
  REQUIRE(ev.sweep_count == 10);
  REQUIRE(ev.accuracy <= std::min(ev.tx_accuracy, ev.rx_accuracy) + 1e-12);

  // Mismatched dataset configs are rejected up front.
  ChannelDataset alt = ds;
  alt.cfg = cfg.with_noise_psd(-150.0);
  SeparateHban m2(cfg, SeparateBudget{2, 4, 2, 2}, true, 1);
  REQUIRE_THROWS_AS(m2.train(alt, quick_train(2), 4, 2), std::invalid_argument);
}
