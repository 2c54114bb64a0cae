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
// Command-line front end.  Subcommands: gen-data, labels, train, eval,
// budget-sweep, noise-sweep, report.  Every subcommand accepts --config FILE
// with key=value lines (keys = long flag names); config values override
// flags, flags override defaults.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hbalign/hbalign.hpp"

namespace hb = hbalign;

namespace {

// ---------------------------------------------------------------------------
// Small parsing helpers
// ---------------------------------------------------------------------------

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f)
    throw hb::io_error(hb::io_error::Code::open_failed, "cannot open " + path);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

// Applies key=value overrides from a config file on top of parsed flags.
struct KvApply {
  hb::KvMap kv;

  explicit KvApply(const std::string& path) {
    if (!path.empty()) kv = hb::parse_kv(read_file(path));
  }
  void s(const std::string& k, std::string& v) const {
    auto it = kv.find(k);
    if (it != kv.end()) v = it->second;
  }
  void i(const std::string& k, int& v) const {
    auto it = kv.find(k);
    if (it != kv.end()) v = std::stoi(it->second);
  }
  void u(const std::string& k, std::uint64_t& v) const {
    auto it = kv.find(k);
    if (it != kv.end()) v = std::stoull(it->second);
  }
  void d(const std::string& k, double& v) const {
    auto it = kv.find(k);
    if (it != kv.end()) v = std::stod(it->second);
  }
  void b(const std::string& k, bool& v) const {
    auto it = kv.find(k);
    if (it != kv.end())
      v = it->second == "1" || it->second == "true" || it->second == "on";
  }
};

hb::Budget parse_budget(const std::string& s) {
  const auto parts = hb::split_list(s, '/');
  if (parts.size() != 2)
    throw std::invalid_argument("budget must look like N1/N2, got '" + s + "'");
  return {std::stoi(parts[0]), std::stoi(parts[1])};
}

std::vector<hb::Budget> parse_budgets(const std::string& s) {
  if (s == "full-miso" || s == "full-mimo" || s == "desk-miso" ||
      s == "desk-mimo")
    return hb::preset_budgets(s);
  std::vector<hb::Budget> out;
  for (const auto& tok : hb::split_list(s, ',')) out.push_back(parse_budget(tok));
  return out;
}

std::vector<double> parse_doubles(const std::string& s) {
  std::vector<double> out;
  for (const auto& tok : hb::split_list(s, ',')) out.push_back(std::stod(tok));
  return out;
}

std::vector<std::uint64_t> parse_u64s(const std::string& s) {
  std::vector<std::uint64_t> out;
  for (const auto& tok : hb::split_list(s, ',')) out.push_back(std::stoull(tok));
  return out;
}

void print_kv(const hb::KvMap& kv) { std::cout << hb::emit_kv(kv); }

// ---------------------------------------------------------------------------
// Shared option blocks
// ---------------------------------------------------------------------------

constexpr double kUnsetD = std::numeric_limits<double>::quiet_NaN();

struct SystemOpts {
  std::string system = "desk-miso";
  std::string scenario = "blobs";
  std::string scenario_file;
  int tx_antennas = 0, rx_antennas = 0;  // 0 = keep preset value
  int tx_codebook = 0, rx_codebook = 0;
  double tx_power_dbm = kUnsetD, noise_psd = kUnsetD, bandwidth = kUnsetD;

  void add(CLI::App& a) {
    a.add_option("--system", system,
                 "system preset: miso-full|mimo-full|desk-miso|desk-mimo");
    a.add_option("--scenario", scenario, "scenario preset: blobs|uniform");
    a.add_option("--scenario-file", scenario_file,
                 "key=value scenario description (overrides --scenario)");
    a.add_option("--tx-antennas", tx_antennas, "override transmit array size");
    a.add_option("--rx-antennas", rx_antennas, "override receive array size");
    a.add_option("--tx-codebook", tx_codebook, "override transmit codebook size");
    a.add_option("--rx-codebook", rx_codebook, "override receive codebook size");
    a.add_option("--tx-power-dbm", tx_power_dbm, "override transmit power");
    a.add_option("--noise-psd", noise_psd,
                 "override noise PSD in dBm/Hz (-inf = exact zero noise)");
    a.add_option("--bandwidth", bandwidth, "override bandwidth in Hz");
  }
  void apply(const KvApply& c) {
    c.s("system", system);
    c.s("scenario", scenario);
    c.s("scenario-file", scenario_file);
    c.i("tx-antennas", tx_antennas);
    c.i("rx-antennas", rx_antennas);
    c.i("tx-codebook", tx_codebook);
    c.i("rx-codebook", rx_codebook);
    c.d("tx-power-dbm", tx_power_dbm);
    c.d("noise-psd", noise_psd);
    c.d("bandwidth", bandwidth);
  }
  hb::SystemConfig make_system() const {
    hb::SystemConfig sys = hb::preset_system(system);
    if (tx_antennas > 0) sys.tx_antennas = tx_antennas;
    if (rx_antennas > 0) sys.rx_antennas = rx_antennas;
    if (tx_codebook > 0) sys.tx_codebook_size = tx_codebook;
    if (rx_codebook > 0) sys.rx_codebook_size = rx_codebook;
    if (!std::isnan(tx_power_dbm)) sys.tx_power_dbm = tx_power_dbm;
    if (!std::isnan(noise_psd)) sys.noise_psd_dbm_hz = noise_psd;
    if (!std::isnan(bandwidth)) sys.bandwidth_hz = bandwidth;
    return sys.finalize();
  }
  hb::Scenario make_scenario() const {
    if (!scenario_file.empty())
      return hb::Scenario::from_kv(hb::parse_kv(read_file(scenario_file)));
    return hb::preset_scenario(scenario);
  }
};

struct TrainOpts {
  std::uint64_t seed = 1;
  int epochs = 50, batch = 256, patience = 5;
  double lr = 1e-3, xi = 0.7;
  bool normalize = true, no_probe_noise = false;

  void add(CLI::App& a) {
    a.add_option("--seed", seed, "training seed");
    a.add_option("--epochs", epochs, "maximum epochs per step");
    a.add_option("--batch", batch, "mini-batch size");
    a.add_option("--patience", patience, "early-stop patience (epochs)");
    a.add_option("--lr", lr, "Adam learning rate");
    a.add_option("--xi", xi, "transmit-side loss weight (two-sided models)");
    // Raw received powers sit many orders of magnitude below 1; keeping the
    // network inputs mean-normalized is the only workable default.
    a.add_flag("--normalize,!--no-normalize", normalize,
               "mean-normalize measurement vectors (default on)");
    a.add_flag("--no-probe-noise", no_probe_noise,
               "disable measurement noise during training");
  }
  void apply(const KvApply& c) {
    c.u("seed", seed);
    c.i("epochs", epochs);
    c.i("batch", batch);
    c.i("patience", patience);
    c.d("lr", lr);
    c.d("xi", xi);
    c.b("normalize", normalize);
    c.b("no-probe-noise", no_probe_noise);
  }
  hb::TrainConfig make_train() const {
    hb::TrainConfig tc;
    tc.seed = seed;
    tc.max_epochs = epochs;
    tc.batch_size = batch;
    tc.patience = patience;
    tc.learning_rate = lr;
    tc.tx_loss_weight = xi;
    tc.normalize_input = normalize;
    tc.probe_noise = !no_probe_noise;
    return tc;
  }
};

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

struct GenDataCmd {
  SystemOpts sys;
  std::string out, config;
  int samples = 25000;
  std::uint64_t data_seed = 7;

  void add(CLI::App& a) {
    sys.add(a);
    a.add_option("--out", out, "output dataset file (BFCH)")->required();
    a.add_option("--samples", samples, "number of channel samples");
    a.add_option("--data-seed", data_seed, "synthesis seed");
    a.add_option("--config", config, "key=value file overriding flags");
  }
  int run() {
    const KvApply c(config);
    sys.apply(c);
    c.s("out", out);
    c.i("samples", samples);
    c.u("data-seed", data_seed);

    const hb::SystemConfig cfg = sys.make_system();
    const hb::Scenario scen = sys.make_scenario();
    const hb::ChannelDataset ds = hb::gen_dataset(cfg, scen, samples, data_seed);
    hb::save_dataset(ds, out);
    hb::KvMap kv = cfg.to_kv();
    kv["file"] = out;
    kv["samples"] = std::to_string(ds.samples.size());
    print_kv(kv);
    return 0;
  }
};

struct LabelsCmd {
  std::string data, out, config;
  int groups = 0;
  std::uint64_t data_seed = 7;

  void add(CLI::App& a) {
    a.add_option("--data", data, "input dataset file")->required();
    a.add_option("--out", out, "output labels file")->required();
    a.add_option("--groups", groups, "group count (0 = elbow rule)");
    a.add_option("--data-seed", data_seed, "clustering seed");
    a.add_option("--config", config, "key=value file overriding flags");
  }
  int run() {
    const KvApply c(config);
    c.s("data", data);
    c.s("out", out);
    c.i("groups", groups);
    c.u("data-seed", data_seed);

    const hb::ChannelDataset ds = hb::load_dataset(data);
    const hb::DatasetLabels labels = hb::label_dataset(ds, groups, data_seed);
    hb::write_labels(labels.per_sample, out);
    hb::KvMap kv;
    kv["file"] = out;
    kv["samples"] = std::to_string(labels.per_sample.size());
    kv["groups"] = std::to_string(labels.clusters.groups());
    kv["inertia"] = hb::fmt_double(labels.clusters.inertia);
    print_kv(kv);
    return 0;
  }
};

struct TrainCmd {
  TrainOpts tr;
  std::string data, method = "hban", out, curve, split, config;
  int n1 = 4, n2 = 6, groups = 0;
  std::uint64_t data_seed = 7;

  void add(CLI::App& a) {
    tr.add(a);
    a.add_option("--data", data, "training dataset file")->required();
    a.add_option("--method", method,
                 "hban|onetier|fixed-hban (MISO) / hban|onetier|separate (MIMO)");
    a.add_option("--n1", n1, "coarse probing beams");
    a.add_option("--n2", n2, "fine probing beams per group");
    a.add_option("--split", split,
                 "separate-method budget as N1t/N2t/N1r/N2r "
                 "(default: schedule lookup on n1+n2)");
    a.add_option("--groups", groups, "group count (0 = elbow rule)");
    a.add_option("--data-seed", data_seed, "labeling seed");
    a.add_option("--out", out, "output checkpoint file (BFNN)")->required();
    a.add_option("--curve", curve, "optional training-curve TSV output");
    a.add_option("--config", config, "key=value file overriding flags");
  }

  int run() {
    const KvApply c(config);
    tr.apply(c);
    c.s("data", data);
    c.s("method", method);
    c.i("n1", n1);
    c.i("n2", n2);
    c.s("split", split);
    c.i("groups", groups);
    c.u("data-seed", data_seed);
    c.s("out", out);
    c.s("curve", curve);

    const hb::ChannelDataset ds = hb::load_dataset(data);
    const bool mimo = ds.cfg.mimo();
    const hb::TrainConfig tc = tr.make_train();
    const hb::DatasetLabels labels = hb::label_dataset(ds, groups, data_seed);
    const auto views = hb::detail::label_views(labels);

    hb::TrainCurve curve_data;
    hb::TensorBundle bundle;
    if (method == "hban" && !mimo) {
      hb::HbanMiso m(ds.cfg, n1, n2, labels.clusters.groups(),
                     tc.normalize_input, tc.seed);
      curve_data = hb::train_coarse(m, ds, views.groups, tc);
      auto fine = hb::train_fine(m, ds, views.tx, tc);
      curve_data.insert(curve_data.end(), fine.begin(), fine.end());
      bundle = m.to_bundle();
    } else if (method == "hban" && mimo) {
      hb::HbanMimo m(ds.cfg, n1, n2, labels.clusters.groups(),
                     tc.normalize_input, tc.seed);
      curve_data = hb::train_coarse(m, ds, views.groups, tc);
      auto fine = hb::train_fine(m, ds, views.pairs, tc);
      curve_data.insert(curve_data.end(), fine.begin(), fine.end());
      bundle = m.to_bundle();
    } else if (method == "onetier" && !mimo) {
      hb::OneTierPcMiso m(ds.cfg, n1 + n2, tc.normalize_input, tc.seed);
      curve_data = hb::train_one_tier(m, ds, views.tx, tc);
      bundle = m.to_bundle();
    } else if (method == "onetier" && mimo) {
      hb::OneTierPcMimo m(ds.cfg, n1 + n2, tc.normalize_input, tc.seed);
      curve_data = hb::train_one_tier(m, ds, views.pairs, tc);
      bundle = m.to_bundle();
    } else if (method == "fixed-hban" && !mimo) {
      hb::HbanMiso m = hb::make_fixed_probing_hban(ds.cfg, n1, n2,
                                                   tc.normalize_input, tc.seed);
      const auto sector = hb::sector_group_labels(
          views.tx, ds.cfg.tx_codebook_size, n1);
      curve_data = hb::train_coarse(m, ds, sector, tc);
      auto fine = hb::train_fine(m, ds, views.tx, tc);
      curve_data.insert(curve_data.end(), fine.begin(), fine.end());
      bundle = m.to_bundle();
    } else if (method == "separate" && mimo) {
      hb::SeparateBudget sb;
      if (split.empty()) {
        sb = hb::separate_split(n1 + n2);
      } else {
        const auto parts = hb::split_list(split, '/');
        if (parts.size() != 4)
          throw std::invalid_argument("--split must be N1t/N2t/N1r/N2r");
        sb = {std::stoi(parts[0]), std::stoi(parts[1]), std::stoi(parts[2]),
              std::stoi(parts[3])};
      }
      hb::SeparateHban m(ds.cfg, sb, tc.normalize_input, tc.seed);
      curve_data = m.train(ds, tc, groups, groups);
      bundle = m.to_bundle();
    } else {
      throw std::invalid_argument("method '" + method + "' is not available for " +
                                  (mimo ? std::string("MIMO") : "MISO") +
                                  " datasets");
    }

    hb::save_bundle(bundle, out);
    if (!curve.empty()) {
      std::ofstream f(curve);
      if (!f)
        throw hb::io_error(hb::io_error::Code::open_failed, "cannot open " + curve);
      hb::write_curve(curve_data, f);
    }

    hb::KvMap kv;
    kv["ckpt"] = out;
    kv["kind"] = bundle.meta.at("kind");
    kv["groups"] = std::to_string(labels.clusters.groups());
    // last validation accuracy per training phase
    std::map<std::string, double> last;
    for (const auto& p : curve_data) last[p.phase] = p.val_accuracy;
    for (const auto& [phase, acc] : last)
      kv["val_accuracy." + phase] = hb::fmt_double(acc);
    print_kv(kv);
    return 0;
  }
};

struct EvalCmd {
  std::string data, ckpt, config;
  int trials = 1, groups = 0;
  std::uint64_t eval_seed = 99, data_seed = 7;
  bool pcs = false;

  void add(CLI::App& a) {
    a.add_option("--data", data, "evaluation dataset file")->required();
    a.add_option("--ckpt", ckpt, "checkpoint file")->required();
    a.add_option("--trials", trials, "noise redraws per test sample");
    a.add_option("--groups", groups, "label group count (0 = elbow rule)");
    a.add_option("--eval-seed", eval_seed, "evaluation noise seed");
    a.add_option("--data-seed", data_seed, "labeling seed");
    a.add_flag("--pcs", pcs, "bypass the selector with ground-truth groups");
    a.add_option("--config", config, "key=value file overriding flags");
  }

  int run() {
    const KvApply c(config);
    c.s("data", data);
    c.s("ckpt", ckpt);
    c.i("trials", trials);
    c.i("groups", groups);
    c.u("eval-seed", eval_seed);
    c.u("data-seed", data_seed);
    c.b("pcs", pcs);

    const hb::ChannelDataset ds = hb::load_dataset(data);
    const hb::TensorBundle bundle = hb::load_bundle(ckpt);
    const std::string kind = bundle.meta.at("kind");
    const hb::DatasetLabels labels = hb::label_dataset(ds, groups, data_seed);
    const auto views = hb::detail::label_views(labels);

    auto check_cfg = [&](const hb::SystemConfig& mc) {
      if (!(mc == ds.cfg))
        throw std::invalid_argument(
            "checkpoint system config differs from the dataset's");
    };

    hb::EvalResult r;
    if (kind == "hban-miso") {
      hb::HbanMiso m = hb::HbanMiso::from_bundle(bundle);
      check_cfg(m.config());
      r = pcs ? hb::evaluate_pcs(m, ds, views.tx, views.groups, hb::Split::test,
                                 trials, eval_seed)
              : hb::evaluate(m, ds, views.tx, hb::Split::test, trials, eval_seed);
    } else if (kind == "hban-mimo") {
      hb::HbanMimo m = hb::HbanMimo::from_bundle(bundle);
      check_cfg(m.config());
      r = pcs ? hb::evaluate_pcs(m, ds, views.pairs, views.groups,
                                 hb::Split::test, trials, eval_seed)
              : hb::evaluate(m, ds, views.pairs, hb::Split::test, trials,
                             eval_seed);
    } else if (kind == "onetier-miso") {
      if (pcs) throw std::invalid_argument("--pcs requires an hban checkpoint");
      hb::OneTierPcMiso m = hb::OneTierPcMiso::from_bundle(bundle);
      check_cfg(m.config());
      r = hb::evaluate(m, ds, views.tx, hb::Split::test, trials, eval_seed);
    } else if (kind == "onetier-mimo") {
      if (pcs) throw std::invalid_argument("--pcs requires an hban checkpoint");
      hb::OneTierPcMimo m = hb::OneTierPcMimo::from_bundle(bundle);
      check_cfg(m.config());
      r = hb::evaluate(m, ds, views.pairs, hb::Split::test, trials, eval_seed);
    } else if (kind == "separate-hban") {
      if (pcs) throw std::invalid_argument("--pcs requires an hban checkpoint");
      hb::SeparateHban m = hb::SeparateHban::from_bundle(bundle);
      check_cfg(m.config());
      r = hb::evaluate(m, ds, views.pairs, hb::Split::test, trials, eval_seed);
    } else {
      throw std::invalid_argument("unknown checkpoint kind '" + kind + "'");
    }

    hb::KvMap kv;
    kv["accuracy"] = hb::fmt_double(r.accuracy);
    kv["tx_accuracy"] = hb::fmt_double(r.tx_accuracy);
    kv["rx_accuracy"] = hb::fmt_double(r.rx_accuracy);
    kv["mean_se"] = hb::fmt_double(r.mean_se);
    kv["sweep_count"] = std::to_string(r.sweep_count);
    kv["n"] = std::to_string(r.n);
    print_kv(kv);
    return 0;
  }
};

struct SweepCmd {
  bool noise_mode;
  SystemOpts sys;
  TrainOpts tr;
  std::string data, methods = "default", budgets, psds, budget = "6/8";
  std::string seeds = "1", out, config;
  int samples = 25000, trials = 1, groups = 0;
  std::uint64_t data_seed = 7, eval_seed = 99;

  explicit SweepCmd(bool noise) : noise_mode(noise) {}

  void add(CLI::App& a) {
    sys.add(a);
    tr.add(a);
    a.add_option("--data", data, "dataset file (omit to synthesize)");
    a.add_option("--samples", samples, "synthesis size when --data is omitted");
    a.add_option("--methods", methods,
                 "comma list of methods, or 'default' for the mode's set");
    if (noise_mode) {
      a.add_option("--budget", budget, "fixed budget as N1/N2");
      a.add_option("--psds", psds,
                   "comma list of noise PSDs in dBm/Hz (-inf allowed); "
                   "default -inf,-163,-158,-153");
    } else {
      a.add_option("--budgets", budgets,
                   "budget schedule: preset name or comma list of N1/N2");
    }
    a.add_option("--seeds", seeds, "comma list of training seeds");
    a.add_option("--trials", trials, "noise redraws per test sample");
    a.add_option("--groups", groups, "group count (0 = elbow rule)");
    a.add_option("--data-seed", data_seed, "synthesis/labeling seed");
    a.add_option("--eval-seed", eval_seed, "evaluation noise seed");
    a.add_option("--out", out, "output report directory")->required();
    a.add_option("--config", config, "key=value file overriding flags");
  }

  int run() {
    const KvApply c(config);
    sys.apply(c);
    tr.apply(c);
    c.s("data", data);
    c.i("samples", samples);
    c.s("methods", methods);
    c.s("budgets", budgets);
    c.s("budget", budget);
    c.s("psds", psds);
    c.s("seeds", seeds);
    c.i("trials", trials);
    c.i("groups", groups);
    c.u("data-seed", data_seed);
    c.u("eval-seed", eval_seed);
    c.s("out", out);

    hb::ExperimentConfig ec;
    ec.system = sys.make_system();
    ec.scenario = sys.make_scenario();
    ec.dataset_path = data;
    ec.n_samples = static_cast<std::size_t>(samples);
    const bool mimo =
        data.empty() ? ec.system.mimo() : hb::load_dataset(data).cfg.mimo();
    ec.methods = methods == "default" ? hb::default_methods(mimo)
                                      : hb::split_list(methods, ',');
    ec.seeds = parse_u64s(seeds);
    ec.trials = trials;
    ec.groups = groups;
    ec.train = tr.make_train();
    ec.out_dir = out;
    ec.data_seed = data_seed;
    ec.eval_seed = eval_seed;

    hb::Report rep;
    if (noise_mode) {
      ec.budgets = {parse_budget(budget)};
      rep = hb::noise_sweep(ec, parse_budget(budget),
                            psds.empty() ? hb::preset_noise_sweep()
                                         : parse_doubles(psds));
    } else {
      if (budgets.empty())
        budgets = mimo ? std::string("desk-mimo") : std::string("desk-miso");
      ec.budgets = parse_budgets(budgets);
      rep = hb::budget_sweep(ec);
    }
    hb::emit_report(rep, out);

    int failed = 0;
    for (const auto& cell : rep.cells) failed += cell.status != "ok";
    hb::KvMap kv;
    kv["out"] = out;
    kv["cells"] = std::to_string(rep.cells.size());
    kv["cells_failed"] = std::to_string(failed);
    kv["config_hash"] = hb::hex64(rep.cfg.config_hash());
    print_kv(kv);
    return rep.any_failed() ? 1 : 0;
  }
};

struct ReportCmd {
  std::string cells, out, config;

  void add(CLI::App& a) {
    a.add_option("--cells", cells, "cells.tsv produced by a sweep")->required();
    a.add_option("--out", out, "output directory (default: alongside input)");
    a.add_option("--config", config, "key=value file overriding flags");
  }

  int run() {
    const KvApply c(config);
    c.s("cells", cells);
    c.s("out", out);
    if (out.empty())
      out = std::filesystem::path(cells).parent_path().string();
    if (out.empty()) out = ".";

    std::ifstream f(cells);
    if (!f)
      throw hb::io_error(hb::io_error::Code::open_failed, "cannot open " + cells);
    hb::Report rep;
    rep.cells = hb::parse_cells(f);
    // Reconstruct the sweep axes so the plot tables pick the right x.
    for (const auto& cell : rep.cells) {
      bool seen_p = false, seen_b = false;
      for (double p : rep.cfg.noise_psds) seen_p |= p == cell.noise_psd;
      for (const auto& b : rep.cfg.budgets)
        seen_b |= b.n1 == cell.n1 && b.n2 == cell.n2;
      if (!seen_p) rep.cfg.noise_psds.push_back(cell.noise_psd);
      if (!seen_b) rep.cfg.budgets.push_back({cell.n1, cell.n2});
    }

    std::filesystem::create_directories(out);
    auto write_table = [&](const std::string& name, bool spectral) {
      std::ofstream t(out + "/" + name, std::ios::binary);
      if (!t)
        throw hb::io_error(hb::io_error::Code::open_failed,
                           "cannot open " + out + "/" + name);
      hb::write_plot_table(rep, spectral, t);
    };
    write_table("accuracy.tsv", false);
    write_table("spectral_efficiency.tsv", true);

    int failed = 0;
    for (const auto& cell : rep.cells) failed += cell.status != "ok";
    hb::KvMap kv;
    kv["out"] = out;
    kv["cells"] = std::to_string(rep.cells.size());
    kv["cells_failed"] = std::to_string(failed);
    print_kv(kv);
    return 0;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hbalign: learned hierarchical beam alignment experiments"};
  app.require_subcommand(1);

  GenDataCmd gen;
  LabelsCmd lab;
  TrainCmd train;
  EvalCmd eval;
  SweepCmd bsweep(false), nsweep(true);
  ReportCmd report;

  gen.add(*app.add_subcommand("gen-data", "synthesize a channel dataset"));
  lab.add(*app.add_subcommand("labels", "beam labels + k-means groups"));
  train.add(*app.add_subcommand("train", "train one alignment model"));
  eval.add(*app.add_subcommand("eval", "evaluate a checkpoint"));
  bsweep.add(*app.add_subcommand("budget-sweep", "accuracy/SE vs budget"));
  nsweep.add(*app.add_subcommand("noise-sweep", "accuracy/SE vs noise PSD"));
  report.add(*app.add_subcommand("report", "re-aggregate plot tables"));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (app.got_subcommand("gen-data")) return gen.run();
    if (app.got_subcommand("labels")) return lab.run();
    if (app.got_subcommand("train")) return train.run();
    if (app.got_subcommand("eval")) return eval.run();
    if (app.got_subcommand("budget-sweep")) return bsweep.run();
    if (app.got_subcommand("noise-sweep")) return nsweep.run();
    if (app.got_subcommand("report")) return report.run();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
