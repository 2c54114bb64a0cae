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
// Experiment orchestration: a grid of (method x budget x noise PSD x seed)
// cells, each training/evaluating one alignment method, aggregated into
// deterministic delimited-text reports.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hbalign/baselines.hpp"
#include "hbalign/channel.hpp"
#include "hbalign/hban.hpp"
#include "hbalign/hban_mimo.hpp"
#include "hbalign/variants.hpp"

namespace hbalign {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct Budget {
  int n1 = 0, n2 = 0;
  int total() const { return n1 + n2; }
};

struct ExperimentConfig {
  SystemConfig system;
  Scenario scenario;
  std::string dataset_path;        // when set, loaded instead of synthesized
  std::size_t n_samples = 25000;   // synthesis size
  std::vector<std::string> methods;
  std::vector<Budget> budgets;
  std::vector<double> noise_psds;  // empty -> the system's own PSD only
  std::vector<std::uint64_t> seeds = {1};
  int trials = 1;
  int groups = 0;  // 0 -> elbow-selected per dataset
  TrainConfig train;
  std::string out_dir;  // empty -> no checkpoints persisted
  std::uint64_t data_seed = 7;
  std::uint64_t eval_seed = 99;

  void validate() const {
    system.validate();
    scenario.validate();
    if (methods.empty()) throw std::invalid_argument("experiment: no methods");
    if (budgets.empty()) throw std::invalid_argument("experiment: no budgets");
    for (const auto& b : budgets)
      if (b.n1 < 1 || b.n2 < b.n1)
        throw std::invalid_argument("experiment: budget must satisfy 1 <= n1 <= n2");
    if (seeds.empty()) throw std::invalid_argument("experiment: no seeds");
    if (trials < 1) throw std::invalid_argument("experiment: trials < 1");
    if (dataset_path.empty() && n_samples < 10)
      throw std::invalid_argument("experiment: n_samples < 10");
    train.validate();
  }

  // Canonical serialization; also the config-hash domain.  The output
  // directory is deployment detail and deliberately excluded.
  KvMap to_kv() const {
    KvMap kv;
    for (const auto& [k, v] : system.to_kv()) kv["system." + k] = v;
    for (const auto& [k, v] : scenario.to_kv()) kv["scenario." + k] = v;
    kv["dataset_path"] = dataset_path;
    kv["n_samples"] = std::to_string(n_samples);
    std::string m;
    for (std::size_t i = 0; i < methods.size(); ++i)
      m += (i ? "," : "") + methods[i];
    kv["methods"] = m;
    std::string b;
    for (std::size_t i = 0; i < budgets.size(); ++i)
      b += (i ? std::string(";") : std::string()) + std::to_string(budgets[i].n1) +
           "/" + std::to_string(budgets[i].n2);
    kv["budgets"] = b;
    std::string p;
    for (std::size_t i = 0; i < noise_psds.size(); ++i)
      p += (i ? std::string(",") : std::string()) + fmt_double(noise_psds[i]);
    kv["noise_psds"] = p;
    std::string s;
    for (std::size_t i = 0; i < seeds.size(); ++i)
      s += (i ? std::string(",") : std::string()) + std::to_string(seeds[i]);
    kv["seeds"] = s;
    kv["trials"] = std::to_string(trials);
    kv["groups"] = std::to_string(groups);
    kv["data_seed"] = std::to_string(data_seed);
    kv["eval_seed"] = std::to_string(eval_seed);
    kv["train.batch_size"] = std::to_string(train.batch_size);
    kv["train.max_epochs"] = std::to_string(train.max_epochs);
    kv["train.learning_rate"] = fmt_double(train.learning_rate);
    kv["train.tx_loss_weight"] = fmt_double(train.tx_loss_weight);
    kv["train.patience"] = std::to_string(train.patience);
    kv["train.probe_noise"] = train.probe_noise ? "1" : "0";
    kv["train.normalize_input"] = train.normalize_input ? "1" : "0";
    return kv;
  }

  std::uint64_t config_hash() const { return fnv1a64(emit_kv(to_kv())); }
};

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

// Full-scale systems follow the reference link parameters; the desk-scale
// systems shrink every dimension for fast CPU experiments and CI.
inline SystemConfig preset_system(const std::string& name) {
  SystemConfig c;
  if (name == "miso-full") {
    c.tx_antennas = 64;
    c.rx_antennas = 1;
    c.tx_codebook_size = 128;
    c.rx_codebook_size = 1;
    c.tx_power_dbm = 10.0;
  } else if (name == "mimo-full") {
    c.tx_antennas = 64;
    c.rx_antennas = 16;
    c.tx_codebook_size = 128;
    c.rx_codebook_size = 32;
    c.tx_power_dbm = 5.0;
  } else if (name == "desk-miso") {
    c.tx_antennas = 16;
    c.rx_antennas = 1;
    c.tx_codebook_size = 32;
    c.rx_codebook_size = 1;
    c.tx_power_dbm = 10.0;
  } else if (name == "desk-mimo") {
    c.tx_antennas = 16;
    c.rx_antennas = 4;
    c.tx_codebook_size = 32;
    c.rx_codebook_size = 8;
    c.tx_power_dbm = 5.0;
  } else {
    throw std::invalid_argument("unknown system preset '" + name + "'");
  }
  return c.finalize();
}

// "blobs": four well-separated angular hot spots (clusterable population);
// "uniform": one blob spanning the whole visible sine range.
inline Scenario preset_scenario(const std::string& name) {
  Scenario s;
  if (name == "blobs") {
    s.blobs = {ScenarioBlob{-0.72, 0.10, -0.60, 0.12},
               ScenarioBlob{-0.28, 0.09, -0.10, 0.10},
               ScenarioBlob{0.22, 0.10, 0.45, 0.11},
               ScenarioBlob{0.70, 0.09, 0.80, 0.08}};
  } else if (name == "uniform") {
    s.blobs = {ScenarioBlob{0.0, 0.95, 0.0, 0.95}};
  } else {
    throw std::invalid_argument("unknown scenario preset '" + name + "'");
  }
  return s;
}

inline std::vector<Budget> preset_budgets(const std::string& name) {
  if (name == "full-miso")
    return {{3, 3}, {4, 4}, {4, 6}, {6, 6}, {6, 8}, {6, 10}, {6, 12}, {6, 14}};
  if (name == "full-mimo")
    return {{3, 3}, {4, 4}, {4, 6}, {4, 8}, {4, 10}, {4, 12}, {4, 14}, {4, 16}};
  if (name == "desk-miso") return {{2, 2}, {3, 3}, {4, 4}, {4, 6}};
  if (name == "desk-mimo") return {{2, 2}, {3, 3}, {4, 4}, {4, 8}};
  throw std::invalid_argument("unknown budget preset '" + name + "'");
}

// Default 4-point noise sweep; -inf is the exact zero-noise point.
inline std::vector<double> preset_noise_sweep() {
  return {-std::numeric_limits<double>::infinity(), -163.0, -158.0, -153.0};
}

// Per-side budget split for the separate two-sided method, keyed by the total
// measurement budget (reference schedule).
inline SeparateBudget separate_split(int total) {
  switch (total) {
    case 6: return {1, 3, 1, 1};
    case 8: return {2, 3, 1, 2};
    case 10: return {2, 4, 2, 2};
    case 12: return {2, 5, 2, 3};
    case 14: return {3, 5, 3, 3};
    case 16: return {4, 6, 3, 3};
    case 18: return {4, 7, 3, 4};
    case 20: return {4, 8, 4, 4};
    default:
      throw std::invalid_argument("separate: no budget split for total " +
                                  std::to_string(total));
  }
}

inline std::vector<std::string> default_methods(bool mimo) {
  if (mimo)
    return {"hban", "separate", "onetier", "exhaustive",
            "two-tier-joint", "two-tier-hybrid", "binary"};
  return {"hban", "onetier", "fixed-hban", "exhaustive", "two-tier", "binary"};
}

inline bool method_is_learned(const std::string& m) {
  return m == "hban" || m == "hban-pcs" || m == "onetier" ||
         m == "fixed-hban" || m == "separate";
}

inline bool method_known(const std::string& m, bool mimo) {
  if (m == "hban" || m == "hban-pcs" || m == "onetier" || m == "exhaustive" ||
      m == "binary")
    return true;
  if (mimo) return m == "separate" || m == "two-tier-joint" || m == "two-tier-hybrid";
  return m == "fixed-hban" || m == "two-tier";
}

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

struct ReportCell {
  std::string method;
  int n1 = 0, n2 = 0;
  double noise_psd = 0.0;
  std::uint64_t seed = 0;
  double accuracy = 0.0;
  double mean_se = 0.0;
  int sweep_count = 0;
  std::string status;  // "ok" or the failure reason
};

struct Report {
  ExperimentConfig cfg;
  std::vector<ReportCell> cells;

  bool any_failed() const {
    for (const auto& c : cells)
      if (c.status != "ok") return true;
    return false;
  }
};

namespace detail {

inline std::string sanitize_status(std::string s) {
  for (char& c : s)
    if (c == '\t' || c == '\n' || c == '\r') c = ' ';
  return s.empty() ? "error" : s;
}

}  // namespace detail

inline void write_cells(const Report& rep, std::ostream& os) {
  os << "# hbalign-report v1\n";
  os << "# method\tn1\tn2\tnoise_psd_dbm_hz\tseed\taccuracy\tmean_se\t"
        "sweep_count\tstatus\n";
  for (const auto& c : rep.cells)
    os << c.method << '\t' << c.n1 << '\t' << c.n2 << '\t'
       << fmt_double(c.noise_psd) << '\t' << c.seed << '\t'
       << fmt_double(c.accuracy) << '\t' << fmt_double(c.mean_se) << '\t'
       << c.sweep_count << '\t' << c.status << '\n';
}

inline std::vector<ReportCell> parse_cells(std::istream& is) {
  std::vector<ReportCell> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> f = split_list(line, '\t');
    if (f.size() != 9) throw std::invalid_argument("report: malformed row");
    ReportCell c;
    c.method = f[0];
    c.n1 = std::stoi(f[1]);
    c.n2 = std::stoi(f[2]);
    c.noise_psd = std::stod(f[3]);
    c.seed = static_cast<std::uint64_t>(std::stoull(f[4]));
    c.accuracy = std::stod(f[5]);
    c.mean_se = std::stod(f[6]);
    c.sweep_count = std::stoi(f[7]);
    c.status = f[8];
    out.push_back(c);
  }
  return out;
}

// Plot tables: one row per (x, series) with mean and sample standard
// deviation across seeds (failed cells are excluded from aggregation).
// x is the noise PSD when the sweep has several PSDs, else the budget total.
inline void write_plot_table(const Report& rep, bool spectral,
                             std::ostream& os) {
  const bool axis_noise = rep.cfg.noise_psds.size() > 1;
  os << "# hbalign-plot v1\n";
  os << "# x\tseries\tmean\tstddev\tn_seeds\n";
  std::vector<std::pair<std::string, std::string>> order;  // (x, series)
  std::map<std::pair<std::string, std::string>, std::vector<double>> groups;
  for (const auto& c : rep.cells) {
    if (c.status != "ok") continue;
    const std::string x =
        axis_noise ? fmt_double(c.noise_psd) : std::to_string(c.n1 + c.n2);
    std::string series = c.method;
    if (axis_noise && rep.cfg.budgets.size() > 1)
      series += "|b" + std::to_string(c.n1 + c.n2);
    if (!axis_noise && rep.cfg.noise_psds.size() > 1)
      series += "|p" + fmt_double(c.noise_psd);
    const auto key = std::make_pair(x, series);
    if (groups.find(key) == groups.end()) order.push_back(key);
    groups[key].push_back(spectral ? c.mean_se : c.accuracy);
  }
  for (const auto& key : order) {
    const auto& vals = groups[key];
    double mean = 0.0;
    for (double v : vals) mean += v;
    mean /= static_cast<double>(vals.size());
    double var = 0.0;
    if (vals.size() > 1) {
      for (double v : vals) var += (v - mean) * (v - mean);
      var /= static_cast<double>(vals.size() - 1);
    }
    os << key.first << '\t' << key.second << '\t' << fmt_double(mean) << '\t'
       << fmt_double(std::sqrt(var)) << '\t' << vals.size() << '\n';
  }
}

inline void emit_report(const Report& rep, const std::string& dir) {
  std::filesystem::create_directories(dir);
  auto open = [&](const std::string& name) {
    std::ofstream f(dir + "/" + name, std::ios::binary);
    if (!f) throw io_error(io_error::Code::open_failed,
                           "cannot open " + dir + "/" + name);
    return f;
  };
  {
    auto f = open("cells.tsv");
    write_cells(rep, f);
  }
  {
    auto f = open("accuracy.tsv");
    write_plot_table(rep, false, f);
  }
  {
    auto f = open("spectral_efficiency.tsv");
    write_plot_table(rep, true, f);
  }
  {
    auto f = open("summary.txt");
    f << "# hbalign-summary v1\n";
    KvMap kv = rep.cfg.to_kv();
    kv["config_hash"] = hex64(rep.cfg.config_hash());
    int failed = 0;
    for (const auto& c : rep.cells) failed += c.status != "ok";
    kv["cells"] = std::to_string(rep.cells.size());
    kv["cells_failed"] = std::to_string(failed);
    f << emit_kv(kv);
  }
}

// ---------------------------------------------------------------------------
// Cell runners
// ---------------------------------------------------------------------------

namespace detail {

// Classical codebooks/hierarchies shared by every cell.  Hierarchy
// construction can fail (e.g. a non-power-of-two codebook for the bisection
// search); failures are kept as messages so only the dependent cells fail.
struct ClassicalBooks {
  Codebook tx, rx;
  HierarchicalCodebook two_tier_t, two_tier_r;
  HierarchicalCodebook binary_t, binary_r;
  std::string two_tier_err, binary_err;
};

inline int isqrt_floor(int n) {
  int r = static_cast<int>(std::sqrt(static_cast<double>(n)));
  while ((r + 1) * (r + 1) <= n) ++r;
  while (r * r > n) --r;
  return r;
}

// Wide-tier sizes for the two-sided two-tier searches: both sides keep the
// same child fan-out k ~ (n_t n_r)^(1/4), mirroring the reference sizing
// (n_t=128, n_r=32 -> wide 16x4, children 8x8).
inline int pair_fanout(int n_t, int n_r) {
  const int k = static_cast<int>(
      std::llround(std::pow(static_cast<double>(n_t) * n_r, 0.25)));
  return k < 2 ? 2 : k;
}

inline ClassicalBooks build_books(const SystemConfig& sys, bool need_two_tier,
                                  bool need_binary) {
  ClassicalBooks b;
  b.tx = dft_codebook(sys.tx_antennas, sys.tx_codebook_size, sys.spacing);
  if (sys.mimo())
    b.rx = dft_codebook(sys.rx_antennas, sys.rx_codebook_size, sys.spacing);
  if (need_two_tier) {
    try {
      if (sys.mimo()) {
        const int k = pair_fanout(sys.tx_codebook_size, sys.rx_codebook_size);
        const int nw_t = std::max(1, sys.tx_codebook_size / k);
        const int nw_r = std::max(1, sys.rx_codebook_size / k);
        b.two_tier_t = build_two_tier(sys.tx_antennas, sys.tx_codebook_size, nw_t);
        b.two_tier_r = build_two_tier(sys.rx_antennas, sys.rx_codebook_size, nw_r);
      } else {
        b.two_tier_t = build_two_tier(sys.tx_antennas, sys.tx_codebook_size,
                                      isqrt_floor(sys.tx_codebook_size));
      }
    } catch (const std::exception& e) {
      b.two_tier_err = e.what();
    }
  }
  if (need_binary) {
    try {
      b.binary_t = build_binary(sys.tx_antennas, sys.tx_codebook_size);
      if (sys.mimo())
        b.binary_r = build_binary(sys.rx_antennas, sys.rx_codebook_size);
    } catch (const std::exception& e) {
      b.binary_err = e.what();
    }
  }
  return b;
}

// Shared evaluation loop for the classical searches; the per-sample search
// functor draws its noise from the same per-(sample, trial) streams as the
// learned methods so comparisons are noise-paired.
template <typename Fn>
EvalResult eval_classical(const ChannelDataset& ds,
                          const std::vector<SampleLabels>& labels, int trials,
                          std::uint64_t eval_seed, const Codebook& tx_book,
                          const Codebook* rx_book, Fn&& search) {
  const std::vector<int> idx = ds.indices_of(Split::test);
  EvalResult res;
  double se_sum = 0.0;
  int correct = 0, correct_t = 0, correct_r = 0, total = 0;
  for (int i : idx) {
    const auto& s = ds.samples[static_cast<std::size_t>(i)];
    for (int t = 0; t < trials; ++t) {
      Rng rng(derive_seed(eval_seed, stream::evalnoise, s.sample_id,
                          static_cast<std::uint64_t>(t)));
      const BaselineResult r = search(s, rng);
      res.sweep_count = r.sweep_count;
      const BeamLabel& lab = labels[static_cast<std::size_t>(i)].beam;
      const bool ok_t = r.beam.tx_index == lab.tx_index;
      const bool ok_r = r.beam.rx_index == lab.rx_index;
      correct_t += ok_t;
      correct_r += ok_r;
      correct += ok_t && ok_r;
      if (rx_book)
        se_sum += se_of_choice_mimo(
            s, tx_book.beams[static_cast<std::size_t>(r.beam.tx_index)],
            rx_book->beams[static_cast<std::size_t>(r.beam.rx_index)], ds.cfg);
      else
        se_sum += se_of_choice_miso(
            s, tx_book.beams[static_cast<std::size_t>(r.beam.tx_index)],
            ds.cfg);
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

struct LabelViews {
  std::vector<int> groups;
  std::vector<int> tx;
  std::vector<BeamLabel> pairs;
};

inline LabelViews label_views(const DatasetLabels& labels) {
  LabelViews v;
  v.groups.reserve(labels.per_sample.size());
  v.tx.reserve(labels.per_sample.size());
  v.pairs.reserve(labels.per_sample.size());
  for (const auto& l : labels.per_sample) {
    v.groups.push_back(l.group);
    v.tx.push_back(l.beam.tx_index);
    v.pairs.push_back(l.beam);
  }
  return v;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Experiment runner
// ---------------------------------------------------------------------------

inline Report run_experiment(const ExperimentConfig& ec) {
  ec.validate();
  const bool mimo = ec.system.mimo();
  for (const auto& m : ec.methods)
    if (!method_known(m, mimo))
      throw std::invalid_argument("experiment: unknown method '" + m + "'");
  if (!ec.dataset_path.empty() && !std::filesystem::exists(ec.dataset_path))
    throw std::invalid_argument("experiment: dataset file not found: " +
                                ec.dataset_path);
  if (!ec.out_dir.empty()) std::filesystem::create_directories(ec.out_dir);

  Report rep;
  rep.cfg = ec;

  // Channel synthesis never consumes noise draws, so one dataset (and one
  // labeling pass) serves every noise level; only cfg.sigma^2 changes.
  ChannelDataset ds;
  if (ec.dataset_path.empty())
    ds = gen_dataset(ec.system, ec.scenario, static_cast<int>(ec.n_samples),
                     ec.data_seed);
  else
    ds = load_dataset(ec.dataset_path);
  const SystemConfig base_cfg = ds.cfg;
  const std::vector<double> psds =
      ec.noise_psds.empty() ? std::vector<double>{base_cfg.noise_psd_dbm_hz}
                            : ec.noise_psds;

  const DatasetLabels labels = label_dataset(ds, ec.groups, ec.data_seed);
  const detail::LabelViews views = detail::label_views(labels);

  bool need_two_tier = false, need_binary = false;
  for (const auto& m : ec.methods) {
    if (m == "two-tier" || m == "two-tier-joint" || m == "two-tier-hybrid")
      need_two_tier = true;
    if (m == "binary") need_binary = true;
  }
  const detail::ClassicalBooks books =
      detail::build_books(base_cfg, need_two_tier, need_binary);

  for (std::size_t pi = 0; pi < psds.size(); ++pi) {
    const SystemConfig sys = base_cfg.with_noise_psd(psds[pi]);
    ds.cfg = sys;

    for (std::uint64_t seed : ec.seeds) {
      // Trained models shared between "hban" and "hban-pcs" cells.
      std::map<std::string, HbanMiso> miso_cache;
      std::map<std::string, HbanMimo> mimo_cache;
      TrainConfig tc = ec.train;
      tc.seed = seed;
      const std::uint64_t ev = derive_seed(ec.eval_seed, stream::evalnoise, seed);

      for (const Budget& budget : ec.budgets) {
        auto hban_key = std::to_string(budget.n1) + "x" + std::to_string(budget.n2);
        auto ckpt_path = [&](const std::string& method) {
          return ec.out_dir + "/ckpt-" + method + "-b" +
                 std::to_string(budget.n1) + "x" + std::to_string(budget.n2) +
                 "-p" + std::to_string(pi) + "-s" + std::to_string(seed) +
                 ".bfnn";
        };

        for (const std::string& method : ec.methods) {
          ReportCell cell;
          cell.method = method;
          cell.n1 = budget.n1;
          cell.n2 = budget.n2;
          cell.noise_psd = psds[pi];
          cell.seed = seed;
          try {
            EvalResult r;
            if (method == "hban" || method == "hban-pcs") {
              if (!mimo) {
                auto it = miso_cache.find(hban_key);
                if (it == miso_cache.end()) {
                  HbanMiso model(sys, budget.n1, budget.n2,
                                 labels.clusters.groups(), tc.normalize_input,
                                 seed);
                  train_coarse(model, ds, views.groups, tc);
                  train_fine(model, ds, views.tx, tc);
                  if (!ec.out_dir.empty())
                    save_bundle(model.to_bundle(), ckpt_path("hban"));
                  it = miso_cache.emplace(hban_key, std::move(model)).first;
                }
                r = method == "hban"
                        ? evaluate(it->second, ds, views.tx, Split::test,
                                   ec.trials, ev)
                        : evaluate_pcs(it->second, ds, views.tx, views.groups,
                                       Split::test, ec.trials, ev);
              } else {
                auto it = mimo_cache.find(hban_key);
                if (it == mimo_cache.end()) {
                  HbanMimo model(sys, budget.n1, budget.n2,
                                 labels.clusters.groups(), tc.normalize_input,
                                 seed);
                  train_coarse(model, ds, views.groups, tc);
                  train_fine(model, ds, views.pairs, tc);
                  if (!ec.out_dir.empty())
                    save_bundle(model.to_bundle(), ckpt_path("hban"));
                  it = mimo_cache.emplace(hban_key, std::move(model)).first;
                }
                r = method == "hban"
                        ? evaluate(it->second, ds, views.pairs, Split::test,
                                   ec.trials, ev)
                        : evaluate_pcs(it->second, ds, views.pairs,
                                       views.groups, Split::test, ec.trials,
                                       ev);
              }
            } else if (method == "onetier") {
              if (!mimo) {
                OneTierPcMiso model(sys, budget.total(), tc.normalize_input,
                                    seed);
                train_one_tier(model, ds, views.tx, tc);
                if (!ec.out_dir.empty())
                  save_bundle(model.to_bundle(), ckpt_path(method));
                r = evaluate(model, ds, views.tx, Split::test, ec.trials, ev);
              } else {
                OneTierPcMimo model(sys, budget.total(), tc.normalize_input,
                                    seed);
                train_one_tier(model, ds, views.pairs, tc);
                if (!ec.out_dir.empty())
                  save_bundle(model.to_bundle(), ckpt_path(method));
                r = evaluate(model, ds, views.pairs, Split::test, ec.trials, ev);
              }
            } else if (method == "fixed-hban") {
              HbanMiso model = make_fixed_probing_hban(
                  sys, budget.n1, budget.n2, tc.normalize_input, seed);
              const std::vector<int> sector_groups = sector_group_labels(
                  views.tx, sys.tx_codebook_size, budget.n1);
              train_coarse(model, ds, sector_groups, tc);
              train_fine(model, ds, views.tx, tc);
              if (!ec.out_dir.empty())
                save_bundle(model.to_bundle(), ckpt_path(method));
              r = evaluate(model, ds, views.tx, Split::test, ec.trials, ev);
            } else if (method == "separate") {
              SeparateHban model(sys, separate_split(budget.total()),
                                 tc.normalize_input, seed);
              model.train(ds, tc, ec.groups, ec.groups);
              if (!ec.out_dir.empty())
                save_bundle(model.to_bundle(), ckpt_path(method));
              r = evaluate(model, ds, views.pairs, Split::test, ec.trials, ev);
            } else if (method == "exhaustive") {
              if (!mimo)
                r = detail::eval_classical(
                    ds, labels.per_sample, ec.trials, ev, books.tx, nullptr,
                    [&](const ChannelSample& s, Rng& rng) {
                      return exhaustive_search(s, books.tx, sys, rng);
                    });
              else
                r = detail::eval_classical(
                    ds, labels.per_sample, ec.trials, ev, books.tx, &books.rx,
                    [&](const ChannelSample& s, Rng& rng) {
                      return exhaustive_search_mimo(s, books.tx, books.rx, sys,
                                                    rng);
                    });
            } else if (method == "two-tier") {
              if (!books.two_tier_err.empty())
                throw std::runtime_error(books.two_tier_err);
              r = detail::eval_classical(
                  ds, labels.per_sample, ec.trials, ev, books.tx, nullptr,
                  [&](const ChannelSample& s, Rng& rng) {
                    return two_tier_search(s, books.two_tier_t, sys, rng);
                  });
            } else if (method == "two-tier-joint") {
              if (!books.two_tier_err.empty())
                throw std::runtime_error(books.two_tier_err);
              r = detail::eval_classical(
                  ds, labels.per_sample, ec.trials, ev, books.tx, &books.rx,
                  [&](const ChannelSample& s, Rng& rng) {
                    return two_tier_joint(s, books.two_tier_t, books.two_tier_r,
                                          sys, rng);
                  });
            } else if (method == "two-tier-hybrid") {
              if (!books.two_tier_err.empty())
                throw std::runtime_error(books.two_tier_err);
              r = detail::eval_classical(
                  ds, labels.per_sample, ec.trials, ev, books.tx, &books.rx,
                  [&](const ChannelSample& s, Rng& rng) {
                    return two_tier_hybrid(s, books.two_tier_t,
                                           books.two_tier_r, sys, rng);
                  });
            } else {  // "binary"
              if (!books.binary_err.empty())
                throw std::runtime_error(books.binary_err);
              if (!mimo)
                r = detail::eval_classical(
                    ds, labels.per_sample, ec.trials, ev, books.tx, nullptr,
                    [&](const ChannelSample& s, Rng& rng) {
                      return binary_search(s, books.binary_t, sys, rng);
                    });
              else
                r = detail::eval_classical(
                    ds, labels.per_sample, ec.trials, ev, books.tx, &books.rx,
                    [&](const ChannelSample& s, Rng& rng) {
                      return binary_search_mimo(s, books.binary_t,
                                                books.binary_r, sys, rng);
                    });
            }
            cell.accuracy = r.accuracy;
            cell.mean_se = r.mean_se;
            cell.sweep_count = r.sweep_count;
            cell.status = "ok";
          } catch (const std::exception& e) {
            cell.status = detail::sanitize_status(e.what());
          }
          rep.cells.push_back(cell);
        }
      }
    }
  }
  return rep;
}

// Accuracy/SE versus measurement budget at the system's own noise level.
inline Report budget_sweep(ExperimentConfig ec) {
  ec.noise_psds.clear();
  return run_experiment(ec);
}

// Accuracy/SE versus noise PSD at one fixed budget.
inline Report noise_sweep(ExperimentConfig ec, Budget budget = {6, 8},
                          std::vector<double> psds = preset_noise_sweep()) {
  ec.budgets = {budget};
  ec.noise_psds = std::move(psds);
  return run_experiment(ec);
}

}  // namespace hbalign
