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
// Minimal differentiable kernel: exactly the layers, losses and optimizer the
// beam-alignment networks need, with hand-derived reverse-mode gradients.
// Each layer caches its forward activations; calling backward() in reverse
// order accumulates parameter gradients.  Single-threaded by design.

#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "hbalign/codebook.hpp"
#include "hbalign/mat.hpp"
#include "hbalign/rng.hpp"

namespace hbalign {

// ---------------------------------------------------------------------------
// Parameters and batches
// ---------------------------------------------------------------------------

struct Param {
  std::string name;
  Mat value;
  Mat grad;
  bool trainable = true;

  Param() = default;
  Param(std::string n, int r, int c)
      : name(std::move(n)), value(r, c), grad(r, c) {}

  void zero_grad() { grad.fill(0.0); }
};

// Batch of complex values split into real/imag planes (rows = samples).
struct CBatch {
  Mat re, im;

  CBatch() = default;
  CBatch(int rows, int cols) : re(rows, cols), im(rows, cols) {}
  int rows() const { return re.rows; }
  int cols() const { return re.cols; }
};

// ---------------------------------------------------------------------------
// Probing layer (single-antenna users)
// ---------------------------------------------------------------------------
//
// A trainable probing codebook V = (1/sqrt(m)) (cos(theta) + j sin(theta)),
// one column per probing beam.  The forward pass realizes the pilot sweep
// y_i = sqrt(rho) h^H v_i + n_i over a batch of channels, expanded into real
// arithmetic.  Noise is pre-sampled by the caller so that draws can be shared
// with the non-differentiable sweep simulator.

class ProbingLayer {
 public:
  ProbingLayer() = default;
  ProbingLayer(std::string name, int antennas, int beams, Rng& init_rng)
      : theta_(std::move(name), antennas, beams) {
    for (auto& v : theta_.value.d)
      v = init_rng.uniform(-std::numbers::pi, std::numbers::pi);
  }

  Param& theta() { return theta_; }
  const Param& theta() const { return theta_; }
  int antennas() const { return theta_.value.rows; }
  int beam_count() const { return theta_.value.cols; }

  // The current probing beams as constant-modulus vectors.
  Codebook beams() const {
    Codebook cb;
    cb.kind = CodebookKind::probing;
    const int m = antennas();
    const double scale = 1.0 / std::sqrt(static_cast<double>(m));
    for (int i = 0; i < beam_count(); ++i) {
      Beam b;
      b.w.resize(static_cast<std::size_t>(m));
      for (int k = 0; k < m; ++k) {
        const double t = theta_.value(k, i);
        b.w[static_cast<std::size_t>(k)] =
            scale * cplx{std::cos(t), std::sin(t)};
      }
      cb.beams.push_back(std::move(b));
    }
    return cb;
  }

  // Adopts the phases of an existing constant-modulus codebook.
  void set_from_codebook(const Codebook& cb) {
    if (cb.size() != beam_count() || cb.antennas() != antennas())
      throw std::invalid_argument("probing layer: codebook shape mismatch");
    for (int i = 0; i < beam_count(); ++i)
      for (int k = 0; k < antennas(); ++k) {
        const cplx w =
            cb.beams[static_cast<std::size_t>(i)].w[static_cast<std::size_t>(k)];
        theta_.value(k, i) = std::atan2(w.imag(), w.real());
      }
  }

  // h: channel batch (B x antennas); noise: per-beam noise (B x beams).
  CBatch forward(const CBatch& h, const CBatch& noise, double tx_power) {
    const int bsz = h.rows(), m = antennas(), n = beam_count();
    if (h.cols() != m) throw std::invalid_argument("probing: channel width");
    if (noise.rows() != bsz || noise.cols() != n)
      throw std::invalid_argument("probing: noise shape");
    h_cache_ = h;
    scale_ = std::sqrt(tx_power) / std::sqrt(static_cast<double>(m));
    CBatch y(bsz, n);
    for (int b = 0; b < bsz; ++b)
      for (int i = 0; i < n; ++i) {
        double re = 0.0, im = 0.0;
        for (int k = 0; k < m; ++k) {
          const double c = std::cos(theta_.value(k, i));
          const double s = std::sin(theta_.value(k, i));
          const double hr = h.re(b, k), hi = h.im(b, k);
          // conj(h_k) * v_k expanded: (hr - j hi)(c + j s)
          re += hr * c + hi * s;
          im += hr * s - hi * c;
        }
        y.re(b, i) = scale_ * re + noise.re(b, i);
        y.im(b, i) = scale_ * im + noise.im(b, i);
      }
    return y;
  }

  void backward(const CBatch& gy) {
    const int bsz = h_cache_.rows(), m = antennas(), n = beam_count();
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < m; ++k) {
        const double c = std::cos(theta_.value(k, i));
        const double s = std::sin(theta_.value(k, i));
        double acc = 0.0;
        for (int b = 0; b < bsz; ++b) {
          const double hr = h_cache_.re(b, k), hi = h_cache_.im(b, k);
          // d y / d theta = scale * conj(h_k) * j * v_k
          const double dre = scale_ * (-hr * s + hi * c);
          const double dim = scale_ * (hr * c + hi * s);
          acc += gy.re(b, i) * dre + gy.im(b, i) * dim;
        }
        theta_.grad(k, i) += acc;
      }
  }

 private:
  Param theta_;
  CBatch h_cache_;
  double scale_ = 1.0;
};

// ---------------------------------------------------------------------------
// Beam-pair probing layer (multi-antenna users)
// ---------------------------------------------------------------------------
//
// Trainable transmit/receive codebook pair (theta for v_i, phi for w_i).
// Pair i measures y_i = sqrt(rho) w_i^H H^H v_i + w_i^H n_i, where n_i is a
// fresh receive-antenna noise vector; the combined noise therefore also
// carries gradient onto phi.

class PairProbingLayer {
 public:
  PairProbingLayer() = default;
  PairProbingLayer(const std::string& name, int tx_antennas, int rx_antennas,
                   int pairs, Rng& init_rng)
      : theta_(name + ".tx", tx_antennas, pairs),
        phi_(name + ".rx", rx_antennas, pairs) {
    for (auto& v : theta_.value.d)
      v = init_rng.uniform(-std::numbers::pi, std::numbers::pi);
    for (auto& v : phi_.value.d)
      v = init_rng.uniform(-std::numbers::pi, std::numbers::pi);
  }

  Param& theta() { return theta_; }
  Param& phi() { return phi_; }
  const Param& theta() const { return theta_; }
  const Param& phi() const { return phi_; }
  int tx_antennas() const { return theta_.value.rows; }
  int rx_antennas() const { return phi_.value.rows; }
  int pair_count() const { return theta_.value.cols; }

  Codebook tx_beams() const { return beams_of(theta_); }
  Codebook rx_beams() const { return beams_of(phi_); }

  void set_from_codebooks(const Codebook& tx, const Codebook& rx) {
    set_param_from(theta_, tx);
    set_param_from(phi_, rx);
  }

  // h: channel batch (B x tx*rx, column-major over receive antennas, i.e.
  // entry (p, q) flattens to q*tx + p).  noise: (B x pairs*rx), pair-major
  // (pair i antenna q flattens to i*rx + q).
  CBatch forward(const CBatch& h, const CBatch& noise, double tx_power) {
    const int bsz = h.rows(), mt = tx_antennas(), mr = rx_antennas(),
              n = pair_count();
    if (h.cols() != mt * mr) throw std::invalid_argument("pair probing: h shape");
    if (noise.rows() != bsz || noise.cols() != n * mr)
      throw std::invalid_argument("pair probing: noise shape");
    sqrt_rho_ = std::sqrt(tx_power);
    bsz_ = bsz;

    const double ts = 1.0 / std::sqrt(static_cast<double>(mt));
    const double rs = 1.0 / std::sqrt(static_cast<double>(mr));
    v_re_ = Mat(mt, n);
    v_im_ = Mat(mt, n);
    w_re_ = Mat(mr, n);
    w_im_ = Mat(mr, n);
    for (int i = 0; i < n; ++i) {
      for (int p = 0; p < mt; ++p) {
        v_re_(p, i) = ts * std::cos(theta_.value(p, i));
        v_im_(p, i) = ts * std::sin(theta_.value(p, i));
      }
      for (int q = 0; q < mr; ++q) {
        w_re_(q, i) = rs * std::cos(phi_.value(q, i));
        w_im_(q, i) = rs * std::sin(phi_.value(q, i));
      }
    }

    t_ = CBatch(bsz, n * mr);    // t(b, i*mr+q) = sqrt(rho)(H^H v_i)_q + n
    g_ = CBatch(bsz, n * mt);    // g(b, i*mt+p) = (H w_i)_p
    CBatch y(bsz, n);
    for (int b = 0; b < bsz; ++b) {
      for (int i = 0; i < n; ++i) {
        double yre = 0.0, yim = 0.0;
        for (int q = 0; q < mr; ++q) {
          double tre = 0.0, tim = 0.0;  // (H^H v_i)_q = sum_p conj(H_pq) v_p
          for (int p = 0; p < mt; ++p) {
            const double hr = h.re(b, q * mt + p), hi = h.im(b, q * mt + p);
            const double vr = v_re_(p, i), vi = v_im_(p, i);
            tre += hr * vr + hi * vi;
            tim += hr * vi - hi * vr;
          }
          tre = sqrt_rho_ * tre + noise.re(b, i * mr + q);
          tim = sqrt_rho_ * tim + noise.im(b, i * mr + q);
          t_.re(b, i * mr + q) = tre;
          t_.im(b, i * mr + q) = tim;
          // y += conj(w_q) * t_q
          const double wr = w_re_(q, i), wi = w_im_(q, i);
          yre += wr * tre + wi * tim;
          yim += wr * tim - wi * tre;
        }
        for (int p = 0; p < mt; ++p) {
          double gre = 0.0, gim = 0.0;  // (H w_i)_p = sum_q H_pq w_q
          for (int q = 0; q < mr; ++q) {
            const double hr = h.re(b, q * mt + p), hi = h.im(b, q * mt + p);
            const double wr = w_re_(q, i), wi = w_im_(q, i);
            gre += hr * wr - hi * wi;
            gim += hr * wi + hi * wr;
          }
          g_.re(b, i * mt + p) = gre;
          g_.im(b, i * mt + p) = gim;
        }
        y.re(b, i) = yre;
        y.im(b, i) = yim;
      }
    }
    return y;
  }

  void backward(const CBatch& gy) {
    const int mt = tx_antennas(), mr = rx_antennas(), n = pair_count();
    for (int i = 0; i < n; ++i) {
      for (int p = 0; p < mt; ++p) {
        const double vr = v_re_(p, i), vi = v_im_(p, i);
        double acc = 0.0;
        for (int b = 0; b < bsz_; ++b) {
          // dy/dtheta = sqrt(rho) * conj(g_p) * j * v_p
          const double gre = g_.re(b, i * mt + p), gim = g_.im(b, i * mt + p);
          const double jre = -vi, jim = vr;  // j * v
          const double dre = sqrt_rho_ * (gre * jre + gim * jim);
          const double dim = sqrt_rho_ * (gre * jim - gim * jre);
          acc += gy.re(b, i) * dre + gy.im(b, i) * dim;
        }
        theta_.grad(p, i) += acc;
      }
      for (int q = 0; q < mr; ++q) {
        const double wr = w_re_(q, i), wi = w_im_(q, i);
        double acc = 0.0;
        for (int b = 0; b < bsz_; ++b) {
          // dy/dphi = -j * conj(w_q) * t_q
          const double tre = t_.re(b, i * mr + q), tim = t_.im(b, i * mr + q);
          const double cre = wr * tre + wi * tim;   // conj(w) * t
          const double cim = wr * tim - wi * tre;
          const double dre = cim;   // -j * (cre + j cim) = cim - j cre
          const double dim = -cre;
          acc += gy.re(b, i) * dre + gy.im(b, i) * dim;
        }
        phi_.grad(q, i) += acc;
      }
    }
  }

 private:
  static Codebook beams_of(const Param& par) {
    Codebook cb;
    cb.kind = CodebookKind::probing;
    const int m = par.value.rows;
    const double scale = 1.0 / std::sqrt(static_cast<double>(m));
    for (int i = 0; i < par.value.cols; ++i) {
      Beam b;
      b.w.resize(static_cast<std::size_t>(m));
      for (int k = 0; k < m; ++k)
        b.w[static_cast<std::size_t>(k)] =
            scale * cplx{std::cos(par.value(k, i)), std::sin(par.value(k, i))};
      cb.beams.push_back(std::move(b));
    }
    return cb;
  }

  static void set_param_from(Param& par, const Codebook& cb) {
    if (cb.size() != par.value.cols || cb.antennas() != par.value.rows)
      throw std::invalid_argument("pair probing: codebook shape mismatch");
    for (int i = 0; i < par.value.cols; ++i)
      for (int k = 0; k < par.value.rows; ++k) {
        const cplx w =
            cb.beams[static_cast<std::size_t>(i)].w[static_cast<std::size_t>(k)];
        par.value(k, i) = std::atan2(w.imag(), w.real());
      }
  }

  Param theta_, phi_;
  Mat v_re_, v_im_, w_re_, w_im_;
  CBatch t_, g_;
  double sqrt_rho_ = 1.0;
  int bsz_ = 0;
};

// ---------------------------------------------------------------------------
// Power, normalization, linear, ReLU
// ---------------------------------------------------------------------------

// z = |y|^2 elementwise.
class PowerLayer {
 public:
  Mat forward(const CBatch& y) {
    y_cache_ = y;
    Mat z(y.rows(), y.cols());
    for (std::size_t i = 0; i < z.d.size(); ++i)
      z.d[i] = y.re.d[i] * y.re.d[i] + y.im.d[i] * y.im.d[i];
    return z;
  }

  CBatch backward(const Mat& gz) {
    CBatch gy(y_cache_.rows(), y_cache_.cols());
    for (std::size_t i = 0; i < gz.d.size(); ++i) {
      gy.re.d[i] = 2.0 * y_cache_.re.d[i] * gz.d[i];
      gy.im.d[i] = 2.0 * y_cache_.im.d[i] * gz.d[i];
    }
    return gy;
  }

 private:
  CBatch y_cache_;
};

// Per-row mean normalization: x = z / (mean(z) + eps).  Optional; raw powers
// sit at the watt scale, far too small to drive a network directly.
class NormalizeLayer {
 public:
  Mat forward(const Mat& z) {
    z_cache_ = z;
    mu_.assign(static_cast<std::size_t>(z.rows), 0.0);
    Mat x(z.rows, z.cols);
    for (int b = 0; b < z.rows; ++b) {
      double m = 0.0;
      for (int j = 0; j < z.cols; ++j) m += z(b, j);
      m = m / z.cols + kEps;
      mu_[static_cast<std::size_t>(b)] = m;
      for (int j = 0; j < z.cols; ++j) x(b, j) = z(b, j) / m;
    }
    return x;
  }

  Mat backward(const Mat& gx) {
    Mat gz(z_cache_.rows, z_cache_.cols);
    for (int b = 0; b < gz.rows; ++b) {
      const double m = mu_[static_cast<std::size_t>(b)];
      double dot = 0.0;
      for (int j = 0; j < gz.cols; ++j) dot += gx(b, j) * z_cache_(b, j);
      for (int j = 0; j < gz.cols; ++j)
        gz(b, j) = gx(b, j) / m - dot / (gz.cols * m * m);
    }
    return gz;
  }

 private:
  static constexpr double kEps = 1e-30;
  Mat z_cache_;
  std::vector<double> mu_;
};

class Linear {
 public:
  Linear() = default;
  Linear(const std::string& name, int in, int out, Rng& init_rng)
      : w_(name + ".w", in, out), b_(name + ".b", 1, out) {
    const double r = std::sqrt(6.0 / (in + out));
    for (auto& v : w_.value.d) v = init_rng.uniform(-r, r);
  }

  Param& weights() { return w_; }
  Param& bias() { return b_; }

  Mat forward(const Mat& x) {
    if (x.cols != w_.value.rows)
      throw std::invalid_argument("linear: input width mismatch");
    x_cache_ = x;
    Mat y(x.rows, w_.value.cols);
    for (int b = 0; b < x.rows; ++b)
      for (int o = 0; o < w_.value.cols; ++o) {
        double acc = b_.value(0, o);
        for (int i = 0; i < x.cols; ++i) acc += x(b, i) * w_.value(i, o);
        y(b, o) = acc;
      }
    return y;
  }

  Mat backward(const Mat& gy) {
    const Mat& x = x_cache_;
    for (int i = 0; i < w_.value.rows; ++i)
      for (int o = 0; o < w_.value.cols; ++o) {
        double acc = 0.0;
        for (int b = 0; b < x.rows; ++b) acc += x(b, i) * gy(b, o);
        w_.grad(i, o) += acc;
      }
    for (int o = 0; o < w_.value.cols; ++o) {
      double acc = 0.0;
      for (int b = 0; b < gy.rows; ++b) acc += gy(b, o);
      b_.grad(0, o) += acc;
    }
    Mat gx(x.rows, x.cols);
    for (int b = 0; b < x.rows; ++b)
      for (int i = 0; i < x.cols; ++i) {
        double acc = 0.0;
        for (int o = 0; o < w_.value.cols; ++o)
          acc += gy(b, o) * w_.value(i, o);
        gx(b, i) = acc;
      }
    return gx;
  }

 private:
  Param w_, b_;
  Mat x_cache_;
};

class ReluLayer {
 public:
  Mat forward(const Mat& x) {
    mask_ = x;
    Mat y = x;
    for (std::size_t i = 0; i < y.d.size(); ++i) {
      if (x.d[i] > 0.0) {
        mask_.d[i] = 1.0;
      } else {
        mask_.d[i] = 0.0;
        y.d[i] = 0.0;
      }
    }
    return y;
  }

  Mat backward(const Mat& gy) {
    Mat gx = gy;
    for (std::size_t i = 0; i < gx.d.size(); ++i) gx.d[i] *= mask_.d[i];
    return gx;
  }

 private:
  Mat mask_;
};

// ---------------------------------------------------------------------------
// Softmax + cross entropy
// ---------------------------------------------------------------------------

// Probabilities and log-probabilities from one logits batch.  log-sum-exp
// stabilized and kept together so the loss never takes log of an underflowed
// probability.
struct SoftmaxOut {
  Mat probs;
  Mat logp;
};

inline SoftmaxOut softmax(const Mat& logits) {
  SoftmaxOut out;
  out.probs = Mat(logits.rows, logits.cols);
  out.logp = Mat(logits.rows, logits.cols);
  for (int b = 0; b < logits.rows; ++b) {
    double mx = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < logits.cols; ++j) mx = std::max(mx, logits(b, j));
    double sum = 0.0;
    for (int j = 0; j < logits.cols; ++j) sum += std::exp(logits(b, j) - mx);
    const double lse = mx + std::log(sum);
    for (int j = 0; j < logits.cols; ++j) {
      out.logp(b, j) = logits(b, j) - lse;
      out.probs(b, j) = std::exp(out.logp(b, j));
    }
  }
  return out;
}

// Mean over the batch of -(1/divisor) * log p(label).
inline double ce_loss(const SoftmaxOut& p, const std::vector<int>& labels,
                      double divisor) {
  if (static_cast<int>(labels.size()) != p.probs.rows)
    throw std::invalid_argument("ce_loss: label count mismatch");
  if (divisor <= 0.0) throw std::invalid_argument("ce_loss: divisor <= 0");
  double acc = 0.0;
  for (int b = 0; b < p.probs.rows; ++b) {
    const int lbl = labels[static_cast<std::size_t>(b)];
    if (lbl < 0 || lbl >= p.probs.cols)
      throw std::invalid_argument("ce_loss: label out of range");
    acc += -p.logp(b, lbl) / divisor;
  }
  return acc / p.probs.rows;
}

// Gradient of ce_loss with respect to the logits (fused softmax derivative):
// (probs - onehot) / (batch * divisor).
inline Mat ce_grad(const SoftmaxOut& p, const std::vector<int>& labels,
                   double divisor) {
  Mat g = p.probs;
  const double scale = 1.0 / (divisor * p.probs.rows);
  for (int b = 0; b < g.rows; ++b) {
    for (int j = 0; j < g.cols; ++j) g(b, j) *= scale;
    g(b, labels[static_cast<std::size_t>(b)]) -= scale;
  }
  return g;
}

// ---------------------------------------------------------------------------
// MLP
// ---------------------------------------------------------------------------

// Fully-connected ReLU network ending in logits; dims = {in, hidden..., out}.
class Mlp {
 public:
  Mlp() = default;
  Mlp(const std::string& name, const std::vector<int>& dims, Rng& init_rng) {
    if (dims.size() < 2) throw std::invalid_argument("mlp: need >= 2 dims");
    for (std::size_t i = 0; i + 1 < dims.size(); ++i)
      linears_.emplace_back(name + ".l" + std::to_string(i), dims[i],
                            dims[i + 1], init_rng);
    relus_.resize(linears_.size() - 1);
  }

  int out_dim() { return linears_.back().weights().value.cols; }

  Mat forward_logits(const Mat& x) {
    Mat h = x;
    for (std::size_t i = 0; i < linears_.size(); ++i) {
      h = linears_[i].forward(h);
      if (i + 1 < linears_.size()) h = relus_[i].forward(h);
    }
    return h;
  }

  SoftmaxOut forward(const Mat& x) { return softmax(forward_logits(x)); }

  // Backpropagates a logits gradient; returns the input gradient.
  Mat backward(const Mat& glogits) {
    Mat g = glogits;
    for (std::size_t i = linears_.size(); i-- > 0;) {
      g = linears_[i].backward(g);
      if (i > 0) g = relus_[i - 1].backward(g);
    }
    return g;
  }

  void collect_params(std::vector<Param*>& out) {
    for (auto& l : linears_) {
      out.push_back(&l.weights());
      out.push_back(&l.bias());
    }
  }

 private:
  std::vector<Linear> linears_;
  std::vector<ReluLayer> relus_;
};

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

class Adam {
 public:
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  explicit Adam(double learning_rate = 1e-3) : lr(learning_rate) {}

  // The parameter list must be identical (same order) on every call.
  void step(const std::vector<Param*>& params) {
    if (m_.empty()) {
      for (const Param* p : params) {
        m_.emplace_back(p->value.rows, p->value.cols);
        v_.emplace_back(p->value.rows, p->value.cols);
      }
    }
    if (m_.size() != params.size())
      throw std::invalid_argument("adam: parameter list changed");
    ++t_;
    const double c1 = 1.0 - std::pow(beta1, t_);
    const double c2 = 1.0 - std::pow(beta2, t_);
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
      Param& p = *params[pi];
      if (!p.trainable) continue;
      for (std::size_t i = 0; i < p.value.d.size(); ++i) {
        const double g = p.grad.d[i];
        double& m = m_[pi].d[i];
        double& v = v_[pi].d[i];
        m = beta1 * m + (1.0 - beta1) * g;
        v = beta2 * v + (1.0 - beta2) * g * g;
        p.value.d[i] -= lr * (m / c1) / (std::sqrt(v / c2) + eps);
      }
    }
  }

 private:
  std::vector<Mat> m_, v_;
  int t_ = 0;
};

inline void zero_grads(const std::vector<Param*>& params) {
  for (Param* p : params) p->zero_grad();
}

// ---------------------------------------------------------------------------
// Finite-difference gradient check
// ---------------------------------------------------------------------------

// Compares the analytic gradients already stored in params[i]->grad against
// central finite differences of loss_fn, on a random subsample of at most
// max_coords coordinates.  The relative error divides by
// max(|analytic|, |fd|, 1e-3 * gmax) where gmax is the largest analytic
// gradient magnitude, so near-zero coordinates are judged against the
// overall gradient scale rather than blowing up.
inline double finite_diff_check(const std::function<double()>& loss_fn,
                                const std::vector<Param*>& params, double step,
                                Rng& rng, int max_coords = 200) {
  struct Coord {
    Param* p;
    std::size_t idx;
  };
  std::vector<Coord> coords;
  double gmax = 0.0;
  for (Param* p : params) {
    for (std::size_t i = 0; i < p->value.d.size(); ++i) {
      coords.push_back({p, i});
      gmax = std::max(gmax, std::abs(p->grad.d[i]));
    }
  }
  if (coords.empty()) return 0.0;
  rng.shuffle(coords);
  if (static_cast<int>(coords.size()) > max_coords)
    coords.resize(static_cast<std::size_t>(max_coords));

  double max_err = 0.0;
  for (const auto& c : coords) {
    double& x = c.p->value.d[c.idx];
    const double saved = x;
    x = saved + step;
    const double lp = loss_fn();
    x = saved - step;
    const double lm = loss_fn();
    x = saved;
    const double fd = (lp - lm) / (2.0 * step);
    const double an = c.p->grad.d[c.idx];
    const double denom =
        std::max({std::abs(an), std::abs(fd), 1e-3 * gmax, 1e-12});
    max_err = std::max(max_err, std::abs(an - fd) / denom);
  }
  return max_err;
}

}  // namespace hbalign
