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

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace hbalign {

using cplx = std::complex<double>;

// Dense real matrix, row-major.  Used for network activations (rows = batch
// samples) and parameters.
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> d;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), d(static_cast<std::size_t>(r) * c, 0.0) {
    if (r < 0 || c < 0) throw std::invalid_argument("Mat: negative dims");
  }

  double& operator()(int r, int c) {
    return d[static_cast<std::size_t>(r) * cols + c];
  }
  double operator()(int r, int c) const {
    return d[static_cast<std::size_t>(r) * cols + c];
  }

  std::size_t size() const { return d.size(); }
  void fill(double v) { d.assign(d.size(), v); }

  bool same_shape(const Mat& o) const {
    return rows == o.rows && cols == o.cols;
  }
};

inline bool operator==(const Mat& a, const Mat& b) {
  return a.rows == b.rows && a.cols == b.cols && a.d == b.d;
}

// Dense complex matrix, column-major (column j contiguous).  Channel matrices
// are stored this way so that receive-antenna columns match the on-disk
// dataset layout.
struct CMat {
  int rows = 0;
  int cols = 0;
  std::vector<cplx> d;

  CMat() = default;
  CMat(int r, int c) : rows(r), cols(c), d(static_cast<std::size_t>(r) * c) {
    if (r < 0 || c < 0) throw std::invalid_argument("CMat: negative dims");
  }

  cplx& operator()(int r, int c) {
    return d[static_cast<std::size_t>(c) * rows + r];
  }
  cplx operator()(int r, int c) const {
    return d[static_cast<std::size_t>(c) * rows + r];
  }

  std::size_t size() const { return d.size(); }
};

inline bool operator==(const CMat& a, const CMat& b) {
  return a.rows == b.rows && a.cols == b.cols && a.d == b.d;
}

}  // namespace hbalign
