/*
 * Copyright 2026 The entropy-gain-lab Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef EGLAB_TOEPLITZ_HPP_
#define EGLAB_TOEPLITZ_HPP_

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "eglab/lti.hpp"

namespace eglab {

// Dense is deliberate at desk scale; n is capped rather than specialized.
inline constexpr int kMaxConvDimension = 2000;

struct ConvolutionMatrix {
  Eigen::MatrixXd dense;        // rows x cols, lower-triangular Toeplitz
  std::vector<double> impulse;  // samples the matrix was built from
  int cols = 0;
  bool tall = false;            // rows = cols + impulse.size() - 1
};

/// Square map, entry (i, j) = g_{i-j} for i >= j.
ConvolutionMatrix conv_matrix(const std::vector<double>& impulse, int n);
ConvolutionMatrix conv_matrix(const TransferFunction& tf, int n);

/// Full convolution map of an FIR impulse: (n + eta) x n, each column the
/// whole impulse shifted. Rejects filters with poles away from the origin.
ConvolutionMatrix tall_conv_matrix(const std::vector<double>& fir_impulse, int n);
ConvolutionMatrix tall_conv_matrix(const TransferFunction& tf, int n);

struct SingularSpectrum {
  std::vector<double> values;  // ascending
  int n = 0;
  bool underflow = false;      // smallest value below the double-precision floor
  std::optional<Eigen::MatrixXd> left;   // rows of Q (left singular vectors transposed)
  std::optional<Eigen::MatrixXd> right;  // rows of R
};

SingularSpectrum svd_spectrum(const ConvolutionMatrix& matrix, bool want_vectors = false);

struct DecayRateFit {
  std::vector<double> slopes;  // slope of ln d_{n,l} versus n, per index l
  std::vector<int> used_n;     // grid points that survived the underflow filter
};

/// Least-squares slopes of the smallest singular values over an n grid. For a
/// stable biproper filter with m NMP zeros the first m slopes approach
/// -ln|rho_{iota(l)}| and the rest drift sub-exponentially.
DecayRateFit decay_rate_fit(const TransferFunction& tf, const std::vector<int>& n_grid,
                            int indices = 0);

/// Largest n for which the smallest singular value of G_n stays above
/// 1e3 * machine-epsilon * (spectral norm estimate). Unbounded for MP filters.
int usable_n_window(const TransferFunction& tf);

/// 0.5 * ln det(Gbreve_n^T Gbreve_n) for the tall FIR map, via Cholesky of the
/// banded autocorrelation Gram (never forming a determinant).
double effective_entropy_gain(const TransferFunction& fir, int n);
double effective_entropy_gain(const std::vector<double>& fir_impulse, int n);

struct GsLimitReport {
  std::vector<int> n_grid;
  std::vector<double> per_sample;  // effective_entropy_gain(n) / n
  double jensen = 0.0;             // log-magnitude integral of the filter
  double terminal_gap = 0.0;       // |per_sample.back() - jensen|
};

/// Trajectory of the per-sample effective entropy gain against the
/// log-magnitude integral it converges to (Grenander-Szego limit).
GsLimitReport gs_limit_check(const TransferFunction& fir, const std::vector<int>& n_grid);

/// First k columns of G_n^{-1}, i.e. the inverse filter's impulse response and
/// its shifts. Errors out (naming the safe maximal n) when the inverse
/// response would exceed the 1e150 overflow budget.
Eigen::MatrixXd inverse_conv_columns(const TransferFunction& tf, int n, int k);

}  // namespace eglab

#endif  // EGLAB_TOEPLITZ_HPP_
