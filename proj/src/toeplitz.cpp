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

#include "eglab/toeplitz.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/SVD>

namespace eglab {
namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr double kOverflowBudgetLog = 150.0 * 2.302585092994046;  // ln(1e150)

void check_dimension(int n) {
  if (n < 1) throw std::invalid_argument("convolution matrix: n must be >= 1");
  if (n > kMaxConvDimension) {
    throw std::invalid_argument("convolution matrix: n exceeds the dense cap " +
                                std::to_string(kMaxConvDimension));
  }
}

double spectral_norm_estimate(const TransferFunction& tf) {
  double best = 0.0;
  for (int j = 0; j < 256; ++j) {
    const double omega = -std::numbers::pi + 2.0 * std::numbers::pi * j / 256.0;
    best = std::max(best, std::abs(tf.frequency_response(omega)));
  }
  return best;
}

std::vector<double> inverse_impulse(const TransferFunction& tf, int n) {
  if (tf.num.empty() || tf.num[0] == 0.0) {
    throw std::invalid_argument("inverse filter: g0 must be nonzero");
  }
  const auto& b = tf.num;
  const auto& a = tf.den;
  std::vector<double> h(n, 0.0);
  for (int k = 0; k < n; ++k) {
    double s = (k < static_cast<int>(a.size())) ? a[k] : 0.0;
    const int imax = std::min<int>(k, static_cast<int>(b.size()) - 1);
    for (int i = 1; i <= imax; ++i) s -= b[i] * h[k - i];
    h[k] = s / b[0];
  }
  return h;
}

}  // namespace

ConvolutionMatrix conv_matrix(const std::vector<double>& impulse, int n) {
  check_dimension(n);
  if (impulse.empty()) throw std::invalid_argument("conv_matrix: empty impulse");
  ConvolutionMatrix m;
  m.cols = n;
  m.tall = false;
  m.impulse = impulse;
  m.dense = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    const int jmin = std::max(0, i - static_cast<int>(impulse.size()) + 1);
    for (int j = jmin; j <= i; ++j) m.dense(i, j) = impulse[i - j];
  }
  return m;
}

ConvolutionMatrix conv_matrix(const TransferFunction& tf, int n) {
  return conv_matrix(impulse_response(tf, n).samples, n);
}

ConvolutionMatrix tall_conv_matrix(const std::vector<double>& fir_impulse, int n) {
  check_dimension(n);
  if (fir_impulse.empty()) throw std::invalid_argument("tall_conv_matrix: empty impulse");
  const int eta = static_cast<int>(fir_impulse.size()) - 1;
  ConvolutionMatrix m;
  m.cols = n;
  m.tall = true;
  m.impulse = fir_impulse;
  m.dense = Eigen::MatrixXd::Zero(n + eta, n);
  for (int j = 0; j < n; ++j) {
    for (int k = 0; k <= eta; ++k) m.dense(j + k, j) = fir_impulse[k];
  }
  return m;
}

ConvolutionMatrix tall_conv_matrix(const TransferFunction& tf, int n) {
  if (!tf.fir()) {
    throw std::invalid_argument("tall_conv_matrix: full convolution map is defined for FIR filters");
  }
  const int eta = tf.order();
  return tall_conv_matrix(impulse_response(tf, eta + 1).samples, n);
}

SingularSpectrum svd_spectrum(const ConvolutionMatrix& matrix, bool want_vectors) {
  SingularSpectrum s;
  s.n = matrix.cols;
  unsigned options = want_vectors ? (Eigen::ComputeThinU | Eigen::ComputeThinV) : 0;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(matrix.dense, options);
  if (svd.info() != Eigen::Success) {
    throw std::runtime_error("svd_spectrum: decomposition failed at n = " +
                             std::to_string(matrix.cols));
  }
  const auto& vals = svd.singularValues();
  s.values.assign(vals.data(), vals.data() + vals.size());
  std::reverse(s.values.begin(), s.values.end());
  s.underflow = s.values.front() < 1e3 * kEps * s.values.back();
  if (want_vectors) {
    // Rows ordered to match the ascending singular values.
    s.left = svd.matrixU().rowwise().reverse().transpose().eval();
    s.right = svd.matrixV().rowwise().reverse().transpose().eval();
  }
  return s;
}

DecayRateFit decay_rate_fit(const TransferFunction& tf, const std::vector<int>& n_grid,
                            int indices) {
  if (!tf.stable() || !tf.biproper()) {
    throw std::invalid_argument("decay_rate_fit: filter must be stable and biproper");
  }
  const NmpSummary summary = nmp_summary(tf);
  if (indices <= 0) indices = summary.m + 3;
  DecayRateFit fit;
  std::vector<std::vector<double>> logs;  // per usable n, first `indices` log singular values
  for (int n : n_grid) {
    if (n < indices) continue;
    SingularSpectrum s = svd_spectrum(conv_matrix(tf, n));
    if (s.underflow) continue;
    fit.used_n.push_back(n);
    std::vector<double> row(indices);
    for (int l = 0; l < indices; ++l) row[l] = std::log(s.values[l]);
    logs.push_back(std::move(row));
  }
  if (fit.used_n.size() < 4) {
    throw std::runtime_error("decay_rate_fit: fewer than 4 usable grid points");
  }
  const int count = static_cast<int>(fit.used_n.size());
  double sx = 0.0, sxx = 0.0;
  for (int i = 0; i < count; ++i) {
    sx += fit.used_n[i];
    sxx += static_cast<double>(fit.used_n[i]) * fit.used_n[i];
  }
  fit.slopes.resize(indices);
  for (int l = 0; l < indices; ++l) {
    double sy = 0.0, sxy = 0.0;
    for (int i = 0; i < count; ++i) {
      sy += logs[i][l];
      sxy += fit.used_n[i] * logs[i][l];
    }
    fit.slopes[l] = (count * sxy - sx * sy) / (count * sxx - sx * sx);
  }
  return fit;
}

int usable_n_window(const TransferFunction& tf) {
  const NmpSummary summary = nmp_summary(tf);
  if (summary.m == 0) return kMaxConvDimension;
  const double rho1 = std::abs(summary.distinct_zeros.front());
  const double floor_log = std::log(1e3 * kEps * spectral_norm_estimate(tf));
  const int window = static_cast<int>(std::floor(-floor_log / std::log(rho1)));
  return std::clamp(window, 1, kMaxConvDimension);
}

double effective_entropy_gain(const std::vector<double>& fir_impulse, int n) {
  check_dimension(n);
  if (fir_impulse.empty() || fir_impulse[0] == 0.0) {
    throw std::invalid_argument("effective_entropy_gain: g0 must be nonzero (rank deficiency)");
  }
  // Gram of the tall map is symmetric Toeplitz with the impulse autocorrelation.
  const int eta = static_cast<int>(fir_impulse.size()) - 1;
  std::vector<double> acf(eta + 1, 0.0);
  for (int lag = 0; lag <= eta; ++lag) {
    for (int k = lag; k <= eta; ++k) acf[lag] += fir_impulse[k] * fir_impulse[k - lag];
  }
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = std::max(0, i - eta); j <= std::min(n - 1, i + eta); ++j) {
      gram(i, j) = acf[std::abs(i - j)];
    }
  }
  Eigen::LLT<Eigen::MatrixXd> llt(gram);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("effective_entropy_gain: Gram factorization failed");
  }
  double log_det = 0.0;
  for (int i = 0; i < n; ++i) log_det += std::log(llt.matrixL()(i, i));
  return log_det;  // 0.5 * ln det(Gram) = sum of log Cholesky diagonal
}

double effective_entropy_gain(const TransferFunction& fir, int n) {
  if (!fir.fir()) throw std::invalid_argument("effective_entropy_gain: filter must be FIR");
  return effective_entropy_gain(impulse_response(fir, fir.order() + 1).samples, n);
}

GsLimitReport gs_limit_check(const TransferFunction& fir, const std::vector<int>& n_grid) {
  GsLimitReport report;
  report.n_grid = n_grid;
  report.jensen = jensen_log_integral(fir).value;
  report.per_sample.reserve(n_grid.size());
  for (int n : n_grid) {
    report.per_sample.push_back(effective_entropy_gain(fir, n) / n);
  }
  if (!report.per_sample.empty()) {
    report.terminal_gap = std::abs(report.per_sample.back() - report.jensen);
  }
  return report;
}

Eigen::MatrixXd inverse_conv_columns(const TransferFunction& tf, int n, int k) {
  check_dimension(n);
  if (k < 1 || k > n) throw std::invalid_argument("inverse_conv_columns: need 1 <= k <= n");
  double rho_max = 0.0;
  for (const Complex& z : tf.zeros) rho_max = std::max(rho_max, std::abs(z));
  if (rho_max > 1.0 && n * std::log(rho_max) > kOverflowBudgetLog) {
    const int safe = static_cast<int>(kOverflowBudgetLog / std::log(rho_max));
    throw std::runtime_error("inverse_conv_columns: overflow budget exceeded, max safe n = " +
                             std::to_string(safe));
  }
  const std::vector<double> h = inverse_impulse(tf, n);
  Eigen::MatrixXd cols = Eigen::MatrixXd::Zero(n, k);
  for (int j = 0; j < k; ++j) {
    for (int i = j; i < n; ++i) cols(i, j) = h[i - j];
  }
  return cols;
}

}  // namespace eglab
