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

#ifndef EGLAB_PROCESSES_HPP_
#define EGLAB_PROCESSES_HPP_

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "eglab/lti.hpp"

namespace eglab {

/// Scalar i.i.d. (or filtered i.i.d.) process description for Monte-Carlo runs.
struct ProcessSpec {
  enum class Kind { kGaussianIid, kUniformIid, kPiecewiseConstantIid, kMpFiltered, kSum };

  struct Bin {
    double lo = 0.0;
    double hi = 1.0;
    double prob = 1.0;
  };

  Kind kind = Kind::kGaussianIid;
  double sigma2 = 1.0;             // gaussian
  double lo = 0.0, hi = 1.0;       // uniform
  std::vector<Bin> bins;           // piecewise constant, widths >= min_bin_width
  double min_bin_width = 1e-6;
  TransferFunction filter;         // mp_filtered: stable minimum-phase shaping
  std::vector<ProcessSpec> components;  // inner spec (mp_filtered) or summands (sum)

  static ProcessSpec gaussian(double sigma2);
  static ProcessSpec uniform(double lo, double hi);
  static ProcessSpec piecewise(std::vector<Bin> bins, double min_bin_width);
  static ProcessSpec mp_filtered(ProcessSpec inner, TransferFunction filter);
  static ProcessSpec sum(std::vector<ProcessSpec> parts);

  void validate() const;
};

/// trials x n matrix, row r drawn from stream (seed, r); deterministic and
/// independent of any parallel split over trials.
Eigen::MatrixXd sample(const ProcessSpec& spec, int n, int trials, std::uint64_t seed);

struct KnnEntropy {
  double nats = 0.0;
  bool jittered = false;  // duplicate points perturbed by 1e-12
};

/// Kozachenko-Leonenko k-nearest-neighbor estimate of the vector differential
/// entropy of the rows (Euclidean metric, dimension <= 16).
KnnEntropy knn_entropy(const Eigen::MatrixXd& samples, int k = 4);

struct ProbePoint {
  int n = 0;
  double value = 0.0;  // (1/n)(h(Phi_n u) - h(u)), nats per sample
};

/// Entropy-balance probe: project onto a random (n - nu) x n orthonormal row
/// basis and compare entropy rates. Gaussian i.i.d. inputs are evaluated in
/// closed form, -(nu/2n) ln(2 pi e sigma^2); other kinds are estimated with
/// knn_entropy over `trials` rows (n <= 16).
std::vector<ProbePoint> entropy_balance_probe(const ProcessSpec& spec,
                                              const std::vector<int>& n_grid, int nu, int trials,
                                              std::uint64_t seed);

/// Adversarial probe for the inverse-filtered Gaussian process u = G^{-1} w
/// with an NMP filter G: drop the m right-singular directions with smallest
/// singular values. Evaluated in closed form from the spectrum of G_n;
/// converges to -(sum of log NMP zero magnitudes) instead of zero.
std::vector<ProbePoint> nmp_counterexample_probe(const TransferFunction& tf,
                                                 const std::vector<int>& n_grid);

/// Orthonormal rows obtained from Gaussian draws (rows of the conceptually
/// infinite matrix are per-index streams, then Gram-Schmidt at length n).
Eigen::MatrixXd random_orthonormal_rows(int rows, int n, std::uint64_t seed);

}  // namespace eglab

#endif  // EGLAB_PROCESSES_HPP_
