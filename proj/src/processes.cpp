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

#include "eglab/processes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "eglab/parallel.hpp"
#include "eglab/rng.hpp"
#include "eglab/toeplitz.hpp"

namespace eglab {
namespace {

constexpr int kMaxEstimatorDimension = 16;
constexpr double kJitterScale = 1e-12;

double digamma_integer(int n) {
  // psi(n) = H_{n-1} - gamma for integer arguments.
  constexpr double kEulerGamma = 0.57721566490153286060651209;
  double h = 0.0;
  for (int j = 1; j < n; ++j) h += 1.0 / j;
  return h - kEulerGamma;
}

double unit_ball_log_volume(int d) {
  return 0.5 * d * std::log(std::numbers::pi) - std::lgamma(0.5 * d + 1.0);
}

// Exact k-th neighbor distances (self excluded). At the dimensions allowed
// here space partitioning degenerates, so brute force wins: one GEMM per
// query block for the cross terms, then a partial select.
std::vector<double> kth_neighbor_distances(const Eigen::MatrixXd& points, int k) {
  const int count = static_cast<int>(points.rows());
  const Eigen::VectorXd norms = points.rowwise().squaredNorm();
  std::vector<double> result(count);
  constexpr int kBlock = 128;
  const int blocks = (count + kBlock - 1) / kBlock;
  parallel_for(blocks, 0, [&](int blk) {
    const int begin = blk * kBlock;
    const int rows = std::min(kBlock, count - begin);
    Eigen::MatrixXd cross = points.middleRows(begin, rows) * points.transpose();
    std::vector<double> dist2(count);
    for (int r = 0; r < rows; ++r) {
      const int self = begin + r;
      for (int j = 0; j < count; ++j) {
        dist2[j] = std::max(0.0, norms(self) + norms(j) - 2.0 * cross(r, j));
      }
      dist2[self] = std::numeric_limits<double>::infinity();
      std::nth_element(dist2.begin(), dist2.begin() + (k - 1), dist2.end());
      result[self] = std::sqrt(dist2[k - 1]);
    }
  });
  return result;
}

void sample_rows(const ProcessSpec& spec, int n, int trials, std::uint64_t seed,
                 std::uint64_t stream_salt, Eigen::MatrixXd* out) {
  switch (spec.kind) {
    case ProcessSpec::Kind::kGaussianIid: {
      const double sigma = std::sqrt(spec.sigma2);
      for (int r = 0; r < trials; ++r) {
        CounterRng rng(seed, stream_salt + static_cast<std::uint64_t>(r));
        for (int c = 0; c < n; ++c) (*out)(r, c) = sigma * rng.Normal();
      }
      return;
    }
    case ProcessSpec::Kind::kUniformIid: {
      const double width = spec.hi - spec.lo;
      for (int r = 0; r < trials; ++r) {
        CounterRng rng(seed, stream_salt + static_cast<std::uint64_t>(r));
        for (int c = 0; c < n; ++c) (*out)(r, c) = spec.lo + width * rng.Uniform();
      }
      return;
    }
    case ProcessSpec::Kind::kPiecewiseConstantIid: {
      std::vector<double> cdf(spec.bins.size());
      double acc = 0.0;
      for (size_t i = 0; i < spec.bins.size(); ++i) {
        acc += spec.bins[i].prob;
        cdf[i] = acc;
      }
      for (int r = 0; r < trials; ++r) {
        CounterRng rng(seed, stream_salt + static_cast<std::uint64_t>(r));
        for (int c = 0; c < n; ++c) {
          const double u = rng.Uniform() * acc;
          const size_t bin = std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin();
          const auto& b = spec.bins[std::min(bin, spec.bins.size() - 1)];
          const double frac = rng.Uniform();
          (*out)(r, c) = b.lo + (b.hi - b.lo) * frac;
        }
      }
      return;
    }
    case ProcessSpec::Kind::kMpFiltered: {
      Eigen::MatrixXd inner(trials, n);
      sample_rows(spec.components.front(), n, trials, seed, stream_salt, &inner);
      const std::vector<double>& b = spec.filter.num;
      const std::vector<double>& a = spec.filter.den;
      for (int r = 0; r < trials; ++r) {
        for (int c = 0; c < n; ++c) {
          double s = 0.0;
          for (int i = 0; i <= std::min<int>(c, static_cast<int>(b.size()) - 1); ++i) {
            s += b[i] * inner(r, c - i);
          }
          for (int i = 1; i <= std::min<int>(c, static_cast<int>(a.size()) - 1); ++i) {
            s -= a[i] * (*out)(r, c - i);
          }
          (*out)(r, c) = s;
        }
      }
      return;
    }
    case ProcessSpec::Kind::kSum: {
      out->setZero();
      Eigen::MatrixXd part(trials, n);
      std::uint64_t salt = stream_salt;
      for (const ProcessSpec& component : spec.components) {
        salt += 0x1000000000ULL;  // independent streams per summand
        sample_rows(component, n, trials, seed, salt, &part);
        *out += part;
      }
      return;
    }
  }
  throw std::logic_error("sample: unknown process kind");
}

}  // namespace

ProcessSpec ProcessSpec::gaussian(double sigma2) {
  ProcessSpec s;
  s.kind = Kind::kGaussianIid;
  s.sigma2 = sigma2;
  return s;
}

ProcessSpec ProcessSpec::uniform(double lo, double hi) {
  ProcessSpec s;
  s.kind = Kind::kUniformIid;
  s.lo = lo;
  s.hi = hi;
  return s;
}

ProcessSpec ProcessSpec::piecewise(std::vector<Bin> bins, double min_bin_width) {
  ProcessSpec s;
  s.kind = Kind::kPiecewiseConstantIid;
  s.bins = std::move(bins);
  s.min_bin_width = min_bin_width;
  return s;
}

ProcessSpec ProcessSpec::mp_filtered(ProcessSpec inner, TransferFunction filter) {
  ProcessSpec s;
  s.kind = Kind::kMpFiltered;
  s.components.push_back(std::move(inner));
  s.filter = std::move(filter);
  return s;
}

ProcessSpec ProcessSpec::sum(std::vector<ProcessSpec> parts) {
  ProcessSpec s;
  s.kind = Kind::kSum;
  s.components = std::move(parts);
  return s;
}

void ProcessSpec::validate() const {
  switch (kind) {
    case Kind::kGaussianIid:
      if (sigma2 <= 0.0) throw std::invalid_argument("ProcessSpec: sigma2 must be positive");
      return;
    case Kind::kUniformIid:
      if (hi <= lo) throw std::invalid_argument("ProcessSpec: need hi > lo");
      return;
    case Kind::kPiecewiseConstantIid: {
      if (bins.empty()) throw std::invalid_argument("ProcessSpec: no bins");
      if (min_bin_width <= 0.0) {
        throw std::invalid_argument("ProcessSpec: minimum bin width must be positive");
      }
      double total = 0.0;
      for (const Bin& b : bins) {
        if (b.hi - b.lo < min_bin_width) {
          throw std::invalid_argument("ProcessSpec: bin narrower than the minimum width");
        }
        if (b.prob <= 0.0) throw std::invalid_argument("ProcessSpec: bin probability <= 0");
        total += b.prob;
      }
      if (std::abs(total - 1.0) > 1e-9) {
        throw std::invalid_argument("ProcessSpec: bin probabilities must sum to 1");
      }
      return;
    }
    case Kind::kMpFiltered:
      if (components.size() != 1) {
        throw std::invalid_argument("ProcessSpec: mp_filtered needs exactly one inner spec");
      }
      components.front().validate();
      if (!filter.stable() || !filter.minimum_phase()) {
        throw std::invalid_argument("ProcessSpec: shaping filter must be stable minimum phase");
      }
      return;
    case Kind::kSum:
      if (components.size() < 2) {
        throw std::invalid_argument("ProcessSpec: sum needs at least two components");
      }
      for (const ProcessSpec& c : components) c.validate();
      return;
  }
  throw std::logic_error("ProcessSpec: unknown kind");
}

Eigen::MatrixXd sample(const ProcessSpec& spec, int n, int trials, std::uint64_t seed) {
  if (n < 1 || trials < 1) throw std::invalid_argument("sample: n and trials must be >= 1");
  spec.validate();
  Eigen::MatrixXd out(trials, n);
  sample_rows(spec, n, trials, seed, 0, &out);
  return out;
}

KnnEntropy knn_entropy(const Eigen::MatrixXd& samples, int k) {
  const int trials = static_cast<int>(samples.rows());
  const int d = static_cast<int>(samples.cols());
  if (trials < 1000) throw std::invalid_argument("knn_entropy: need at least 1000 samples");
  if (d > kMaxEstimatorDimension) {
    throw std::invalid_argument("knn_entropy: dimension above the estimator budget (16)");
  }
  if (k < 1 || k >= trials) throw std::invalid_argument("knn_entropy: bad neighbor count");

  KnnEntropy result;
  Eigen::MatrixXd points = samples;
  std::vector<double> dist = kth_neighbor_distances(points, k);
  std::vector<int> ties;
  for (int i = 0; i < trials; ++i) {
    if (dist[i] <= 0.0) ties.push_back(i);
  }
  if (!ties.empty()) {
    // Duplicate rows: jitter deterministically and recompute.
    result.jittered = true;
    CounterRng rng(0x6a697474, 0);
    for (int i : ties) {
      for (int c = 0; c < d; ++c) points(i, c) += kJitterScale * rng.Normal();
    }
    dist = kth_neighbor_distances(points, k);
  }
  double log_sum = 0.0;
  for (int i = 0; i < trials; ++i) log_sum += std::log(dist[i]);
  result.nats = digamma_integer(trials) - digamma_integer(k) + unit_ball_log_volume(d) +
                d * log_sum / trials;
  return result;
}

Eigen::MatrixXd random_orthonormal_rows(int rows, int n, std::uint64_t seed) {
  if (rows > n) throw std::invalid_argument("random_orthonormal_rows: rows > n");
  Eigen::MatrixXd g(rows, n);
  for (int r = 0; r < rows; ++r) {
    CounterRng rng(seed, 0xF00ULL + static_cast<std::uint64_t>(r));
    for (int c = 0; c < n; ++c) g(r, c) = rng.Normal();
  }
  // Modified Gram-Schmidt on the rows of the truncated infinite matrix.
  for (int r = 0; r < rows; ++r) {
    for (int prev = 0; prev < r; ++prev) {
      g.row(r) -= g.row(r).dot(g.row(prev)) * g.row(prev);
    }
    const double norm = g.row(r).norm();
    if (norm < 1e-12) throw std::runtime_error("random_orthonormal_rows: degenerate draw");
    g.row(r) /= norm;
  }
  return g;
}

std::vector<ProbePoint> entropy_balance_probe(const ProcessSpec& spec,
                                              const std::vector<int>& n_grid, int nu, int trials,
                                              std::uint64_t seed) {
  spec.validate();
  if (nu < 1) throw std::invalid_argument("entropy_balance_probe: nu must be >= 1");
  std::vector<ProbePoint> points;
  points.reserve(n_grid.size());
  for (int n : n_grid) {
    if (nu >= n) throw std::invalid_argument("entropy_balance_probe: nu must be < n");
    ProbePoint p;
    p.n = n;
    if (spec.kind == ProcessSpec::Kind::kGaussianIid) {
      // Exact: the projected covariance stays sigma^2 I of dimension n - nu.
      p.value = -(static_cast<double>(nu) / (2.0 * n)) *
                std::log(2.0 * std::numbers::pi * std::numbers::e * spec.sigma2);
    } else {
      if (n > kMaxEstimatorDimension) {
        throw std::invalid_argument("entropy_balance_probe: Monte-Carlo kinds need n <= 16");
      }
      const Eigen::MatrixXd u = sample(spec, n, trials, seed);
      const Eigen::MatrixXd phi = random_orthonormal_rows(n - nu, n, seed + 17);
      const Eigen::MatrixXd projected = u * phi.transpose();
      const double h_projected = knn_entropy(projected).nats;
      const double h_full = knn_entropy(u).nats;
      p.value = (h_projected - h_full) / n;
    }
    points.push_back(p);
  }
  return points;
}

std::vector<ProbePoint> nmp_counterexample_probe(const TransferFunction& tf,
                                                 const std::vector<int>& n_grid) {
  const NmpSummary summary = nmp_summary(tf);
  if (summary.m == 0) {
    throw std::invalid_argument("nmp_counterexample_probe: filter has no NMP zeros");
  }
  std::vector<ProbePoint> points;
  points.reserve(n_grid.size());
  for (int n : n_grid) {
    // u = G^{-1} w with w i.i.d. standard normal. Dropping the m rows of R_n
    // with smallest singular values leaves a Gaussian with covariance
    // diag(d_i^{-2}), i > m, so the probe value is exact:
    //   (1/n)(h(Phi u) - h(u)) = (1/n) sum_{i<=m} ln d_i - (m/2n) ln(2 pi e).
    SingularSpectrum s = svd_spectrum(conv_matrix(tf, n));
    ProbePoint p;
    p.n = n;
    double acc = 0.0;
    for (int i = 0; i < summary.m; ++i) acc += std::log(s.values[i]);
    p.value = acc / n - (static_cast<double>(summary.m) / (2.0 * n)) *
                            std::log(2.0 * std::numbers::pi * std::numbers::e);
    points.push_back(p);
  }
  return points;
}

}  // namespace eglab
