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

#ifndef EGLAB_GAUSSIAN_HPP_
#define EGLAB_GAUSSIAN_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "eglab/lti.hpp"

namespace eglab {

// Warning bits carried alongside gain values instead of silent output.
enum GainFlags : std::uint32_t {
  kFlagNone = 0,
  kFlagIllConditioned = 1u << 0,   // an explicit inverse saw condition > 1e12
  kFlagPrecisionLoss = 1u << 1,    // unlifted decaying direction below the double floor
  kFlagNearUnitCircle = 1u << 2,   // quadrature degradation
  kFlagEstimatorJitter = 1u << 3,  // duplicate samples jittered in an estimator
};

std::string flag_names(std::uint32_t flags);

struct GainValue {
  double nats_per_sample = 0.0;
  std::uint32_t flags = kFlagNone;
};

/// A random vector expressed as generator * w + offset for w standard normal,
/// with named spans over either the latent w coordinates or the output.
class LinearGaussianModel {
 public:
  LinearGaussianModel(Eigen::MatrixXd generator, Eigen::VectorXd offset);
  explicit LinearGaussianModel(Eigen::MatrixXd generator);

  int dim() const { return static_cast<int>(generator_.rows()); }
  int latent_dim() const { return static_cast<int>(generator_.cols()); }
  const Eigen::MatrixXd& generator() const { return generator_; }
  const Eigen::VectorXd& offset() const { return offset_; }
  Eigen::MatrixXd covariance() const { return generator_ * generator_.transpose(); }

  // Latent spans must partition [0, latent_dim); output spans may overlap.
  void tag_latent_block(const std::string& name, int offset, int size);
  void tag_output_block(const std::string& name, int offset, int size);
  std::pair<int, int> latent_block(const std::string& name) const;
  std::pair<int, int> output_block(const std::string& name) const;

 private:
  Eigen::MatrixXd generator_;
  Eigen::VectorXd offset_;
  std::vector<std::pair<std::string, std::pair<int, int>>> latent_blocks_;
  std::vector<std::pair<std::string, std::pair<int, int>>> output_blocks_;
};

/// Differential entropy 0.5 ln((2 pi e)^n det K) in nats; throws when the
/// covariance is rank deficient (the differential entropy is then undefined).
double entropy(const LinearGaussianModel& model);

struct MutualInformation {
  double nats = 0.0;
  bool ill_conditioned = false;  // conditioning covariance beyond 1e12
};

/// I(a; b) = 0.5 (ln det K_a - ln det K_{a|b}) between two tagged output
/// blocks, with K_{a|b} = K_a - K_{ab} K_b^{-1} K_{ba}.
MutualInformation mutual_information(const LinearGaussianModel& model,
                                     const std::string& target_block,
                                     const std::string& conditioning_block);

enum class Placement { kFirstCoordinates, kRandomOrthonormal, kCustom };

/// Additive output disturbance Phi * s with Phi having kappa orthonormal
/// columns and s zero-mean Gaussian with positive-definite covariance.
struct DisturbanceSpec {
  int kappa = 0;
  Placement placement = Placement::kFirstCoordinates;
  Eigen::MatrixXd seed_covariance;       // kappa x kappa SPD
  Eigen::MatrixXd custom_basis;          // used when placement == kCustom
  std::uint64_t seed = 0;                // stream for kRandomOrthonormal

  static DisturbanceSpec first_coordinates(int kappa, double variance);
  static DisturbanceSpec random_orthonormal(int kappa, double variance, std::uint64_t seed);
  /// Orthonormal columns required to 1e-10.
  static DisturbanceSpec custom(Eigen::MatrixXd basis, Eigen::MatrixXd seed_covariance);
  /// First n rows of the (conceptually infinite) basis.
  Eigen::MatrixXd basis(int n) const;
  void validate() const;
};

/// Gaussian input in innovations form u = S w with S stable and minimum phase
/// and w i.i.d. standard normal scaled by sqrt(sigma2).
struct InputSpec {
  double sigma2 = 1.0;
  std::optional<TransferFunction> shaping;  // identity when absent
  void validate() const;
};

// Per-sample entropy gain (1/n)(h(y_1^n) - h(u_1^n)) for y = G u + Phi s.
//
// Two algebraically identical routes are implemented. Writing A for the
// innovations-to-output map (Toeplitz, det = (g0 s0)^n) and U = Phi L with
// L the Cholesky factor of the seed covariance,
//
//   ln det(s^2 A A^T + U U^T) = ln det(s^2 A A^T) + ln det(I + (1/s^2) U^T (A A^T)^{-1} U).
//
// The right-hand factor ("identity route") cancels the decaying singular
// values of A exactly and is the accurate choice for kappa = 1, where the
// Gram is a scalar. For kappa >= 2 the Gram of A^{-1}U loses the smaller
// exponential rates to rounding long before the asymptote is reached, while
// the left-hand side ("dense route") stays well conditioned provided the
// disturbance lifts every decaying direction: the covariance is a banded
// autocorrelation plus a low-rank term, with spectrum bounded by the filter's
// magnitude response and floored by the lifted seed variances. The dispatch
// below therefore uses the identity route for kappa = 1 and the dense route
// otherwise, flagging kFlagPrecisionLoss when 1 < kappa < m leaves a decaying
// direction unlifted beyond the representable window. Both routes are held to
// agree with each other and with a from-scratch dense log-det at small n.
GainValue disturbance_gain(const TransferFunction& tf, const InputSpec& input,
                           const DisturbanceSpec& disturbance, int n);

/// The identity route unconditionally (oracle cross-checks, any kappa).
GainValue disturbance_gain_identity(const TransferFunction& tf, const InputSpec& input,
                                    const DisturbanceSpec& disturbance, int n);

/// Per-sample gain when the disturbance Psi * a (nu columns) enters before the
/// filter: (1/n)(h(G(u + b)) - h(u)). Decays like O(1/n).
GainValue input_disturbance_gain(const TransferFunction& tf, const InputSpec& input,
                                 const DisturbanceSpec& disturbance, int n);

/// Per-sample gain due to a random initial state x0 = F s (F a p x tau
/// factor, covariance F F^T). The natural response enters the output through
/// the direct-form-II map of the filter's pole/zero cascade.
GainValue initial_state_gain(const TransferFunction& tf, const Eigen::MatrixXd& state_factor,
                             const InputSpec& input, int n);
GainValue initial_state_gain(const TransferFunction& tf, const Eigen::MatrixXd& state_factor,
                             int n);

/// ln det of an SPD matrix through Cholesky (sum of log diagonal entries).
double spd_log_det(const Eigen::MatrixXd& matrix);

/// Forward substitution with the lower-triangular Toeplitz map of `impulse`.
Eigen::MatrixXd toeplitz_lower_solve(const std::vector<double>& impulse,
                                     const Eigen::MatrixXd& rhs);

}  // namespace eglab

#endif  // EGLAB_GAUSSIAN_HPP_
