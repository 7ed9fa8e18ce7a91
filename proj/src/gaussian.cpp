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

#include "eglab/gaussian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "eglab/processes.hpp"
#include "eglab/toeplitz.hpp"

namespace eglab {
namespace {

constexpr double kLog2PiE = 2.8378770664093453;  // ln(2 pi e)
constexpr double kConditionGuard = 1e12;
constexpr double kOverflowBudgetLog = 150.0 * 2.302585092994046;
constexpr double kEps = std::numeric_limits<double>::epsilon();

std::pair<int, int> find_block(
    const std::vector<std::pair<std::string, std::pair<int, int>>>& blocks,
    const std::string& name, const char* domain) {
  for (const auto& [key, span] : blocks) {
    if (key == name) return span;
  }
  throw std::invalid_argument(std::string(domain) + " block '" + name + "' not found");
}

// Innovations-to-output impulse response and the matching overflow guard.
std::vector<double> total_impulse(const TransferFunction& tf, const InputSpec& input, int n) {
  TransferFunction total = input.shaping ? multiply(tf, *input.shaping) : tf;
  double rho_max = 0.0;
  for (const Complex& z : total.zeros) rho_max = std::max(rho_max, std::abs(z));
  if (rho_max > 1.0 && n * std::log(rho_max) > kOverflowBudgetLog) {
    const int safe = static_cast<int>(kOverflowBudgetLog / std::log(rho_max));
    throw std::runtime_error("disturbance gain: overflow budget exceeded, max safe n = " +
                             std::to_string(safe));
  }
  return impulse_response(total, n).samples;
}

double shaping_leading_sample(const InputSpec& input) {
  return input.shaping ? input.shaping->first_sample() : 1.0;
}

}  // namespace

std::string flag_names(std::uint32_t flags) {
  std::string out;
  auto append = [&out](const char* name) {
    if (!out.empty()) out += "|";
    out += name;
  };
  if (flags & kFlagIllConditioned) append("ill_conditioned");
  if (flags & kFlagPrecisionLoss) append("precision_loss");
  if (flags & kFlagNearUnitCircle) append("near_unit_circle");
  if (flags & kFlagEstimatorJitter) append("estimator_jitter");
  return out;
}

LinearGaussianModel::LinearGaussianModel(Eigen::MatrixXd generator, Eigen::VectorXd offset)
    : generator_(std::move(generator)), offset_(std::move(offset)) {
  if (offset_.size() != generator_.rows()) {
    throw std::invalid_argument("LinearGaussianModel: offset dimension mismatch");
  }
}

LinearGaussianModel::LinearGaussianModel(Eigen::MatrixXd generator)
    : LinearGaussianModel(std::move(generator),
                          Eigen::VectorXd::Zero(generator.rows())) {}

void LinearGaussianModel::tag_latent_block(const std::string& name, int offset, int size) {
  if (offset < 0 || size <= 0 || offset + size > latent_dim()) {
    throw std::invalid_argument("tag_latent_block: span out of range");
  }
  latent_blocks_.emplace_back(name, std::make_pair(offset, size));
}

void LinearGaussianModel::tag_output_block(const std::string& name, int offset, int size) {
  if (offset < 0 || size <= 0 || offset + size > dim()) {
    throw std::invalid_argument("tag_output_block: span out of range");
  }
  output_blocks_.emplace_back(name, std::make_pair(offset, size));
}

std::pair<int, int> LinearGaussianModel::latent_block(const std::string& name) const {
  return find_block(latent_blocks_, name, "latent");
}

std::pair<int, int> LinearGaussianModel::output_block(const std::string& name) const {
  return find_block(output_blocks_, name, "output");
}

double spd_log_det(const Eigen::MatrixXd& matrix) {
  Eigen::LLT<Eigen::MatrixXd> llt(matrix);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("spd_log_det: matrix is not positive definite");
  }
  double acc = 0.0;
  for (int i = 0; i < matrix.rows(); ++i) acc += std::log(llt.matrixL()(i, i));
  return 2.0 * acc;
}

Eigen::MatrixXd toeplitz_lower_solve(const std::vector<double>& impulse,
                                     const Eigen::MatrixXd& rhs) {
  if (impulse.empty() || impulse[0] == 0.0) {
    throw std::invalid_argument("toeplitz_lower_solve: leading sample must be nonzero");
  }
  const int n = static_cast<int>(rhs.rows());
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, rhs.cols());
  for (int c = 0; c < rhs.cols(); ++c) {
    for (int i = 0; i < n; ++i) {
      double s = rhs(i, c);
      const int jmin = std::max(0, i - static_cast<int>(impulse.size()) + 1);
      for (int j = jmin; j < i; ++j) s -= impulse[i - j] * x(j, c);
      x(i, c) = s / impulse[0];
    }
  }
  return x;
}

double entropy(const LinearGaussianModel& model) {
  Eigen::LLT<Eigen::MatrixXd> llt(model.covariance());
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("entropy: rank-deficient covariance, differential entropy undefined");
  }
  double log_det = 0.0;
  for (int i = 0; i < model.dim(); ++i) log_det += std::log(llt.matrixL()(i, i));
  return 0.5 * model.dim() * kLog2PiE + log_det;
}

MutualInformation mutual_information(const LinearGaussianModel& model,
                                     const std::string& target_block,
                                     const std::string& conditioning_block) {
  const auto [ta, sa] = model.output_block(target_block);
  const auto [tb, sb] = model.output_block(conditioning_block);
  const Eigen::MatrixXd cov = model.covariance();
  const Eigen::MatrixXd ka = cov.block(ta, ta, sa, sa);
  const Eigen::MatrixXd kb = cov.block(tb, tb, sb, sb);
  const Eigen::MatrixXd kab = cov.block(ta, tb, sa, sb);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(kb);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (lo <= 0.0) {
    throw std::runtime_error("mutual_information: singular conditioning covariance");
  }
  MutualInformation mi;
  mi.ill_conditioned = hi / lo > kConditionGuard;
  const Eigen::MatrixXd conditional =
      ka - kab * kb.llt().solve(kab.transpose());
  mi.nats = 0.5 * (spd_log_det(ka) - spd_log_det(conditional));
  return mi;
}

DisturbanceSpec DisturbanceSpec::first_coordinates(int kappa, double variance) {
  DisturbanceSpec spec;
  spec.kappa = kappa;
  spec.placement = Placement::kFirstCoordinates;
  spec.seed_covariance = variance * Eigen::MatrixXd::Identity(kappa, kappa);
  return spec;
}

DisturbanceSpec DisturbanceSpec::random_orthonormal(int kappa, double variance,
                                                    std::uint64_t seed) {
  DisturbanceSpec spec;
  spec.kappa = kappa;
  spec.placement = Placement::kRandomOrthonormal;
  spec.seed_covariance = variance * Eigen::MatrixXd::Identity(kappa, kappa);
  spec.seed = seed;
  return spec;
}

DisturbanceSpec DisturbanceSpec::custom(Eigen::MatrixXd basis, Eigen::MatrixXd seed_covariance) {
  DisturbanceSpec spec;
  spec.kappa = static_cast<int>(basis.cols());
  spec.placement = Placement::kCustom;
  spec.custom_basis = std::move(basis);
  spec.seed_covariance = std::move(seed_covariance);
  spec.validate();
  return spec;
}

void DisturbanceSpec::validate() const {
  if (kappa < 0) throw std::invalid_argument("DisturbanceSpec: kappa must be >= 0");
  if (kappa == 0) return;
  if (seed_covariance.rows() != kappa || seed_covariance.cols() != kappa) {
    throw std::invalid_argument("DisturbanceSpec: seed covariance must be kappa x kappa");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(seed_covariance);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument("DisturbanceSpec: seed covariance must be positive definite");
  }
  if (placement == Placement::kCustom) {
    const Eigen::MatrixXd residual =
        custom_basis.transpose() * custom_basis -
        Eigen::MatrixXd::Identity(kappa, kappa);
    if (residual.cwiseAbs().maxCoeff() > 1e-10) {
      throw std::invalid_argument("DisturbanceSpec: basis columns must be orthonormal to 1e-10");
    }
  }
}

Eigen::MatrixXd DisturbanceSpec::basis(int n) const {
  if (kappa > n) throw std::invalid_argument("DisturbanceSpec: kappa exceeds n");
  switch (placement) {
    case Placement::kFirstCoordinates: {
      Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(n, kappa);
      phi.topLeftCorner(kappa, kappa).setIdentity();
      return phi;
    }
    case Placement::kRandomOrthonormal:
      return random_orthonormal_rows(kappa, n, seed).transpose();
    case Placement::kCustom: {
      if (custom_basis.rows() < n) {
        throw std::invalid_argument("DisturbanceSpec: custom basis shorter than n");
      }
      Eigen::MatrixXd phi = custom_basis.topRows(n);
      const Eigen::MatrixXd residual =
          phi.transpose() * phi - Eigen::MatrixXd::Identity(kappa, kappa);
      if (residual.cwiseAbs().maxCoeff() > 1e-10) {
        throw std::invalid_argument("DisturbanceSpec: truncated basis loses orthonormality");
      }
      return phi;
    }
  }
  throw std::logic_error("DisturbanceSpec: unknown placement");
}

void InputSpec::validate() const {
  if (sigma2 <= 0.0) throw std::invalid_argument("InputSpec: sigma2 must be positive");
  if (shaping) {
    if (!shaping->stable() || !shaping->minimum_phase() || !shaping->biproper()) {
      throw std::invalid_argument(
          "InputSpec: shaping filter must be stable, minimum phase and biproper");
    }
  }
}

namespace {

// Shared implementation: per-sample gain for y = A w + U s against u = S w,
// where `impulse` generates A and `lift` is U times the Cholesky factor of the
// seed covariance. ln|g0| enters through the determinant ratio of A and S.
GainValue lift_gain_dense(const std::vector<double>& impulse, double s0, double sigma2,
                          const Eigen::MatrixXd& lift, int n) {
  Eigen::MatrixXd a = conv_matrix(impulse, n).dense;
  Eigen::MatrixXd cov = sigma2 * a * a.transpose();
  cov.noalias() += lift * lift.transpose();
  GainValue g;
  g.nats_per_sample = (0.5 * spd_log_det(cov) - 0.5 * n * std::log(sigma2) -
                       n * std::log(std::abs(s0))) / n;
  return g;
}

GainValue lift_gain_identity(const std::vector<double>& impulse, double s0, double sigma2,
                             const Eigen::MatrixXd& lift, int n) {
  const Eigen::MatrixXd b = toeplitz_lower_solve(impulse, lift);
  const Eigen::MatrixXd gram = b.transpose() * b;
  const int kappa = static_cast<int>(lift.cols());
  const Eigen::MatrixXd m =
      Eigen::MatrixXd::Identity(kappa, kappa) + gram / sigma2;
  GainValue g;
  g.nats_per_sample = (0.5 * spd_log_det(m)) / n +
                      std::log(std::abs(impulse[0] / s0));
  return g;
}

// Largest n for which an unlifted decaying direction is still representable.
bool precision_window_exceeded(const TransferFunction& tf, int kappa, int n) {
  const NmpSummary summary = nmp_summary(tf);
  if (kappa >= summary.m) return false;
  const double rho_next = std::abs(summary.distinct_zeros[summary.iota[kappa]]);
  return n * std::log(rho_next) > -std::log(1e3 * kEps);
}

// The identity route resolves the slower decay rates only while their ratio to
// the dominant one stays above rounding.
bool identity_rate_spread_exceeded(const TransferFunction& tf, int kappa, int n) {
  const NmpSummary summary = nmp_summary(tf);
  if (summary.m < 2 || kappa < 2) return false;
  const double rho_first = std::abs(summary.distinct_zeros[summary.iota[0]]);
  const int last = std::min(kappa, summary.m) - 1;
  const double rho_last = std::abs(summary.distinct_zeros[summary.iota[last]]);
  return n * std::log(rho_first / rho_last) > -std::log(1e3 * kEps);
}

}  // namespace

GainValue disturbance_gain(const TransferFunction& tf, const InputSpec& input,
                           const DisturbanceSpec& disturbance, int n) {
  input.validate();
  disturbance.validate();
  if (disturbance.kappa == 0) return GainValue{0.0, kFlagNone};
  const std::vector<double> a = total_impulse(tf, input, n);
  const double s0 = shaping_leading_sample(input);
  const Eigen::MatrixXd phi = disturbance.basis(n);
  const Eigen::MatrixXd seed_l =
      Eigen::LLT<Eigen::MatrixXd>(disturbance.seed_covariance).matrixL();
  const Eigen::MatrixXd lift = phi * seed_l;

  if (disturbance.kappa == 1) {
    return lift_gain_identity(a, s0, input.sigma2, lift, n);
  }
  GainValue g = lift_gain_dense(a, s0, input.sigma2, lift, n);
  if (precision_window_exceeded(tf, disturbance.kappa, n)) {
    g.flags |= kFlagPrecisionLoss;
  }
  return g;
}

GainValue disturbance_gain_identity(const TransferFunction& tf, const InputSpec& input,
                                    const DisturbanceSpec& disturbance, int n) {
  input.validate();
  disturbance.validate();
  if (disturbance.kappa == 0) return GainValue{0.0, kFlagNone};
  const std::vector<double> a = total_impulse(tf, input, n);
  const double s0 = shaping_leading_sample(input);
  const Eigen::MatrixXd phi = disturbance.basis(n);
  const Eigen::MatrixXd seed_l =
      Eigen::LLT<Eigen::MatrixXd>(disturbance.seed_covariance).matrixL();
  GainValue g = lift_gain_identity(a, s0, input.sigma2, phi * seed_l, n);
  if (identity_rate_spread_exceeded(tf, disturbance.kappa, n)) {
    g.flags |= kFlagPrecisionLoss;
  }
  return g;
}

GainValue input_disturbance_gain(const TransferFunction& tf, const InputSpec& input,
                                 const DisturbanceSpec& disturbance, int n) {
  input.validate();
  disturbance.validate();
  if (disturbance.kappa == 0) return GainValue{0.0, kFlagNone};
  // The filter cancels inside the determinant ratio: A^{-1} (G Psi) = S^{-1} Psi,
  // leaving only the trivial ln|g0| scale. S is minimum phase, so the solve is
  // bounded and the Gram benign for any nu.
  const std::vector<double> s = input.shaping
                                    ? impulse_response(*input.shaping, n).samples
                                    : std::vector<double>(1, 1.0);
  const Eigen::MatrixXd psi = disturbance.basis(n);
  const Eigen::MatrixXd seed_l =
      Eigen::LLT<Eigen::MatrixXd>(disturbance.seed_covariance).matrixL();
  const Eigen::MatrixXd b = toeplitz_lower_solve(s, psi * seed_l);
  const int nu = disturbance.kappa;
  const Eigen::MatrixXd m = Eigen::MatrixXd::Identity(nu, nu) +
                            b.transpose() * b / input.sigma2;
  GainValue g;
  g.nats_per_sample = 0.5 * spd_log_det(m) / n + std::log(std::abs(tf.first_sample()));
  return g;
}

GainValue initial_state_gain(const TransferFunction& tf, const Eigen::MatrixXd& state_factor,
                             const InputSpec& input, int n) {
  input.validate();
  if (!tf.stable() || !tf.biproper()) {
    throw std::invalid_argument("initial_state_gain: filter must be stable and biproper");
  }
  if (state_factor.rows() != tf.order()) {
    throw std::invalid_argument("initial_state_gain: state factor must have p rows");
  }
  const int tau = static_cast<int>(state_factor.cols());
  if (tau == 0 || state_factor.isZero(0.0)) return GainValue{0.0, kFlagNone};
  const std::vector<double> a = total_impulse(tf, input, n);
  const double s0 = shaping_leading_sample(input);
  // Natural response map of the pole/zero cascade, shared delay line.
  const Eigen::MatrixXd natural = natural_response_matrix(tf, n);
  const Eigen::MatrixXd lift = natural * state_factor;

  if (tau == 1) {
    return lift_gain_identity(a, s0, input.sigma2, lift, n);
  }
  GainValue g = lift_gain_dense(a, s0, input.sigma2, lift, n);
  if (precision_window_exceeded(tf, tau, n)) g.flags |= kFlagPrecisionLoss;
  return g;
}

GainValue initial_state_gain(const TransferFunction& tf, const Eigen::MatrixXd& state_factor,
                             int n) {
  return initial_state_gain(tf, state_factor, InputSpec{}, n);
}

}  // namespace eglab
