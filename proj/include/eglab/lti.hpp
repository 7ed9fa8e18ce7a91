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

#ifndef EGLAB_LTI_HPP_
#define EGLAB_LTI_HPP_

#include <complex>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

namespace eglab {

using Complex = std::complex<double>;

/// Causal rational filter G(z) = gain * prod(z - zero_i) / prod(z - pole_i),
/// stored as roots plus cached real coefficients in powers of z^-1.
///
/// With q = zeros.size() and p = poles.size() (q <= p required for causality),
///   num(w) = gain * w^{p-q} * prod(1 - zero_i w),  den(w) = prod(1 - pole_i w),
/// where w = z^-1 and both vectors have length p + 1.
struct TransferFunction {
  std::vector<Complex> zeros;
  std::vector<Complex> poles;
  double gain = 1.0;
  std::vector<double> num{1.0};  // coefficient of z^-k at index k
  std::vector<double> den{1.0};  // den[0] == 1

  int order() const { return static_cast<int>(poles.size()); }
  bool biproper() const { return zeros.size() == poles.size(); }
  bool stable(double margin = 0.0) const;
  bool minimum_phase() const;
  /// All poles at the origin, i.e. the impulse response has finite support.
  bool fir(double tol = 1e-12) const;
  /// First impulse-response sample g0 (equals gain when biproper).
  double first_sample() const { return num.front(); }
  Complex eval(Complex z) const;
  Complex frequency_response(double omega) const;
};

/// Build a validated filter from its roots. Real-coefficient filters must have
/// conjugate-closed root sets; roots on the unit circle are rejected, as is a
/// zero count exceeding the pole count (non-causal).
TransferFunction make_tf(std::vector<Complex> zeros, std::vector<Complex> poles, double gain);

/// Reconstruct a filter from coefficient vectors in powers of z^-1 (den[0] != 0).
TransferFunction tf_from_coeffs(const std::vector<double>& num, const std::vector<double>& den);

/// Cascade G1*G2 (root lists concatenate, gains multiply).
TransferFunction multiply(const TransferFunction& a, const TransferFunction& b);

/// Roots (in the z plane) of c[0] + c[1] z^-1 + ... + c[q] z^-q, i.e. of the
/// z-polynomial c[0] z^q + ... + c[q], computed as companion-matrix eigenvalues.
std::vector<Complex> polynomial_roots(const std::vector<double>& coeffs);

struct ImpulseResponse {
  std::vector<double> samples;
  int truncation_length = 0;
};

/// First n samples of the inverse z-transform, by running the difference
/// equation den * g = num.
ImpulseResponse impulse_response(const TransferFunction& tf, int n);

struct JensenResult {
  double value = 0.0;              // (1/2pi) Int log|G(e^{jw})| dw, nats
  bool near_unit_circle = false;   // some root within 1e-3 of the unit circle
};

/// Uniform-grid trapezoid rule for the log-magnitude integral; for a biproper
/// stable filter with g0 = 1 this equals the sum of log|zero| over zeros
/// outside the unit circle.
JensenResult jensen_log_integral(const TransferFunction& tf, int quadrature_points = 1 << 16);

struct NmpSummary {
  int m = 0;                            // NMP zeros counted with multiplicity
  int distinct_count = 0;               // M
  std::vector<Complex> distinct_zeros;  // descending magnitude
  std::vector<int> multiplicities;      // per distinct zero
  std::vector<int> iota;                // iota[k] = distinct index of k-th NMP zero (0-based)
  double log_magnitude_sum = 0.0;       // B(G) = sum log|rho_i| over NMP zeros, nats
};

/// Cluster the zeros outside the unit circle (tolerance 1e-6) and build the
/// multiplicity table and the non-distinct -> distinct index map.
NmpSummary nmp_summary(const TransferFunction& tf);

enum class FactorizationMode {
  kPolesZeros,  // all-pole biproper P times FIR N carrying every zero
  kMpNmp,       // stable minimum-phase biproper times monic FIR with the NMP zeros
};

/// Split a stable biproper filter; the product of the two factors reproduces
/// the original coefficients.
std::pair<TransferFunction, TransferFunction> factorize(const TransferFunction& tf,
                                                        FactorizationMode mode);

/// All-pass filter with the given outside-unit-circle roots as zeros and their
/// reciprocal conjugates as poles:  B(z) = prod (z - p_i) / (p_i^* (z - 1/p_i^*)).
/// Its first impulse sample is 1 / prod p_i^*.
TransferFunction blaschke_product(const std::vector<Complex>& outside_roots);

/// Replace every pole outside the unit circle by its reciprocal conjugate and
/// divide the gain by the product of the conjugated unstable poles; the result
/// is stable with the same magnitude response up to the leading sample scale.
TransferFunction reflect_unstable_poles(const TransferFunction& tf);

struct ClosedLoop {
  TransferFunction loop;             // y/u = Theta*D / (Theta*D + N*Gamma)
  TransferFunction unstable_factor;  // FIR factor D (carries the plant initial state)
  TransferFunction stable_fraction;  // Theta / (Theta*D + N*Gamma)
};

/// Negative feedback y = u - P T y for a strictly proper plant P = N/D and a
/// biproper feedback path T = Gamma/Theta. Throws if the characteristic
/// polynomial Theta*D + N*Gamma has roots on or outside the unit circle.
ClosedLoop closed_loop(const TransferFunction& plant, const TransferFunction& feedback);

/// Map from the direct-form-II delay line (oldest entry first) to the first n
/// output samples with zero input. Rows k > order are zero for FIR filters and
/// the top square block is then nonsingular and upper triangular.
Eigen::MatrixXd natural_response_matrix(const TransferFunction& tf, int n);

nlohmann::json tf_to_json(const TransferFunction& tf);
TransferFunction tf_from_json(const nlohmann::json& j);

}  // namespace eglab

#endif  // EGLAB_LTI_HPP_
