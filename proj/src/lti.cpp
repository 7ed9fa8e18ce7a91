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

#include "eglab/lti.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <Eigen/Eigenvalues>
#include <nlohmann/json.hpp>

namespace eglab {
namespace {

constexpr double kUnitCircleTol = 1e-9;
constexpr double kConjugatePairTol = 1e-8;
constexpr double kRootClusterTol = 1e-6;

// Expand prod (1 - r_i w) with real output; conjugate closure keeps the
// imaginary residue at rounding level.
std::vector<double> real_poly_from_roots(const std::vector<Complex>& roots) {
  std::vector<Complex> c{1.0};
  for (const Complex& r : roots) {
    std::vector<Complex> next(c.size() + 1, Complex(0.0));
    for (size_t i = 0; i < c.size(); ++i) {
      next[i] += c[i];
      next[i + 1] -= r * c[i];
    }
    c = std::move(next);
  }
  std::vector<double> out(c.size());
  for (size_t i = 0; i < c.size(); ++i) out[i] = c[i].real();
  return out;
}

void check_conjugate_closure(const std::vector<Complex>& roots, const char* what) {
  std::vector<bool> used(roots.size(), false);
  for (size_t i = 0; i < roots.size(); ++i) {
    if (used[i] || std::abs(roots[i].imag()) <= kConjugatePairTol) continue;
    bool matched = false;
    for (size_t j = i + 1; j < roots.size(); ++j) {
      if (used[j]) continue;
      if (std::abs(roots[j] - std::conj(roots[i])) <= kConjugatePairTol *
              std::max(1.0, std::abs(roots[i]))) {
        used[i] = used[j] = true;
        matched = true;
        break;
      }
    }
    if (!matched) {
      throw std::invalid_argument(std::string(what) +
                                  ": complex roots must come in conjugate pairs");
    }
  }
}

void check_off_unit_circle(const std::vector<Complex>& roots, const char* what) {
  for (const Complex& r : roots) {
    if (std::abs(std::abs(r) - 1.0) <= kUnitCircleTol) {
      throw std::invalid_argument(std::string(what) + ": root on the unit circle");
    }
  }
}

}  // namespace

bool TransferFunction::stable(double margin) const {
  for (const Complex& p : poles) {
    if (std::abs(p) >= 1.0 - margin) return false;
  }
  return true;
}

bool TransferFunction::minimum_phase() const {
  for (const Complex& z : zeros) {
    if (std::abs(z) > 1.0) return false;
  }
  return true;
}

bool TransferFunction::fir(double tol) const {
  for (const Complex& p : poles) {
    if (std::abs(p) > tol) return false;
  }
  return true;
}

Complex TransferFunction::eval(Complex z) const {
  const Complex w = 1.0 / z;
  Complex nv(0.0), dv(0.0);
  for (size_t i = num.size(); i-- > 0;) nv = nv * w + num[i];
  for (size_t i = den.size(); i-- > 0;) dv = dv * w + den[i];
  return nv / dv;
}

Complex TransferFunction::frequency_response(double omega) const {
  return eval(Complex(std::cos(omega), std::sin(omega)));
}

TransferFunction make_tf(std::vector<Complex> zeros, std::vector<Complex> poles, double gain) {
  if (zeros.size() > poles.size()) {
    throw std::invalid_argument("make_tf: more zeros than poles (non-causal)");
  }
  check_off_unit_circle(zeros, "make_tf");
  check_off_unit_circle(poles, "make_tf");
  check_conjugate_closure(zeros, "make_tf");
  check_conjugate_closure(poles, "make_tf");

  TransferFunction tf;
  tf.zeros = std::move(zeros);
  tf.poles = std::move(poles);
  tf.gain = gain;

  const size_t shift = tf.poles.size() - tf.zeros.size();
  std::vector<double> zp = real_poly_from_roots(tf.zeros);
  tf.num.assign(tf.poles.size() + 1, 0.0);
  for (size_t i = 0; i < zp.size(); ++i) tf.num[shift + i] = gain * zp[i];
  tf.den = real_poly_from_roots(tf.poles);
  return tf;
}

std::vector<Complex> polynomial_roots(const std::vector<double>& coeffs) {
  size_t first = 0;
  while (first < coeffs.size() && coeffs[first] == 0.0) ++first;
  // Trailing zero coefficients become roots at the origin of the z polynomial,
  // which the companion matrix produces naturally.
  std::vector<double> c(coeffs.begin() + first, coeffs.end());
  if (c.size() <= 1) return {};
  const int degree = static_cast<int>(c.size()) - 1;
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(degree, degree);
  for (int i = 0; i < degree; ++i) companion(0, i) = -c[i + 1] / c[0];
  for (int i = 1; i < degree; ++i) companion(i, i - 1) = 1.0;
  Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, /*computeEigenvectors=*/false);
  std::vector<Complex> roots(degree);
  for (int i = 0; i < degree; ++i) roots[i] = solver.eigenvalues()(i);
  return roots;
}

TransferFunction tf_from_coeffs(const std::vector<double>& num, const std::vector<double>& den) {
  if (den.empty() || den[0] == 0.0) {
    throw std::invalid_argument("tf_from_coeffs: den[0] must be nonzero");
  }
  if (num.empty()) throw std::invalid_argument("tf_from_coeffs: empty numerator");
  const size_t width = std::max(num.size(), den.size());
  std::vector<double> n(num), d(den);
  n.resize(width, 0.0);
  d.resize(width, 0.0);
  // Interpreted as z polynomials of equal degree, trailing zeros are roots at
  // the origin; leading zeros of the numerator lower its degree (strictly
  // proper filters).
  std::vector<Complex> zeros = polynomial_roots(n);
  std::vector<Complex> poles = polynomial_roots(d);
  size_t lead = 0;
  while (lead < n.size() && n[lead] == 0.0) ++lead;
  const double gain = n[lead] / d[0];
  return make_tf(std::move(zeros), std::move(poles), gain);
}

TransferFunction multiply(const TransferFunction& a, const TransferFunction& b) {
  std::vector<Complex> zeros = a.zeros;
  zeros.insert(zeros.end(), b.zeros.begin(), b.zeros.end());
  std::vector<Complex> poles = a.poles;
  poles.insert(poles.end(), b.poles.begin(), b.poles.end());
  return make_tf(std::move(zeros), std::move(poles), a.gain * b.gain);
}

ImpulseResponse impulse_response(const TransferFunction& tf, int n) {
  if (n < 1) throw std::invalid_argument("impulse_response: n must be >= 1");
  ImpulseResponse ir;
  ir.truncation_length = n;
  ir.samples.assign(n, 0.0);
  const auto& b = tf.num;
  const auto& a = tf.den;
  for (int k = 0; k < n; ++k) {
    double s = (k < static_cast<int>(b.size())) ? b[k] : 0.0;
    const int imax = std::min<int>(k, static_cast<int>(a.size()) - 1);
    for (int i = 1; i <= imax; ++i) s -= a[i] * ir.samples[k - i];
    ir.samples[k] = s;
  }
  return ir;
}

JensenResult jensen_log_integral(const TransferFunction& tf, int quadrature_points) {
  if (quadrature_points < 512) {
    throw std::invalid_argument("jensen_log_integral: need at least 512 points");
  }
  JensenResult result;
  for (const auto& roots : {tf.zeros, tf.poles}) {
    for (const Complex& r : roots) {
      if (std::abs(std::abs(r) - 1.0) < 1e-3) result.near_unit_circle = true;
    }
  }
  // Periodic trapezoid rule degenerates to the grid mean and converges
  // exponentially for roots away from the circle.
  double acc = 0.0;
  const double step = 2.0 * std::numbers::pi / quadrature_points;
  for (int j = 0; j < quadrature_points; ++j) {
    const double omega = -std::numbers::pi + step * j;
    acc += std::log(std::abs(tf.frequency_response(omega)));
  }
  result.value = acc / quadrature_points;
  return result;
}

NmpSummary nmp_summary(const TransferFunction& tf) {
  NmpSummary s;
  std::vector<Complex> outside;
  for (const Complex& z : tf.zeros) {
    if (std::abs(z) > 1.0) outside.push_back(z);
  }
  std::sort(outside.begin(), outside.end(), [](const Complex& a, const Complex& b) {
    if (std::abs(a) != std::abs(b)) return std::abs(a) > std::abs(b);
    if (a.real() != b.real()) return a.real() > b.real();
    return a.imag() > b.imag();
  });
  s.m = static_cast<int>(outside.size());
  for (const Complex& z : outside) {
    if (!s.distinct_zeros.empty() &&
        std::abs(z - s.distinct_zeros.back()) <= kRootClusterTol *
            std::max(1.0, std::abs(z))) {
      ++s.multiplicities.back();
    } else {
      s.distinct_zeros.push_back(z);
      s.multiplicities.push_back(1);
    }
    s.log_magnitude_sum += std::log(std::abs(z));
  }
  s.distinct_count = static_cast<int>(s.distinct_zeros.size());
  s.iota.reserve(s.m);
  for (int d = 0; d < s.distinct_count; ++d) {
    for (int r = 0; r < s.multiplicities[d]; ++r) s.iota.push_back(d);
  }
  return s;
}

std::pair<TransferFunction, TransferFunction> factorize(const TransferFunction& tf,
                                                        FactorizationMode mode) {
  if (!tf.biproper()) throw std::invalid_argument("factorize: filter must be biproper");
  if (!tf.stable()) throw std::invalid_argument("factorize: filter must be stable");
  if (mode == FactorizationMode::kPolesZeros) {
    TransferFunction all_pole = make_tf({}, tf.poles, 1.0);
    TransferFunction fir_zeros = make_tf(tf.zeros, std::vector<Complex>(tf.zeros.size(), 0.0),
                                         tf.gain);
    return {all_pole, fir_zeros};
  }
  std::vector<Complex> inside, outside;
  for (const Complex& z : tf.zeros) {
    (std::abs(z) > 1.0 ? outside : inside).push_back(z);
  }
  TransferFunction mp = make_tf(inside, tf.poles, tf.gain);
  TransferFunction nmp_fir = make_tf(outside, std::vector<Complex>(outside.size(), 0.0), 1.0);
  return {mp, nmp_fir};
}

TransferFunction blaschke_product(const std::vector<Complex>& outside_roots) {
  Complex denom_gain(1.0);
  std::vector<Complex> poles;
  poles.reserve(outside_roots.size());
  for (const Complex& p : outside_roots) {
    if (std::abs(p) <= 1.0 + kUnitCircleTol) {
      throw std::invalid_argument("blaschke_product: roots must lie outside the unit circle");
    }
    poles.push_back(1.0 / std::conj(p));
    denom_gain *= std::conj(p);
  }
  if (std::abs(denom_gain.imag()) > kConjugatePairTol * std::abs(denom_gain)) {
    throw std::invalid_argument("blaschke_product: roots must be conjugate closed");
  }
  return make_tf(outside_roots, std::move(poles), 1.0 / denom_gain.real());
}

TransferFunction reflect_unstable_poles(const TransferFunction& tf) {
  std::vector<Complex> poles;
  Complex scale(1.0);
  for (const Complex& p : tf.poles) {
    if (std::abs(p) > 1.0) {
      poles.push_back(1.0 / std::conj(p));
      scale *= std::conj(p);
    } else {
      poles.push_back(p);
    }
  }
  return make_tf(tf.zeros, std::move(poles), tf.gain / scale.real());
}

ClosedLoop closed_loop(const TransferFunction& plant, const TransferFunction& feedback) {
  if (plant.num.empty() || plant.num[0] != 0.0) {
    throw std::invalid_argument("closed_loop: plant must be strictly proper");
  }
  if (plant.order() >= 1 && plant.num.size() > 1 && plant.num[1] == 0.0) {
    throw std::invalid_argument("closed_loop: plant must have relative degree 1");
  }
  if (!feedback.biproper()) {
    throw std::invalid_argument("closed_loop: feedback path must be biproper");
  }
  const std::vector<double>& n = plant.num;
  const std::vector<double>& d = plant.den;
  const std::vector<double>& gamma = feedback.num;
  const std::vector<double>& theta = feedback.den;

  auto conv = [](const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> c(a.size() + b.size() - 1, 0.0);
    for (size_t i = 0; i < a.size(); ++i) {
      for (size_t j = 0; j < b.size(); ++j) c[i + j] += a[i] * b[j];
    }
    return c;
  };
  std::vector<double> theta_d = conv(theta, d);
  std::vector<double> gamma_n = conv(gamma, n);
  std::vector<double> characteristic(std::max(theta_d.size(), gamma_n.size()), 0.0);
  for (size_t i = 0; i < theta_d.size(); ++i) characteristic[i] += theta_d[i];
  for (size_t i = 0; i < gamma_n.size(); ++i) characteristic[i] += gamma_n[i];

  for (const Complex& r : polynomial_roots(characteristic)) {
    if (std::abs(r) >= 1.0 - kUnitCircleTol) {
      throw std::runtime_error("closed_loop: unstable closed loop");
    }
  }
  ClosedLoop cl;
  cl.loop = tf_from_coeffs(theta_d, characteristic);
  cl.unstable_factor = tf_from_coeffs(d, {1.0});
  cl.stable_fraction = tf_from_coeffs(theta, characteristic);
  return cl;
}

Eigen::MatrixXd natural_response_matrix(const TransferFunction& tf, int n) {
  const int p = tf.order();
  Eigen::MatrixXd map = Eigen::MatrixXd::Zero(n, p);
  if (p == 0) return map;
  const auto& b = tf.num;
  const auto& a = tf.den;
  // Direct form II: v_k = -sum a_i v_{k-i}, y_k = sum b_i v_{k-i}; the state
  // holds v_{1-p} .. v_0, oldest first.
  std::vector<double> v(static_cast<size_t>(n) + p, 0.0);
  for (int col = 0; col < p; ++col) {
    std::fill(v.begin(), v.end(), 0.0);
    v[col] = 1.0;  // v_{1-p+col}
    for (int k = 1; k <= n; ++k) {
      double s = 0.0;
      for (int i = 1; i <= p; ++i) s -= a[i] * v[p + k - 1 - i];
      v[p + k - 1] = s;
      double y = 0.0;
      for (int i = 0; i <= std::min<int>(p, static_cast<int>(b.size()) - 1); ++i) {
        y += b[i] * v[p + k - 1 - i];
      }
      map(k - 1, col) = y;
    }
  }
  return map;
}

nlohmann::json tf_to_json(const TransferFunction& tf) {
  nlohmann::json j;
  j["zeros"] = nlohmann::json::array();
  j["poles"] = nlohmann::json::array();
  for (const Complex& z : tf.zeros) j["zeros"].push_back({z.real(), z.imag()});
  for (const Complex& p : tf.poles) j["poles"].push_back({p.real(), p.imag()});
  j["gain"] = tf.gain;
  return j;
}

TransferFunction tf_from_json(const nlohmann::json& j) {
  for (const auto& [key, value] : j.items()) {
    if (key != "zeros" && key != "poles" && key != "gain") {
      throw std::invalid_argument("filter JSON: unknown field '" + key + "'");
    }
  }
  auto parse_roots = [](const nlohmann::json& arr) {
    std::vector<Complex> roots;
    for (const auto& e : arr) {
      if (e.is_number()) {
        roots.emplace_back(e.get<double>(), 0.0);
      } else if (e.is_array() && e.size() == 2) {
        roots.emplace_back(e[0].get<double>(), e[1].get<double>());
      } else {
        throw std::invalid_argument("filter JSON: roots must be re or [re, im]");
      }
    }
    return roots;
  };
  std::vector<Complex> zeros = j.contains("zeros") ? parse_roots(j.at("zeros"))
                                                   : std::vector<Complex>{};
  std::vector<Complex> poles = j.contains("poles") ? parse_roots(j.at("poles"))
                                                   : std::vector<Complex>{};
  if (poles.empty() && !zeros.empty()) poles.assign(zeros.size(), Complex(0.0));
  const double gain = j.value("gain", 1.0);
  return make_tf(std::move(zeros), std::move(poles), gain);
}

}  // namespace eglab
