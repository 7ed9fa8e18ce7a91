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

#include "eglab/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <mutex>
#include <numbers>
#include <set>
#include <stdexcept>
#include <thread>

#include "eglab/toeplitz.hpp"

namespace eglab {
namespace {

using nlohmann::json;

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

void check_fields(const json& j, const std::set<std::string>& allowed, const char* where) {
  if (!j.is_object()) {
    throw std::invalid_argument(std::string(where) + ": expected a JSON object");
  }
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) {
      throw std::invalid_argument(std::string(where) + ": unknown field '" + key + "'");
    }
  }
}

std::vector<int> parse_grid(const json& j, const std::vector<int>& fallback) {
  if (j.is_null()) return fallback;
  if (j.is_array()) {
    std::vector<int> grid;
    for (const auto& e : j) grid.push_back(e.get<int>());
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    if (grid.empty() || grid.front() < 1) throw std::invalid_argument("n_grid: bad values");
    return grid;
  }
  check_fields(j, {"min", "max", "points", "spacing"}, "n_grid");
  const int lo = j.at("min").get<int>();
  const int hi = j.at("max").get<int>();
  const int points = j.value("points", 20);
  const std::string spacing = j.value("spacing", "log");
  if (lo < 1 || hi < lo || points < 2) throw std::invalid_argument("n_grid: bad range");
  if (spacing == "log") return log_spaced_grid(lo, hi, points);
  if (spacing != "linear") throw std::invalid_argument("n_grid: spacing must be log or linear");
  std::vector<int> grid;
  for (int i = 0; i < points; ++i) {
    grid.push_back(lo + static_cast<int>(std::llround(static_cast<double>(i) * (hi - lo) /
                                                      (points - 1))));
  }
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

Eigen::MatrixXd parse_matrix(const json& j, const char* where) {
  if (!j.is_array() || j.empty()) {
    throw std::invalid_argument(std::string(where) + ": expected a nonempty array of rows");
  }
  const int rows = static_cast<int>(j.size());
  const int cols = static_cast<int>(j[0].size());
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    if (static_cast<int>(j[r].size()) != cols) {
      throw std::invalid_argument(std::string(where) + ": ragged rows");
    }
    for (int c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (int r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

InputSpec parse_input(const json& j) {
  InputSpec input;
  if (j.is_null()) return input;
  check_fields(j, {"sigma2", "shaping"}, "input");
  input.sigma2 = j.value("sigma2", 1.0);
  if (j.contains("shaping") && !j.at("shaping").is_null()) {
    input.shaping = tf_from_json(j.at("shaping"));
  }
  input.validate();
  return input;
}

json input_to_json(const InputSpec& input) {
  json j;
  j["sigma2"] = input.sigma2;
  j["shaping"] = input.shaping ? tf_to_json(*input.shaping) : json(nullptr);
  return j;
}

DisturbanceSpec parse_disturbance_spec(const json& j, std::uint64_t seed,
                                       const DisturbanceSpec& fallback) {
  if (j.is_null()) {
    DisturbanceSpec spec = fallback;
    if (spec.placement == Placement::kRandomOrthonormal) spec.seed = seed;
    return spec;
  }
  check_fields(j, {"kappa", "placement", "variance", "seed_covariance", "basis"}, "disturbance");
  DisturbanceSpec spec;
  spec.kappa = j.value("kappa", fallback.kappa);
  const std::string placement = j.value("placement", "first_coordinates");
  if (placement == "first_coordinates") {
    spec.placement = Placement::kFirstCoordinates;
  } else if (placement == "random_orthonormal") {
    spec.placement = Placement::kRandomOrthonormal;
    spec.seed = seed;
  } else if (placement == "custom") {
    spec.placement = Placement::kCustom;
    spec.custom_basis = parse_matrix(j.at("basis"), "disturbance.basis");
  } else {
    throw std::invalid_argument("disturbance: unknown placement '" + placement + "'");
  }
  if (j.contains("seed_covariance")) {
    spec.seed_covariance = parse_matrix(j.at("seed_covariance"), "disturbance.seed_covariance");
  } else {
    const double variance = j.value("variance", 1e-4);
    spec.seed_covariance = variance * Eigen::MatrixXd::Identity(spec.kappa, spec.kappa);
  }
  spec.validate();
  return spec;
}

json disturbance_to_json(const DisturbanceSpec& spec) {
  json j;
  j["kappa"] = spec.kappa;
  switch (spec.placement) {
    case Placement::kFirstCoordinates: j["placement"] = "first_coordinates"; break;
    case Placement::kRandomOrthonormal: j["placement"] = "random_orthonormal"; break;
    case Placement::kCustom: j["placement"] = "custom"; break;
  }
  j["seed_covariance"] = matrix_to_json(spec.seed_covariance);
  return j;
}

json grid_to_json(const std::vector<int>& grid) {
  json j = json::array();
  for (int n : grid) j.push_back(n);
  return j;
}

SeriesReport make_series(std::string id, std::vector<RecordedPoint> records, double target,
                         double tolerance, std::string x_label = "n") {
  SeriesReport series;
  series.id = std::move(id);
  series.x_label = std::move(x_label);
  series.records = std::move(records);
  series.fitted_limit = fit_limit(series.records);
  series.tail_mean = tail_mean(series.records);
  series.target = target;
  series.tolerance = tolerance;
  series.pass = std::abs(series.fitted_limit - target) <= tolerance;
  return series;
}

ExperimentReport finish_report(std::string name, json config_echo,
                               std::vector<SeriesReport> series, const Stopwatch& watch) {
  ExperimentReport report;
  report.experiment = std::move(name);
  report.config_echo = std::move(config_echo);
  report.series = std::move(series);
  report.pass = std::all_of(report.series.begin(), report.series.end(),
                            [](const SeriesReport& s) { return s.pass; });
  report.wall_time_s = watch.seconds();
  return report;
}

double nmp_partial_sum(const TransferFunction& tf, int count) {
  const NmpSummary summary = nmp_summary(tf);
  double acc = 0.0;
  for (int i = 0; i < std::min(count, summary.m); ++i) {
    acc += std::log(std::abs(summary.distinct_zeros[summary.iota[i]]));
  }
  return acc;
}

TransferFunction one_plus(const TransferFunction& strictly_causal) {
  if (strictly_causal.num.empty() || strictly_causal.num[0] != 0.0) {
    throw std::invalid_argument("feedback collapse: the shaper must be strictly causal");
  }
  std::vector<double> num = strictly_causal.den;
  for (size_t i = 0; i < strictly_causal.num.size() && i < num.size(); ++i) {
    num[i] += strictly_causal.num[i];
  }
  return tf_from_coeffs(num, strictly_causal.den);
}

}  // namespace

double fit_limit(const std::vector<RecordedPoint>& records) {
  if (records.size() < 4) return tail_mean(records);
  const size_t begin = records.size() / 2;
  const size_t count = records.size() - begin;
  // OLS intercept of value = a + b / x over the tail half.
  double s1 = 0.0, sx = 0.0, sxx = 0.0, sy = 0.0, sxy = 0.0;
  for (size_t i = begin; i < records.size(); ++i) {
    const double ix = 1.0 / records[i].x;
    s1 += 1.0;
    sx += ix;
    sxx += ix * ix;
    sy += records[i].value;
    sxy += ix * records[i].value;
  }
  const double det = s1 * sxx - sx * sx;
  if (std::abs(det) < 1e-30 || count < 2) return sy / s1;
  return (sxx * sy - sx * sxy) / det;
}

double tail_mean(const std::vector<RecordedPoint>& records) {
  if (records.empty()) return 0.0;
  const size_t count = std::max<size_t>(1, records.size() / 5);
  double acc = 0.0;
  for (size_t i = records.size() - count; i < records.size(); ++i) acc += records[i].value;
  return acc / count;
}

std::vector<int> log_spaced_grid(int lo, int hi, int points) {
  std::vector<int> grid;
  for (int i = 0; i < points; ++i) {
    const double t = static_cast<double>(i) / (points - 1);
    grid.push_back(static_cast<int>(std::llround(lo * std::pow(static_cast<double>(hi) / lo, t))));
  }
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

json report_to_json(const ExperimentReport& report) {
  json j;
  j["experiment"] = report.experiment;
  j["config"] = report.config_echo;
  j["pass"] = report.pass;
  j["series"] = json::array();
  for (const SeriesReport& s : report.series) {
    json sj;
    sj["id"] = s.id;
    sj["x_label"] = s.x_label;
    sj["fitted_limit"] = s.fitted_limit;
    sj["tail_mean"] = s.tail_mean;
    sj["target"] = s.target;
    sj["tolerance"] = s.tolerance;
    sj["pass"] = s.pass;
    sj["records"] = json::array();
    for (const RecordedPoint& r : s.records) {
      sj["records"].push_back({{"x", r.x}, {"value_nats_per_sample", r.value},
                               {"warning_flags", flag_names(r.flags)}});
    }
    j["series"].push_back(sj);
  }
  return j;
}

std::string series_to_csv(const SeriesReport& series) {
  std::string out = series.x_label + ",value_nats_per_sample,warning_flags\n";
  char line[128];
  for (const RecordedPoint& r : series.records) {
    if (r.x == std::floor(r.x) && std::abs(r.x) < 1e15) {
      std::snprintf(line, sizeof(line), "%lld,%.12g,", static_cast<long long>(r.x), r.value);
    } else {
      std::snprintf(line, sizeof(line), "%.12g,%.12g,", r.x, r.value);
    }
    out += line;
    out += flag_names(r.flags);
    out += "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Runners

ExperimentReport run_disturbance(const DisturbanceConfig& config) {
  Stopwatch watch;
  const double target = nmp_partial_sum(config.tf, config.disturbance.kappa);
  std::vector<RecordedPoint> records(config.n_grid.size());
  parallel_for(static_cast<int>(config.n_grid.size()), config.workers, [&](int i) {
    const int n = config.n_grid[i];
    const GainValue g = disturbance_gain(config.tf, config.input, config.disturbance, n);
    records[i] = {static_cast<double>(n), g.nats_per_sample, g.flags};
  });
  json echo;
  echo["filter"] = tf_to_json(config.tf);
  echo["input"] = input_to_json(config.input);
  echo["disturbance"] = disturbance_to_json(config.disturbance);
  echo["n_grid"] = grid_to_json(config.n_grid);
  echo["tolerance"] = config.tolerance;
  return finish_report("disturbance", echo,
                       {make_series("gain", std::move(records), target, config.tolerance)},
                       watch);
}

ExperimentReport run_input_disturbance(const DisturbanceConfig& config) {
  Stopwatch watch;
  std::vector<RecordedPoint> records(config.n_grid.size());
  parallel_for(static_cast<int>(config.n_grid.size()), config.workers, [&](int i) {
    const int n = config.n_grid[i];
    const GainValue g = input_disturbance_gain(config.tf, config.input, config.disturbance, n);
    records[i] = {static_cast<double>(n), g.nats_per_sample, g.flags};
  });
  json echo;
  echo["filter"] = tf_to_json(config.tf);
  echo["input"] = input_to_json(config.input);
  echo["disturbance"] = disturbance_to_json(config.disturbance);
  echo["n_grid"] = grid_to_json(config.n_grid);
  echo["tolerance"] = config.tolerance;
  return finish_report("input-disturbance", echo,
                       {make_series("gain", std::move(records), 0.0, config.tolerance)}, watch);
}

ExperimentReport run_initial_state(const InitialStateConfig& config) {
  Stopwatch watch;
  const int tau = static_cast<int>(config.state_factor.cols());
  const double target = nmp_partial_sum(config.tf, tau);
  std::vector<RecordedPoint> records(config.n_grid.size());
  parallel_for(static_cast<int>(config.n_grid.size()), config.workers, [&](int i) {
    const int n = config.n_grid[i];
    const GainValue g = initial_state_gain(config.tf, config.state_factor, config.input, n);
    records[i] = {static_cast<double>(n), g.nats_per_sample, g.flags};
  });
  json echo;
  echo["filter"] = tf_to_json(config.tf);
  echo["state_factor"] = matrix_to_json(config.state_factor);
  echo["input"] = input_to_json(config.input);
  echo["n_grid"] = grid_to_json(config.n_grid);
  echo["tolerance"] = config.tolerance;
  return finish_report("initial-state", echo,
                       {make_series("gain", std::move(records), target, config.tolerance)},
                       watch);
}

ExperimentReport run_effective_gain(const EffectiveGainConfig& config) {
  Stopwatch watch;
  const double target = jensen_log_integral(config.tf).value;
  std::vector<RecordedPoint> records(config.n_grid.size());
  parallel_for(static_cast<int>(config.n_grid.size()), config.workers, [&](int i) {
    const int n = config.n_grid[i];
    records[i] = {static_cast<double>(n), effective_entropy_gain(config.tf, n) / n, kFlagNone};
  });
  json echo;
  echo["filter"] = tf_to_json(config.tf);
  echo["n_grid"] = grid_to_json(config.n_grid);
  echo["tolerance"] = config.tolerance;
  return finish_report("effective-gain", echo,
                       {make_series("per_sample_gain", std::move(records), target,
                                    config.tolerance)},
                       watch);
}

ReverseWaterfill rdf_reverse_waterfill(const std::vector<double>& log_eigenvalues,
                                       double distortion) {
  if (distortion <= 0.0) throw std::invalid_argument("reverse water-filling: distortion <= 0");
  if (log_eigenvalues.empty()) throw std::invalid_argument("reverse water-filling: no spectrum");
  const int n = static_cast<int>(log_eigenvalues.size());
  const double log_nd = std::log(distortion * n);

  // (1/n) sum exp(min(l, t)) is monotone in t; every term is capped by n*D at
  // the solution, so the sum never overflows even when some l are huge.
  auto mean_min = [&](double t) {
    double acc = 0.0;
    for (double l : log_eigenvalues) acc += std::exp(std::min(l, t));
    return acc / n;
  };
  ReverseWaterfill out;
  if (mean_min(log_nd) <= distortion) {
    // All eigenvalues effectively below the water level: zero rate.
    out.log_water_level = std::log(distortion);
    out.rate = 0.0;
    return out;
  }
  double lo = *std::min_element(log_eigenvalues.begin(), log_eigenvalues.end()) - 60.0;
  double hi = log_nd + 1.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (mean_min(mid) < distortion ? lo : hi) = mid;
  }
  out.log_water_level = 0.5 * (lo + hi);
  double rate = 0.0;
  for (double l : log_eigenvalues) {
    if (l > out.log_water_level) rate += 0.5 * (l - out.log_water_level);
  }
  out.rate = rate / n;
  return out;
}

ExperimentReport run_rdf_gap(const RdfGapConfig& config) {
  Stopwatch watch;
  double target = 0.0;
  for (const Complex& p : config.source_filter.poles) {
    if (std::abs(p) > 1.0) target += std::log(std::abs(p));
  }
  const TransferFunction stabilized = reflect_unstable_poles(config.source_filter);
  // Feasibility against the stationary per-sample variance (the stabilized
  // source): sum of squared impulse samples times sigma2.
  {
    const auto ir = impulse_response(stabilized, 4096).samples;
    double variance = 0.0;
    for (double g : ir) variance += g * g;
    variance *= config.sigma2;
    if (config.distortion >= variance) {
      throw std::invalid_argument("rdf gap: distortion is not below the source variance floor");
    }
  }
  std::vector<RecordedPoint> records(config.n_grid.size());
  parallel_for(static_cast<int>(config.n_grid.size()), config.workers, [&](int i) {
    const int n = config.n_grid[i];
    auto log_spectrum = [&](const TransferFunction& tf) {
      const SingularSpectrum s = svd_spectrum(conv_matrix(tf, n));
      std::vector<double> logs(s.values.size());
      for (size_t k = 0; k < s.values.size(); ++k) {
        logs[k] = 2.0 * std::log(s.values[k]) + std::log(config.sigma2);
      }
      return logs;
    };
    const double r_nonstationary =
        rdf_reverse_waterfill(log_spectrum(config.source_filter), config.distortion).rate;
    const double r_stationary =
        rdf_reverse_waterfill(log_spectrum(stabilized), config.distortion).rate;
    records[i] = {static_cast<double>(n), r_nonstationary - r_stationary, kFlagNone};
  });
  json echo;
  echo["source_filter"] = tf_to_json(config.source_filter);
  echo["distortion"] = config.distortion;
  echo["sigma2"] = config.sigma2;
  echo["n_grid"] = grid_to_json(config.n_grid);
  echo["tolerance"] = config.tolerance;
  return finish_report("rdf-gap", echo,
                       {make_series("rate_gap", std::move(records), target, config.tolerance)},
                       watch);
}

namespace {

struct LoopMaps {
  Eigen::MatrixXd from_input;   // n x n, lower-triangular Toeplitz
  Eigen::MatrixXd from_noise;   // n x n (noise innovations to output)
  Eigen::MatrixXd from_state;   // n x p (plant delay line to output)
};

// Probe the negative-feedback loop y = u - (T r + B c), r = P y with unit
// inputs. All simulated signals are closed-loop stable, so the recursion is
// well conditioned; stability itself is certified by closed_loop() upfront.
LoopMaps probe_loop(const TransferFunction& plant, const TransferFunction& feedback,
                    const TransferFunction& noise_entry, int n) {
  const int p = plant.order();
  const int t = feedback.order();
  const auto& lambda = plant.den;
  const auto& npoly = plant.num;
  const auto& theta = feedback.den;
  const auto& gamma = feedback.num;

  LoopMaps maps{Eigen::MatrixXd::Zero(n, n), Eigen::MatrixXd::Zero(n, n),
                Eigen::MatrixXd::Zero(n, p)};
  std::vector<double> v(static_cast<size_t>(n) + p), s(static_cast<size_t>(n) + t);

  auto simulate = [&](const std::vector<double>& u, const std::vector<double>& bc,
                      int state_index, Eigen::VectorXd* y_out) {
    std::fill(v.begin(), v.end(), 0.0);
    std::fill(s.begin(), s.end(), 0.0);
    if (state_index >= 0) v[state_index] = 1.0;
    for (int k = 0; k < n; ++k) {
      double r = 0.0;
      for (int i = 1; i <= p; ++i) r += npoly[i] * v[p + k - i];
      double sk = r;
      for (int i = 1; i <= t; ++i) sk -= theta[i] * s[t + k - i];
      s[t + k] = sk;
      double tk = 0.0;
      for (int i = 0; i <= t; ++i) tk += gamma[i] * s[t + k - i];
      const double y = u[k] - tk - bc[k];
      double vk = y;
      for (int i = 1; i <= p; ++i) vk -= lambda[i] * v[p + k - i];
      v[p + k] = vk;
      (*y_out)(k) = y;
    }
  };

  std::vector<double> zero(n, 0.0);
  Eigen::VectorXd column(n);
  // Input columns: the map is Toeplitz, one impulse suffices.
  std::vector<double> impulse_in(n, 0.0);
  impulse_in[0] = 1.0;
  simulate(impulse_in, zero, -1, &column);
  for (int c = 0; c < n; ++c) {
    for (int r = c; r < n; ++r) maps.from_input(r, c) = column(r - c);
  }
  // Noise columns: also Toeplitz (the entry filter is time invariant).
  const std::vector<double> bc_impulse = impulse_response(noise_entry, n).samples;
  simulate(zero, bc_impulse, -1, &column);
  for (int c = 0; c < n; ++c) {
    for (int r = c; r < n; ++r) maps.from_noise(r, c) = column(r - c);
  }
  for (int j = 0; j < p; ++j) {
    simulate(zero, zero, j, &column);
    maps.from_state.col(j) = column;
  }
  return maps;
}

}  // namespace

ExperimentReport run_networked_mi(const NetworkedMiConfig& config) {
  Stopwatch watch;
  closed_loop(config.plant, config.feedback);  // certifies stability
  if (config.noise_entry.num.empty() || config.noise_entry.num[0] != 0.0 ||
      !config.noise_entry.stable()) {
    throw std::invalid_argument("networked mi: noise entry must be strictly causal and stable");
  }
  const int p = config.plant.order();
  if (config.state_covariance.rows() != p || config.state_covariance.cols() != p) {
    throw std::invalid_argument("networked mi: state covariance must be p x p");
  }
  double target = 0.0;
  for (const Complex& pole : config.plant.poles) {
    if (std::abs(pole) > 1.0) target += std::log(std::abs(pole));
  }
  Eigen::MatrixXd state_l = Eigen::MatrixXd::Zero(p, p);
  if (!config.state_covariance.isZero(0.0)) {
    Eigen::LLT<Eigen::MatrixXd> llt(config.state_covariance);
    if (llt.info() != Eigen::Success) {
      throw std::invalid_argument("networked mi: state covariance must be positive definite or zero");
    }
    state_l = llt.matrixL();
  }
  std::vector<RecordedPoint> records(config.n_grid.size());
  parallel_for(static_cast<int>(config.n_grid.size()), config.workers, [&](int i) {
    const int n = config.n_grid[i];
    const LoopMaps maps = probe_loop(config.plant, config.feedback, config.noise_entry, n);
    // Conditional on the state the output is S (u - B c); ln det of its
    // covariance reduces to the inner well-conditioned factor because the
    // closed-loop Toeplitz map has unit diagonal.
    const std::vector<double> entry = impulse_response(config.noise_entry, n).samples;
    Eigen::MatrixXd inner =
        config.input_sigma2 * Eigen::MatrixXd::Identity(n, n);
    {
      const Eigen::MatrixXd b = conv_matrix(entry, n).dense;
      inner.noalias() += config.noise_sigma2 * b * b.transpose();
    }
    const double logdet_conditional = spd_log_det(inner);
    Eigen::MatrixXd cov =
        config.input_sigma2 * maps.from_input * maps.from_input.transpose();
    cov.noalias() += config.noise_sigma2 * maps.from_noise * maps.from_noise.transpose();
    const Eigen::MatrixXd lift = maps.from_state * state_l;
    cov.noalias() += lift * lift.transpose();
    const double value = 0.5 * (spd_log_det(cov) - logdet_conditional) / n;
    records[i] = {static_cast<double>(n), value, kFlagNone};
  });
  json echo;
  echo["plant"] = tf_to_json(config.plant);
  echo["feedback"] = tf_to_json(config.feedback);
  echo["noise_entry"] = tf_to_json(config.noise_entry);
  echo["noise_sigma2"] = config.noise_sigma2;
  echo["state_covariance"] = matrix_to_json(config.state_covariance);
  echo["input_sigma2"] = config.input_sigma2;
  echo["n_grid"] = grid_to_json(config.n_grid);
  echo["tolerance"] = config.tolerance;
  return finish_report("networked-mi", echo,
                       {make_series("mi_per_sample", std::move(records), target,
                                    config.tolerance)},
                       watch);
}

ExperimentReport run_feedback_collapse(const FeedbackCollapseConfig& config) {
  Stopwatch watch;
  const TransferFunction channel = one_plus(config.shaper);
  if (!config.shaper.stable()) {
    throw std::invalid_argument("feedback collapse: the shaper must be stable");
  }
  if (!config.noise_shaping.stable() || !config.noise_shaping.minimum_phase() ||
      !config.noise_shaping.biproper()) {
    throw std::invalid_argument(
        "feedback collapse: noise shaping must be stable minimum-phase biproper");
  }
  const int message_dim = static_cast<int>(config.message_covariance.rows());
  const double target_clean = nmp_summary(channel).log_magnitude_sum;
  const Eigen::MatrixXd k_v = config.message_covariance;
  const Eigen::MatrixXd k_d =
      config.disturbance_variance * Eigen::MatrixXd::Identity(message_dim, message_dim);

  const TransferFunction total = multiply(channel, config.noise_shaping);
  std::vector<RecordedPoint> clean(config.n_grid.size()), disturbed(config.n_grid.size());
  parallel_for(static_cast<int>(config.n_grid.size()), config.workers, [&](int i) {
    const int n = config.n_grid[i];
    const Eigen::MatrixXd a = conv_matrix(total, n).dense;
    Eigen::MatrixXd noise_cov = config.noise_sigma2 * a * a.transpose();
    const double logdet_noise = n * std::log(config.noise_sigma2 *
                                             total.first_sample() * total.first_sample());
    auto lifted = [&](const Eigen::MatrixXd& k) {
      Eigen::MatrixXd cov = noise_cov;
      cov.topLeftCorner(message_dim, message_dim) += k;
      return spd_log_det(cov);
    };
    clean[i] = {static_cast<double>(n), 0.5 * (lifted(k_v) - logdet_noise) / n, kFlagNone};
    disturbed[i] = {static_cast<double>(n), 0.5 * (lifted(k_v + k_d) - lifted(k_d)) / n,
                    kFlagNone};
  });
  json echo;
  echo["shaper"] = tf_to_json(config.shaper);
  echo["noise_shaping"] = tf_to_json(config.noise_shaping);
  echo["noise_sigma2"] = config.noise_sigma2;
  echo["message_covariance"] = matrix_to_json(config.message_covariance);
  echo["disturbance_variance"] = config.disturbance_variance;
  echo["n_grid"] = grid_to_json(config.n_grid);
  echo["tolerance"] = config.tolerance;
  std::vector<SeriesReport> series;
  series.push_back(make_series("without_disturbance", std::move(clean), target_clean,
                               config.tolerance));
  series.push_back(make_series("with_disturbance", std::move(disturbed), 0.0,
                               config.tolerance));
  return finish_report("feedback-collapse", echo, std::move(series), watch);
}

double quantized_uniform_entropy(double delta) {
  const double full = std::floor(1.0 / delta);
  const double rem = 1.0 - full * delta;
  double h = -full * delta * std::log(delta);
  if (rem > 0.0) h -= rem * std::log(rem);
  return h;
}

double quantized_segment_entropy(double delta, double dir_x, double dir_y) {
  const double norm = std::hypot(dir_x, dir_y);
  const double cx = std::abs(dir_x) / norm;
  const double cy = std::abs(dir_y) / norm;
  // Cell-boundary crossings of the segment {t (cx, cy) : t in [0, 1]};
  // between consecutive crossings the point stays in one cell and the uniform
  // parameter contributes the interval length as probability.
  std::vector<double> cuts{0.0, 1.0};
  for (int axis = 0; axis < 2; ++axis) {
    const double c = axis == 0 ? cx : cy;
    if (c <= 0.0) continue;
    for (double k = delta; k / c < 1.0; k += delta) cuts.push_back(k / c);
  }
  std::sort(cuts.begin(), cuts.end());
  std::map<std::pair<long long, long long>, double> mass;
  for (size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double len = cuts[i + 1] - cuts[i];
    if (len <= 1e-15) continue;
    const double tm = 0.5 * (cuts[i] + cuts[i + 1]);
    const auto cell = std::make_pair(static_cast<long long>(std::floor(tm * cx / delta)),
                                     static_cast<long long>(std::floor(tm * cy / delta)));
    mass[cell] += len;
  }
  double h = 0.0;
  for (const auto& [cell, prob] : mass) h -= prob * std::log(prob);
  return h;
}

ExperimentReport run_quantized_discrepancy(const QuantizedConfig& config) {
  Stopwatch watch;
  const double dir_x = 1.0;
  const double dir_y = config.axis_aligned ? 0.0 : 1.0;
  const double target = config.axis_aligned ? 0.0 : 0.5 * std::log(2.0);
  std::vector<double> deltas = config.deltas;
  std::sort(deltas.begin(), deltas.end(), std::greater<double>());
  std::vector<RecordedPoint> records;
  records.reserve(deltas.size());
  for (double delta : deltas) {
    if (delta <= 0.0 || delta > 0.5) {
      throw std::invalid_argument("quantized: delta must lie in (0, 0.5]");
    }
    const double value =
        quantized_uniform_entropy(delta) - quantized_segment_entropy(delta, dir_x, dir_y);
    records.push_back({delta, value, kFlagNone});
  }
  json echo;
  echo["deltas"] = config.deltas;
  echo["direction"] = config.axis_aligned ? "axis" : "diagonal";
  echo["tolerance"] = config.tolerance;
  SeriesReport series = make_series("discrepancy", std::move(records), target,
                                    config.tolerance, "delta");
  // The limit is approached linearly in delta; the finest record is the estimate.
  series.fitted_limit = series.records.back().value;
  series.pass = std::abs(series.fitted_limit - target) <= config.tolerance;
  return finish_report("quantized", echo, {series}, watch);
}

ExperimentReport run_probe(const ProbeConfig& config) {
  Stopwatch watch;
  const std::vector<ProbePoint> points =
      entropy_balance_probe(config.process, config.n_grid, config.nu, config.trials, config.seed);
  std::vector<RecordedPoint> records;
  records.reserve(points.size());
  for (const ProbePoint& p : points) {
    records.push_back({static_cast<double>(p.n), p.value, kFlagNone});
  }
  json echo;
  echo["n_grid"] = grid_to_json(config.n_grid);
  echo["nu"] = config.nu;
  echo["trials"] = config.trials;
  echo["tolerance"] = config.tolerance;
  return finish_report("probe", echo,
                       {make_series("probe", std::move(records), 0.0, config.tolerance)}, watch);
}

// ---------------------------------------------------------------------------
// Config parsing

namespace {

TransferFunction tf_or_default(const json& j, const char* field, const json& fallback) {
  if (j.contains(field) && !j.at(field).is_null()) return tf_from_json(j.at(field));
  return tf_from_json(fallback);
}

json default_filter_one_zero() {
  return json{{"zeros", {-1.5}}, {"poles", {0.0}}, {"gain", 1.0}};
}

ProcessSpec parse_process(const json& j);

ProcessSpec parse_process(const json& j) {
  check_fields(j, {"kind", "sigma2", "lo", "hi", "bins", "min_bin_width", "inner", "filter",
                   "components"},
               "process");
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "gaussian_iid") return ProcessSpec::gaussian(j.value("sigma2", 1.0));
  if (kind == "uniform_iid") return ProcessSpec::uniform(j.value("lo", 0.0), j.value("hi", 1.0));
  if (kind == "piecewise_constant_iid") {
    std::vector<ProcessSpec::Bin> bins;
    for (const auto& e : j.at("bins")) {
      bins.push_back({e[0].get<double>(), e[1].get<double>(), e[2].get<double>()});
    }
    return ProcessSpec::piecewise(std::move(bins), j.value("min_bin_width", 1e-6));
  }
  if (kind == "mp_filtered") {
    return ProcessSpec::mp_filtered(parse_process(j.at("inner")), tf_from_json(j.at("filter")));
  }
  if (kind == "sum") {
    std::vector<ProcessSpec> parts;
    for (const auto& e : j.at("components")) parts.push_back(parse_process(e));
    return ProcessSpec::sum(std::move(parts));
  }
  throw std::invalid_argument("process: unknown kind '" + kind + "'");
}

}  // namespace

DisturbanceConfig parse_disturbance_config(const json& j, std::uint64_t seed) {
  check_fields(j, {"filter", "input", "disturbance", "n_grid", "tolerance", "seed", "workers"},
               "disturbance config");
  DisturbanceConfig config;
  config.tf = tf_or_default(j, "filter", default_filter_one_zero());
  config.input = parse_input(j.value("input", json(nullptr)));
  const std::uint64_t effective_seed = j.value("seed", seed);
  DisturbanceSpec fallback = DisturbanceSpec::first_coordinates(
      std::max(1, nmp_summary(config.tf).m), 1e-4);
  config.disturbance =
      parse_disturbance_spec(j.value("disturbance", json(nullptr)), effective_seed, fallback);
  config.n_grid = parse_grid(j.value("n_grid", json(nullptr)), log_spaced_grid(20, 300, 20));
  config.tolerance = j.value("tolerance", 0.02);
  config.workers = j.value("workers", 0);
  return config;
}

DisturbanceConfig parse_input_disturbance_config(const json& j, std::uint64_t seed) {
  DisturbanceConfig config = parse_disturbance_config(j, seed);
  if (!j.contains("disturbance")) {
    config.disturbance = DisturbanceSpec::first_coordinates(1, 1.0);
  }
  if (!j.contains("tolerance")) config.tolerance = 0.02;
  return config;
}

InitialStateConfig parse_initial_state_config(const json& j, std::uint64_t seed) {
  (void)seed;
  check_fields(j, {"filter", "state_factor", "state_variance", "input", "n_grid", "tolerance",
                   "workers"},
               "initial-state config");
  InitialStateConfig config;
  config.tf = tf_or_default(j, "filter", default_filter_one_zero());
  const int p = config.tf.order();
  if (j.contains("state_factor")) {
    config.state_factor = parse_matrix(j.at("state_factor"), "state_factor");
  } else {
    config.state_factor = std::sqrt(j.value("state_variance", 1.0)) *
                          Eigen::MatrixXd::Identity(p, p);
  }
  config.input = parse_input(j.value("input", json(nullptr)));
  config.n_grid = parse_grid(j.value("n_grid", json(nullptr)), log_spaced_grid(20, 300, 20));
  config.tolerance = j.value("tolerance", 0.02);
  config.workers = j.value("workers", 0);
  return config;
}

EffectiveGainConfig parse_effective_gain_config(const json& j) {
  check_fields(j, {"filter", "n_grid", "tolerance", "workers"}, "effective-gain config");
  EffectiveGainConfig config;
  config.tf = tf_or_default(j, "filter",
                            json{{"zeros", {-2.0}}, {"poles", {0.0}}, {"gain", 1.0}});
  config.n_grid = parse_grid(j.value("n_grid", json(nullptr)), log_spaced_grid(10, 500, 20));
  config.tolerance = j.value("tolerance", 0.01);
  config.workers = j.value("workers", 0);
  return config;
}

RdfGapConfig parse_rdf_gap_config(const json& j) {
  check_fields(j, {"source_filter", "distortion", "sigma2", "n_grid", "tolerance", "workers"},
               "rdf-gap config");
  RdfGapConfig config;
  config.source_filter = tf_or_default(
      j, "source_filter", json{{"zeros", {0.0}}, {"poles", {1.3}}, {"gain", 1.0}});
  config.distortion = j.value("distortion", 0.2);
  config.sigma2 = j.value("sigma2", 1.0);
  config.n_grid = parse_grid(j.value("n_grid", json(nullptr)),
                             std::vector<int>{10, 20, 30, 40, 50, 60});
  config.tolerance = j.value("tolerance", 0.05);
  config.workers = j.value("workers", 0);
  return config;
}

NetworkedMiConfig parse_networked_mi_config(const json& j) {
  check_fields(j, {"plant", "feedback", "noise_entry", "noise_sigma2", "state_covariance",
                   "input_sigma2", "n_grid", "tolerance", "workers"},
               "networked-mi config");
  NetworkedMiConfig config;
  config.plant = tf_or_default(j, "plant",
                               json{{"zeros", json::array()}, {"poles", {2.0}}, {"gain", 1.0}});
  config.feedback = tf_or_default(
      j, "feedback", json{{"zeros", json::array()}, {"poles", json::array()}, {"gain", 1.5}});
  config.noise_entry = tf_or_default(
      j, "noise_entry", json{{"zeros", json::array()}, {"poles", {0.0}}, {"gain", 1.0}});
  config.noise_sigma2 = j.value("noise_sigma2", 0.01);
  if (j.contains("state_covariance")) {
    config.state_covariance = parse_matrix(j.at("state_covariance"), "state_covariance");
  } else {
    config.state_covariance = Eigen::MatrixXd::Identity(config.plant.order(),
                                                        config.plant.order());
  }
  config.input_sigma2 = j.value("input_sigma2", 1.0);
  config.n_grid = parse_grid(j.value("n_grid", json(nullptr)), log_spaced_grid(20, 300, 15));
  config.tolerance = j.value("tolerance", 0.05);
  config.workers = j.value("workers", 0);
  return config;
}

FeedbackCollapseConfig parse_feedback_collapse_config(const json& j) {
  check_fields(j, {"shaper", "noise_shaping", "noise_sigma2", "message_covariance",
                   "disturbance_variance", "n_grid", "tolerance", "workers"},
               "feedback-collapse config");
  FeedbackCollapseConfig config;
  config.shaper = tf_or_default(
      j, "shaper", json{{"zeros", json::array()}, {"poles", {0.0}}, {"gain", 1.5}});
  config.noise_shaping = tf_or_default(
      j, "noise_shaping", json{{"zeros", {0.0}}, {"poles", {0.3}}, {"gain", 1.0}});
  config.noise_sigma2 = j.value("noise_sigma2", 1.0);
  if (j.contains("message_covariance")) {
    config.message_covariance = parse_matrix(j.at("message_covariance"), "message_covariance");
  } else {
    config.message_covariance = Eigen::MatrixXd::Identity(1, 1);
  }
  config.disturbance_variance = j.value("disturbance_variance", 1e-6);
  config.n_grid = parse_grid(j.value("n_grid", json(nullptr)), log_spaced_grid(20, 300, 15));
  config.tolerance = j.value("tolerance", 0.05);
  config.workers = j.value("workers", 0);
  return config;
}

QuantizedConfig parse_quantized_config(const json& j) {
  check_fields(j, {"deltas", "direction", "tolerance"}, "quantized config");
  QuantizedConfig config;
  if (j.contains("deltas")) {
    for (const auto& e : j.at("deltas")) config.deltas.push_back(e.get<double>());
  } else {
    config.deltas = {0.5, 0.2, 0.1, 0.05, 0.02, 0.01, 0.003, 0.001, 0.0003, 0.0001};
  }
  const std::string direction = j.value("direction", "diagonal");
  if (direction == "axis") {
    config.axis_aligned = true;
  } else if (direction != "diagonal") {
    throw std::invalid_argument("quantized: direction must be diagonal or axis");
  }
  config.tolerance = j.value("tolerance", 1e-3);
  return config;
}

ProbeConfig parse_probe_config(const json& j, std::uint64_t seed) {
  check_fields(j, {"process", "n_grid", "nu", "trials", "tolerance", "seed"}, "probe config");
  ProbeConfig config;
  if (j.contains("process")) {
    config.process = parse_process(j.at("process"));
  } else {
    config.process = ProcessSpec::uniform(0.0, 1.0);
  }
  config.n_grid = parse_grid(j.value("n_grid", json(nullptr)), std::vector<int>{8, 10, 12});
  config.nu = j.value("nu", 1);
  config.trials = j.value("trials", 100000);
  config.seed = j.value("seed", seed);
  config.tolerance = j.value("tolerance", 0.1);
  return config;
}

json default_config_json(const std::string& experiment) {
  json j = json::object();
  if (experiment == "disturbance") {
    j["filter"] = default_filter_one_zero();
    j["disturbance"] = {{"kappa", 1}, {"placement", "first_coordinates"}, {"variance", 1e-4}};
    j["n_grid"] = {{"min", 20}, {"max", 300}, {"points", 20}, {"spacing", "log"}};
    j["tolerance"] = 0.02;
  } else if (experiment == "input-disturbance") {
    j["filter"] = default_filter_one_zero();
    j["disturbance"] = {{"kappa", 1}, {"placement", "first_coordinates"}, {"variance", 1.0}};
    j["n_grid"] = {{"min", 20}, {"max", 200}, {"points", 15}, {"spacing", "log"}};
    j["tolerance"] = 0.02;
  } else if (experiment == "initial-state") {
    j["filter"] = default_filter_one_zero();
    j["state_variance"] = 1.0;
    j["n_grid"] = {{"min", 20}, {"max", 300}, {"points", 20}, {"spacing", "log"}};
    j["tolerance"] = 0.02;
  } else if (experiment == "effective-gain") {
    j["filter"] = {{"zeros", {-2.0}}, {"poles", {0.0}}, {"gain", 1.0}};
    j["n_grid"] = {{"min", 10}, {"max", 500}, {"points", 20}, {"spacing", "log"}};
    j["tolerance"] = 0.01;
  } else if (experiment == "rdf-gap") {
    j["source_filter"] = {{"zeros", {0.0}}, {"poles", {1.3}}, {"gain", 1.0}};
    j["distortion"] = 0.2;
    j["n_grid"] = {10, 20, 30, 40, 50, 60};
    j["tolerance"] = 0.05;
  } else if (experiment == "networked-mi") {
    j["plant"] = {{"zeros", json::array()}, {"poles", {2.0}}, {"gain", 1.0}};
    j["feedback"] = {{"zeros", json::array()}, {"poles", json::array()}, {"gain", 1.5}};
    j["noise_sigma2"] = 0.01;
    j["n_grid"] = {{"min", 20}, {"max", 300}, {"points", 15}, {"spacing", "log"}};
    j["tolerance"] = 0.05;
  } else if (experiment == "feedback-collapse") {
    j["shaper"] = {{"zeros", json::array()}, {"poles", {0.0}}, {"gain", 1.5}};
    j["noise_shaping"] = {{"zeros", {0.0}}, {"poles", {0.3}}, {"gain", 1.0}};
    j["disturbance_variance"] = 1e-6;
    j["n_grid"] = {{"min", 20}, {"max", 300}, {"points", 15}, {"spacing", "log"}};
    j["tolerance"] = 0.05;
  } else if (experiment == "quantized") {
    j["deltas"] = {0.5, 0.2, 0.1, 0.05, 0.02, 0.01, 0.003, 0.001, 0.0003, 0.0001};
    j["direction"] = "diagonal";
    j["tolerance"] = 1e-3;
  } else if (experiment == "probe") {
    j["process"] = {{"kind", "uniform_iid"}, {"lo", 0.0}, {"hi", 1.0}};
    j["n_grid"] = {8, 10, 12};
    j["nu"] = 1;
    j["trials"] = 100000;
    j["tolerance"] = 0.1;
  } else {
    throw std::invalid_argument("no default config for experiment '" + experiment + "'");
  }
  return j;
}

}  // namespace eglab
