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

#ifndef EGLAB_EXPERIMENTS_HPP_
#define EGLAB_EXPERIMENTS_HPP_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "eglab/gaussian.hpp"
#include "eglab/lti.hpp"
#include "eglab/parallel.hpp"
#include "eglab/processes.hpp"

namespace eglab {

struct RecordedPoint {
  double x = 0.0;      // grid coordinate (n, or the quantizer step)
  double value = 0.0;  // nats per sample
  std::uint32_t flags = kFlagNone;
};

struct SeriesReport {
  std::string id;
  std::string x_label = "n";
  std::vector<RecordedPoint> records;
  double fitted_limit = 0.0;  // intercept of value ~ a + b/x over the tail
  double tail_mean = 0.0;     // mean of the last 20% of records
  double target = 0.0;
  double tolerance = 0.0;
  bool pass = false;          // |fitted_limit - target| <= tolerance
};

struct ExperimentReport {
  std::string experiment;
  nlohmann::json config_echo;
  std::vector<SeriesReport> series;
  double wall_time_s = 0.0;  // informational; not serialized into report.json
  bool pass = false;         // all series pass
};

/// Intercept of an ordinary least-squares fit value = a + b/x over the last
/// half of the records (falls back to the plain mean below 4 points).
double fit_limit(const std::vector<RecordedPoint>& records);
double tail_mean(const std::vector<RecordedPoint>& records);

nlohmann::json report_to_json(const ExperimentReport& report);
/// Fixed column set "<x_label>,value_nats_per_sample,warning_flags".
std::string series_to_csv(const SeriesReport& series);

std::vector<int> log_spaced_grid(int lo, int hi, int points);

// ---------------------------------------------------------------------------
// Runner configurations (defaults reproduce the shipped reference runs).

struct DisturbanceConfig {
  TransferFunction tf;
  InputSpec input;
  DisturbanceSpec disturbance;
  std::vector<int> n_grid;
  double tolerance = 0.02;
  int workers = 0;  // 0 = hardware concurrency
};

struct InitialStateConfig {
  TransferFunction tf;
  Eigen::MatrixXd state_factor;  // p x tau, covariance = factor * factor^T
  InputSpec input;
  std::vector<int> n_grid;
  double tolerance = 0.02;
  int workers = 0;
};

struct EffectiveGainConfig {
  TransferFunction tf;  // FIR
  std::vector<int> n_grid;
  double tolerance = 0.01;
  int workers = 0;
};

struct RdfGapConfig {
  TransferFunction source_filter;  // unstable poles allowed
  double distortion = 0.2;
  double sigma2 = 1.0;
  std::vector<int> n_grid;
  double tolerance = 0.05;
  int workers = 0;
};

struct NetworkedMiConfig {
  TransferFunction plant;     // strictly proper, relative degree 1
  TransferFunction feedback;  // biproper stabilizing path
  TransferFunction noise_entry;  // strictly causal stable filter ahead of the loop noise
  double noise_sigma2 = 0.01;
  Eigen::MatrixXd state_covariance;  // p x p
  double input_sigma2 = 1.0;
  std::vector<int> n_grid;
  double tolerance = 0.05;
  int workers = 0;
};

struct FeedbackCollapseConfig {
  TransferFunction shaper;        // strictly causal stable B; the channel map is 1 + B
  TransferFunction noise_shaping; // innovations form of the channel noise
  double noise_sigma2 = 1.0;
  Eigen::MatrixXd message_covariance;  // M x M positive definite
  double disturbance_variance = 1e-6;
  std::vector<int> n_grid;
  double tolerance = 0.05;
  int workers = 0;
};

struct QuantizedConfig {
  std::vector<double> deltas;  // in (0, 0.5]
  bool axis_aligned = false;   // default: diagonal segment
  double tolerance = 1e-3;
};

struct ProbeConfig {
  ProcessSpec process;
  std::vector<int> n_grid;
  int nu = 1;
  int trials = 100000;
  std::uint64_t seed = 0;
  double tolerance = 0.1;
};

ExperimentReport run_disturbance(const DisturbanceConfig& config);
ExperimentReport run_input_disturbance(const DisturbanceConfig& config);
ExperimentReport run_initial_state(const InitialStateConfig& config);
ExperimentReport run_effective_gain(const EffectiveGainConfig& config);
ExperimentReport run_rdf_gap(const RdfGapConfig& config);
ExperimentReport run_networked_mi(const NetworkedMiConfig& config);
ExperimentReport run_feedback_collapse(const FeedbackCollapseConfig& config);
ExperimentReport run_quantized_discrepancy(const QuantizedConfig& config);
ExperimentReport run_probe(const ProbeConfig& config);

struct ReverseWaterfill {
  double log_water_level = 0.0;  // ln(theta)
  double rate = 0.0;             // nats per sample
};

/// Reverse water-filling over log-domain eigenvalues: find theta with
/// (1/n) sum min(lambda_i, theta) = distortion and return
/// (1/n) sum_{lambda_i > theta} 0.5 ln(lambda_i / theta). Entirely in the log
/// domain so eigenvalues far beyond the double range are handled.
ReverseWaterfill rdf_reverse_waterfill(const std::vector<double>& log_eigenvalues,
                                       double distortion);

/// Exact entropy (nats) of the quantized unit-uniform scalar, step delta.
double quantized_uniform_entropy(double delta);
/// Exact entropy (nats) of the quantized image of the segment
/// {t * dir : t in [0,1]} under a square grid of step delta.
double quantized_segment_entropy(double delta, double dir_x, double dir_y);

// JSON config parsing (unknown fields are rejected). Each parser fills in the
// shipped default when a field is absent; *_default_json returns that default.
DisturbanceConfig parse_disturbance_config(const nlohmann::json& j, std::uint64_t seed);
DisturbanceConfig parse_input_disturbance_config(const nlohmann::json& j, std::uint64_t seed);
InitialStateConfig parse_initial_state_config(const nlohmann::json& j, std::uint64_t seed);
EffectiveGainConfig parse_effective_gain_config(const nlohmann::json& j);
RdfGapConfig parse_rdf_gap_config(const nlohmann::json& j);
NetworkedMiConfig parse_networked_mi_config(const nlohmann::json& j);
FeedbackCollapseConfig parse_feedback_collapse_config(const nlohmann::json& j);
QuantizedConfig parse_quantized_config(const nlohmann::json& j);
ProbeConfig parse_probe_config(const nlohmann::json& j, std::uint64_t seed);
nlohmann::json default_config_json(const std::string& experiment);

}  // namespace eglab

#endif  // EGLAB_EXPERIMENTS_HPP_
