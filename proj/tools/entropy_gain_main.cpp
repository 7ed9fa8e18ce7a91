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

// Batch front door: parse a config, dispatch the requested runner, write
// report.json plus one records CSV per series. Exit codes: 0 pass, 1 tolerance
// failure, 2 config error.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "eglab/experiments.hpp"
#include "eglab/toeplitz.hpp"

namespace {

using eglab::ExperimentReport;
using nlohmann::json;

constexpr int kExitPass = 0;
constexpr int kExitToleranceFailure = 1;
constexpr int kExitConfigError = 2;

int verbosity() {
  const char* env = std::getenv("ENTROPY_GAIN_LOG");
  if (env == nullptr) return 1;
  const std::string value(env);
  if (value == "quiet" || value == "0") return 0;
  if (value == "debug" || value == "2") return 2;
  return 1;
}

void log_line(int level, const std::string& message) {
  if (verbosity() >= level) std::cerr << message << "\n";
}

struct CommonOptions {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  int workers = 0;
  std::string unit = "nats";
};

void add_common(CLI::App* cmd, CommonOptions* opts) {
  cmd->add_option("--config", opts->config_path, "JSON config path (omit for the default run)");
  cmd->add_option("--out", opts->out_dir, "output directory for report.json and records CSVs");
  cmd->add_option("--seed", opts->seed, "RNG seed");
  cmd->add_option("--workers", opts->workers, "worker threads (0 = logical cores)");
  cmd->add_option("--unit", opts->unit, "console unit: nats or bits")
      ->check(CLI::IsMember({"nats", "bits"}));
}

json load_config(const CommonOptions& opts, const std::string& experiment) {
  if (opts.config_path.empty()) return eglab::default_config_json(experiment);
  std::ifstream in(opts.config_path);
  if (!in) {
    throw std::invalid_argument("config file not found: " + opts.config_path);
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    // Byte offset -> line/column for the diagnostic.
    size_t line = 1, column = 1;
    for (size_t i = 0; i < std::min(e.byte, text.size()); ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    throw std::invalid_argument("malformed JSON in " + opts.config_path + " at line " +
                                std::to_string(line) + ", column " + std::to_string(column) +
                                ": " + e.what());
  }
}

void write_outputs(const ExperimentReport& report, const CommonOptions& opts) {
  if (opts.out_dir.empty()) return;
  std::filesystem::create_directories(opts.out_dir);
  const std::filesystem::path dir(opts.out_dir);
  {
    std::ofstream out(dir / "report.json");
    out << eglab::report_to_json(report).dump(2) << "\n";
  }
  for (const eglab::SeriesReport& series : report.series) {
    const std::string name =
        report.series.size() == 1 ? "records.csv" : "records_" + series.id + ".csv";
    std::ofstream out(dir / name);
    out << eglab::series_to_csv(series);
  }
}

double render(double nats, const std::string& unit) {
  return unit == "bits" ? nats / 0.6931471805599453 : nats;
}

int finish(const ExperimentReport& report, const CommonOptions& opts) {
  write_outputs(report, opts);
  for (const eglab::SeriesReport& s : report.series) {
    std::printf("%s%s%s: fitted=%.6f target=%.6f tolerance=%.6f [%s] (%s)\n",
                report.experiment.c_str(), report.series.size() > 1 ? "/" : "",
                report.series.size() > 1 ? s.id.c_str() : "", render(s.fitted_limit, opts.unit),
                render(s.target, opts.unit), render(s.tolerance, opts.unit),
                s.pass ? "pass" : "FAIL", opts.unit.c_str());
  }
  log_line(2, "wall time: " + std::to_string(report.wall_time_s) + " s");
  return report.pass ? kExitPass : kExitToleranceFailure;
}

int override_workers(int from_cli, int from_config) {
  return from_cli > 0 ? from_cli : from_config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"entropy-gain: desk-scale study of entropy gain in NMP filters"};
  app.require_subcommand(1);

  CommonOptions opts;
  std::string jensen_zeros, jensen_poles;
  double jensen_gain = 1.0;
  int jensen_points = 1 << 16;
  std::string spectrum_impulse = "1,2";
  std::string spectrum_grid = "3,10,20,40";

  CLI::App* c_disturbance = app.add_subcommand("disturbance", "output-disturbance entropy gain");
  CLI::App* c_input = app.add_subcommand("input-disturbance", "input-side disturbance gain");
  CLI::App* c_state = app.add_subcommand("initial-state", "random initial-state entropy gain");
  CLI::App* c_effective = app.add_subcommand("effective-gain", "tall-map effective entropy gain");
  CLI::App* c_rdf = app.add_subcommand("rdf-gap", "rate-distortion gap for unstable sources");
  CLI::App* c_mi = app.add_subcommand("networked-mi", "initial-state information rate in a loop");
  CLI::App* c_collapse = app.add_subcommand("feedback-collapse", "feedback-coding rate collapse");
  CLI::App* c_quantized = app.add_subcommand("quantized", "quantized-entropy discrepancy");
  CLI::App* c_probe = app.add_subcommand("probe", "entropy-balance probe");
  CLI::App* c_spectrum = app.add_subcommand("spectrum", "singular spectra of convolution maps");
  CLI::App* c_jensen = app.add_subcommand("jensen", "log-magnitude integral of a filter");

  for (CLI::App* cmd : {c_disturbance, c_input, c_state, c_effective, c_rdf, c_mi, c_collapse,
                        c_quantized, c_probe}) {
    add_common(cmd, &opts);
  }
  c_spectrum->add_option("--impulse", spectrum_impulse, "comma-separated impulse samples");
  c_spectrum->add_option("--n", spectrum_grid, "comma-separated matrix sizes");
  c_spectrum->add_option("--out", opts.out_dir, "output directory for spectrum.csv");
  c_jensen->add_option("--zeros", jensen_zeros, "comma-separated real zeros");
  c_jensen->add_option("--poles", jensen_poles, "comma-separated real poles (default: origin)");
  c_jensen->add_option("--gain", jensen_gain, "filter gain");
  c_jensen->add_option("--points", jensen_points, "quadrature points");

  CLI11_PARSE(app, argc, argv);

  auto parse_list = [](const std::string& text) {
    std::vector<double> values;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (!item.empty()) values.push_back(std::stod(item));
    }
    return values;
  };

  try {
    if (c_jensen->parsed()) {
      std::vector<eglab::Complex> zeros, poles;
      for (double z : parse_list(jensen_zeros)) zeros.emplace_back(z, 0.0);
      for (double p : parse_list(jensen_poles)) poles.emplace_back(p, 0.0);
      if (poles.empty()) poles.assign(zeros.size(), eglab::Complex(0.0));
      const auto tf = eglab::make_tf(zeros, poles, jensen_gain);
      const auto result = eglab::jensen_log_integral(tf, jensen_points);
      std::printf("%.6f\n", render(result.value, opts.unit));
      if (result.near_unit_circle) log_line(1, "warning: root near the unit circle");
      return kExitPass;
    }
    if (c_spectrum->parsed()) {
      const std::vector<double> impulse = parse_list(spectrum_impulse);
      std::string csv = "n,index,singular_value,underflow_flag\n";
      char line[128];
      for (double nd : parse_list(spectrum_grid)) {
        const int n = static_cast<int>(nd);
        const auto spectrum = eglab::svd_spectrum(eglab::conv_matrix(impulse, n));
        for (size_t i = 0; i < spectrum.values.size(); ++i) {
          std::snprintf(line, sizeof(line), "%d,%zu,%.12g,%d\n", n, i + 1, spectrum.values[i],
                        spectrum.underflow ? 1 : 0);
          csv += line;
        }
      }
      if (!opts.out_dir.empty()) {
        std::filesystem::create_directories(opts.out_dir);
        std::ofstream out(std::filesystem::path(opts.out_dir) / "spectrum.csv");
        out << csv;
      } else {
        std::fputs(csv.c_str(), stdout);
      }
      return kExitPass;
    }

    ExperimentReport report;
    if (c_disturbance->parsed()) {
      auto config = eglab::parse_disturbance_config(load_config(opts, "disturbance"), opts.seed);
      config.workers = override_workers(opts.workers, config.workers);
      report = eglab::run_disturbance(config);
    } else if (c_input->parsed()) {
      auto config = eglab::parse_input_disturbance_config(load_config(opts, "input-disturbance"),
                                                          opts.seed);
      config.workers = override_workers(opts.workers, config.workers);
      report = eglab::run_input_disturbance(config);
    } else if (c_state->parsed()) {
      auto config = eglab::parse_initial_state_config(load_config(opts, "initial-state"),
                                                      opts.seed);
      config.workers = override_workers(opts.workers, config.workers);
      report = eglab::run_initial_state(config);
    } else if (c_effective->parsed()) {
      auto config = eglab::parse_effective_gain_config(load_config(opts, "effective-gain"));
      config.workers = override_workers(opts.workers, config.workers);
      report = eglab::run_effective_gain(config);
    } else if (c_rdf->parsed()) {
      auto config = eglab::parse_rdf_gap_config(load_config(opts, "rdf-gap"));
      config.workers = override_workers(opts.workers, config.workers);
      report = eglab::run_rdf_gap(config);
    } else if (c_mi->parsed()) {
      auto config = eglab::parse_networked_mi_config(load_config(opts, "networked-mi"));
      config.workers = override_workers(opts.workers, config.workers);
      report = eglab::run_networked_mi(config);
    } else if (c_collapse->parsed()) {
      auto config = eglab::parse_feedback_collapse_config(load_config(opts, "feedback-collapse"));
      config.workers = override_workers(opts.workers, config.workers);
      report = eglab::run_feedback_collapse(config);
    } else if (c_quantized->parsed()) {
      report = eglab::run_quantized_discrepancy(
          eglab::parse_quantized_config(load_config(opts, "quantized")));
    } else if (c_probe->parsed()) {
      report = eglab::run_probe(eglab::parse_probe_config(load_config(opts, "probe"), opts.seed));
    } else {
      std::cerr << "no subcommand selected\n";
      return kExitConfigError;
    }
    return finish(report, opts);
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfigError;
  }
}
