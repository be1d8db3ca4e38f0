#pragma once

// Configuration loading and experiment drivers behind the `cwnd` tool.

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "cwnd/exact.hpp"
#include "cwnd/io.hpp"
#include "cwnd/model.hpp"
#include "cwnd/optimize.hpp"
#include "cwnd/simulate.hpp"

namespace cwnd::cli {

inline constexpr const char* kFormatVersion = "1";

struct ExperimentConfig {
  std::vector<int> c_values;  // strictly ascending, positive
  std::optional<int> n_max;   // automatic truncation when empty
  double tolerance = 1e-12;   // relative tail bound accepted by truncation
  std::uint64_t seed = 1;
  double epsilon = 0.25;
  /// Scaled target point for ldp-check, in incidence order.
  std::vector<double> target;
  double measure_time = 1e4;
  std::optional<double> warmup_time;
  int replications = 16;
  int threads = 0;
  std::string output_dir = ".";
  std::size_t state_budget = 5'000'000;
};

/// Throws ValidationError listing every broken invariant.
void validate_experiment(const ExperimentConfig& config);

struct LoadedConfig {
  NetworkModel model;
  ExperimentConfig experiment;
  std::string source;
  std::string hash;  // FNV-1a of the file bytes, 16 hex digits
};

/// Parses a model document. Unknown keys are rejected with their full path
/// (e.g. `queues[0].speed`); syntax errors carry line and column. The state
/// budget is taken from CWND_STATE_BUDGET when set.
LoadedConfig parse_config(std::string_view text, std::string source = "<memory>");
LoadedConfig load_config(const std::string& path);

std::string fnv1a_hex(std::string_view bytes);

/// Header shared by every emitted file: command, format version, model, hash,
/// then the caller's parameter echo.
Header make_header(const std::string& command, const LoadedConfig& cfg, const Header& params);

SolverExport run_solve(const Network& net);

struct SweepRow {
  int c = 1;
  int n_max = 0;
  std::size_t states = 0;
  double tail_bound = 0.0;
  std::vector<double> throughput;
  std::vector<double> abs_error;
  std::vector<double> mean_window_over_c;
  double max_abs_error = 0.0;
  double concentration = 0.0;
  std::vector<std::string> warnings;
};

struct SweepResult {
  SolverExport optimum;
  double epsilon = 0.25;
  std::vector<SweepRow> rows;  // ascending c
};

/// Exact throughput, its error against the optimum, and the probability of
/// sitting at least epsilon from the concentration set, for every c.
SweepResult run_sweep(const Network& net, const ExperimentConfig& config);
void write_sweep(std::ostream& out, const Network& net, const SweepResult& result, const Header& header);

struct LdpPoint {
  int c = 1;
  std::vector<int> lattice;
  double log_probability = 0.0;
  double scaled = 0.0;  // -(1/c) log P
};

struct LdpReport {
  std::vector<LdpPoint> points;
  double fitted_limit = 0.0;
  double last_value = 0.0;
  double analytic = 0.0;
  double relative_deviation = 0.0;
};

/// Least-squares fit of -(1/c) log P(M = floor(c m)) over the c ladder on the
/// basis {1, log(c)/c, 1/c}; the constant term is the fitted rate.
LdpReport run_ldp_check(const Network& net, const ExperimentConfig& config);
void write_ldp(std::ostream& out, const Network& net, const LdpReport& report, const Header& header);

/// Intercept of the least-squares fit of y on {1, log(c)/c, 1/c}; with two
/// points only {1, 1/c}, with one the value itself.
double fit_rate_limit(const std::vector<int>& c, const std::vector<double>& y);

struct SimulationReport {
  SimStats stats;
  std::vector<LittleViolation> little;
  /// Present when the model is capped with processor sharing everywhere.
  std::optional<ThroughputReport> exact;
  std::vector<double> z_scores;
  std::optional<double> occupancy_tv;
};

SimulationReport run_simulate(const Network& net, const ExperimentConfig& config, int c, std::ostream* trace = nullptr);
void write_simulation(std::ostream& out, const Network& net, const SimulationReport& report, const Header& header);

/// Exit code for an exception escaping a command: 1 for input and validation
/// problems, 2 for numerical failures.
int exit_code_for(const std::exception& e);

/// Entry point of the `cwnd` executable.
int run(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace cwnd::cli
