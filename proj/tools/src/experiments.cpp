#include <algorithm>
#include <cmath>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "cwnd/cli.hpp"
#include "cwnd/errors.hpp"
#include "cwnd/manifold.hpp"
#include "cwnd/utility.hpp"

namespace cwnd::cli {

namespace {

TruncationPolicy policy_of(const ExperimentConfig& config) {
  TruncationPolicy p;
  p.n_max = config.n_max;
  p.tail_tolerance = config.tolerance;
  p.state_budget = config.state_budget;
  return p;
}

std::string pad_label(const char* name, const std::string& id) { return fmt::format("{}:{}", name, id); }

}  // namespace

SolverExport run_solve(const Network& net) {
  SolverExport out;
  out.solution = solve_system(net);
  out.entropy = primal_reconstruct(net, out.solution.allocation, out.solution.prices);
  out.duality = beta_star(net);
  return out;
}

SweepResult run_sweep(const Network& net, const ExperimentConfig& config) {
  validate_experiment(config);
  if (config.c_values.empty()) throw ValidationError("sweep needs c values", {"c_values is empty"});
  SweepResult result;
  result.optimum = run_solve(net);
  result.epsilon = config.epsilon;
  const Manifold manifold(net, result.optimum.solution.allocation, result.optimum.solution.prices);
  const auto& target = result.optimum.solution.allocation.rates;

  for (int c : config.c_values) {
    StationaryTable table = stationary_distribution(net, c, policy_of(config));
    ThroughputReport report = exact_throughput(net, table);
    SweepRow row;
    row.c = c;
    row.n_max = table.n_max();
    row.states = table.size();
    row.tail_bound = table.tail_bound();
    row.throughput = report.throughput;
    row.mean_window_over_c = report.mean_window_over_c;
    row.warnings = report.warnings;
    for (std::size_t i = 0; i < net.route_count(); ++i) {
      row.abs_error.push_back(std::abs(report.throughput[i] - target[i]));
      row.max_abs_error = std::max(row.max_abs_error, row.abs_error.back());
    }
    row.concentration = concentration_probability(
        table, [&](std::span<const double> x) { return manifold.distance(x); }, config.epsilon);
    result.rows.push_back(std::move(row));
  }
  return result;
}

void write_sweep(std::ostream& out, const Network& net, const SweepResult& result, const Header& header) {
  write_header(out, header);
  Header h;
  for (std::size_t i = 0; i < net.route_count(); ++i) {
    h.emplace_back(pad_label("lambda_star", net.route(i).id), format_real(result.optimum.solution.allocation.rates[i]));
  }
  for (std::size_t j = 0; j < net.queue_count(); ++j) {
    h.emplace_back(pad_label("q_star", net.queue(j).id), format_real(result.optimum.solution.prices.values[j]));
  }
  h.emplace_back("beta_star", format_real(result.optimum.duality.dual));
  h.emplace_back("epsilon", format_real(result.epsilon));
  for (const auto& row : result.rows) {
    for (const auto& w : row.warnings) h.emplace_back("warning", fmt::format("c={}: {}", row.c, w));
  }
  write_header(out, h);

  out << "c\tn_max\tstates\ttail_bound";
  for (std::size_t i = 0; i < net.route_count(); ++i) {
    const std::string& id = net.route(i).id;
    out << '\t' << pad_label("lambda_c", id) << '\t' << pad_label("abs_error", id) << '\t'
        << pad_label("mean_window_over_c", id);
  }
  out << "\tmax_abs_error\tconcentration\n";
  for (const auto& row : result.rows) {
    out << row.c << '\t' << row.n_max << '\t' << row.states << '\t' << format_real(row.tail_bound);
    for (std::size_t i = 0; i < net.route_count(); ++i) {
      out << '\t' << format_real(row.throughput[i]) << '\t' << format_real(row.abs_error[i]) << '\t'
          << format_real(row.mean_window_over_c[i]);
    }
    out << '\t' << format_real(row.max_abs_error) << '\t' << format_real(row.concentration) << '\n';
  }
}

double fit_rate_limit(const std::vector<int>& c, const std::vector<double>& y) {
  if (c.size() != y.size() || c.empty()) throw DomainError("fit needs matching, nonempty inputs");
  const auto n = static_cast<Eigen::Index>(c.size());
  if (n == 1) return y[0];
  const Eigen::Index cols = n >= 3 ? 3 : 2;
  Eigen::MatrixXd basis(n, cols);
  Eigen::VectorXd rhs(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const double cr = c[r];
    basis(r, 0) = 1.0;
    if (cols == 3) {
      basis(r, 1) = std::log(cr) / cr;
      basis(r, 2) = 1.0 / cr;
    } else {
      basis(r, 1) = 1.0 / cr;
    }
    rhs[r] = y[r];
  }
  Eigen::VectorXd coef = basis.colPivHouseholderQr().solve(rhs);
  return coef[0];
}

LdpReport run_ldp_check(const Network& net, const ExperimentConfig& config) {
  validate_experiment(config);
  if (config.c_values.empty()) throw ValidationError("ldp-check needs c values", {"c_values is empty"});
  if (config.target.size() != net.incidence_count()) {
    throw ValidationError("ldp-check target does not match the network",
                          {fmt::format("target has {} entries, the network has {} (queue, route) pairs",
                                       config.target.size(), net.incidence_count())});
  }
  for (double t : config.target) {
    if (!(t >= 0.0)) throw ValidationError("invalid ldp-check target", {"target entries must be nonnegative"});
  }

  LdpReport rep;
  std::vector<double> ys;
  for (int c : config.c_values) {
    StationaryTable table = stationary_distribution(net, c, policy_of(config));
    LdpPoint p;
    p.c = c;
    for (double t : config.target) p.lattice.push_back(static_cast<int>(std::floor(c * t + 1e-9)));
    const double lw = log_unnormalized_weight(net, c, p.lattice);
    if (lw == -std::numeric_limits<double>::infinity()) {
      throw DomainError(fmt::format("target lattice point at c={} lies beyond a window cap", c));
    }
    p.log_probability = lw - table.log_b();
    p.scaled = -p.log_probability / c;
    ys.push_back(p.scaled);
    rep.points.push_back(std::move(p));
  }
  rep.fitted_limit = fit_rate_limit(config.c_values, ys);
  rep.last_value = ys.back();
  const SolverExport opt = run_solve(net);
  rep.analytic = entropy_objective(net, config.target) - opt.duality.dual;
  rep.relative_deviation = std::abs(rep.analytic) > 1e-12 ? std::abs(rep.fitted_limit - rep.analytic) / std::abs(rep.analytic)
                                                          : std::abs(rep.fitted_limit);
  return rep;
}

void write_ldp(std::ostream& out, const Network& net, const LdpReport& report, const Header& header) {
  write_header(out, header);
  write_header(out, {{"fitted_limit", format_real(report.fitted_limit)},
                     {"last_value", format_real(report.last_value)},
                     {"analytic_rate", format_real(report.analytic)},
                     {"relative_deviation", format_real(report.relative_deviation)}});
  out << "c";
  for (std::size_t k = 0; k < net.incidence_count(); ++k) out << '\t' << incidence_label(net, k);
  out << "\tlog_probability\tscaled_rate\n";
  for (const auto& p : report.points) {
    out << p.c;
    for (int v : p.lattice) out << '\t' << v;
    out << '\t' << format_real(p.log_probability) << '\t' << format_real(p.scaled) << '\n';
  }
}

SimulationReport run_simulate(const Network& net, const ExperimentConfig& config, int c, std::ostream* trace) {
  validate_experiment(config);
  SimConfig sc;
  sc.seed = config.seed;
  sc.warmup_time = config.warmup_time;
  sc.measure_time = config.measure_time;
  sc.c = c;
  sc.replications = config.replications;
  sc.threads = config.threads;
  sc.collect_occupancy = net.all_capped();
  sc.trace = trace;

  SimulationReport rep;
  rep.stats = simulate(net, sc);
  if (rep.stats.replications.size() >= 2) {
    try {
      rep.little = little_check(net, rep.stats, 4.0);
    } catch (const DomainError& e) {
      rep.stats.warnings.push_back(fmt::format("little check skipped: {}", e.what()));
    }
  }
  if (net.all_capped()) {
    long total = 0;
    for (std::size_t i = 0; i < net.route_count(); ++i) total += *window_limit(net.control(i), c);
    TruncationPolicy policy;
    policy.n_max = static_cast<int>(total);
    policy.state_budget = config.state_budget;
    try {
      StationaryTable table = stationary_distribution(net, c, policy);
      rep.exact = exact_throughput(net, table);
      for (std::size_t i = 0; i < net.route_count(); ++i) {
        const Estimate& e = rep.stats.throughput[i];
        rep.z_scores.push_back(e.se > 0.0 ? (e.mean - rep.exact->throughput[i]) / e.se
                                          : (e.mean == rep.exact->throughput[i] ? 0.0 : INFINITY));
      }
      OccupancyLaw law;
      const double R = static_cast<double>(rep.stats.replications.size());
      for (const auto& r : rep.stats.replications) {
        for (const auto& [m, p] : r.occupancy) law[m] += p / R;
      }
      rep.occupancy_tv = total_variation(law, table_law(table));
    } catch (const StateBudgetError& e) {
      rep.stats.warnings.push_back(fmt::format("exact comparison skipped: {}", e.what()));
    }
  }
  return rep;
}

void write_simulation(std::ostream& out, const Network& net, const SimulationReport& report, const Header& header) {
  write_sim_stats(out, net, report.stats, header);
  if (report.exact) {
    for (std::size_t i = 0; i < net.route_count(); ++i) {
      out << "exact_throughput\t" << net.route(i).id << '\t' << format_real(report.exact->throughput[i]) << "\t-\n";
      out << "z_score\t" << net.route(i).id << '\t' << format_real(report.z_scores[i]) << "\t-\n";
    }
  }
  if (report.occupancy_tv) out << "occupancy_tv\t-\t" << format_real(*report.occupancy_tv) << "\t-\n";
  for (const auto& v : report.little) {
    out << "little_violation\t" << net.queue(v.queue).id << ':' << net.route(v.route).id << '\t'
        << format_real(v.residual) << '\t' << format_real(v.z) << '\n';
  }
}

}  // namespace cwnd::cli
