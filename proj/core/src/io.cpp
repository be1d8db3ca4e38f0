#include "cwnd/io.hpp"

#include <fmt/format.h>

namespace cwnd {

std::string format_real(double x) { return fmt::format("{:.17g}", x); }

void write_header(std::ostream& out, const Header& header) {
  for (const auto& [key, value] : header) out << "# " << key << '\t' << value << '\n';
}

std::string incidence_label(const Network& net, std::size_t k) {
  const auto& inc = net.incidence(k);
  return net.queue(inc.queue).id + ":" + net.route(inc.route).id;
}

void write_table(std::ostream& out, const Network& net, const StationaryTable& table, const Header& header) {
  write_header(out, header);
  write_header(out, {{"c", std::to_string(table.c())},
                     {"n_max", std::to_string(table.n_max())},
                     {"log_B", format_real(table.log_b())},
                     {"tail_bound", format_real(table.tail_bound())},
                     {"states", std::to_string(table.size())}});
  for (std::size_t k = 0; k < net.incidence_count(); ++k) out << incidence_label(net, k) << '\t';
  out << "prob\n";
  for (std::size_t s = 0; s < table.size(); ++s) {
    for (int v : table.state(s)) out << v << '\t';
    out << format_real(table.prob(s)) << '\n';
  }
}

void write_throughput(std::ostream& out, const Network& net, const ThroughputReport& report, const Header& header) {
  write_header(out, header);
  Header extra{{"c", std::to_string(report.c)}};
  if (report.mean_manifold_distance) extra.emplace_back("mean_manifold_distance", format_real(*report.mean_manifold_distance));
  for (const auto& w : report.warnings) extra.emplace_back("warning", w);
  write_header(out, extra);
  out << "route_id\tlambda_c\tmean_window_over_c\n";
  for (std::size_t i = 0; i < net.route_count(); ++i) {
    out << net.route(i).id << '\t' << format_real(report.throughput[i]) << '\t'
        << format_real(report.mean_window_over_c[i]) << '\n';
  }
}

void write_solution(std::ostream& out, const Network& net, const SolverExport& result, const Header& header) {
  write_header(out, header);
  const auto& sol = result.solution;
  for (std::size_t i = 0; i < net.route_count(); ++i) {
    out << "lambda_star\t" << net.route(i).id << '\t' << format_real(sol.allocation.rates[i]) << '\n';
  }
  for (std::size_t j = 0; j < net.queue_count(); ++j) {
    out << "q_star\t" << net.queue(j).id << '\t' << format_real(sol.prices.values[j]) << '\n';
  }
  for (std::size_t k = 0; k < net.incidence_count(); ++k) {
    out << "m_star\t" << incidence_label(net, k) << '\t' << format_real(result.entropy.counts[k]) << '\n';
  }
  for (std::size_t i = 0; i < net.route_count(); ++i) {
    out << "window_star\t" << net.route(i).id << '\t' << format_real(result.entropy.windows[i]) << '\n';
  }
  out << "beta_star_primal\t" << format_real(result.duality.primal) << '\n';
  out << "beta_star_dual\t" << format_real(result.duality.dual) << '\n';
  out << "beta_star_gap\t" << format_real(result.duality.gap) << '\n';
  out << "kkt_residuals\t" << format_real(sol.kkt.worst()) << '\n';
  out << "kkt_stationarity\t" << format_real(sol.kkt.stationarity) << '\n';
  out << "kkt_complementary_slackness\t" << format_real(sol.kkt.complementary_slackness) << '\n';
  out << "kkt_primal_feasibility\t" << format_real(sol.kkt.primal_feasibility) << '\n';
  out << "kkt_dual_feasibility\t" << format_real(sol.kkt.dual_feasibility) << '\n';
}

void write_sim_stats(std::ostream& out, const Network& net, const SimStats& stats, const Header& header) {
  write_header(out, header);
  Header extra{{"c", std::to_string(stats.c)},
               {"measure_time", format_real(stats.measure_time)},
               {"warmup_time", format_real(stats.warmup_time)},
               {"replications", std::to_string(stats.replications.size())}};
  for (const auto& w : stats.warnings) extra.emplace_back("warning", w);
  write_header(out, extra);
  out << "name\tlabel\tmean\tse\n";
  auto row = [&](const char* name, const std::string& label, const Estimate& e) {
    out << name << '\t' << label << '\t' << format_real(e.mean) << '\t' << format_real(e.se) << '\n';
  };
  for (std::size_t i = 0; i < net.route_count(); ++i) row("throughput", net.route(i).id, stats.throughput[i]);
  for (std::size_t j = 0; j < net.queue_count(); ++j) row("queue_sojourn", net.queue(j).id, stats.queue_sojourn[j]);
  for (std::size_t k = 0; k < net.incidence_count(); ++k) {
    const std::string label = incidence_label(net, k);
    row("class_sojourn", label, stats.class_sojourn[k]);
    row("mean_count", label, stats.mean_counts[k]);
    row("little_residual", label, stats.little_residual[k]);
  }
}

}  // namespace cwnd
