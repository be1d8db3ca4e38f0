#pragma once

// Plain-text exports. Every file starts with `#`-prefixed header lines
// (key<TAB>value) followed by tab-separated rows. Reals are printed with 17
// significant digits so files are byte-reproducible.

#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "cwnd/exact.hpp"
#include "cwnd/model.hpp"
#include "cwnd/optimize.hpp"
#include "cwnd/simulate.hpp"

namespace cwnd {

using Header = std::vector<std::pair<std::string, std::string>>;

void write_header(std::ostream& out, const Header& header);

/// Column label of incidence k, "queue:route".
std::string incidence_label(const Network& net, std::size_t k);

/// One row per state: counts in incidence order, then the probability.
void write_table(std::ostream& out, const Network& net, const StationaryTable& table, const Header& header = {});

/// Columns route_id, lambda_c, mean_window_over_c.
void write_throughput(std::ostream& out, const Network& net, const ThroughputReport& report,
                      const Header& header = {});

struct SolverExport {
  SystemSolution solution;
  EntropySolution entropy;
  DualityCheck duality;
};

/// Key-value rows: lambda_star, q_star, m_star, window_star, beta_star_primal,
/// beta_star_dual, beta_star_gap, kkt_residuals and its four components.
void write_solution(std::ostream& out, const Network& net, const SolverExport& result, const Header& header = {});

/// Key-value rows of the replication summaries: name, label, mean, se.
void write_sim_stats(std::ostream& out, const Network& net, const SimStats& stats, const Header& header = {});

std::string format_real(double x);

}  // namespace cwnd
