#pragma once

// Utility functions and the window machinery derived from them by convex
// conjugacy. For a utility U the window potential is
//
//   G(m) = -max_l { U(e^l) - m l },
//
// a concave function whose slope at the window size m is the log of the rate
// the window settles at. Windows at congestion level c use the potential
// G_c(k) (log_window_weight) and inject at rate exp(G_c(k+1) - G_c(k)).

#include <optional>
#include <span>
#include <vector>

#include "cwnd/model.hpp"

namespace cwnd {

double utility_value(const UtilitySpec& u, double rate);
double utility_prime(const UtilitySpec& u, double rate);
double utility_second(const UtilitySpec& u, double rate);

/// Rate at which the marginal utility equals `price` (> 0).
double inverse_marginal_utility(const UtilitySpec& u, double price);

/// True iff every interior second difference of l -> U(e^l) on `grid` is below
/// -tol times the larger adjacent slope magnitude.
/// Grid must be sorted and hold at least 3 points.
bool check_exponential_concavity(const UtilitySpec& u, std::span<const double> grid, double tol);

/// Grid used by validate_network: l in [-8, 8] with step 0.25.
std::vector<double> default_concavity_grid();

/// G(m), m >= 0. Alpha-fair uses the closed form with G(0) = 0.
double window_potential(const UtilitySpec& u, double mbar);

/// G'(m) for m > 0; +inf at m = 0 for alpha-fair.
double window_potential_slope(const UtilitySpec& u, double mbar);

/// G*(l) = max_{m >= 0} { G(m) - l m }. Equals -U(e^l) for admissible utilities.
double window_potential_conjugate(const UtilitySpec& u, double lambda);

/// Maximum packets a window may hold at level c, if capped.
std::optional<long> window_limit(const CongestionControl& ctrl, int c);

/// G_c(k): log of the unnormalised window weight at k packets. -inf beyond the cap.
/// Alpha-fair uses the factorial form (k log(c w) - log k!) / (alpha - 1);
/// tabulated utilities use c * G(k / c).
double log_window_weight(const CongestionControl& ctrl, int c, long k);

/// Injection rate exp(G_c(k+1) - G_c(k)) at window size k. Zero at or beyond the cap.
double window_rate(const CongestionControl& ctrl, int c, long mbar);

}  // namespace cwnd
