#pragma once

#include <span>
#include <vector>

#include "cwnd/model.hpp"
#include "cwnd/optimize.hpp"

namespace cwnd {

/// Set of scaled states where the stationary law concentrates as the
/// congestion level grows:
///
///   { m >= 0 : m_ji C_j = m_j x*_i for all (j, i),  G'_i(m-bar_i) = log x*_i for all i }.
///
/// With x* fixed, the second family pins each route's window, and the first
/// forces every loaded queue to be saturated with class mix proportional to
/// x*. The set is the image of a polytope in per-queue totals; it reduces to a
/// point when the optimal prices are unique.
class Manifold {
 public:
  Manifold(const Network& net, Allocation optimum, const Prices& prices);

  /// Minimum-norm-price representative m* (incidence order).
  const std::vector<double>& representative() const noexcept { return point_; }
  const std::vector<double>& windows() const noexcept { return windows_; }

  struct Residuals {
    double proportion = 0.0;  // max_(j,i) |m_ji C_j - m_j x*_i|
    double window = 0.0;      // max_i |G'_i(m-bar_i) - log x*_i|
  };
  Residuals residuals(std::span<const double> m) const;

  /// Euclidean distance to the representative point.
  double distance_to_point(std::span<const double> m) const;
  /// True when the window constraints pin every queue total.
  bool is_point() const noexcept { return saturated_.empty() || single_point_; }
  /// Euclidean distance to the whole set.
  double distance(std::span<const double> m) const;

 private:
  Network net_;
  Allocation optimum_;
  std::vector<double> point_;
  std::vector<double> windows_;
  std::vector<std::size_t> saturated_;
  bool single_point_ = false;
};

struct ManifoldProbe {
  std::vector<double> representative;
  double distance = 0.0;
};

/// m* from the certified optimum and ||m - m*||.
ManifoldProbe manifold_point_and_distance(const Network& net, const Allocation& optimum,
                                          const Prices& prices, std::span<const double> m);

}  // namespace cwnd
