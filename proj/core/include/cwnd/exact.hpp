#pragma once

// Exact stationary analysis of the window-controlled network.
//
// The count vector M = (M_ji) over the incidence set has the stationary law
//
//   P(M = m) = (1/B) prod_j [ multinomial(m_j; m_ji) C_j^{-m_j} ] prod_i exp(G_c,i(m-bar_i)),
//
// which does not depend on the queue disciplines. Tables enumerate m shell by
// shell in total packet count and carry a rigorous bound on the omitted mass.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cwnd/model.hpp"

namespace cwnd {

class Manifold;

/// Packet counts per (queue, route) incidence, in Network incidence order.
/// Queue and window totals are always derived, never stored.
class CountVector {
 public:
  CountVector() = default;
  explicit CountVector(std::vector<int> counts) : counts_(std::move(counts)) {}

  static CountVector zeros(const Network& net) { return CountVector(std::vector<int>(net.incidence_count(), 0)); }

  std::size_t size() const noexcept { return counts_.size(); }
  int operator[](std::size_t k) const { return counts_[k]; }
  int& operator[](std::size_t k) { return counts_[k]; }
  std::span<const int> values() const noexcept { return counts_; }

  int queue_total(const Network& net, std::size_t j) const;
  int window(const Network& net, std::size_t i) const;
  int total() const;

  friend bool operator==(const CountVector&, const CountVector&) = default;
  friend auto operator<=>(const CountVector&, const CountVector&) = default;

 private:
  std::vector<int> counts_;
};

/// log of the unnormalised stationary weight of m; -inf beyond a window cap.
double log_unnormalized_weight(const Network& net, int c, std::span<const int> m);
double unnormalized_weight(const Network& net, int c, std::span<const int> m);

/// Calls visit(m) for every count vector with total n whose windows respect
/// the caps at level c, in lexicographic order.
void for_each_shell_state(const Network& net, int c, int n,
                          const std::function<void(std::span<const int>)>& visit);

/// Calls visit for every admissible state with total <= n_max, shell by shell.
void for_each_state(const Network& net, int c, int n_max,
                    const std::function<void(std::span<const int>)>& visit);

/// Upper bound on the weight of all states with total > n_max, in log space.
/// -inf when the caps make the omitted region empty.
double log_tail_bound(const Network& net, int c, int n_max);

struct NormalizingConstant {
  double log_b = 0.0;
  double log_tail = 0.0;  // log of the tail bound (absolute, same units as B)

  double relative_tail() const;
};

/// Sum of weights over states with total <= n_max. With a finite tolerance,
/// throws TruncationError when tail/B exceeds it.
NormalizingConstant normalizing_constant(const Network& net, int c, int n_max,
                                         double tail_tolerance = std::numeric_limits<double>::infinity());

struct TruncationPolicy {
  /// Explicit truncation level; automatic growth by shells when empty.
  std::optional<int> n_max;
  double tail_tolerance = 1e-12;
  std::size_t state_budget = 5'000'000;
};

class StationaryTable {
 public:
  int c() const noexcept { return c_; }
  int n_max() const noexcept { return n_max_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t size() const noexcept { return probs_.size(); }
  std::span<const int> state(std::size_t s) const { return {states_.data() + s * width_, width_}; }
  double prob(std::size_t s) const { return probs_[s]; }
  std::span<const double> probs() const noexcept { return probs_; }
  double log_b() const noexcept { return log_b_; }
  double log_tail_bound() const noexcept { return log_tail_; }
  /// Omitted mass relative to B.
  double tail_bound() const;

  /// Index of a state, if enumerated.
  std::optional<std::size_t> find(std::span<const int> m) const;

 private:
  friend StationaryTable stationary_distribution(const Network&, int, const TruncationPolicy&);
  int c_ = 1;
  int n_max_ = 0;
  std::size_t width_ = 0;
  std::vector<int> states_;
  std::vector<double> probs_;
  double log_b_ = 0.0;
  double log_tail_ = 0.0;
};

StationaryTable stationary_distribution(const Network& net, int c, const TruncationPolicy& policy = {});

struct ThroughputReport {
  int c = 1;
  std::vector<double> throughput;          // Lambda_i^(c)
  std::vector<double> mean_window_over_c;  // E[M-bar_i] / c
  /// E dist(M/c, manifold) when a manifold is supplied.
  std::optional<double> mean_manifold_distance;
  std::vector<std::string> warnings;
};

ThroughputReport exact_throughput(const Network& net, const StationaryTable& table,
                                  const Manifold* manifold = nullptr);

/// Per-route acknowledgment rate sum_m P(m) C_j m_ji / m_j at the last queue of
/// the route. Equals the throughput under processor sharing.
std::vector<double> exact_ack_rates(const Network& net, const StationaryTable& table);

/// Marginal law of every incidence count, indexed [incidence][count].
std::vector<std::vector<double>> incidence_marginals(const Network& net, const StationaryTable& table);

struct WindowMarginal {
  std::vector<double> probs;
  double tail_bound = 0.0;  // omitted mass relative to the truncated normaliser
};

/// Law of an isolated window, pi(k) proportional to exp(G_c(k) - lambda k), on 0..n_max.
WindowMarginal window_marginal(const CongestionControl& ctrl, int c, double lambda, int n_max);

/// Stationary probability of class counts at an isolated queue fed by Poisson
/// streams of the given rates. Throws DomainError when the queue is unstable.
double queue_marginal(const QueueSpec& queue, std::span<const double> arrival_rates,
                      std::span<const int> counts);

/// P(||M/c - center|| >= eps) under the table.
double concentration_probability(const StationaryTable& table, std::span<const double> center, double eps);

/// P(distance(M/c) >= eps) for an arbitrary set distance.
double concentration_probability(const StationaryTable& table,
                                 const std::function<double(std::span<const double>)>& distance,
                                 double eps);

}  // namespace cwnd
