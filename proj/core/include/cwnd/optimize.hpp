#pragma once

#include <span>
#include <vector>

#include "cwnd/errors.hpp"
#include "cwnd/model.hpp"

namespace cwnd {

/// Per-route sending rates.
struct Allocation {
  std::vector<double> rates;
};

/// Per-queue prices (Lagrange multipliers of the capacity constraints). Units
/// of time: at the optimum a price is the delay a packet sees at that queue.
struct Prices {
  std::vector<double> values;
};

struct KKTReport {
  double stationarity = 0.0;             // max_i |U'_i(x_i) - sum_{j in i} q_j|
  double complementary_slackness = 0.0;  // max_j |q_j (C_j - load_j)|
  double primal_feasibility = 0.0;       // max_j max(0, load_j - C_j)
  double dual_feasibility = 0.0;         // max_j max(0, -q_j)

  double worst() const noexcept;
};

struct SystemSolution {
  Allocation allocation;
  Prices prices;
  KKTReport kkt;
  int iterations = 0;
};

struct SolverOptions {
  int max_iterations = 20000;
  /// Attempt the active-set Newton polish every this many gradient steps.
  int polish_every = 25;
};

/// Raised when solve_system misses its tolerance; carries the best iterate.
class SystemNonConvergence : public NonConvergenceError {
 public:
  SystemNonConvergence(std::string what, SystemSolution best);
  const SystemSolution& best() const noexcept { return best_; }

 private:
  SystemSolution best_;
};

/// Maximise sum_i U_i(x_i) subject to per-queue capacity, by descent on the
/// dual in the queue prices. Terminates once every KKT residual is <= tol.
/// Degenerate prices are resolved to the minimum-norm representative.
SystemSolution solve_system(const Network& net, double tol = 1e-10, const SolverOptions& options = {});

KKTReport kkt_verify(const Network& net, const Allocation& x, const Prices& q);

/// Large-deviation rate of one queue's class counts:
/// sum_{i: m_i > 0} m_i log(m_i C / (m_total rate_i)), with 0 log 0 = 0.
/// Returns +inf when a class with m_i > 0 has rate 0.
double beta_queue(double capacity, std::span<const double> rates, std::span<const double> counts);

/// The same quantity as the optimal value of
///   max sum_i m_i phi_i  s.t.  sum_i rate_i e^{phi_i} <= C,
/// computed through its one-dimensional Lagrangian dual.
double beta_queue_dual(double capacity, std::span<const double> rates, std::span<const double> counts);

/// Entropy Lagrangian over scaled per-incidence counts `m` (incidence order),
/// free window sizes `window` and per-route multipliers `lambda`:
///   sum_{m_ji > 0} m_ji log(m_ji C_j / (m_j e^{lambda_i})) - sum_i [G_i(window_i) - lambda_i window_i]
double lagrangian(const Network& net, std::span<const double> m, std::span<const double> window,
                  std::span<const double> lambda);

/// Lagrangian at lambda = 0 with windows equal to the per-route sums of m.
double entropy_objective(const Network& net, std::span<const double> m);

struct EntropySolution {
  std::vector<double> counts;   // m*_ji, incidence order
  std::vector<double> windows;  // m-bar*_i
  double objective = 0.0;
};

/// Scaled state that the stationary law concentrates on, rebuilt from an
/// optimal (allocation, prices) pair: m*_ji = q_j x_i, window_i = x_i U'_i(x_i).
/// Throws NonConvergenceError when the two window constructions disagree by
/// more than tol * (1 + |window|).
EntropySolution primal_reconstruct(const Network& net, const Allocation& x, const Prices& q,
                                   double tol = 1e-8);

struct DualityCheck {
  double primal = 0.0;
  double dual = 0.0;
  double gap = 0.0;
  bool within_tolerance = false;
};

/// Primal entropy optimum vs the optimal aggregate utility.
DualityCheck beta_star(const Network& net, double tol = 1e-9);

}  // namespace cwnd
