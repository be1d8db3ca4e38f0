#include "cwnd/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <utility>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "cwnd/utility.hpp"
#include "numeric.hpp"

namespace cwnd {

namespace {

using detail::kInf;

// State of the dual at a price vector.
struct DualPoint {
  std::vector<double> path_price;  // p_i = sum_{j in i} q_j
  std::vector<double> rates;       // x_i(p_i)
  std::vector<double> load;        // sum_{i ni j} x_i
  double value = kInf;             // dual objective (to be minimised)
  bool finite = false;
};

class DualProblem {
 public:
  explicit DualProblem(const Network& net) : net_(net) {
    for (std::size_t j = 0; j < net.queue_count(); ++j) {
      if (!net.queue_incidences(j).empty()) active_.push_back(j);
    }
  }

  const std::vector<std::size_t>& active() const { return active_; }

  DualPoint evaluate(const std::vector<double>& q) const {
    DualPoint d;
    const std::size_t I = net_.route_count();
    d.path_price.assign(I, 0.0);
    d.rates.assign(I, 0.0);
    d.load.assign(net_.queue_count(), 0.0);
    double value = 0.0;
    for (std::size_t i = 0; i < I; ++i) {
      double p = 0.0;
      for (std::size_t j : net_.path(i)) p += q[j];
      d.path_price[i] = p;
      if (!(p > 0.0)) return d;
      const auto& u = net_.control(i).utility;
      double x = inverse_marginal_utility(u, p);
      d.rates[i] = x;
      value += utility_value(u, x) - x * p;
      for (std::size_t j : net_.path(i)) d.load[j] += x;
    }
    for (std::size_t j = 0; j < net_.queue_count(); ++j) value += q[j] * net_.queue(j).capacity;
    d.value = value;
    d.finite = std::isfinite(value);
    return d;
  }

  // Newton iteration on the binding set A: load_j(q) = C_j for j in A.
  std::optional<std::vector<double>> polish(std::vector<double> q) const {
    const DualPoint start = evaluate(q);
    if (!start.finite) return std::nullopt;
    double qscale = 0.0;
    for (double v : q) qscale = std::max(qscale, v);
    std::vector<std::size_t> binding;
    for (std::size_t j : active_) {
      double cap = net_.queue(j).capacity;
      if (q[j] > 1e-9 * qscale || start.load[j] > cap * (1.0 - 1e-3)) binding.push_back(j);
    }
    if (binding.empty()) return std::nullopt;

    double cscale = 0.0;
    for (std::size_t j : binding) cscale = std::max(cscale, net_.queue(j).capacity);
    for (std::size_t j = 0; j < q.size(); ++j) {
      if (std::find(binding.begin(), binding.end(), j) == binding.end()) q[j] = 0.0;
    }

    const std::size_t A = binding.size();
    auto residual = [&](const DualPoint& d) {
      Eigen::VectorXd f(A);
      for (std::size_t a = 0; a < A; ++a) f[a] = d.load[binding[a]] - net_.queue(binding[a]).capacity;
      return f;
    };

    DualPoint d = evaluate(q);
    if (!d.finite) return std::nullopt;
    Eigen::VectorXd f = residual(d);
    for (int it = 0; it < 80 && f.lpNorm<Eigen::Infinity>() > 1e-15 * cscale; ++it) {
      Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(A, A);
      for (std::size_t i = 0; i < net_.route_count(); ++i) {
        const double slope = 1.0 / utility_second(net_.control(i).utility, d.rates[i]);
        for (std::size_t a = 0; a < A; ++a) {
          if (!on_path(i, binding[a])) continue;
          for (std::size_t b = 0; b < A; ++b) {
            if (on_path(i, binding[b])) jac(a, b) += slope;
          }
        }
      }
      Eigen::VectorXd step = jac.completeOrthogonalDecomposition().solve(-f);
      double s = 1.0;
      bool accepted = false;
      for (int ls = 0; ls < 40; ++ls, s *= 0.5) {
        std::vector<double> trial = q;
        for (std::size_t a = 0; a < A; ++a) trial[binding[a]] += s * step[a];
        DualPoint dt = evaluate(trial);
        if (!dt.finite) continue;
        Eigen::VectorXd ft = residual(dt);
        if (ft.norm() < (1.0 - 1e-4 * s) * f.norm()) {
          q = std::move(trial);
          d = std::move(dt);
          f = std::move(ft);
          accepted = true;
          break;
        }
      }
      if (!accepted) break;
    }

    for (std::size_t j : binding) {
      if (q[j] < -1e-12 * std::max(1.0, qscale)) return std::nullopt;
      q[j] = std::max(q[j], 0.0);
    }
    return min_norm_prices(q, binding);
  }

 private:
  bool on_path(std::size_t i, std::size_t j) const {
    auto p = net_.path(i);
    return std::find(p.begin(), p.end(), j) != p.end();
  }

  // Minimum-norm prices on the binding set reproducing the same path prices.
  std::vector<double> min_norm_prices(std::vector<double> q, const std::vector<std::size_t>& binding) const {
    const DualPoint d = evaluate(q);
    if (!d.finite) return q;
    const std::size_t I = net_.route_count();
    const std::size_t A = binding.size();
    Eigen::MatrixXd r = Eigen::MatrixXd::Zero(I, A);
    Eigen::VectorXd target(I);
    for (std::size_t i = 0; i < I; ++i) {
      for (std::size_t a = 0; a < A; ++a) r(i, a) = on_path(i, binding[a]) ? 1.0 : 0.0;
      target[i] = d.path_price[i];
    }
    Eigen::VectorXd sol = r.completeOrthogonalDecomposition().solve(target);
    double scale = target.lpNorm<Eigen::Infinity>();
    if ((r * sol - target).lpNorm<Eigen::Infinity>() > 1e-12 * std::max(1.0, scale)) return q;
    if (sol.minCoeff() < -1e-13 * std::max(1.0, scale)) return q;
    for (std::size_t a = 0; a < A; ++a) q[binding[a]] = std::max(sol[a], 0.0);
    return q;
  }

  const Network& net_;
  std::vector<std::size_t> active_;
};

}  // namespace

double KKTReport::worst() const noexcept {
  return std::max({stationarity, complementary_slackness, primal_feasibility, dual_feasibility});
}

SystemNonConvergence::SystemNonConvergence(std::string what, SystemSolution best)
    : NonConvergenceError(std::move(what)), best_(std::move(best)) {}

KKTReport kkt_verify(const Network& net, const Allocation& x, const Prices& q) {
  if (x.rates.size() != net.route_count() || q.values.size() != net.queue_count()) {
    throw DomainError("allocation/prices size does not match the network");
  }
  KKTReport r;
  std::vector<double> load(net.queue_count(), 0.0);
  for (std::size_t i = 0; i < net.route_count(); ++i) {
    double p = 0.0;
    for (std::size_t j : net.path(i)) {
      p += q.values[j];
      load[j] += x.rates[i];
    }
    double marginal = x.rates[i] > 0.0 ? utility_prime(net.control(i).utility, x.rates[i]) : kInf;
    r.stationarity = std::max(r.stationarity, std::abs(marginal - p));
  }
  for (std::size_t j = 0; j < net.queue_count(); ++j) {
    double slack = net.queue(j).capacity - load[j];
    r.complementary_slackness = std::max(r.complementary_slackness, std::abs(q.values[j] * slack));
    r.primal_feasibility = std::max(r.primal_feasibility, std::max(0.0, -slack));
    r.dual_feasibility = std::max(r.dual_feasibility, std::max(0.0, -q.values[j]));
  }
  return r;
}

SystemSolution solve_system(const Network& net, double tol, const SolverOptions& options) {
  DualProblem dual(net);
  const std::size_t J = net.queue_count();

  std::vector<double> q(J, 0.0);
  for (std::size_t j : dual.active()) {
    auto incs = net.queue_incidences(j);
    double share = net.queue(j).capacity / static_cast<double>(incs.size());
    double start = 0.0;
    for (std::size_t k : incs) {
      std::size_t i = net.incidence(k).route;
      start = std::max(start, utility_prime(net.control(i).utility, share) /
                                  static_cast<double>(net.path(i).size()));
    }
    q[j] = start;
  }

  auto package = [&](const std::vector<double>& prices, int iterations) {
    SystemSolution s;
    DualPoint d = dual.evaluate(prices);
    s.allocation.rates = d.rates;
    s.prices.values = prices;
    s.kkt = kkt_verify(net, s.allocation, s.prices);
    s.iterations = iterations;
    return s;
  };

  DualPoint cur = dual.evaluate(q);
  SystemSolution best = package(q, 0);
  double step = 1.0;
  for (int it = 1; it <= options.max_iterations; ++it) {
    std::vector<double> grad(J, 0.0);
    for (std::size_t j : dual.active()) grad[j] = net.queue(j).capacity - cur.load[j];

    bool moved = false;
    for (int ls = 0; ls < 60; ++ls) {
      std::vector<double> trial = q;
      double lin = 0.0;
      double sq = 0.0;
      for (std::size_t j : dual.active()) {
        trial[j] = std::max(0.0, q[j] - step * grad[j]);
        double dq = trial[j] - q[j];
        lin += grad[j] * dq;
        sq += dq * dq;
      }
      DualPoint next = dual.evaluate(trial);
      if (next.finite &&
          next.value <= cur.value + lin + sq / (2.0 * step) + 1e-15 * std::abs(cur.value)) {
        q = std::move(trial);
        cur = std::move(next);
        moved = true;
        step *= 1.5;
        break;
      }
      step *= 0.5;
    }

    SystemSolution here = package(q, it);
    if (here.kkt.worst() < best.kkt.worst()) best = here;
    if (here.kkt.worst() <= tol) return here;

    if (it % options.polish_every == 0 || !moved) {
      if (auto polished = dual.polish(q)) {
        SystemSolution p = package(*polished, it);
        if (p.kkt.worst() < best.kkt.worst()) best = p;
        if (p.kkt.worst() <= tol) return p;
      }
    }
    if (!moved) break;
  }
  throw SystemNonConvergence(
      fmt::format("system problem did not reach KKT tolerance {:.3g} (best residual {:.3g})", tol,
                  best.kkt.worst()),
      best);
}

double beta_queue(double capacity, std::span<const double> rates, std::span<const double> counts) {
  if (rates.size() != counts.size()) throw DomainError("rates and counts differ in length");
  double total = 0.0;
  for (double m : counts) {
    if (!(m >= 0.0)) throw DomainError("queue counts must be nonnegative");
    total += m;
  }
  if (total == 0.0) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] == 0.0) continue;
    if (!(rates[i] > 0.0)) return kInf;
    sum += counts[i] * std::log(counts[i] * capacity / (total * rates[i]));
  }
  return sum;
}

double beta_queue_dual(double capacity, std::span<const double> rates, std::span<const double> counts) {
  if (rates.size() != counts.size()) throw DomainError("rates and counts differ in length");
  double total = 0.0;
  double constant = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (!(counts[i] >= 0.0)) throw DomainError("queue counts must be nonnegative");
    if (counts[i] == 0.0) continue;
    if (!(rates[i] > 0.0)) return kInf;
    total += counts[i];
    constant += counts[i] * std::log(counts[i] / rates[i]) - counts[i];
  }
  if (total == 0.0) return 0.0;
  // Dual in s = log(mu):  h(s) = sum_i [m_i log(m_i / rate_i) - m_i] - M s + C e^s.
  auto neg_h = [&](double s) { return -(constant - total * s + capacity * std::exp(s)); };
  auto best = detail::concave_max(neg_h, 0.0, 1.0, -700.0, 700.0, 1e-13);
  return -best.value;
}

double lagrangian(const Network& net, std::span<const double> m, std::span<const double> window,
                  std::span<const double> lambda) {
  if (m.size() != net.incidence_count() || window.size() != net.route_count() ||
      lambda.size() != net.route_count()) {
    throw DomainError("lagrangian argument sizes do not match the network");
  }
  double value = 0.0;
  for (std::size_t j = 0; j < net.queue_count(); ++j) {
    double total = 0.0;
    for (std::size_t k : net.queue_incidences(j)) {
      if (!(m[k] >= 0.0)) throw DomainError("counts must be nonnegative");
      total += m[k];
    }
    if (total == 0.0) continue;
    const double cap = net.queue(j).capacity;
    for (std::size_t k : net.queue_incidences(j)) {
      if (m[k] == 0.0) continue;
      std::size_t i = net.incidence(k).route;
      value += m[k] * (std::log(m[k] * cap / total) - lambda[i]);
    }
  }
  for (std::size_t i = 0; i < net.route_count(); ++i) {
    value -= window_potential(net.control(i).utility, window[i]) - lambda[i] * window[i];
  }
  return value;
}

double entropy_objective(const Network& net, std::span<const double> m) {
  std::vector<double> window(net.route_count(), 0.0);
  for (std::size_t k = 0; k < net.incidence_count(); ++k) window[net.incidence(k).route] += m[k];
  std::vector<double> zero(net.route_count(), 0.0);
  return lagrangian(net, m, window, zero);
}

EntropySolution primal_reconstruct(const Network& net, const Allocation& x, const Prices& q, double tol) {
  EntropySolution s;
  s.counts.assign(net.incidence_count(), 0.0);
  s.windows.assign(net.route_count(), 0.0);
  for (std::size_t k = 0; k < net.incidence_count(); ++k) {
    const auto& inc = net.incidence(k);
    s.counts[k] = q.values.at(inc.queue) * x.rates.at(inc.route);
  }
  for (std::size_t i = 0; i < net.route_count(); ++i) {
    double rate = x.rates[i];
    s.windows[i] = rate * utility_prime(net.control(i).utility, rate);
    double sum = 0.0;
    for (std::size_t k : net.route_incidences(i)) sum += s.counts[k];
    if (std::abs(sum - s.windows[i]) > tol * (1.0 + std::abs(s.windows[i]))) {
      throw NonConvergenceError(fmt::format(
          "inconsistent dual: route '{}' window {} vs summed counts {}", net.route(i).id,
          s.windows[i], sum));
    }
  }
  std::vector<double> zero(net.route_count(), 0.0);
  s.objective = lagrangian(net, s.counts, s.windows, zero);
  return s;
}

DualityCheck beta_star(const Network& net, double tol) {
  SystemSolution sol = solve_system(net, 1e-10);
  DualityCheck r;
  for (std::size_t i = 0; i < net.route_count(); ++i) {
    r.dual += utility_value(net.control(i).utility, sol.allocation.rates[i]);
  }
  r.primal = primal_reconstruct(net, sol.allocation, sol.prices).objective;
  r.gap = std::abs(r.primal - r.dual);
  r.within_tolerance = r.gap <= tol * (1.0 + std::abs(r.dual));
  return r;
}

}  // namespace cwnd
