#include "cwnd/exact.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "cwnd/errors.hpp"
#include "cwnd/manifold.hpp"
#include "cwnd/optimize.hpp"
#include "cwnd/utility.hpp"
#include "numeric.hpp"

namespace cwnd {

namespace {

using detail::kInf;

// Per-route data for the geometric tail bound. The bound splits each weight as
//   prod_j [multinomial prod_i (e^{l_i}/C_j)^{m_ji}] * prod_i exp(G_c,i(m-bar_i) - l_i m-bar_i)
// with l from the system optimum at 90% capacity, so every queue factor sums
// to 1/(1 - rho_j) and each window factor is a unimodal sequence f_i.
class TailBound {
 public:
  TailBound(const Network& net, int c) : net_(net), c_(c) {
    SystemSolution inner = solve_system(net.with_capacity_scale(0.9), 1e-9);
    const std::size_t I = net.route_count();
    lambda_.resize(I);
    for (std::size_t i = 0; i < I; ++i) lambda_[i] = std::log(inner.allocation.rates[i]);
    log_queue_factor_ = 0.0;
    for (std::size_t j = 0; j < net.queue_count(); ++j) {
      double rho = 0.0;
      for (std::size_t k : net.queue_incidences(j)) {
        rho += std::exp(lambda_[net.incidence(k).route]) / net.queue(j).capacity;
      }
      log_queue_factor_ -= std::log1p(-rho);
    }
    mode_.resize(I);
    peak_.resize(I);
    for (std::size_t i = 0; i < I; ++i) {
      long k = 0;
      double fk = f(i, 0);
      for (;;) {
        double next = f(i, k + 1);
        if (!(next > fk)) break;
        ++k;
        fk = next;
      }
      mode_[i] = k;
      peak_[i] = fk;
    }
  }

  double log_bound(int n_max) const {
    const std::size_t I = net_.route_count();
    // Thresholds a_i with sum a_i = n_max: if every window is <= a_i the state
    // is inside the table, so the tail lies in the union of {m-bar_i > a_i}.
    std::vector<long> a(I, 0);
    double weight_sum = 0.0;
    for (std::size_t i = 0; i < I; ++i) weight_sum += static_cast<double>(mode_[i] + 1);
    long used = 0;
    for (std::size_t i = 0; i < I; ++i) {
      a[i] = static_cast<long>(std::floor(n_max * (mode_[i] + 1) / weight_sum));
      if (auto lim = window_limit(net_.control(i), c_)) a[i] = std::min(a[i], *lim);
      used += a[i];
    }
    long left = n_max - used;
    while (left > 0) {
      bool gave = false;
      for (std::size_t i = 0; i < I && left > 0; ++i) {
        auto lim = window_limit(net_.control(i), c_);
        if (lim && a[i] >= *lim) continue;
        ++a[i];
        --left;
        gave = true;
      }
      if (!gave) break;
    }

    double peaks = 0.0;
    for (double p : peak_) peaks += p;
    double acc = -kInf;
    for (std::size_t i = 0; i < I; ++i) {
      long first = a[i] + 1;
      double sup = first <= mode_[i] ? peak_[i] : f(i, first);
      if (sup == -kInf) continue;
      acc = detail::log_add(acc, sup + peaks - peak_[i]);
    }
    if (acc == -kInf) return -kInf;
    return acc + log_queue_factor_;
  }

 private:
  double f(std::size_t i, long k) const {
    double g = log_window_weight(net_.control(i), c_, k);
    if (g == -kInf) return -kInf;
    return g - lambda_[i] * static_cast<double>(k);
  }

  const Network& net_;
  int c_;
  std::vector<double> lambda_;
  double log_queue_factor_ = 0.0;
  std::vector<long> mode_;
  std::vector<double> peak_;
};

void shell_recurse(const Network& net, const std::vector<long>& limits, std::vector<int>& m,
                   std::vector<long>& route_sum, std::size_t k, int remaining,
                   const std::function<void(std::span<const int>)>& visit) {
  const std::size_t K = m.size();
  const std::size_t route = net.incidence(k).route;
  const long room = limits[route] - route_sum[route];
  if (k + 1 == K) {
    if (remaining > room) return;
    m[k] = remaining;
    visit(m);
    m[k] = 0;
    return;
  }
  const int top = static_cast<int>(std::min<long>(remaining, room));
  for (int v = 0; v <= top; ++v) {
    m[k] = v;
    route_sum[route] += v;
    shell_recurse(net, limits, m, route_sum, k + 1, remaining - v, visit);
    route_sum[route] -= v;
  }
  m[k] = 0;
}

std::vector<long> route_limits(const Network& net, int c) {
  std::vector<long> limits(net.route_count());
  for (std::size_t i = 0; i < net.route_count(); ++i) {
    limits[i] = window_limit(net.control(i), c).value_or(std::numeric_limits<long>::max() / 4);
  }
  return limits;
}

bool shell_before(std::span<const int> a, std::span<const int> b) {
  int ta = std::accumulate(a.begin(), a.end(), 0);
  int tb = std::accumulate(b.begin(), b.end(), 0);
  if (ta != tb) return ta < tb;
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

int suggest_n_max(const TailBound& bound, double log_b, double tol, int from) {
  const double target = std::log(tol) + log_b;
  for (int n = from + 1; n <= std::max(from * 64, from + 4096); ++n) {
    if (bound.log_bound(n) <= target) return n;
  }
  return -1;
}

}  // namespace

int CountVector::queue_total(const Network& net, std::size_t j) const {
  int s = 0;
  for (std::size_t k : net.queue_incidences(j)) s += counts_.at(k);
  return s;
}

int CountVector::window(const Network& net, std::size_t i) const {
  int s = 0;
  for (std::size_t k : net.route_incidences(i)) s += counts_.at(k);
  return s;
}

int CountVector::total() const { return std::accumulate(counts_.begin(), counts_.end(), 0); }

double log_unnormalized_weight(const Network& net, int c, std::span<const int> m) {
  if (m.size() != net.incidence_count()) throw DomainError("count vector does not match the network");
  double lw = 0.0;
  for (std::size_t j = 0; j < net.queue_count(); ++j) {
    int total = 0;
    for (std::size_t k : net.queue_incidences(j)) {
      if (m[k] < 0) throw DomainError("counts must be nonnegative");
      total += m[k];
      lw -= std::lgamma(m[k] + 1.0);
    }
    lw += std::lgamma(total + 1.0) - total * std::log(net.queue(j).capacity);
  }
  for (std::size_t i = 0; i < net.route_count(); ++i) {
    long window = 0;
    for (std::size_t k : net.route_incidences(i)) window += m[k];
    double g = log_window_weight(net.control(i), c, window);
    if (g == -kInf) return -kInf;
    lw += g;
  }
  return lw;
}

double unnormalized_weight(const Network& net, int c, std::span<const int> m) {
  return std::exp(log_unnormalized_weight(net, c, m));
}

void for_each_shell_state(const Network& net, int c, int n,
                          const std::function<void(std::span<const int>)>& visit) {
  if (n < 0) return;
  std::vector<int> m(net.incidence_count(), 0);
  std::vector<long> route_sum(net.route_count(), 0);
  shell_recurse(net, route_limits(net, c), m, route_sum, 0, n, visit);
}

void for_each_state(const Network& net, int c, int n_max,
                    const std::function<void(std::span<const int>)>& visit) {
  for (int n = 0; n <= n_max; ++n) for_each_shell_state(net, c, n, visit);
}

double log_tail_bound(const Network& net, int c, int n_max) {
  return TailBound(net, c).log_bound(n_max);
}

double NormalizingConstant::relative_tail() const { return std::exp(log_tail - log_b); }

NormalizingConstant normalizing_constant(const Network& net, int c, int n_max, double tail_tolerance) {
  if (n_max < 0) throw DomainError("n_max must be >= 0");
  NormalizingConstant r;
  double acc = -kInf;
  for_each_state(net, c, n_max, [&](std::span<const int> m) {
    acc = detail::log_add(acc, log_unnormalized_weight(net, c, m));
  });
  r.log_b = acc;
  TailBound bound(net, c);
  r.log_tail = bound.log_bound(n_max);
  if (std::isfinite(tail_tolerance) && r.relative_tail() > tail_tolerance) {
    int need = suggest_n_max(bound, r.log_b, tail_tolerance, n_max);
    throw TruncationError(
        fmt::format("truncation at n_max={} leaves relative tail bound {:.3g} > {:.3g}; grow n_max to {}",
                    n_max, r.relative_tail(), tail_tolerance,
                    need < 0 ? std::string("an unknown larger value") : std::to_string(need)),
        need);
  }
  return r;
}

double StationaryTable::tail_bound() const { return std::exp(log_tail_ - log_b_); }

std::optional<std::size_t> StationaryTable::find(std::span<const int> m) const {
  if (m.size() != width_) return std::nullopt;
  std::size_t lo = 0;
  std::size_t hi = size();
  while (lo < hi) {
    std::size_t mid = (lo + hi) / 2;
    if (shell_before(state(mid), m)) {
      lo = mid + 1;
    } else {
      hi = mid;
    }
  }
  if (lo < size() && std::equal(m.begin(), m.end(), state(lo).begin())) return lo;
  return std::nullopt;
}

StationaryTable stationary_distribution(const Network& net, int c, const TruncationPolicy& policy) {
  if (c < 1) throw DomainError(fmt::format("congestion level must be >= 1, got {}", c));
  StationaryTable t;
  t.c_ = c;
  t.width_ = net.incidence_count();
  std::vector<double> log_w;
  TailBound bound(net, c);

  auto add_shell = [&](int n) {
    for_each_shell_state(net, c, n, [&](std::span<const int> m) {
      double lw = log_unnormalized_weight(net, c, m);
      if (lw == -kInf) return;
      if (log_w.size() >= policy.state_budget) {
        throw StateBudgetError(fmt::format(
            "state budget of {} exceeded at total packet count {} (c={}); cap the windows or raise the budget",
            policy.state_budget, n, c));
      }
      t.states_.insert(t.states_.end(), m.begin(), m.end());
      log_w.push_back(lw);
    });
  };

  double log_b = -kInf;
  if (policy.n_max) {
    if (*policy.n_max < 0) throw DomainError("n_max must be >= 0");
    for (int n = 0; n <= *policy.n_max; ++n) add_shell(n);
    log_b = detail::log_sum_exp(log_w);
    t.n_max_ = *policy.n_max;
    t.log_tail_ = bound.log_bound(t.n_max_);
    if (t.log_tail_ - log_b > std::log(policy.tail_tolerance)) {
      int need = suggest_n_max(bound, log_b, policy.tail_tolerance, t.n_max_);
      throw TruncationError(
          fmt::format("truncation at n_max={} leaves relative tail bound {:.3g} > {:.3g}; grow n_max to {}",
                      t.n_max_, std::exp(t.log_tail_ - log_b), policy.tail_tolerance,
                      need < 0 ? std::string("an unknown larger value") : std::to_string(need)),
          need);
    }
  } else {
    const double log_tol = std::log(policy.tail_tolerance);
    std::size_t summed = 0;
    for (int n = 0;; ++n) {
      add_shell(n);
      for (; summed < log_w.size(); ++summed) log_b = detail::log_add(log_b, log_w[summed]);
      double tail = bound.log_bound(n);
      if (tail == -kInf || tail - log_b <= log_tol) {
        t.n_max_ = n;
        t.log_tail_ = tail;
        break;
      }
    }
    // Re-sum with a single max shift for a clean normaliser.
    log_b = detail::log_sum_exp(log_w);
  }
  t.log_b_ = log_b;
  t.probs_.resize(log_w.size());
  for (std::size_t s = 0; s < log_w.size(); ++s) t.probs_[s] = std::exp(log_w[s] - log_b);
  return t;
}

ThroughputReport exact_throughput(const Network& net, const StationaryTable& table, const Manifold* manifold) {
  const std::size_t I = net.route_count();
  ThroughputReport r;
  r.c = table.c();
  r.throughput.assign(I, 0.0);
  r.mean_window_over_c.assign(I, 0.0);
  double dist = 0.0;
  std::vector<double> scaled(table.width());
  for (std::size_t s = 0; s < table.size(); ++s) {
    auto m = table.state(s);
    const double p = table.prob(s);
    for (std::size_t i = 0; i < I; ++i) {
      long window = 0;
      for (std::size_t k : net.route_incidences(i)) window += m[k];
      r.throughput[i] += p * window_rate(net.control(i), table.c(), window);
      r.mean_window_over_c[i] += p * static_cast<double>(window) / table.c();
    }
    if (manifold) {
      for (std::size_t k = 0; k < scaled.size(); ++k) scaled[k] = static_cast<double>(m[k]) / table.c();
      dist += p * manifold->distance(scaled);
    }
  }
  if (manifold) r.mean_manifold_distance = dist;
  const double tail = table.tail_bound();
  for (std::size_t i = 0; i < I; ++i) {
    // Window rates are largest at an empty window.
    double shift = tail * window_rate(net.control(i), table.c(), 0);
    if (shift > 1e-9) {
      r.warnings.push_back(fmt::format("route '{}': truncation tail may shift throughput by up to {:.3g}",
                                       net.route(i).id, shift));
    }
  }
  return r;
}

std::vector<double> exact_ack_rates(const Network& net, const StationaryTable& table) {
  std::vector<double> ack(net.route_count(), 0.0);
  for (std::size_t s = 0; s < table.size(); ++s) {
    auto m = table.state(s);
    for (std::size_t i = 0; i < net.route_count(); ++i) {
      std::size_t k = net.route_incidences(i).back();
      if (m[k] == 0) continue;
      std::size_t j = net.incidence(k).queue;
      int total = 0;
      for (std::size_t kk : net.queue_incidences(j)) total += m[kk];
      ack[i] += table.prob(s) * net.queue(j).capacity * m[k] / total;
    }
  }
  return ack;
}

std::vector<std::vector<double>> incidence_marginals(const Network& net, const StationaryTable& table) {
  std::vector<std::vector<double>> out(net.incidence_count());
  for (std::size_t s = 0; s < table.size(); ++s) {
    auto m = table.state(s);
    for (std::size_t k = 0; k < m.size(); ++k) {
      if (out[k].size() <= static_cast<std::size_t>(m[k])) out[k].resize(m[k] + 1, 0.0);
      out[k][m[k]] += table.prob(s);
    }
  }
  return out;
}

WindowMarginal window_marginal(const CongestionControl& ctrl, int c, double lambda, int n_max) {
  if (n_max < 0) throw DomainError("n_max must be >= 0");
  auto term = [&](long k) {
    double g = log_window_weight(ctrl, c, k);
    return g == -kInf ? -kInf : g - lambda * static_cast<double>(k);
  };
  // A concave exponent diverges only if it never turns down.
  if (!window_limit(ctrl, c)) {
    bool turned = false;
    for (long k = 1; k <= (1L << 40); k *= 2) {
      if (term(2 * k) < term(k)) {
        turned = true;
        break;
      }
    }
    if (!turned) throw DomainError("window law is not normalisable");
  }
  std::vector<double> logs(n_max + 1);
  for (int k = 0; k <= n_max; ++k) logs[k] = term(k);
  double log_z = detail::log_sum_exp(logs);
  WindowMarginal w;
  w.probs.resize(logs.size());
  for (std::size_t k = 0; k < logs.size(); ++k) w.probs[k] = std::exp(logs[k] - log_z);
  double next = term(n_max + 1);
  if (next == -kInf) {
    w.tail_bound = 0.0;
  } else {
    double ratio = std::exp(term(n_max + 2) - next);
    w.tail_bound = ratio < 1.0 ? std::exp(next - log_z) / (1.0 - ratio) : kInf;
  }
  return w;
}

double queue_marginal(const QueueSpec& queue, std::span<const double> arrival_rates, std::span<const int> counts) {
  if (arrival_rates.size() != counts.size()) throw DomainError("rates and counts differ in length");
  double load = 0.0;
  for (double r : arrival_rates) {
    if (!(r >= 0.0)) throw DomainError("arrival rates must be nonnegative");
    load += r;
  }
  const double rho = load / queue.capacity;
  if (!(rho < 1.0)) {
    throw DomainError(fmt::format("queue '{}' is unstable: load {} >= capacity {}", queue.id, load, queue.capacity));
  }
  int total = 0;
  double lp = std::log1p(-rho);
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] < 0) throw DomainError("counts must be nonnegative");
    if (counts[i] == 0) continue;
    if (arrival_rates[i] == 0.0) return 0.0;
    total += counts[i];
    lp += counts[i] * std::log(arrival_rates[i] / queue.capacity) - std::lgamma(counts[i] + 1.0);
  }
  lp += std::lgamma(total + 1.0);
  return std::exp(lp);
}

double concentration_probability(const StationaryTable& table, std::span<const double> center, double eps) {
  if (center.size() != table.width()) throw DomainError("center does not match the table width");
  std::vector<double> c(center.begin(), center.end());
  return concentration_probability(
      table,
      [&](std::span<const double> x) {
        double s = 0.0;
        for (std::size_t k = 0; k < x.size(); ++k) s += (x[k] - c[k]) * (x[k] - c[k]);
        return std::sqrt(s);
      },
      eps);
}

double concentration_probability(const StationaryTable& table,
                                 const std::function<double(std::span<const double>)>& distance, double eps) {
  if (eps <= 0.0) return 1.0;
  // Lattice points sit exactly at distance eps for many (c, eps); keep them
  // inside the event regardless of rounding in the distance.
  const double threshold = eps * (1.0 - 1e-12);
  double p = 0.0;
  std::vector<double> scaled(table.width());
  for (std::size_t s = 0; s < table.size(); ++s) {
    auto m = table.state(s);
    for (std::size_t k = 0; k < scaled.size(); ++k) scaled[k] = static_cast<double>(m[k]) / table.c();
    if (distance(scaled) >= threshold) p += table.prob(s);
  }
  return p;
}

}  // namespace cwnd
