#include "cwnd/generator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/SparseLU>
#include <fmt/format.h>

#include "cwnd/errors.hpp"
#include "cwnd/exact.hpp"
#include "cwnd/utility.hpp"

namespace cwnd {

namespace {

constexpr std::size_t kDirectLimit = 20000;
constexpr double kResidualTarget = 1e-10;

bool shell_before(std::span<const int> a, std::span<const int> b) {
  int ta = std::accumulate(a.begin(), a.end(), 0);
  int tb = std::accumulate(b.begin(), b.end(), 0);
  if (ta != tb) return ta < tb;
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

std::vector<bool> reachable(const Eigen::SparseMatrix<double, Eigen::RowMajor>& q) {
  const auto n = static_cast<std::size_t>(q.rows());
  std::vector<bool> seen(n, false);
  std::vector<Eigen::Index> stack{0};
  seen[0] = true;
  while (!stack.empty()) {
    Eigen::Index s = stack.back();
    stack.pop_back();
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(q, s); it; ++it) {
      if (it.col() == s || it.value() <= 0.0) continue;
      if (!seen[it.col()]) {
        seen[it.col()] = true;
        stack.push_back(it.col());
      }
    }
  }
  return seen;
}

double residual_of(const Eigen::SparseMatrix<double, Eigen::RowMajor>& q, const Eigen::VectorXd& pi) {
  Eigen::VectorXd r = q.transpose() * pi;
  return r.lpNorm<Eigen::Infinity>();
}

}  // namespace

std::optional<std::size_t> Generator::find(std::span<const int> m) const {
  if (m.size() != width) return std::nullopt;
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

Generator aggregated_generator(const Network& net, int c, int n_max) {
  if (c < 1) throw DomainError(fmt::format("congestion level must be >= 1, got {}", c));
  if (!net.all_processor_sharing()) {
    throw UnsupportedError("the count-level generator needs processor sharing at every queue");
  }
  if (!net.all_capped()) throw UnsupportedError("the count-level generator needs a window cap on every route");
  long cap_total = 0;
  for (std::size_t i = 0; i < net.route_count(); ++i) cap_total += *window_limit(net.control(i), c);
  if (cap_total > n_max) {
    throw UnsupportedError(fmt::format("window caps allow {} packets, above n_max={}", cap_total, n_max));
  }

  Generator gen;
  gen.c = c;
  gen.width = net.incidence_count();
  for_each_state(net, c, static_cast<int>(cap_total),
                 [&](std::span<const int> m) { gen.states.insert(gen.states.end(), m.begin(), m.end()); });

  const std::size_t n = gen.size();
  std::vector<Eigen::Triplet<double>> triplets;
  std::vector<int> next(gen.width);
  std::vector<int> queue_total(net.queue_count());
  std::vector<long> window(net.route_count());
  for (std::size_t s = 0; s < n; ++s) {
    auto m = gen.state(s);
    std::fill(queue_total.begin(), queue_total.end(), 0);
    std::fill(window.begin(), window.end(), 0);
    for (std::size_t k = 0; k < gen.width; ++k) {
      queue_total[net.incidence(k).queue] += m[k];
      window[net.incidence(k).route] += m[k];
    }
    double out = 0.0;
    auto add = [&](double rate) {
      auto t = gen.find(next);
      if (!t) throw Error("generator transition leaves the enumerated space");
      triplets.emplace_back(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(*t), rate);
      out += rate;
    };
    for (std::size_t i = 0; i < net.route_count(); ++i) {
      double rate = window_rate(net.control(i), c, window[i]);
      if (rate <= 0.0) continue;
      std::copy(m.begin(), m.end(), next.begin());
      ++next[net.route_incidences(i).front()];
      add(rate);
    }
    for (std::size_t k = 0; k < gen.width; ++k) {
      if (m[k] == 0) continue;
      const auto& inc = net.incidence(k);
      double rate = net.queue(inc.queue).capacity * m[k] / queue_total[inc.queue];
      std::copy(m.begin(), m.end(), next.begin());
      --next[k];
      auto hops = net.route_incidences(inc.route);
      if (inc.hop + 1 < hops.size()) ++next[hops[inc.hop + 1]];
      add(rate);
    }
    triplets.emplace_back(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(s), -out);
  }
  gen.rates.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  gen.rates.setFromTriplets(triplets.begin(), triplets.end());
  gen.rates.makeCompressed();
  return gen;
}

GeneratorSolution generator_solve(const Generator& gen) {
  const auto n = static_cast<Eigen::Index>(gen.size());
  if (n == 0) throw DomainError("empty generator");
  GeneratorSolution sol;
  if (n == 1) {
    sol.probs = {1.0};
    return sol;
  }

  const Eigen::SparseMatrix<double, Eigen::RowMajor>& q = gen.rates;
  Eigen::SparseMatrix<double, Eigen::RowMajor> qt = q.transpose();
  auto fwd = reachable(q);
  auto bwd = reachable(qt);
  for (Eigen::Index s = 0; s < n; ++s) {
    if (!fwd[s] || !bwd[s]) throw DomainError(fmt::format("generator is reducible (state {} is not recurrent)", s));
  }

  Eigen::VectorXd pi;
  if (gen.size() <= kDirectLimit) {
    // Transposed balance equations with the last one replaced by normalisation.
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<std::size_t>(q.nonZeros() + n));
    for (Eigen::Index r = 0; r < n; ++r) {
      for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(q, r); it; ++it) {
        if (it.col() == n - 1) continue;
        triplets.emplace_back(it.col(), r, it.value());
      }
      triplets.emplace_back(n - 1, r, 1.0);
    }
    Eigen::SparseMatrix<double> a(n, n);
    a.setFromTriplets(triplets.begin(), triplets.end());
    a.makeCompressed();
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(a);
    if (lu.info() != Eigen::Success) throw NonConvergenceError("sparse LU factorisation of the generator failed");
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
    b[n - 1] = 1.0;
    pi = lu.solve(b);
    for (int refine = 0; refine < 3; ++refine) {
      Eigen::VectorXd r = b - a * pi;
      if (r.lpNorm<Eigen::Infinity>() < 1e-15) break;
      pi += lu.solve(r);
    }
  } else {
    double uniform = 0.0;
    for (Eigen::Index s = 0; s < n; ++s) uniform = std::max(uniform, -q.coeff(s, s));
    uniform *= 1.05;
    pi = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
    for (long it = 0; it < 2'000'000; ++it) {
      Eigen::VectorXd flow = qt * pi;
      pi += flow / uniform;
      if (it % 100 == 0) {
        pi /= pi.sum();
        if (flow.lpNorm<Eigen::Infinity>() <= 0.1 * kResidualTarget) break;
      }
    }
  }
  pi = pi.cwiseMax(0.0);
  pi /= pi.sum();
  sol.residual = residual_of(q, pi);
  if (sol.residual > kResidualTarget) {
    throw NonConvergenceError(fmt::format("generator solve residual {:.3g} above {:.1g}", sol.residual, kResidualTarget));
  }
  sol.probs.assign(pi.data(), pi.data() + n);
  return sol;
}

}  // namespace cwnd
