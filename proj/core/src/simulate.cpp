#include "cwnd/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <cassert>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <random>
#include <thread>

#include <fmt/format.h>

#include "cwnd/errors.hpp"
#include "cwnd/exact.hpp"
#include "cwnd/utility.hpp"

namespace cwnd {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

class Stream {
 public:
  Stream(std::uint64_t seed, std::uint64_t replication)
      : engine_(splitmix64(splitmix64(seed) ^ splitmix64(replication + 0x632be59bd9b4e019ULL))) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

 private:
  std::mt19937_64 engine_;
};

const char* kind_name(DetailedState::Kind k) {
  switch (k) {
    case DetailedState::Kind::Inject:
      return "inject";
    case DetailedState::Kind::Transfer:
      return "transfer";
    case DetailedState::Kind::Ack:
      return "ack";
  }
  return "?";
}

Estimate estimate(const std::vector<double>& xs) {
  Estimate e;
  double sum = 0.0;
  for (double x : xs) {
    if (!std::isfinite(x)) continue;
    sum += x;
    ++e.samples;
  }
  if (e.samples == 0) {
    e.mean = kNaN;
    e.se = kNaN;
    return e;
  }
  e.mean = sum / static_cast<double>(e.samples);
  if (e.samples < 2) {
    e.se = kNaN;
    return e;
  }
  double ss = 0.0;
  for (double x : xs) {
    if (std::isfinite(x)) ss += (x - e.mean) * (x - e.mean);
  }
  const double n = static_cast<double>(e.samples);
  e.se = std::sqrt(ss / (n - 1.0) / n);
  return e;
}

ReplicationStats run_replication(const Network& net, const SimConfig& cfg, double warmup, std::size_t index) {
  const std::size_t I = net.route_count();
  const std::size_t J = net.queue_count();
  const std::size_t K = net.incidence_count();
  const double end = warmup + cfg.measure_time;
  const double half = warmup + 0.5 * cfg.measure_time;
  std::ostream* trace = index == 0 ? cfg.trace : nullptr;

  Stream rng(cfg.seed, index);
  DetailedState state(net, cfg.c);

  ReplicationStats r;
  r.index = index;
  std::vector<std::uint64_t> acks(I, 0);
  std::vector<std::uint64_t> half_acks[2] = {std::vector<std::uint64_t>(I, 0), std::vector<std::uint64_t>(I, 0)};
  std::vector<double> class_time(K, 0.0);
  std::vector<double> queue_time(J, 0.0);
  std::vector<std::uint64_t> queue_departures(J, 0);
  std::vector<double> count_area(K, 0.0);
  r.departures.assign(K, 0);
  std::vector<int> counts(K, 0);

  auto accumulate = [&](double from, double to) {
    const double a = std::max(from, warmup);
    const double b = std::min(to, end);
    if (b <= a) return;
    const double dt = b - a;
    for (std::size_t k = 0; k < K; ++k) count_area[k] += dt * counts[k];
    if (cfg.collect_occupancy) r.occupancy[counts] += dt;
  };

  double t = 0.0;
  for (;;) {
    const double total = state.total_hazard();
    if (!(total > 0.0)) {
      accumulate(t, end);
      break;
    }
    const double dt = -std::log1p(-rng.uniform()) / total;
    const double next = t + dt;
    accumulate(t, next);
    if (next >= end) break;
    t = next;
    const double u_pick = rng.uniform();
    const double u_serve = rng.uniform();
    const double u_place = rng.uniform();
#ifndef NDEBUG
    long before = 0;
    for (std::size_t j = 0; j < J; ++j) before += static_cast<long>(state.queue(j).size());
#endif
    DetailedState::Event ev = state.fire(u_pick, u_serve, u_place, t);
    ++r.events;
#ifndef NDEBUG
    long after = 0;
    for (std::size_t j = 0; j < J; ++j) after += static_cast<long>(state.queue(j).size());
    const long expected = ev.kind == DetailedState::Kind::Inject ? 1 : ev.kind == DetailedState::Kind::Ack ? -1 : 0;
    assert(after - before == expected);
    assert(state.consistent());
#endif
    const bool measured = t >= warmup;
    if (ev.kind == DetailedState::Kind::Inject) {
      ++counts[net.incidence_index(ev.route, 0)];
    } else {
      const std::size_t k = net.incidence_index(ev.route, ev.departed.hop);
      --counts[k];
      if (ev.kind == DetailedState::Kind::Transfer) ++counts[net.incidence_index(ev.route, ev.departed.hop + 1)];
      if (measured) {
        const double sojourn = t - ev.departed.entered;
        class_time[k] += sojourn;
        ++r.departures[k];
        queue_time[ev.from_queue] += sojourn;
        ++queue_departures[ev.from_queue];
        if (ev.kind == DetailedState::Kind::Ack) {
          ++acks[ev.route];
          ++half_acks[t < half ? 0 : 1][ev.route];
        }
      }
    }
    if (trace) {
      *trace << fmt::format("{:.17g}\t{}\t{}\t{}\t{}\n", t, kind_name(ev.kind), net.route(ev.route).id,
                            net.queue(ev.queue).id, ev.position);
    }
  }

  const double T = cfg.measure_time;
  r.throughput.resize(I);
  r.throughput_halves[0].resize(I);
  r.throughput_halves[1].resize(I);
  for (std::size_t i = 0; i < I; ++i) {
    r.throughput[i] = static_cast<double>(acks[i]) / T;
    r.throughput_halves[0][i] = static_cast<double>(half_acks[0][i]) / (0.5 * T);
    r.throughput_halves[1][i] = static_cast<double>(half_acks[1][i]) / (0.5 * T);
  }
  r.queue_sojourn.resize(J);
  for (std::size_t j = 0; j < J; ++j) {
    r.queue_sojourn[j] = queue_departures[j] ? queue_time[j] / static_cast<double>(queue_departures[j]) : kNaN;
  }
  r.class_sojourn.resize(K);
  r.mean_counts.resize(K);
  for (std::size_t k = 0; k < K; ++k) {
    r.class_sojourn[k] = r.departures[k] ? class_time[k] / static_cast<double>(r.departures[k]) : kNaN;
    r.mean_counts[k] = count_area[k] / T;
  }
  for (auto& [m, w] : r.occupancy) w /= T;
  return r;
}

}  // namespace

DetailedState::DetailedState(const Network& net, int c)
    : net_(&net), c_(c), queues_(net.queue_count()), windows_(net.route_count(), 0), rate_cache_(net.route_count()) {
  if (c < 1) throw DomainError(fmt::format("congestion level must be >= 1, got {}", c));
}

std::vector<int> DetailedState::counts() const {
  std::vector<int> m(net_->incidence_count(), 0);
  for (const auto& q : queues_) {
    for (const Packet& p : q) ++m[net_->incidence_index(p.route, p.hop)];
  }
  return m;
}

void DetailedState::place(std::size_t route, std::size_t hop, int position, double time) {
  auto path = net_->path(route);
  if (hop >= path.size()) throw DomainError("hop beyond the end of the route");
  auto& q = queues_[path[hop]];
  if (position < 1 || position > static_cast<int>(q.size()) + 1) throw DomainError("position out of range");
  q.insert(q.begin() + (position - 1), Packet{route, hop, time});
  ++windows_[route];
}

double DetailedState::injection_hazard(std::size_t i) const {
  auto& cache = rate_cache_[i];
  const auto k = static_cast<std::size_t>(windows_[i]);
  while (cache.size() <= k) {
    cache.push_back(window_rate(net_->control(i), c_, static_cast<long>(cache.size())));
  }
  return cache[k];
}

double DetailedState::service_hazard(std::size_t j) const {
  return queues_[j].empty() ? 0.0 : net_->queue(j).capacity;
}

double DetailedState::total_hazard() const {
  double s = 0.0;
  for (std::size_t i = 0; i < windows_.size(); ++i) s += injection_hazard(i);
  for (std::size_t j = 0; j < queues_.size(); ++j) s += service_hazard(j);
  return s;
}

std::vector<DetailedState::Transition> DetailedState::transitions() const {
  std::vector<Transition> out;
  for (std::size_t i = 0; i < windows_.size(); ++i) {
    const double h = injection_hazard(i);
    if (h <= 0.0) continue;
    const std::size_t j = net_->path(i).front();
    const int after = static_cast<int>(queues_[j].size()) + 1;
    const Discipline& d = net_->queue(j).discipline;
    for (int l = 1; l <= after; ++l) {
      const double p = d.placement(l, after);
      if (p > 0.0) out.push_back({Kind::Inject, i, j, 0, j, l, h * p});
    }
  }
  for (std::size_t j = 0; j < queues_.size(); ++j) {
    const int m = static_cast<int>(queues_[j].size());
    const double cap = net_->queue(j).capacity;
    const Discipline& d = net_->queue(j).discipline;
    for (int l = 1; l <= m; ++l) {
      const double share = d.service_share(l, m);
      if (share <= 0.0) continue;
      const Packet& p = queues_[j][l - 1];
      auto path = net_->path(p.route);
      if (p.hop + 1 == path.size()) {
        out.push_back({Kind::Ack, p.route, j, l, j, 0, cap * share});
        continue;
      }
      const std::size_t next = path[p.hop + 1];
      const int after = static_cast<int>(queues_[next].size()) + 1;
      const Discipline& dn = net_->queue(next).discipline;
      for (int l2 = 1; l2 <= after; ++l2) {
        const double place = dn.placement(l2, after);
        if (place > 0.0) out.push_back({Kind::Transfer, p.route, j, l, next, l2, cap * share * place});
      }
    }
  }
  return out;
}

int DetailedState::insert(std::size_t j, Packet p, double u_place) {
  auto& q = queues_[j];
  const int after = static_cast<int>(q.size()) + 1;
  const int pos = net_->queue(j).discipline.sample_placement(after, u_place);
  q.insert(q.begin() + (pos - 1), p);
  return pos;
}

DetailedState::Event DetailedState::fire(double u_pick, double u_serve, double u_place, double now) {
  const std::size_t I = windows_.size();
  const std::size_t J = queues_.size();
  double x = u_pick * total_hazard();
  // Pick by hazard; rounding at the top end falls through to the last live clock.
  std::optional<std::size_t> route;
  std::optional<std::size_t> queue;
  for (std::size_t i = 0; i < I && !route; ++i) {
    const double h = injection_hazard(i);
    if (h <= 0.0) continue;
    if (x < h) route = i;
    x -= h;
  }
  for (std::size_t j = 0; j < J && !route && !queue; ++j) {
    const double h = service_hazard(j);
    if (h <= 0.0) continue;
    if (x < h) queue = j;
    x -= h;
  }
  if (!route && !queue) {
    for (std::size_t j = J; j-- > 0 && !queue;) {
      if (service_hazard(j) > 0.0) queue = j;
    }
    for (std::size_t i = I; i-- > 0 && !queue && !route;) {
      if (injection_hazard(i) > 0.0) route = i;
    }
    if (!route && !queue) throw DomainError("no transition is possible from this state");
  }

  Event ev{};
  if (route) {
    const std::size_t j = net_->path(*route).front();
    ev.kind = Kind::Inject;
    ev.route = *route;
    ev.queue = j;
    ev.position = insert(j, Packet{*route, 0, now}, u_place);
    ev.from_queue = j;
    ev.from_position = 0;
    ++windows_[*route];
    return ev;
  }

  const std::size_t j = *queue;
  auto& q = queues_[j];
  const int pos = net_->queue(j).discipline.sample_service_position(static_cast<int>(q.size()), u_serve);
  const Packet p = q[pos - 1];
  q.erase(q.begin() + (pos - 1));
  ev.route = p.route;
  ev.from_queue = j;
  ev.from_position = pos;
  ev.departed = p;
  auto path = net_->path(p.route);
  if (p.hop + 1 < path.size()) {
    const std::size_t next = path[p.hop + 1];
    ev.kind = Kind::Transfer;
    ev.queue = next;
    ev.position = insert(next, Packet{p.route, p.hop + 1, now}, u_place);
  } else {
    ev.kind = Kind::Ack;
    ev.queue = j;
    ev.position = pos;
    --windows_[p.route];
  }
  return ev;
}

bool DetailedState::consistent() const {
  std::vector<long> seen(windows_.size(), 0);
  for (std::size_t j = 0; j < queues_.size(); ++j) {
    for (const Packet& p : queues_[j]) {
      auto path = net_->path(p.route);
      if (p.hop >= path.size() || path[p.hop] != j) return false;
      ++seen[p.route];
    }
  }
  return seen == windows_;
}

void SimStats::summarize(const Network& net) {
  const std::size_t I = net.route_count();
  const std::size_t J = net.queue_count();
  const std::size_t K = net.incidence_count();
  std::sort(replications.begin(), replications.end(),
            [](const ReplicationStats& a, const ReplicationStats& b) { return a.index < b.index; });
  auto column = [&](auto&& get) {
    std::vector<double> xs;
    xs.reserve(replications.size());
    for (const auto& r : replications) xs.push_back(get(r));
    return estimate(xs);
  };
  throughput.resize(I);
  for (std::size_t i = 0; i < I; ++i) throughput[i] = column([&](const ReplicationStats& r) { return r.throughput[i]; });
  queue_sojourn.resize(J);
  for (std::size_t j = 0; j < J; ++j) {
    queue_sojourn[j] = column([&](const ReplicationStats& r) { return r.queue_sojourn[j]; });
  }
  class_sojourn.resize(K);
  mean_counts.resize(K);
  little_residual.resize(K);
  for (std::size_t k = 0; k < K; ++k) {
    const std::size_t i = net.incidence(k).route;
    class_sojourn[k] = column([&](const ReplicationStats& r) { return r.class_sojourn[k]; });
    mean_counts[k] = column([&](const ReplicationStats& r) { return r.mean_counts[k]; });
    little_residual[k] = column(
        [&](const ReplicationStats& r) { return r.throughput[i] * r.class_sojourn[k] - r.mean_counts[k]; });
  }

  warnings.clear();
  if (std::any_of(replications.begin(), replications.end(), [](const ReplicationStats& r) { return r.events == 0; })) {
    warnings.push_back("no transition was possible: every window is capped at zero and the network stays empty");
  }
  if (replications.size() >= 2) {
    for (std::size_t i = 0; i < I; ++i) {
      std::vector<double> first;
      std::vector<double> second;
      std::vector<double> diff;
      for (const auto& r : replications) {
        first.push_back(r.throughput_halves[0][i]);
        second.push_back(r.throughput_halves[1][i]);
        diff.push_back(r.throughput_halves[1][i] - r.throughput_halves[0][i]);
      }
      Estimate d = estimate(diff);
      Estimate a = estimate(first);
      Estimate b = estimate(second);
      const bool drift = d.se > 0.0 && std::abs(d.mean) > 4.0 * d.se;
      const double ratio = (a.se > 0.0 && b.se > 0.0) ? (b.se * b.se) / (a.se * a.se) : 1.0;
      const bool spread = replications.size() >= 4 && (ratio > 6.0 || ratio < 1.0 / 6.0);
      if (drift || spread) {
        warnings.push_back(fmt::format(
            "route '{}': replications disagree between the two halves of the measurement window "
            "(mean shift {:.3g}, variance ratio {:.3g}); confidence intervals may be unreliable",
            net.route(i).id, d.mean, ratio));
      }
    }
  }
}

SimStats simulate(const Network& net, const SimConfig& config) {
  if (config.c < 1) throw DomainError(fmt::format("congestion level must be >= 1, got {}", config.c));
  if (!(config.measure_time > 0.0)) throw DomainError("measure_time must be positive");
  if (config.replications < 1) throw DomainError("replications must be >= 1");
  const double warmup = config.warmup_time.value_or(config.measure_time / 10.0);
  if (!(warmup >= 0.0)) throw DomainError("warmup_time must be nonnegative");

  const auto R = static_cast<std::size_t>(config.replications);
  std::vector<ReplicationStats> results(R);
  unsigned workers = config.threads > 0 ? static_cast<unsigned>(config.threads) : std::thread::hardware_concurrency();
  workers = std::clamp<unsigned>(workers, 1u, static_cast<unsigned>(R));

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (;;) {
      const std::size_t r = next.fetch_add(1);
      if (r >= R) return;
      try {
        results[r] = run_replication(net, config, warmup, r);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  SimStats stats;
  stats.c = config.c;
  stats.measure_time = config.measure_time;
  stats.warmup_time = warmup;
  stats.replications = std::move(results);
  stats.summarize(net);
  return stats;
}

SimStats merge(const Network& net, const SimStats& a, const SimStats& b) {
  if (a.c != b.c || a.measure_time != b.measure_time) {
    throw DomainError("only runs with the same congestion level and measure time can be merged");
  }
  SimStats out;
  out.c = a.c;
  out.measure_time = a.measure_time;
  out.warmup_time = a.warmup_time;
  out.replications = a.replications;
  out.replications.insert(out.replications.end(), b.replications.begin(), b.replications.end());
  std::stable_sort(out.replications.begin(), out.replications.end(),
                   [](const ReplicationStats& x, const ReplicationStats& y) {
                     if (x.index != y.index) return x.index < y.index;
                     return x.events < y.events;
                   });
  out.summarize(net);
  return out;
}

std::vector<LittleViolation> little_check(const Network& net, const SimStats& stats, double tol_sigma) {
  std::uint64_t departures = 0;
  for (const auto& r : stats.replications) {
    for (auto d : r.departures) departures += d;
  }
  if (!(stats.measure_time > 0.0) || departures == 0) throw DomainError("little_check: no samples");
  if (stats.replications.size() < 2) throw DomainError("little_check needs at least two replications");
  std::vector<LittleViolation> out;
  for (std::size_t k = 0; k < net.incidence_count(); ++k) {
    const Estimate& e = stats.little_residual.at(k);
    if (e.samples < 2 || !std::isfinite(e.mean)) continue;
    const double z = e.se > 0.0 ? e.mean / e.se : (e.mean == 0.0 ? 0.0 : std::copysign(INFINITY, e.mean));
    if (std::abs(z) > tol_sigma) {
      out.push_back({net.incidence(k).queue, net.incidence(k).route, e.mean, z});
    }
  }
  return out;
}

OccupancyLaw occupancy_histogram(const Network& net, const SimConfig& config) {
  SimConfig cfg = config;
  cfg.collect_occupancy = true;
  SimStats stats = simulate(net, cfg);
  OccupancyLaw law;
  const double R = static_cast<double>(stats.replications.size());
  for (const auto& r : stats.replications) {
    for (const auto& [m, p] : r.occupancy) law[m] += p / R;
  }
  return law;
}

OccupancyLaw table_law(const StationaryTable& table) {
  OccupancyLaw law;
  for (std::size_t s = 0; s < table.size(); ++s) {
    auto m = table.state(s);
    law[std::vector<int>(m.begin(), m.end())] += table.prob(s);
  }
  return law;
}

double total_variation(const OccupancyLaw& a, const OccupancyLaw& b) {
  double s = 0.0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() || ib != b.end()) {
    if (ib == b.end() || (ia != a.end() && ia->first < ib->first)) {
      s += std::abs(ia->second);
      ++ia;
    } else if (ia == a.end() || ib->first < ia->first) {
      s += std::abs(ib->second);
      ++ib;
    } else {
      s += std::abs(ia->second - ib->second);
      ++ia;
      ++ib;
    }
  }
  return 0.5 * s;
}

}  // namespace cwnd
