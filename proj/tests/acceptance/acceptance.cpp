// Acceptance suite: one PASS/FAIL line per criterion, exit status 0 only when
// every criterion passes.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "cwnd/cli.hpp"
#include "cwnd/exact.hpp"
#include "cwnd/generator.hpp"
#include "cwnd/manifold.hpp"
#include "cwnd/optimize.hpp"
#include "cwnd/simulate.hpp"
#include "cwnd/utility.hpp"
#include "fixtures.hpp"
#include "random_network.hpp"

using namespace cwnd;
namespace t = cwnd::testing;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

Network fixture(const std::string& name) { return Network(cli::load_config(t::model_path(name + ".model")).model); }

double tv(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += std::abs(a[k] - b[k]);
  return 0.5 * s;
}

Outcome closed_form_throughput() {
  Network one = fixture("single_route");
  double worst = 0.0;
  for (int c = 1; c <= 10; ++c) {
    StationaryTable table = stationary_distribution(one, c);
    worst = std::max(worst, std::abs(exact_throughput(one, table).throughput[0] - (1.0 - std::exp(-c))));
  }
  return {worst <= 1e-8, fmt::format("max |Lambda - (1 - e^-c)| = {:.3g} over c = 1..10", worst)};
}

Outcome product_form_vs_generator() {
  struct Case {
    const char* name;
    int cap;
    int c;
  };
  double worst = 0.0;
  std::string sizes;
  bool ok = true;
  for (Case k : {Case{"single_route", 10, 2}, Case{"single_bottleneck", 5, 2}, Case{"tandem", 5, 2},
                 Case{"triangle", 2, 2}}) {
    Network net = fixture(k.name).with_window_cap(k.cap);
    int n_max = 0;
    for (std::size_t i = 0; i < net.route_count(); ++i) n_max += k.cap * k.c;
    TruncationPolicy p;
    p.n_max = n_max;
    StationaryTable table = stationary_distribution(net, k.c, p);
    Generator g = aggregated_generator(net, k.c, n_max);
    if (g.size() != table.size() || table.size() > 20000) ok = false;
    GeneratorSolution sol = generator_solve(g);
    worst = std::max(worst, tv(sol.probs, table.probs()));
    sizes += fmt::format("{}{}={}", sizes.empty() ? "" : ", ", k.name, table.size());
  }
  return {ok && worst <= 1e-8, fmt::format("max TV = {:.3g} (states: {})", worst, sizes)};
}

Outcome strong_duality() {
  std::mt19937_64 rng(20240601);
  double worst_gap = 0.0;
  double worst_kkt = 0.0;
  for (int n = 0; n < 50; ++n) {
    Network net = t::random_network(rng);
    DualityCheck d = beta_star(net, 1e-9);
    worst_gap = std::max(worst_gap, std::abs(d.primal - d.dual) / (1.0 + std::abs(d.dual)));
    worst_kkt = std::max(worst_kkt, solve_system(net).kkt.worst());
  }
  return {worst_gap <= 1e-6 && worst_kkt <= 1e-6,
          fmt::format("max relative gap = {:.3g}, max KKT residual = {:.3g} over 50 networks", worst_gap, worst_kkt)};
}

Outcome throughput_convergence() {
  bool ok = true;
  std::string detail;
  for (const char* name : {"single_bottleneck", "tandem"}) {
    Network net = fixture(name);
    SystemSolution opt = solve_system(net);
    double prev = INFINITY;
    double rel = 0.0;
    std::string errs;
    for (int c : {5, 10, 20, 40}) {
      ThroughputReport r = exact_throughput(net, stationary_distribution(net, c));
      double err = 0.0;
      rel = 0.0;
      for (std::size_t i = 0; i < net.route_count(); ++i) {
        const double target = opt.allocation.rates[i];
        err = std::max(err, std::abs(r.throughput[i] - target));
        rel = std::max(rel, std::abs(r.throughput[i] - target) / target);
      }
      if (!(err < prev)) ok = false;
      prev = err;
      errs += fmt::format("{}{:.3g}", errs.empty() ? "" : " > ", err);
    }
    if (rel > 0.10) ok = false;
    detail += fmt::format("{}{}: {} (rel {:.3g} at c=40)", detail.empty() ? "" : "; ", name, errs, rel);
  }
  return {ok, detail};
}

Outcome ldp_slope() {
  cli::LoadedConfig cfg = cli::load_config(t::model_path("single_route.model"));
  cfg.experiment.c_values = {20, 40, 80, 160};
  cfg.experiment.target = {2.0};
  cli::LdpReport r = cli::run_ldp_check(Network(cfg.model), cfg.experiment);
  const double expected = 2 * std::log(2.0) - 1;
  const double dev = std::abs(r.fitted_limit - expected) / expected;
  return {dev <= 0.05 && std::abs(r.analytic - expected) <= 1e-8,
          fmt::format("fitted rate {:.6f} vs 2 log 2 - 1 = {:.6f} (deviation {:.2g}; raw -(1/c) log P at c=160 = {:.6f})",
                      r.fitted_limit, expected, dev, r.last_value)};
}

Outcome concentration() {
  Network one = fixture("single_route");
  SystemSolution opt = solve_system(one);
  Manifold manifold(one, opt.allocation, opt.prices);
  auto at = [&](int c) {
    return concentration_probability(
        stationary_distribution(one, c), [&](std::span<const double> m) { return manifold.distance(m); }, 0.25);
  };
  const double p25 = at(25);
  const double p100 = at(100);
  const double o25 = t::poisson_concentration(25, 0.25);
  const double o100 = t::poisson_concentration(100, 0.25);
  const bool oracle = std::abs(p25 - o25) <= 1e-10 && std::abs(p100 - o100) <= 1e-10;
  return {oracle && p25 >= 10 * p100,
          fmt::format("P(c=25) = {:.4g}, P(c=100) = {:.4g}, ratio {:.1f}", p25, p100, p25 / p100)};
}

Outcome simulation_fidelity() {
  cli::ExperimentConfig e;
  e.measure_time = 1e5;
  e.replications = 16;
  e.seed = 7;
  bool ok = true;
  double worst_z = 0.0;
  double worst_tv = 0.0;
  double worst_exact_tv = 0.0;
  std::size_t little = 0;
  for (const char* name : {"single_route", "single_bottleneck", "tandem", "triangle"}) {
    Network base = fixture(name).with_window_cap(2);
    std::vector<OccupancyLaw> laws;
    for (const Discipline& d : {Discipline::processor_sharing(), Discipline::fifo()}) {
      cli::SimulationReport r = cli::run_simulate(base.with_discipline(d), e, 1);
      for (double z : r.z_scores) worst_z = std::max(worst_z, std::abs(z));
      little += r.little.size();
      if (r.z_scores.size() != base.route_count() || !r.occupancy_tv) ok = false;
      worst_exact_tv = std::max(worst_exact_tv, r.occupancy_tv.value_or(INFINITY));
      OccupancyLaw law;
      for (const auto& rep : r.stats.replications) {
        for (const auto& [m, p] : rep.occupancy) law[m] += p / e.replications;
      }
      laws.push_back(std::move(law));
    }
    worst_tv = std::max(worst_tv, total_variation(laws[0], laws[1]));
  }
  ok = ok && worst_z <= 3.0 && little == 0 && worst_tv <= 0.02;
  return {ok, fmt::format("max |z| = {:.2f}, Little violations = {}, FIFO vs PS TV = {:.4f} (vs exact {:.4f})", worst_z,
                          little, worst_tv, worst_exact_tv)};
}

Outcome conjugacy() {
  double worst_conj = 0.0;
  for (double alpha : {1.5, 2.0, 3.0, 5.0}) {
    for (double w : {0.5, 1.0, 2.0}) {
      AlphaFair u(alpha, w);
      for (double lambda = -2.0; lambda <= 2.0 + 1e-12; lambda += 0.25) {
        worst_conj = std::max(worst_conj,
                              std::abs(window_potential_conjugate(u, lambda) + utility_value(u, std::exp(lambda))));
      }
    }
  }
  std::mt19937_64 rng(4242);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> classes(1, 5);
  double worst_beta = 0.0;
  for (int n = 0; n < 200; ++n) {
    const int k = classes(rng);
    std::vector<double> rates(k), counts(k);
    double load = 0.0;
    for (int i = 0; i < k; ++i) {
      rates[i] = 0.1 + unit(rng);
      counts[i] = unit(rng) < 0.15 ? 0.0 : 0.05 + 2.0 * unit(rng);
      load += rates[i];
    }
    const double capacity = load * (0.5 + unit(rng));
    worst_beta = std::max(worst_beta, std::abs(beta_queue(capacity, rates, counts) - beta_queue_dual(capacity, rates, counts)));
  }
  return {worst_conj <= 1e-8 && worst_beta <= 1e-8,
          fmt::format("max |G*(l) + U(e^l)| = {:.3g}, max |beta - beta_dual| = {:.3g} over 200 instances", worst_conj,
                      worst_beta)};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
    double budget_seconds;
  };
  const std::vector<Criterion> criteria{
      {1, "closed-form single-queue throughput", closed_form_throughput, 1.0},
      {2, "product form matches generator solve", product_form_vs_generator, 30.0},
      {3, "strong duality on random networks", strong_duality, 60.0},
      {4, "throughput converges to the optimum", throughput_convergence, 300.0},
      {5, "large-deviation rate at m = 2", ldp_slope, 0.0},
      {6, "concentration sharpens from c = 25 to c = 100", concentration, 0.0},
      {7, "simulation agrees with the exact law", simulation_fidelity, 300.0},
      {8, "conjugacy and queue-rate duality", conjugacy, 0.0},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, fmt::format("threw: {}", e.what())};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.budget_seconds > 0 && secs > c.budget_seconds) {
      o.pass = false;
      o.detail += fmt::format(" [over the {:.0f} s budget]", c.budget_seconds);
    }
    if (!o.pass) ++failed;
    std::printf("%s criterion %d (%s): %s [%.2f s]\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
