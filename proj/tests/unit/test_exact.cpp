#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "cwnd/errors.hpp"
#include "cwnd/exact.hpp"
#include "cwnd/generator.hpp"
#include "cwnd/manifold.hpp"
#include "cwnd/optimize.hpp"
#include "fixtures.hpp"

using namespace cwnd;
namespace t = cwnd::testing;

namespace {

double total_variation(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += std::abs(a[k] - b[k]);
  return 0.5 * s;
}

}  // namespace

TEST(Weight, Examples) {
  Network one = t::single_queue();
  EXPECT_NEAR(unnormalized_weight(one, 1, std::vector<int>{2}), 0.5, 1e-15);
  EXPECT_EQ(unnormalized_weight(t::triangle(), 4, std::vector<int>(6, 0)), 1.0);
  Network pair = t::shared_queue({1.0, 1.0}, 2.0);
  EXPECT_NEAR(unnormalized_weight(pair, 3, std::vector<int>{1, 1}), 4.5, 1e-13);
}

TEST(Weight, ZeroBeyondCap) {
  Network capped = t::single_queue(2, 1, 1, 2);
  EXPECT_GT(unnormalized_weight(capped, 1, std::vector<int>{2}), 0.0);
  EXPECT_EQ(unnormalized_weight(capped, 1, std::vector<int>{3}), 0.0);
}

TEST(Weight, LogSpaceSurvivesLargeCounts) {
  Network pair = t::shared_queue({1.0, 1.0});
  const double lw = log_unnormalized_weight(pair, 200, std::vector<int>{400, 350});
  EXPECT_TRUE(std::isfinite(lw));
}

TEST(NormalizingConstant, PoissonSeries) {
  Network one = t::single_queue();
  EXPECT_NEAR(std::exp(normalizing_constant(one, 1, 40).log_b), std::exp(1.0), 1e-12);
  EXPECT_NEAR(std::exp(normalizing_constant(one, 2, 50).log_b), std::exp(2.0), 1e-11);
  EXPECT_EQ(normalizing_constant(one, 3, 0).log_b, 0.0);
}

TEST(NormalizingConstant, TailBoundCoversOmittedMass) {
  Network one = t::single_queue();
  for (int n : {3, 6, 10, 15}) {
    auto nc = normalizing_constant(one, 3, n);
    double omitted = 0.0;
    for (int k = n + 1; k < 200; ++k) omitted += t::poisson_pmf(3.0, k);
    // Relative to the true normaliser e^3.
    EXPECT_GE(std::exp(nc.log_tail - 3.0), omitted) << n;
  }
}

TEST(NormalizingConstant, TooSmallTruncationNamesTheFix) {
  Network one = t::single_queue();
  try {
    normalizing_constant(one, 5, 8, 1e-12);
    FAIL() << "expected TruncationError";
  } catch (const TruncationError& e) {
    EXPECT_GT(e.suggested_n_max(), 8);
    EXPECT_NE(std::string(e.what()).find(std::to_string(e.suggested_n_max())), std::string::npos);
    EXPECT_NO_THROW(normalizing_constant(one, 5, e.suggested_n_max(), 1e-12));
  }
}

TEST(StationaryTable, TruncatedPoisson) {
  Network one = t::single_queue();
  for (int c : {1, 3, 7}) {
    StationaryTable table = stationary_distribution(one, c);
    EXPECT_LE(table.tail_bound(), 1e-12);
    double sum = 0.0;
    for (std::size_t s = 0; s < table.size(); ++s) {
      const int m = table.state(s)[0];
      EXPECT_NEAR(table.prob(s), t::poisson_pmf(c, m), 1e-12);
      sum += table.prob(s);
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
  EXPECT_NEAR(stationary_distribution(one, 1).prob(0), 0.367879, 1e-6);
}

TEST(StationaryTable, SingleQueueCapacityReduction) {
  // Poisson(c / C) when the queue runs at capacity C.
  Network one = t::single_queue(2, 1, 2.0);
  StationaryTable table = stationary_distribution(one, 3);
  for (std::size_t s = 0; s < table.size(); ++s) EXPECT_NEAR(table.prob(s), t::poisson_pmf(1.5, table.state(s)[0]), 1e-12);
}

TEST(StationaryTable, SymmetricRoutesHaveEqualMarginals) {
  Network pair = t::shared_queue({1.0, 1.0});
  StationaryTable table = stationary_distribution(pair, 2);
  auto marg = incidence_marginals(pair, table);
  ASSERT_EQ(marg[0].size(), marg[1].size());
  for (std::size_t k = 0; k < marg[0].size(); ++k) EXPECT_NEAR(marg[0][k], marg[1][k], 1e-14);
}

TEST(StationaryTable, OrderAndLookup) {
  Network tri = t::triangle(1);
  StationaryTable table = stationary_distribution(tri, 1);
  // Caps give zero tail once every admissible state is present.
  EXPECT_EQ(table.tail_bound(), 0.0);
  EXPECT_EQ(table.size(), 27u);
  for (std::size_t s = 0; s < table.size(); ++s) {
    auto found = table.find(table.state(s));
    ASSERT_TRUE(found);
    EXPECT_EQ(*found, s);
    EXPECT_GE(table.prob(s), 0.0);
  }
  EXPECT_FALSE(table.find(std::vector<int>{2, 0, 0, 0, 0, 0}));
  const double sum = std::accumulate(table.probs().begin(), table.probs().end(), 0.0);
  EXPECT_NEAR(sum, 1.0, 1e-12);
}

TEST(StationaryTable, ExplicitTruncationReportsGrowth) {
  TruncationPolicy p;
  p.n_max = 4;
  EXPECT_THROW(stationary_distribution(t::single_queue(), 4, p), TruncationError);
}

TEST(StationaryTable, StateBudget) {
  TruncationPolicy p;
  p.state_budget = 100;
  EXPECT_THROW(stationary_distribution(t::triangle(), 2, p), StateBudgetError);
}

TEST(Throughput, ClosedForm) {
  Network one = t::single_queue();
  EXPECT_NEAR(exact_throughput(one, stationary_distribution(one, 3)).throughput[0], 0.950213, 1e-6);
  EXPECT_NEAR(exact_throughput(one, stationary_distribution(one, 1)).throughput[0], 0.632121, 1e-6);
  for (int c = 1; c <= 10; ++c) {
    EXPECT_NEAR(exact_throughput(one, stationary_distribution(one, c)).throughput[0], 1.0 - std::exp(-c), 1e-10);
  }
}

TEST(Throughput, ApproachesOptimum) {
  Network one = t::single_queue();
  EXPECT_NEAR(exact_throughput(one, stationary_distribution(one, 40)).throughput[0], 1.0, 1e-12);
}

TEST(Throughput, InjectionEqualsAcknowledgment) {
  for (const Network& net : {t::shared_queue({4.0, 1.0}), t::tandem(), t::triangle(2)}) {
    StationaryTable table = stationary_distribution(net, 2);
    auto rep = exact_throughput(net, table);
    auto ack = exact_ack_rates(net, table);
    for (std::size_t i = 0; i < net.route_count(); ++i) EXPECT_NEAR(rep.throughput[i], ack[i], 1e-8);
  }
}

TEST(Throughput, ManifoldDistanceDiagnostic) {
  Network one = t::single_queue();
  auto sol = solve_system(one);
  Manifold set(one, sol.allocation, sol.prices);
  StationaryTable table = stationary_distribution(one, 4);
  auto rep = exact_throughput(one, table, &set);
  ASSERT_TRUE(rep.mean_manifold_distance);
  double expected = 0.0;
  for (std::size_t s = 0; s < table.size(); ++s) expected += table.prob(s) * std::abs(table.state(s)[0] / 4.0 - 1.0);
  EXPECT_NEAR(*rep.mean_manifold_distance, expected, 1e-12);
}

TEST(WindowMarginal, Examples) {
  auto w = window_marginal(t::alpha_fair(2, 1), 4, 0.0, 60);
  for (int k = 0; k <= 60; ++k) EXPECT_NEAR(w.probs[k], t::poisson_pmf(4.0, k), 1e-12);
  EXPECT_LT(w.tail_bound, 1e-12);
  auto half = window_marginal(t::alpha_fair(2, 1), 1, std::log(2.0), 40);
  for (int k = 0; k <= 40; ++k) EXPECT_NEAR(half.probs[k], t::poisson_pmf(0.5, k), 1e-13);
  auto point = window_marginal(t::alpha_fair(2, 1, 0), 3, 0.0, 5);
  EXPECT_EQ(point.probs[0], 1.0);
  for (int k = 1; k <= 5; ++k) EXPECT_EQ(point.probs[k], 0.0);
  EXPECT_EQ(point.tail_bound, 0.0);
}

TEST(QueueMarginal, Examples) {
  QueueSpec one{"q", 1.0, Discipline::processor_sharing()};
  EXPECT_NEAR(queue_marginal(one, std::vector<double>{0.5}, std::vector<int>{0}), 0.5, 1e-15);
  EXPECT_NEAR(queue_marginal(one, std::vector<double>{0.5}, std::vector<int>{2}), 0.125, 1e-15);
  QueueSpec two{"q", 2.0, Discipline::processor_sharing()};
  EXPECT_NEAR(queue_marginal(two, std::vector<double>{0.5, 0.5}, std::vector<int>{1, 1}), 0.0625, 1e-15);
  EXPECT_THROW(queue_marginal(one, std::vector<double>{0.6, 0.4}, std::vector<int>{0, 0}), DomainError);
}

TEST(Concentration, PoissonTails) {
  Network one = t::single_queue();
  StationaryTable t100 = stationary_distribution(one, 100);
  const double center[] = {1.0};
  const double p = concentration_probability(t100, center, 0.5);
  EXPECT_NEAR(p, t::poisson_concentration(100, 0.5), 1e-15);
  EXPECT_NEAR(p, 1.9082263883948074e-06, 1e-15);
  EXPECT_EQ(concentration_probability(t100, center, 0.0), 1.0);
  StationaryTable t400 = stationary_distribution(one, 400);
  EXPECT_LT(concentration_probability(t400, center, 0.25), concentration_probability(t100, center, 0.25));
}

TEST(Concentration, EventuallyDecreasingOnReferenceModels) {
  for (const Network& net : {t::single_queue(), t::tandem()}) {
    auto sol = solve_system(net);
    Manifold set(net, sol.allocation, sol.prices);
    std::vector<double> probs;
    for (int c : {5, 10, 20, 40, 80}) {
      StationaryTable table = stationary_distribution(net, c);
      probs.push_back(
          concentration_probability(table, [&](std::span<const double> x) { return set.distance(x); }, 0.25));
    }
    for (std::size_t k = 2; k < probs.size(); ++k) EXPECT_LT(probs[k], probs[k - 1]) << k;
  }
}

TEST(Generator, TransitionRates) {
  Network one = t::single_queue(2, 1, 1, 5);
  Generator g = aggregated_generator(one, 1, 5);
  auto s3 = *g.find(std::vector<int>{3});
  auto s2 = *g.find(std::vector<int>{2});
  auto s4 = *g.find(std::vector<int>{4});
  EXPECT_NEAR(g.rates.coeff(s3, s2), 1.0, 1e-15);
  EXPECT_NEAR(g.rates.coeff(s3, s4), 0.25, 1e-15);
  auto s0 = *g.find(std::vector<int>{0});
  auto s1 = *g.find(std::vector<int>{1});
  EXPECT_NEAR(g.rates.coeff(s0, s1), 1.0, 1e-15);
  EXPECT_NEAR(g.rates.coeff(s0, s0), -1.0, 1e-15);

  Network tan = t::tandem(3);
  Generator h = aggregated_generator(tan, 1, 3);
  auto from = *h.find(std::vector<int>{2, 1});
  EXPECT_NEAR(h.rates.coeff(from, *h.find(std::vector<int>{1, 2})), 1.0, 1e-15);
  EXPECT_NEAR(h.rates.coeff(from, *h.find(std::vector<int>{2, 0})), 1.0, 1e-15);
  for (Eigen::Index r = 0; r < h.rates.rows(); ++r) EXPECT_NEAR(h.rates.row(r).sum(), 0.0, 1e-14);
}

TEST(Generator, RejectsUnsupportedModels) {
  EXPECT_THROW(aggregated_generator(t::single_queue(), 1, 10), UnsupportedError);
  EXPECT_THROW(aggregated_generator(t::triangle(1).with_discipline(Discipline::fifo()), 1, 3), UnsupportedError);
  EXPECT_THROW(aggregated_generator(t::triangle(2), 1, 3), UnsupportedError);
}

TEST(Generator, BirthDeathSolve) {
  Network one = t::single_queue(2, 1, 1, 5);
  auto sol = generator_solve(aggregated_generator(one, 1, 5));
  double z = 0.0;
  for (int k = 0; k <= 5; ++k) z += t::poisson_pmf(1.0, k);
  for (int k = 0; k <= 5; ++k) EXPECT_NEAR(sol.probs[k], t::poisson_pmf(1.0, k) / z, 1e-12);
  EXPECT_LE(sol.residual, 1e-10);
}

TEST(Generator, DisconnectedRoutesFactorise) {
  NetworkModel m;
  m.queues.push_back({"x", 1.0, Discipline::processor_sharing()});
  m.queues.push_back({"y", 2.0, Discipline::processor_sharing()});
  m.routes.push_back({"u", {"x"}, t::alpha_fair(2, 1, 3)});
  m.routes.push_back({"v", {"y"}, t::alpha_fair(3, 2, 2)});
  Network both(m);
  Generator g = aggregated_generator(both, 1, 5);
  auto joint = generator_solve(g);

  NetworkModel mu;
  mu.queues = {m.queues[0]};
  mu.routes = {m.routes[0]};
  NetworkModel mv;
  mv.queues = {m.queues[1]};
  mv.routes = {m.routes[1]};
  Network nu(mu);
  Network nv(mv);
  Generator gu = aggregated_generator(nu, 1, 3);
  Generator gv = aggregated_generator(nv, 1, 2);
  auto pu = generator_solve(gu);
  auto pv = generator_solve(gv);
  for (std::size_t s = 0; s < g.size(); ++s) {
    auto st = g.state(s);
    const double expected = pu.probs[*gu.find(st.subspan(0, 1))] * pv.probs[*gv.find(st.subspan(1, 1))];
    EXPECT_NEAR(joint.probs[s], expected, 1e-12);
  }
}

TEST(Generator, ReducibleChainIsRejected) {
  Generator g;
  g.width = 1;
  g.states = {0, 1};
  g.rates.resize(2, 2);
  g.rates.insert(0, 0) = -1.0;
  g.rates.insert(0, 1) = 1.0;
  g.rates.makeCompressed();
  EXPECT_THROW(generator_solve(g), DomainError);
}

TEST(Generator, AgreesWithProductForm) {
  for (const Network& net : {t::shared_queue({4.0, 1.0}, 1.0, 2.0, 3), t::tandem(4), t::triangle(1)}) {
    for (int c : {1, 2}) {
      long cap_total = 0;
      for (std::size_t i = 0; i < net.route_count(); ++i) cap_total += *net.control(i).window_cap * c;
      if (c == 2 && net.route_count() == 3) continue;
      TruncationPolicy p;
      p.n_max = static_cast<int>(cap_total);
      StationaryTable table = stationary_distribution(net, c, p);
      Generator g = aggregated_generator(net, c, p.n_max.value());
      ASSERT_EQ(g.size(), table.size());
      auto sol = generator_solve(g);
      EXPECT_LE(total_variation(sol.probs, table.probs()), 1e-8);
    }
  }
}

TEST(CountVector, DerivedTotals) {
  Network tri = t::triangle();
  CountVector m(std::vector<int>{1, 2, 3, 4, 5, 6});
  EXPECT_EQ(m.queue_total(tri, 0), 1 + 6);
  EXPECT_EQ(m.queue_total(tri, 1), 2 + 3);
  EXPECT_EQ(m.window(tri, 2), 5 + 6);
  EXPECT_EQ(m.total(), 21);
  EXPECT_EQ(CountVector::zeros(tri).total(), 0);
}
