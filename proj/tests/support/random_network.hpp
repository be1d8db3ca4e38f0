#pragma once

#include <algorithm>
#include <random>
#include <string>

#include "cwnd/model.hpp"

namespace cwnd::testing {

/// Random network with up to 4 queues and 6 routes. Each route is a random
/// ordered subset of the queues; alpha in (1, 5], weights in [0.25, 4].
inline Network random_network(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> queues(1, 4);
  std::uniform_int_distribution<int> routes(1, 6);
  std::uniform_real_distribution<double> capacity(0.5, 2.0);
  std::uniform_real_distribution<double> alpha(1.05, 5.0);
  std::uniform_real_distribution<double> weight(0.25, 4.0);
  NetworkModel m;
  const int J = queues(rng);
  const int I = routes(rng);
  for (int j = 0; j < J; ++j) m.queues.push_back({"q" + std::to_string(j), capacity(rng), Discipline::processor_sharing()});
  for (int i = 0; i < I; ++i) {
    std::vector<std::string> ids;
    for (const auto& q : m.queues) ids.push_back(q.id);
    std::shuffle(ids.begin(), ids.end(), rng);
    std::uniform_int_distribution<int> len(1, J);
    ids.resize(static_cast<std::size_t>(len(rng)));
    m.routes.push_back({"r" + std::to_string(i), ids, CongestionControl{AlphaFair(alpha(rng), weight(rng)), 0.0, std::nullopt}});
  }
  return Network(m);
}

}  // namespace cwnd::testing
