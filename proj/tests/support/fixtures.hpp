#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "cwnd/model.hpp"

namespace cwnd::testing {

inline CongestionControl alpha_fair(double alpha, double weight, std::optional<int> cap = std::nullopt) {
  return CongestionControl{AlphaFair(alpha, weight), 0.0, cap};
}

/// One queue of capacity C with one route through it.
inline Network single_queue(double alpha = 2.0, double weight = 1.0, double capacity = 1.0,
                            std::optional<int> cap = std::nullopt) {
  NetworkModel m;
  m.queues.push_back({"link", capacity, Discipline::processor_sharing()});
  m.routes.push_back({"flow", {"link"}, alpha_fair(alpha, weight, cap)});
  return Network(m);
}

/// One queue shared by routes with the given weights.
inline Network shared_queue(std::vector<double> weights, double capacity = 1.0, double alpha = 2.0,
                            std::optional<int> cap = std::nullopt) {
  NetworkModel m;
  m.queues.push_back({"link", capacity, Discipline::processor_sharing()});
  for (std::size_t i = 0; i < weights.size(); ++i) {
    m.routes.push_back({"r" + std::to_string(i), {"link"}, alpha_fair(alpha, weights[i], cap)});
  }
  return Network(m);
}

inline Network tandem(std::optional<int> cap = std::nullopt) {
  NetworkModel m;
  m.queues.push_back({"first", 1.0, Discipline::processor_sharing()});
  m.queues.push_back({"second", 1.0, Discipline::processor_sharing()});
  m.routes.push_back({"flow", {"first", "second"}, alpha_fair(2.0, 1.0, cap)});
  return Network(m);
}

inline Network triangle(std::optional<int> cap = std::nullopt) {
  NetworkModel m;
  for (const char* id : {"a", "b", "c"}) m.queues.push_back({id, 1.0, Discipline::processor_sharing()});
  m.routes.push_back({"ab", {"a", "b"}, alpha_fair(2.0, 1.0, cap)});
  m.routes.push_back({"bc", {"b", "c"}, alpha_fair(2.0, 1.0, cap)});
  m.routes.push_back({"ca", {"c", "a"}, alpha_fair(2.0, 1.0, cap)});
  return Network(m);
}

inline std::string model_path(const std::string& name) { return std::string(CWND_MODELS_DIR) + "/" + name; }

/// Poisson(mean) probability mass, computed in log space.
inline double poisson_pmf(double mean, int k) {
  return std::exp(k * std::log(mean) - mean - std::lgamma(k + 1.0));
}

/// P(|N/c - 1| >= eps) for N ~ Poisson(c), by direct summation far into the tail.
inline double poisson_concentration(int c, double eps) {
  double p = 0.0;
  const int top = c + 40 * static_cast<int>(std::sqrt(c) + 1) + 50;
  for (int k = 0; k <= top; ++k) {
    if (std::abs(static_cast<double>(k) / c - 1.0) >= eps * (1.0 - 1e-12)) p += poisson_pmf(c, k);
  }
  return p;
}

}  // namespace cwnd::testing
