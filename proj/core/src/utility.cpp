#include "cwnd/utility.hpp"

#include <cmath>
#include <type_traits>

#include <fmt/format.h>

#include "cwnd/errors.hpp"
#include "numeric.hpp"

namespace cwnd {

namespace {

using detail::kInf;

// Search range for the log-rate in conjugate evaluations.
constexpr double kLogRateLimit = 50.0;
constexpr double kSearchWidth = 1e-10;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void require_positive_rate(double rate) {
  if (!(rate > 0.0)) throw DomainError(fmt::format("utility needs a positive rate, got {}", rate));
}

double tabulated_potential(const Tabulated& t, double mbar) {
  auto objective = [&](double l) { return t.value(std::exp(l)) - mbar * l; };
  auto best = detail::concave_max(objective, 0.0, 1.0, -kLogRateLimit, kLogRateLimit, kSearchWidth);
  return -best.value;
}

}  // namespace

double utility_value(const UtilitySpec& u, double rate) {
  require_positive_rate(rate);
  return std::visit(Overloaded{
                        [&](const AlphaFair& a) {
                          return a.weight() * std::pow(rate, 1.0 - a.alpha()) / (1.0 - a.alpha());
                        },
                        [&](const Tabulated& t) { return t.value(rate); },
                    },
                    u);
}

double utility_prime(const UtilitySpec& u, double rate) {
  require_positive_rate(rate);
  return std::visit(Overloaded{
                        [&](const AlphaFair& a) { return a.weight() * std::pow(rate, -a.alpha()); },
                        [&](const Tabulated& t) {
                          double h = 1e-5 * rate;
                          return (t.value(rate + h) - t.value(rate - h)) / (2.0 * h);
                        },
                    },
                    u);
}

double utility_second(const UtilitySpec& u, double rate) {
  require_positive_rate(rate);
  return std::visit(Overloaded{
                        [&](const AlphaFair& a) {
                          return -a.alpha() * a.weight() * std::pow(rate, -a.alpha() - 1.0);
                        },
                        [&](const Tabulated& t) {
                          double h = 1e-4 * rate;
                          return (t.value(rate + h) - 2.0 * t.value(rate) + t.value(rate - h)) /
                                 (h * h);
                        },
                    },
                    u);
}

double inverse_marginal_utility(const UtilitySpec& u, double price) {
  if (!(price > 0.0)) throw DomainError(fmt::format("marginal utility inverse needs price > 0, got {}", price));
  if (const auto* a = std::get_if<AlphaFair>(&u)) {
    return std::pow(a->weight() / price, 1.0 / a->alpha());
  }
  // U' is decreasing: bracket then bisect in log space.
  double lo = 1.0;
  double hi = 1.0;
  while (utility_prime(u, lo) < price && lo > 1e-300) lo *= 0.5;
  while (utility_prime(u, hi) > price && hi < 1e300) hi *= 2.0;
  for (int it = 0; it < 200 && hi - lo > 1e-12 * hi; ++it) {
    double mid = std::sqrt(lo * hi);
    if (utility_prime(u, mid) > price) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return std::sqrt(lo * hi);
}

bool check_exponential_concavity(const UtilitySpec& u, std::span<const double> grid, double tol) {
  if (grid.size() < 3) return false;
  std::vector<double> h(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    h[k] = std::visit(Overloaded{
                          [&](const AlphaFair& a) {
                            return a.weight() * std::exp((1.0 - a.alpha()) * grid[k]) /
                                   (1.0 - a.alpha());
                          },
                          [&](const Tabulated& t) { return t.value ? t.value(std::exp(grid[k])) : kInf; },
                      },
                      u);
    if (!std::isfinite(h[k])) return false;
  }
  for (std::size_t k = 1; k + 1 < grid.size(); ++k) {
    double left = (h[k] - h[k - 1]) / (grid[k] - grid[k - 1]);
    double right = (h[k + 1] - h[k]) / (grid[k + 1] - grid[k]);
    // Relative test: alpha-fair slopes shrink like e^{(1-alpha) lambda} in the upper tail.
    if (!(right - left < -tol * std::max(std::abs(left), std::abs(right)))) return false;
  }
  return true;
}

std::vector<double> default_concavity_grid() {
  std::vector<double> g;
  for (int k = -32; k <= 32; ++k) g.push_back(0.25 * k);
  return g;
}

double window_potential(const UtilitySpec& u, double mbar) {
  if (!(mbar >= 0.0)) throw DomainError(fmt::format("window size must be >= 0, got {}", mbar));
  return std::visit(Overloaded{
                        [&](const AlphaFair& a) {
                          if (mbar == 0.0) return 0.0;
                          return mbar / (1.0 - a.alpha()) * (std::log(mbar / a.weight()) - 1.0);
                        },
                        [&](const Tabulated& t) { return tabulated_potential(t, mbar); },
                    },
                    u);
}

double window_potential_slope(const UtilitySpec& u, double mbar) {
  if (!(mbar >= 0.0)) throw DomainError(fmt::format("window size must be >= 0, got {}", mbar));
  if (const auto* a = std::get_if<AlphaFair>(&u)) {
    if (mbar == 0.0) return kInf;
    return std::log(mbar / a->weight()) / (1.0 - a->alpha());
  }
  if (mbar == 0.0) return kInf;
  double h = 1e-4 * mbar;
  return (window_potential(u, mbar + h) - window_potential(u, mbar - h)) / (2.0 * h);
}

double window_potential_conjugate(const UtilitySpec& u, double lambda) {
  if (const auto* a = std::get_if<AlphaFair>(&u)) {
    // Stationarity G'(m) = lambda has the unique root below.
    double m = a->weight() * std::exp((1.0 - a->alpha()) * lambda);
    return window_potential(u, m) - lambda * m;
  }
  auto objective = [&](double m) { return window_potential(u, m) - lambda * m; };
  auto best = detail::concave_max(objective, 1.0, 1.0, 0.0, 1e12, kSearchWidth);
  return best.value;
}

std::optional<long> window_limit(const CongestionControl& ctrl, int c) {
  if (!ctrl.window_cap) return std::nullopt;
  return static_cast<long>(*ctrl.window_cap) * c;
}

double log_window_weight(const CongestionControl& ctrl, int c, long k) {
  if (c < 1) throw DomainError(fmt::format("congestion level must be >= 1, got {}", c));
  if (k < 0) throw DomainError(fmt::format("window size must be >= 0, got {}", k));
  if (auto lim = window_limit(ctrl, c); lim && k > *lim) return -kInf;
  const double kd = static_cast<double>(k);
  return std::visit(Overloaded{
                        [&](const AlphaFair& a) {
                          return (kd * std::log(c * a.weight()) - std::lgamma(kd + 1.0)) /
                                 (a.alpha() - 1.0);
                        },
                        [&](const Tabulated&) { return c * window_potential(ctrl.utility, kd / c); },
                    },
                    ctrl.utility);
}

double window_rate(const CongestionControl& ctrl, int c, long mbar) {
  if (c < 1) throw DomainError(fmt::format("congestion level must be >= 1, got {}", c));
  if (mbar < 0) throw DomainError(fmt::format("window size must be >= 0, got {}", mbar));
  if (auto lim = window_limit(ctrl, c); lim && mbar >= *lim) return 0.0;
  if (const auto* a = std::get_if<AlphaFair>(&ctrl.utility)) {
    return std::pow(c * a->weight() / static_cast<double>(mbar + 1), 1.0 / (a->alpha() - 1.0));
  }
  const double lo = static_cast<double>(mbar) / c;
  const double hi = static_cast<double>(mbar + 1) / c;
  return std::exp(c * (window_potential(ctrl.utility, hi) - window_potential(ctrl.utility, lo)));
}

}  // namespace cwnd
