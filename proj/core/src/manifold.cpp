#include "cwnd/manifold.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "cwnd/errors.hpp"
#include "cwnd/utility.hpp"

namespace cwnd {

namespace {

constexpr std::size_t kMaxEnumeratedFaces = 16;

double norm_diff(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return std::sqrt(s);
}

}  // namespace

Manifold::Manifold(const Network& net, Allocation optimum, const Prices& prices)
    : net_(net), optimum_(std::move(optimum)) {
  EntropySolution sol = primal_reconstruct(net_, optimum_, prices);
  point_ = std::move(sol.counts);
  windows_ = std::move(sol.windows);
  std::vector<double> load(net_.queue_count(), 0.0);
  for (std::size_t k = 0; k < net_.incidence_count(); ++k) {
    const auto& inc = net_.incidence(k);
    load[inc.queue] += optimum_.rates[inc.route];
  }
  for (std::size_t j = 0; j < net_.queue_count(); ++j) {
    if (!net_.queue_incidences(j).empty() && load[j] >= net_.queue(j).capacity * (1.0 - 1e-8)) {
      saturated_.push_back(j);
    }
  }
  // With independent window constraints the queue totals are pinned and the
  // set is the single point m*.
  if (!saturated_.empty()) {
    Eigen::MatrixXd window_map = Eigen::MatrixXd::Zero(net_.route_count(), saturated_.size());
    for (std::size_t s = 0; s < saturated_.size(); ++s) {
      const std::size_t j = saturated_[s];
      for (std::size_t k : net_.queue_incidences(j)) {
        window_map(net_.incidence(k).route, s) = optimum_.rates[net_.incidence(k).route] / net_.queue(j).capacity;
      }
    }
    single_point_ = window_map.colPivHouseholderQr().rank() == static_cast<Eigen::Index>(saturated_.size());
  }
}

Manifold::Residuals Manifold::residuals(std::span<const double> m) const {
  if (m.size() != net_.incidence_count()) throw DomainError("point size does not match the network");
  Residuals r;
  std::vector<double> queue_total(net_.queue_count(), 0.0);
  std::vector<double> window(net_.route_count(), 0.0);
  for (std::size_t k = 0; k < m.size(); ++k) {
    queue_total[net_.incidence(k).queue] += m[k];
    window[net_.incidence(k).route] += m[k];
  }
  for (std::size_t k = 0; k < m.size(); ++k) {
    const auto& inc = net_.incidence(k);
    r.proportion = std::max(r.proportion, std::abs(m[k] * net_.queue(inc.queue).capacity -
                                                   queue_total[inc.queue] * optimum_.rates[inc.route]));
  }
  for (std::size_t i = 0; i < net_.route_count(); ++i) {
    double slope = window_potential_slope(net_.control(i).utility, window[i]);
    r.window = std::max(r.window, std::abs(slope - std::log(optimum_.rates[i])));
  }
  return r;
}

double Manifold::distance_to_point(std::span<const double> m) const {
  if (m.size() != point_.size()) throw DomainError("point size does not match the network");
  return norm_diff(m, point_);
}

double Manifold::distance(std::span<const double> m) const {
  if (m.size() != point_.size()) throw DomainError("point size does not match the network");
  const std::size_t S = saturated_.size();
  if (S == 0 || single_point_ || S > kMaxEnumeratedFaces) return distance_to_point(m);

  const std::size_t K = net_.incidence_count();
  const std::size_t I = net_.route_count();
  // Queue totals t_s parametrise the set: m_ji = t_j x*_i / C_j on saturated queues.
  Eigen::MatrixXd embed = Eigen::MatrixXd::Zero(K, S);
  Eigen::MatrixXd window_map = Eigen::MatrixXd::Zero(I, S);
  for (std::size_t s = 0; s < S; ++s) {
    const std::size_t j = saturated_[s];
    const double cap = net_.queue(j).capacity;
    for (std::size_t k : net_.queue_incidences(j)) {
      const std::size_t i = net_.incidence(k).route;
      embed(k, s) = optimum_.rates[i] / cap;
      window_map(i, s) = optimum_.rates[i] / cap;
    }
  }
  Eigen::VectorXd target(K);
  for (std::size_t k = 0; k < K; ++k) target[k] = m[k];
  Eigen::VectorXd windows(I);
  for (std::size_t i = 0; i < I; ++i) windows[i] = windows_[i];

  double best = std::numeric_limits<double>::infinity();
  for (std::size_t mask = 1; mask < (std::size_t{1} << S); ++mask) {
    std::vector<std::size_t> face;
    for (std::size_t s = 0; s < S; ++s) {
      if (mask & (std::size_t{1} << s)) face.push_back(s);
    }
    const auto F = static_cast<Eigen::Index>(face.size());
    Eigen::MatrixXd P(K, F);
    Eigen::MatrixXd A(I, F);
    for (Eigen::Index f = 0; f < F; ++f) {
      P.col(f) = embed.col(face[f]);
      A.col(f) = window_map.col(face[f]);
    }
    // Equality-constrained least squares via its KKT system.
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(F + I, F + I);
    kkt.topLeftCorner(F, F) = P.transpose() * P;
    kkt.topRightCorner(F, I) = A.transpose();
    kkt.bottomLeftCorner(I, F) = A;
    Eigen::VectorXd rhs(F + I);
    rhs.head(F) = P.transpose() * target;
    rhs.tail(I) = windows;
    Eigen::VectorXd sol = kkt.completeOrthogonalDecomposition().solve(rhs);
    Eigen::VectorXd t = sol.head(F);
    if ((A * t - windows).lpNorm<Eigen::Infinity>() > 1e-9 * (1.0 + windows.lpNorm<Eigen::Infinity>())) {
      continue;
    }
    if (t.size() > 0 && t.minCoeff() < -1e-12) continue;
    best = std::min(best, (P * t - target).norm());
  }
  return std::isfinite(best) ? best : distance_to_point(m);
}

ManifoldProbe manifold_point_and_distance(const Network& net, const Allocation& optimum,
                                          const Prices& prices, std::span<const double> m) {
  Manifold set(net, optimum, prices);
  return {set.representative(), set.distance_to_point(m)};
}

}  // namespace cwnd
