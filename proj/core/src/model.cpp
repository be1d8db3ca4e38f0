#include "cwnd/model.hpp"

#include <algorithm>
#include <climits>
#include <cmath>
#include <set>
#include <utility>

#include <fmt/format.h>

#include "cwnd/errors.hpp"
#include "cwnd/utility.hpp"

namespace cwnd {

namespace {

constexpr double kStochasticTol = 1e-12;

std::string check_row(const std::vector<double>& row, int m, std::string_view table) {
  if (static_cast<int>(row.size()) != m) {
    return fmt::format("m={}: {} row has {} entries, expected {}", m, table, row.size(), m);
  }
  double sum = 0.0;
  for (double p : row) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      return fmt::format("m={}: {} has a negative or non-finite entry", m, table);
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > kStochasticTol) {
    return fmt::format("m={}: {} sums to {:.12g}", m, table, sum);
  }
  return {};
}

int sample_row(const std::vector<double>& row, double u) {
  double acc = 0.0;
  for (std::size_t l = 0; l < row.size(); ++l) {
    acc += row[l];
    if (u < acc) return static_cast<int>(l) + 1;
  }
  // u landed in the rounding gap at the top; take the last positive entry.
  for (std::size_t l = row.size(); l-- > 0;) {
    if (row[l] > 0.0) return static_cast<int>(l) + 1;
  }
  return static_cast<int>(row.size());
}

}  // namespace

Discipline Discipline::processor_sharing() { return Discipline(Kind::ProcessorSharing); }
Discipline Discipline::fifo() { return Discipline(Kind::Fifo); }
Discipline Discipline::lifo_preemptive() { return Discipline(Kind::LifoPreemptive); }

Discipline Discipline::custom(std::vector<std::vector<double>> service_share,
                              std::vector<std::vector<double>> placement) {
  Discipline d(Kind::Custom);
  d.service_ = std::move(service_share);
  d.placement_ = std::move(placement);
  return d;
}

std::string_view Discipline::name() const noexcept {
  switch (kind_) {
    case Kind::ProcessorSharing: return "ps";
    case Kind::Fifo: return "fifo";
    case Kind::LifoPreemptive: return "lifo";
    case Kind::Custom: return "custom";
  }
  return "unknown";
}

int Discipline::max_occupancy() const noexcept {
  if (kind_ != Kind::Custom) return INT_MAX;
  return static_cast<int>(std::min(service_.size(), placement_.size()));
}

double Discipline::service_share(int position, int occupancy) const {
  if (occupancy < 1 || position < 1 || position > occupancy) return 0.0;
  switch (kind_) {
    case Kind::ProcessorSharing: return 1.0 / occupancy;
    case Kind::Fifo: return position == 1 ? 1.0 : 0.0;
    case Kind::LifoPreemptive: return position == occupancy ? 1.0 : 0.0;
    case Kind::Custom:
      if (occupancy > static_cast<int>(service_.size())) {
        throw DomainError(fmt::format("custom discipline undefined at occupancy {}", occupancy));
      }
      return service_[occupancy - 1][position - 1];
  }
  return 0.0;
}

double Discipline::placement(int position, int occupancy_after) const {
  if (occupancy_after < 1 || position < 1 || position > occupancy_after) return 0.0;
  switch (kind_) {
    case Kind::ProcessorSharing: return 1.0 / occupancy_after;
    case Kind::Fifo:
    case Kind::LifoPreemptive: return position == occupancy_after ? 1.0 : 0.0;
    case Kind::Custom:
      if (occupancy_after > static_cast<int>(placement_.size())) {
        throw DomainError(
            fmt::format("custom discipline undefined at occupancy {}", occupancy_after));
      }
      return placement_[occupancy_after - 1][position - 1];
  }
  return 0.0;
}

std::vector<std::string> Discipline::violations(int up_to) const {
  std::vector<std::string> out;
  if (kind_ == Kind::Custom) {
    if (service_.empty() || placement_.empty()) {
      out.emplace_back("custom discipline needs at least one row in each table");
      return out;
    }
    int top = std::min(up_to, max_occupancy());
    for (int m = 1; m <= top; ++m) {
      if (auto msg = check_row(service_[m - 1], m, "service share"); !msg.empty()) {
        out.push_back(std::move(msg));
      }
      if (auto msg = check_row(placement_[m - 1], m, "placement"); !msg.empty()) {
        out.push_back(std::move(msg));
      }
    }
    return out;
  }
  for (int m = 1; m <= up_to; ++m) {
    double gs = 0.0;
    double ds = 0.0;
    for (int l = 1; l <= m; ++l) {
      gs += service_share(l, m);
      ds += placement(l, m);
    }
    if (std::abs(gs - 1.0) > kStochasticTol) {
      out.push_back(fmt::format("m={}: service share sums to {:.12g}", m, gs));
    }
    if (std::abs(ds - 1.0) > kStochasticTol) {
      out.push_back(fmt::format("m={}: placement sums to {:.12g}", m, ds));
    }
  }
  return out;
}

int Discipline::sample_service_position(int occupancy, double u) const {
  switch (kind_) {
    case Kind::ProcessorSharing:
      return std::min(occupancy, 1 + static_cast<int>(u * occupancy));
    case Kind::Fifo: return 1;
    case Kind::LifoPreemptive: return occupancy;
    case Kind::Custom:
      if (occupancy > static_cast<int>(service_.size())) {
        throw DomainError(fmt::format("custom discipline undefined at occupancy {}", occupancy));
      }
      return sample_row(service_[occupancy - 1], u);
  }
  return 1;
}

int Discipline::sample_placement(int occupancy_after, double u) const {
  switch (kind_) {
    case Kind::ProcessorSharing:
      return std::min(occupancy_after, 1 + static_cast<int>(u * occupancy_after));
    case Kind::Fifo:
    case Kind::LifoPreemptive: return occupancy_after;
    case Kind::Custom:
      if (occupancy_after > static_cast<int>(placement_.size())) {
        throw DomainError(
            fmt::format("custom discipline undefined at occupancy {}", occupancy_after));
      }
      return sample_row(placement_[occupancy_after - 1], u);
  }
  return 1;
}

AlphaFair::AlphaFair(double alpha, double weight) : alpha_(alpha), weight_(weight) {
  if (!(alpha > 1.0) || !std::isfinite(alpha)) {
    throw DomainError(fmt::format("alpha-fair utility needs alpha > 1, got {}", alpha));
  }
  if (!(weight > 0.0) || !std::isfinite(weight)) {
    throw DomainError(fmt::format("alpha-fair utility needs weight > 0, got {}", weight));
  }
}

std::vector<std::string> validate_network(const NetworkModel& model) {
  std::vector<std::string> out;
  std::set<std::string, std::less<>> queue_ids;
  for (const auto& q : model.queues) {
    if (q.id.empty()) out.emplace_back("queue with empty id");
    if (!queue_ids.insert(q.id).second) out.push_back(fmt::format("duplicate queue id '{}'", q.id));
    if (!(q.capacity > 0.0) || !std::isfinite(q.capacity)) {
      out.push_back(fmt::format("queue '{}': capacity must be positive and finite", q.id));
    }
    for (auto& v : q.discipline.violations(50)) {
      out.push_back(fmt::format("queue '{}' discipline {}", q.id, v));
    }
  }
  if (model.routes.empty()) out.emplace_back("network has no routes");

  std::set<std::string, std::less<>> route_ids;
  auto grid = default_concavity_grid();
  for (const auto& r : model.routes) {
    if (r.id.empty()) out.emplace_back("route with empty id");
    if (!route_ids.insert(r.id).second) out.push_back(fmt::format("duplicate route id '{}'", r.id));
    if (r.path.empty()) out.push_back(fmt::format("route '{}': empty path", r.id));
    std::set<std::string, std::less<>> seen;
    for (const auto& j : r.path) {
      if (!queue_ids.contains(j)) {
        out.push_back(fmt::format("route '{}': unknown queue '{}'", r.id, j));
      }
      if (!seen.insert(j).second) {
        out.push_back(fmt::format("route '{}': queue '{}' visited twice", r.id, j));
      }
    }
    if (r.control.window_cap && *r.control.window_cap < 0) {
      out.push_back(fmt::format("route '{}': negative window cap", r.id));
    }
    if (!std::isfinite(r.control.ack_rate_log)) {
      out.push_back(fmt::format("route '{}': non-finite ack rate", r.id));
    }
    if (const auto* t = std::get_if<Tabulated>(&r.control.utility); t && !t->value) {
      out.push_back(fmt::format("route '{}': tabulated utility has no function", r.id));
    } else if (!check_exponential_concavity(r.control.utility, grid, 1e-12)) {
      out.push_back(fmt::format("route '{}': utility is not exponentially concave", r.id));
    }
  }
  return out;
}

Network::Network(NetworkModel model) : model_(std::move(model)) {
  auto report = validate_network(model_);
  if (!report.empty()) {
    std::string what = "invalid network model:";
    for (const auto& v : report) what += "\n  " + v;
    throw ValidationError(std::move(what), std::move(report));
  }
  by_queue_.resize(model_.queues.size());
  for (std::size_t i = 0; i < model_.routes.size(); ++i) {
    std::vector<std::size_t> path;
    std::vector<std::size_t> inc;
    for (std::size_t h = 0; h < model_.routes[i].path.size(); ++h) {
      std::size_t j = *find_queue(model_.routes[i].path[h]);
      path.push_back(j);
      by_queue_[j].push_back(incidences_.size());
      inc.push_back(incidences_.size());
      incidences_.push_back({j, i, h});
    }
    paths_.push_back(std::move(path));
    by_route_.push_back(std::move(inc));
  }
}

std::size_t Network::incidence_index(std::size_t route, std::size_t hop) const {
  return by_route_.at(route).at(hop);
}

std::optional<std::size_t> Network::find_queue(std::string_view id) const {
  for (std::size_t j = 0; j < model_.queues.size(); ++j) {
    if (model_.queues[j].id == id) return j;
  }
  return std::nullopt;
}

std::optional<std::size_t> Network::find_route(std::string_view id) const {
  for (std::size_t i = 0; i < model_.routes.size(); ++i) {
    if (model_.routes[i].id == id) return i;
  }
  return std::nullopt;
}

bool Network::all_processor_sharing() const {
  return std::all_of(model_.queues.begin(), model_.queues.end(), [](const QueueSpec& q) {
    return q.discipline.kind() == Discipline::Kind::ProcessorSharing;
  });
}

bool Network::all_capped() const {
  return std::all_of(model_.routes.begin(), model_.routes.end(),
                     [](const RouteSpec& r) { return r.control.window_cap.has_value(); });
}

Network Network::with_capacity_scale(double factor) const {
  NetworkModel m = model_;
  for (auto& q : m.queues) q.capacity *= factor;
  return Network(std::move(m));
}

Network Network::with_window_cap(std::optional<int> cap) const {
  NetworkModel m = model_;
  for (auto& r : m.routes) r.control.window_cap = cap;
  return Network(std::move(m));
}

Network Network::with_discipline(const Discipline& discipline) const {
  NetworkModel m = model_;
  for (auto& q : m.queues) q.discipline = discipline;
  return Network(std::move(m));
}

}  // namespace cwnd
