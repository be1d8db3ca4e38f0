#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace cwnd {

/// Service discipline of a single-server multi-class queue.
///
/// A discipline is a pair of position distributions: `service_share(l, m)` is
/// the fraction of capacity given to position l when m packets are present,
/// and `placement(l, m)` is the probability that an arriving packet takes
/// position l when the queue holds m packets after the arrival. Positions are
/// 1-based with position 1 at the head.
class Discipline {
 public:
  enum class Kind { ProcessorSharing, Fifo, LifoPreemptive, Custom };

  static Discipline processor_sharing();
  static Discipline fifo();
  static Discipline lifo_preemptive();

  /// Row m-1 of each table covers occupancy m and holds m entries.
  /// Occupancies above the shorter table are unsupported.
  static Discipline custom(std::vector<std::vector<double>> service_share,
                           std::vector<std::vector<double>> placement);

  Kind kind() const noexcept { return kind_; }
  std::string_view name() const noexcept;

  double service_share(int position, int occupancy) const;
  double placement(int position, int occupancy_after) const;

  /// Largest occupancy the discipline is defined for.
  int max_occupancy() const noexcept;

  /// Stochasticity violations for occupancies 1..up_to, formatted as
  /// "m=<occupancy>: <detail>".
  std::vector<std::string> violations(int up_to) const;

  /// Inverse-CDF draws for u in [0, 1). Return 1-based positions.
  int sample_service_position(int occupancy, double u) const;
  int sample_placement(int occupancy_after, double u) const;

  const std::vector<std::vector<double>>& service_table() const noexcept { return service_; }
  const std::vector<std::vector<double>>& placement_table() const noexcept { return placement_; }

 private:
  explicit Discipline(Kind kind) : kind_(kind) {}

  Kind kind_;
  std::vector<std::vector<double>> service_;
  std::vector<std::vector<double>> placement_;
};

/// Weighted alpha-fair utility w * x^(1-alpha) / (1-alpha), restricted to alpha > 1.
class AlphaFair {
 public:
  AlphaFair(double alpha, double weight);

  double alpha() const noexcept { return alpha_; }
  double weight() const noexcept { return weight_; }

 private:
  double alpha_;
  double weight_;
};

/// Utility given by an arbitrary function handle on (0, inf). Must be strictly
/// increasing and exponentially concave; the latter is checked numerically.
struct Tabulated {
  std::function<double(double)> value;
  std::string label = "tabulated";
};

using UtilitySpec = std::variant<AlphaFair, Tabulated>;

struct CongestionControl {
  UtilitySpec utility;
  /// Log acknowledgment rate, used only by the isolated-window analysis.
  double ack_rate_log = 0.0;
  /// When set, the window holds at most window_cap * c packets.
  std::optional<int> window_cap;
};

struct QueueSpec {
  std::string id;
  double capacity = 1.0;
  Discipline discipline = Discipline::processor_sharing();
};

struct RouteSpec {
  std::string id;
  std::vector<std::string> path;
  CongestionControl control;
};

/// Static topology as written by the user; not yet validated.
struct NetworkModel {
  std::vector<QueueSpec> queues;
  std::vector<RouteSpec> routes;
};

/// All invariant violations of the model. Empty iff the model can be used by
/// every other module. Includes the numeric exponential-concavity gate on each
/// route utility.
std::vector<std::string> validate_network(const NetworkModel& model);

/// Validated, index-resolved view of a NetworkModel.
///
/// Queue j and route i are positions in the model vectors. The incidence set
/// (queue, route) pairs is ordered by route, then by hop along the route; every
/// per-incidence vector in the library uses this order.
class Network {
 public:
  struct Incidence {
    std::size_t queue;
    std::size_t route;
    std::size_t hop;
  };

  /// Throws ValidationError carrying the full violation report.
  explicit Network(NetworkModel model);

  const NetworkModel& model() const noexcept { return model_; }

  std::size_t queue_count() const noexcept { return model_.queues.size(); }
  std::size_t route_count() const noexcept { return model_.routes.size(); }
  std::size_t incidence_count() const noexcept { return incidences_.size(); }

  const QueueSpec& queue(std::size_t j) const { return model_.queues.at(j); }
  const RouteSpec& route(std::size_t i) const { return model_.routes.at(i); }
  const CongestionControl& control(std::size_t i) const { return model_.routes.at(i).control; }

  std::span<const std::size_t> path(std::size_t i) const { return paths_.at(i); }
  std::span<const Incidence> incidences() const noexcept { return incidences_; }
  const Incidence& incidence(std::size_t k) const { return incidences_.at(k); }
  std::size_t incidence_index(std::size_t route, std::size_t hop) const;

  /// Incidence indices at queue j, in incidence order.
  std::span<const std::size_t> queue_incidences(std::size_t j) const { return by_queue_.at(j); }
  /// Incidence indices of route i, in hop order.
  std::span<const std::size_t> route_incidences(std::size_t i) const { return by_route_.at(i); }

  std::optional<std::size_t> find_queue(std::string_view id) const;
  std::optional<std::size_t> find_route(std::string_view id) const;

  bool all_processor_sharing() const;
  /// True when every route has a window cap.
  bool all_capped() const;

  Network with_capacity_scale(double factor) const;
  Network with_window_cap(std::optional<int> cap) const;
  Network with_discipline(const Discipline& discipline) const;

 private:
  NetworkModel model_;
  std::vector<std::vector<std::size_t>> paths_;
  std::vector<Incidence> incidences_;
  std::vector<std::vector<std::size_t>> by_queue_;
  std::vector<std::vector<std::size_t>> by_route_;
};

}  // namespace cwnd
