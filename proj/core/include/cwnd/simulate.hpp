#pragma once

// Event-driven simulation of the positional queueing system. Every queue holds
// an ordered sequence of packets; the discipline decides which position is
// served and where arrivals are placed. Windows inject at their current rate.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "cwnd/model.hpp"

namespace cwnd {

class StationaryTable;

/// Positional state plus the hazards of every transition out of it.
class DetailedState {
 public:
  struct Packet {
    std::size_t route = 0;
    std::size_t hop = 0;
    double entered = 0.0;  // time the packet joined its current queue
  };

  enum class Kind { Inject, Transfer, Ack };

  /// One positional transition. Positions are 1-based; from_position is 0 for
  /// an injection and to_position is 0 for an acknowledgment.
  struct Transition {
    Kind kind;
    std::size_t route;
    std::size_t from_queue;
    int from_position;
    std::size_t to_queue;
    int to_position;
    double rate;
  };

  struct Event {
    Kind kind;
    std::size_t route;
    std::size_t queue;       // queue the packet entered (inject, transfer) or left (ack)
    int position;            // position taken (inject, transfer) or vacated (ack)
    std::size_t from_queue;  // queue left (transfer, ack)
    int from_position;
    Packet departed;         // the served packet, before it moved on
  };

  DetailedState(const Network& net, int c);

  const Network& network() const noexcept { return *net_; }
  int c() const noexcept { return c_; }
  std::span<const Packet> queue(std::size_t j) const { return queues_.at(j); }
  long window(std::size_t i) const { return windows_.at(i); }
  /// Count of route-i packets at queue j, by incidence index.
  std::vector<int> counts() const;

  /// Put a packet of `route` at the given hop, at 1-based `position` of that
  /// hop's queue. Used to build frozen states; increments the window.
  void place(std::size_t route, std::size_t hop, int position, double time = 0.0);

  double injection_hazard(std::size_t i) const;
  double service_hazard(std::size_t j) const;
  double total_hazard() const;

  /// Every positional transition with its rate; rates sum to total_hazard().
  std::vector<Transition> transitions() const;

  /// Fires one transition. u_pick selects it in proportion to its hazard;
  /// u_serve and u_place drive the discipline draws. All in [0, 1).
  Event fire(double u_pick, double u_serve, double u_place, double now);

  /// Window counts equal in-network counts and every packet sits on its route.
  bool consistent() const;

 private:
  int insert(std::size_t j, Packet p, double u_place);

  const Network* net_;
  int c_;
  std::vector<std::vector<Packet>> queues_;
  std::vector<long> windows_;
  mutable std::vector<std::vector<double>> rate_cache_;
};

struct SimConfig {
  std::uint64_t seed = 1;
  /// Defaults to measure_time / 10.
  std::optional<double> warmup_time;
  double measure_time = 1e4;
  int c = 1;
  int replications = 1;
  /// Worker threads; 0 uses the hardware concurrency.
  int threads = 0;
  /// Time-weighted count-vector law per replication (costly).
  bool collect_occupancy = false;
  /// Tab-separated event trace of replication 0 (time, kind, route, queue, position).
  std::ostream* trace = nullptr;
};

using OccupancyLaw = std::map<std::vector<int>, double>;

struct ReplicationStats {
  std::size_t index = 0;
  std::uint64_t events = 0;
  std::vector<double> throughput;        // acknowledgments per unit time, per route
  std::vector<double> throughput_halves[2];
  std::vector<double> queue_sojourn;     // per queue; NaN without departures
  std::vector<double> class_sojourn;     // per incidence; NaN without departures
  std::vector<std::uint64_t> departures; // per incidence
  std::vector<double> mean_counts;       // time-averaged count per incidence
  OccupancyLaw occupancy;
};

struct Estimate {
  double mean = 0.0;
  double se = 0.0;  // across replications; NaN with fewer than two
  std::size_t samples = 0;
};

struct SimStats {
  int c = 1;
  double measure_time = 0.0;
  double warmup_time = 0.0;
  std::vector<ReplicationStats> replications;  // ordered by index

  std::vector<Estimate> throughput;      // per route
  std::vector<Estimate> queue_sojourn;   // per queue
  std::vector<Estimate> class_sojourn;   // per incidence
  std::vector<Estimate> mean_counts;     // per incidence
  /// Per incidence (j, i): throughput_i * class_sojourn_ji - mean_count_ji.
  std::vector<Estimate> little_residual;
  std::vector<std::string> warnings;

  /// Recomputes the summaries from `replications`.
  void summarize(const Network& net);
};

SimStats simulate(const Network& net, const SimConfig& config);

/// Union of the replications of both runs, re-summarised. Order-independent.
SimStats merge(const Network& net, const SimStats& a, const SimStats& b);

struct LittleViolation {
  std::size_t queue;
  std::size_t route;
  double residual;
  double z;
};

/// Incidences whose Little residual exceeds tol_sigma standard errors.
/// Throws DomainError without samples or with fewer than two replications.
std::vector<LittleViolation> little_check(const Network& net, const SimStats& stats, double tol_sigma);

/// Time-weighted law of the count vector, averaged over replications.
OccupancyLaw occupancy_histogram(const Network& net, const SimConfig& config);

OccupancyLaw table_law(const StationaryTable& table);
double total_variation(const OccupancyLaw& a, const OccupancyLaw& b);

}  // namespace cwnd
