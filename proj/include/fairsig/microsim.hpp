#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "fairsig/demand.hpp"
#include "fairsig/network.hpp"

namespace fairsig {

enum class Face : std::uint8_t { Red, Yellow, Green };

struct DetectorReading {
  int green_seconds = 0;
  int unoccupied_seconds = 0;  // T_NO: green seconds with the stop-line detector unoccupied
  int discharged = 0;          // s_z: vehicles crossing during green
};

/// Stop-line detector accumulators, one per link, closed per signal cycle.
class DetectorBank {
 public:
  explicit DetectorBank(std::size_t links) : current_(links), closed_(links) {}

  void record_step(std::size_t link, bool green, bool occupied, int discharged);
  /// Freezes the running accumulator as cycle `cycle` and starts a new one.
  void close_cycle(std::size_t link, int cycle);
  /// Throws std::out_of_range if `cycle` has not been closed for `link`.
  DetectorReading read(std::size_t link, int cycle) const;
  const DetectorReading& current(std::size_t link) const { return current_.at(link); }

 private:
  std::vector<DetectorReading> current_;
  std::vector<std::map<int, DetectorReading>> closed_;
};

DetectorReading read_cycle_detectors(const DetectorBank& bank, std::size_t link, int cycle);

struct Vehicle {
  std::uint64_t id = 0;
  std::vector<std::size_t> route;
  std::size_t leg = 0;  // index into route of the current link
  double entry_time = 0.0;
  std::optional<double> exit_time;
  OriginClass origin_class = OriginClass::Arterial;
  double distance = 0.0;        // m, full route length
  double free_flow_time = 0.0;  // s, full route at free-flow speed
  int cumulative_wait = 0;      // s spent queued at stop lines
  double pce = 1.0;
  std::size_t vehicle_class = 0;
  double link_entry_time = 0.0;
  double ready_time = 0.0;  // reaches the end of the current link
  int queue_join = -1;      // step the vehicle joined the current stop-line queue
};

/// Total delay: travel time beyond free flow, clamped at zero to absorb step
/// rounding. Throws std::logic_error for a vehicle still in the network.
double vehicle_delay(const Vehicle& v);

/// Delay accumulated by a vehicle still in the network at time `now`.
double delay_so_far(const Vehicle& v, const Network& net, double now);

struct LinkQueueState {
  std::deque<std::size_t> in_transit;  // vehicle indices ordered by ready_time
  std::deque<std::size_t> queue;       // FIFO at the stop line
  double waiting_total = 0.0;          // N_z: summed current waits of queued vehicles
  double queued_pce = 0.0;
  double credit = 0.0;                 // discharge credit in PCE
};

struct StepRecord {
  int clock = 0;
  int vehicles_present = 0;
  int entered_cum = 0;
  int exited_cum = 0;
  int moving = 0;
  double speed_sum = 0.0;  // m/s summed over moving vehicles
};

struct StopLineArrival {
  std::size_t link = npos;
  std::size_t vehicle = npos;
  Face face = Face::Red;
};

struct SimOptions {
  /// Honour Link::storage_capacity (blocks upstream discharge when full).
  bool spillback = false;
  bool record_steps = true;
};

/// Fixed-step (1 s) point-queue simulation of a Network.
class Simulation {
 public:
  Simulation(const Network& net, const DemandProfile& demand, std::vector<ArrivalEvent> arrivals,
             SimOptions options = {});

  /// Advances the clock by one second under the given per-link faces.
  void step(std::span<const Face> faces);

  int clock() const { return clock_; }
  const Network& network() const { return *net_; }

  int queue_length(std::size_t link) const { return static_cast<int>(links_.at(link).queue.size()); }
  double queued_pce(std::size_t link) const { return links_.at(link).queued_pce; }
  int vehicles_on(std::size_t link) const {
    const auto& s = links_.at(link);
    return static_cast<int>(s.queue.size() + s.in_transit.size());
  }
  double waiting_total(std::size_t link) const { return links_.at(link).waiting_total; }
  const LinkQueueState& link_state(std::size_t link) const { return links_.at(link); }

  /// Vehicles that reached a stop line during the last step.
  std::span<const StopLineArrival> arrivals_last_step() const { return arrivals_last_; }

  DetectorBank& detectors() { return detectors_; }
  const DetectorBank& detectors() const { return detectors_; }

  const std::vector<Vehicle>& vehicles() const { return vehicles_; }
  const std::vector<StepRecord>& step_log() const { return steps_; }
  /// Exit order of vehicle indices per link (stop-line crossings).
  const std::vector<std::vector<std::size_t>>& crossing_log() const { return crossings_; }

  int entered() const { return entered_; }
  int exited() const { return exited_; }
  int present() const { return present_; }
  bool conservation_held() const { return conservation_ok_; }

 private:
  void inject(double until);
  bool has_room(std::size_t link) const;
  void move_to(std::size_t vehicle, std::size_t leg, double at);

  const Network* net_;
  const DemandProfile* demand_;
  SimOptions options_;
  std::vector<ArrivalEvent> arrivals_;
  std::size_t next_arrival_ = 0;
  std::vector<std::deque<std::size_t>> backlog_;  // per origin, spillback only
  std::vector<LinkQueueState> links_;
  std::vector<Vehicle> vehicles_;
  std::vector<StopLineArrival> arrivals_last_;
  std::vector<std::vector<std::size_t>> crossings_;
  std::vector<StepRecord> steps_;
  DetectorBank detectors_;
  int clock_ = 0;
  int entered_ = 0;
  int exited_ = 0;
  int present_ = 0;
  bool conservation_ok_ = true;
};

}  // namespace fairsig
