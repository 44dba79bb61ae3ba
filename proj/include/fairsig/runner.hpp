#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <vector>

#include "fairsig/controllers.hpp"
#include "fairsig/metrics.hpp"
#include "fairsig/microsim.hpp"
#include "fairsig/scenario.hpp"

namespace fairsig {

struct VehicleRecord {
  std::uint64_t id = 0;
  OriginClass origin_class = OriginClass::Arterial;
  double entry_time = 0.0;
  std::optional<double> exit_time;
  double distance = 0.0;
  double delay = 0.0;
  int cumulative_wait = 0;
  bool censored = false;
};

struct RunResult {
  ControllerKind controller = ControllerKind::Scosca;
  std::uint64_t seed = 0;
  int horizon = 0;
  std::vector<VehicleRecord> vehicles;
  std::vector<StepRecord> steps;
  std::vector<CycleRecord> cycles;
  std::vector<DecisionRecord> decisions;
  DelayLedger ledger;  // vehicles entering at or after the warmup
  Efficiency efficiency;
  std::vector<MfdBin> mfd;
  bool conservation_held = true;
  double wall_seconds = 0.0;
};

std::unique_ptr<Controller> make_controller(const Network& net, const DemandProfile& demand, ControllerKind kind,
                                            const ControllerConfig& config);

/// One simulation of `horizon` seconds. `config` overrides the scenario's
/// controller section when given.
RunResult run_simulation(const Scenario& scenario, ControllerKind kind, std::uint64_t seed,
                         const ControllerConfig* config = nullptr);

void write_vehicles_csv(std::ostream& out, std::span<const VehicleRecord> vehicles);
void write_steps_csv(std::ostream& out, std::span<const StepRecord> steps);
void write_timeline_csv(std::ostream& out, std::span<const CycleRecord> cycles);
void write_decisions_csv(std::ostream& out, std::span<const DecisionRecord> decisions);

}  // namespace fairsig
