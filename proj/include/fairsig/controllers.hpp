#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fairsig/demand.hpp"
#include "fairsig/microsim.hpp"
#include "fairsig/network.hpp"
#include "fairsig/signal_core.hpp"

namespace fairsig {

struct LinkObservation {
  std::size_t link = npos;
  DetectorReading detectors;
  int vehicles = 0;
  int queue = 0;
  double waiting_total = 0.0;  // N_z
};

/// Read-only snapshot handed to a cyclic controller when cycle `cycle` of
/// `intersection` has just completed.
struct ControllerContext {
  std::size_t intersection = 0;
  int cycle = 0;
  int clock = 0;
  const Network* network = nullptr;
  const SignalPlan* plan = nullptr;
  const CycleRecord* record = nullptr;   // the cycle that just ended
  std::vector<LinkObservation> links;    // inbound links, phase order
};

/// Snapshot at a master-cycle boundary (network-wide optimizers).
struct NetworkContext {
  int master_cycle = 0;  // number of completed master cycles
  int clock = 0;
  const Network* network = nullptr;
  const SignalPlan* plan = nullptr;
  const Simulation* sim = nullptr;
};

struct DecisionRecord {
  int clock = 0;
  int cycle = 0;
  std::size_t intersection = npos;  // npos for network-wide decisions
  std::string optimizer;
  double ds_max = 0.0;
  double ds_diff = 0.0;
  std::vector<int> greens_before;
  std::vector<int> greens_after;
  int cycle_before = 0;
  int cycle_after = 0;
  std::vector<int> offsets;
  double ttg = 0.0;
  int teg = 0;
};

class Controller {
 public:
  virtual ~Controller() = default;
  virtual std::string_view name() const = 0;
  /// Writes faces for second `sim.clock()`. May close detector cycles.
  virtual void update(Simulation& sim, std::span<Face> faces) = 0;

  const std::vector<CycleRecord>& cycle_log() const { return cycle_log_; }
  const std::vector<DecisionRecord>& decision_log() const { return decisions_; }

 protected:
  std::vector<CycleRecord> cycle_log_;
  std::vector<DecisionRecord> decisions_;
};

/// Drives one IntersectionSignal per intersection against a common master
/// cycle. Subclasses adjust the plan through the hooks; returned plans take
/// effect at each intersection's next cycle boundary.
class CyclicController : public Controller {
 public:
  CyclicController(const Network& net, SignalPlan initial, GreenBounds bounds);

  void update(Simulation& sim, std::span<Face> faces) final;

  const SignalPlan& plan() const { return plan_; }
  const MasterClock& master() const { return master_; }
  const IntersectionSignal& signal(std::size_t n) const { return signals_.at(n); }

 protected:
  virtual std::optional<SignalPlan> on_cycle_end(const ControllerContext&) { return std::nullopt; }
  virtual std::optional<SignalPlan> on_master_cycle_end(const NetworkContext&) { return std::nullopt; }
  virtual void on_step(Simulation&, int) {}

  IntersectionSignal& mutable_signal(std::size_t n) { return signals_.at(n); }
  const Network& network() const { return *net_; }
  /// Validates and installs a plan; throws PlanError.
  void set_plan(SignalPlan plan);

 private:
  const Network* net_;
  SignalPlan plan_;
  std::vector<IntersectionSignal> signals_;
  MasterClock master_;
};

/// Pretimed control: the configured plan, offsets included, never changes.
class FixedCycleController final : public CyclicController {
 public:
  FixedCycleController(const Network& net, SignalPlan plan);
  std::string_view name() const override { return "fixed"; }
};

struct MaxPressureParams {
  int decision_interval = 10;  // s
  bool pce_weighted = false;
};

/// Pressure of one phase: Σ over its inbound links u of
/// (q_u − Σ_v p_uv q_v) with q = 0 beyond exit links.
double phase_pressure(const Network& net, std::span<const std::vector<Turn>> turns, std::size_t n, std::size_t phase,
                      const std::function<double(std::size_t)>& queue);

/// Index of the largest value; ties go to the lowest index.
std::size_t argmax_lowest(std::span<const double> values);

struct PhaseSwitch {
  int clock = 0;
  std::size_t intersection = 0;
  std::size_t from = 0;
  std::size_t to = 0;
  int green_shown = 0;
};

/// Acyclic back-pressure control. At every multiple of the decision interval
/// each intersection whose active phase has shown at least its minimum green
/// switches (through yellow) to the highest-pressure phase.
class MaxPressureController final : public Controller {
 public:
  MaxPressureController(const Network& net, std::vector<std::vector<Turn>> turns, MaxPressureParams params,
                        int g_min = 5);
  std::string_view name() const override { return "maxpressure"; }
  void update(Simulation& sim, std::span<Face> faces) override;

  const std::vector<PhaseSwitch>& switches() const { return switches_; }

 private:
  struct State {
    std::size_t active = 0;
    std::size_t next = 0;
    bool in_yellow = false;
    int since = 0;
  };

  const Network* net_;
  std::vector<std::vector<Turn>> turns_;
  MaxPressureParams params_;
  int g_min_;
  std::vector<State> states_;
  std::vector<PhaseSwitch> switches_;
};

}  // namespace fairsig
