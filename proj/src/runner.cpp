#include "fairsig/runner.hpp"

#include <chrono>
#include <ostream>

#include <fmt/format.h>
#include <fmt/ranges.h>

namespace fairsig {

std::unique_ptr<Controller> make_controller(const Network& net, const DemandProfile& demand, ControllerKind kind,
                                            const ControllerConfig& config) {
  switch (kind) {
    case ControllerKind::Fixed:
      return std::make_unique<FixedCycleController>(net, config.plan);
    case ControllerKind::MaxPressure:
      return std::make_unique<MaxPressureController>(net, demand.turns, config.maxpressure,
                                                     config.maxpressure_min_green);
    case ControllerKind::Scosca:
      return std::make_unique<ScoscaController>(net, config.plan, config.scosca, std::nullopt, std::nullopt,
                                                "scosca");
    case ControllerKind::Fair1:
      return std::make_unique<ScoscaController>(net, config.plan, config.scosca, config.fair1, std::nullopt,
                                                "fairscosca1");
    case ControllerKind::Fair2:
      return std::make_unique<ScoscaController>(net, config.plan, config.scosca, std::nullopt, config.fair2,
                                                "fairscosca2");
  }
  throw std::invalid_argument("unknown controller kind");
}

RunResult run_simulation(const Scenario& scenario, ControllerKind kind, std::uint64_t seed,
                         const ControllerConfig* config) {
  const auto t0 = std::chrono::steady_clock::now();
  const Network& net = *scenario.network;
  const int horizon = scenario.runs.horizon;
  auto controller = make_controller(net, scenario.demand, kind, config ? *config : scenario.controller);

  SimOptions opts;
  opts.spillback = scenario.runs.spillback;
  Simulation sim(net, scenario.demand, generate_demand(scenario.demand, net, seed, horizon), opts);
  std::vector<Face> faces(net.link_count(), Face::Red);
  for (int t = 0; t < horizon; ++t) {
    controller->update(sim, faces);
    sim.step(faces);
  }

  RunResult r;
  r.controller = kind;
  r.seed = seed;
  r.horizon = horizon;
  r.conservation_held = sim.conservation_held();
  for (const Vehicle& v : sim.vehicles()) {
    VehicleRecord rec;
    rec.id = v.id;
    rec.origin_class = v.origin_class;
    rec.entry_time = v.entry_time;
    rec.exit_time = v.exit_time;
    rec.distance = v.distance;
    rec.censored = !v.exit_time.has_value();
    rec.delay = rec.censored ? delay_so_far(v, net, horizon) : vehicle_delay(v);
    rec.cumulative_wait = v.cumulative_wait;
    r.vehicles.push_back(rec);
    if (v.entry_time >= scenario.metrics.warmup) {
      const double end = v.exit_time ? *v.exit_time : static_cast<double>(horizon);
      r.ledger.entries.push_back({rec.delay, v.distance, end - v.entry_time, v.origin_class, rec.censored});
    }
  }
  r.steps = sim.step_log();
  r.efficiency = efficiency(r.steps);
  r.mfd = mfd(r.steps, horizon, scenario.metrics.mfd_window);
  r.cycles = controller->cycle_log();
  r.decisions = controller->decision_log();
  r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

void write_vehicles_csv(std::ostream& out, std::span<const VehicleRecord> vehicles) {
  out << "id,origin_class,entry_time,exit_time,distance_m,delay_s,cumulative_wait_s,censored\n";
  for (const VehicleRecord& v : vehicles) {
    out << fmt::format("{},{},{},{},{},{},{},{}\n", v.id, to_string(v.origin_class), v.entry_time,
                       v.exit_time ? fmt::format("{}", *v.exit_time) : std::string(), v.distance, v.delay,
                       v.cumulative_wait, v.censored ? 1 : 0);
  }
}

void write_steps_csv(std::ostream& out, std::span<const StepRecord> steps) {
  out << "clock,vehicles_present,exited_cum\n";
  for (const StepRecord& s : steps) out << fmt::format("{},{},{}\n", s.clock, s.vehicles_present, s.exited_cum);
}

void write_timeline_csv(std::ostream& out, std::span<const CycleRecord> cycles) {
  out << "intersection,cycle,start,length,phase,scheduled_green,effective_green,preempted\n";
  for (const CycleRecord& c : cycles) {
    for (std::size_t j = 0; j < c.effective_greens.size(); ++j) {
      out << fmt::format("{},{},{},{},{},{},{},{}\n", c.intersection, c.cycle, c.start, c.length, j,
                         c.scheduled_greens[j], c.effective_greens[j], c.preempted ? 1 : 0);
    }
  }
}

void write_decisions_csv(std::ostream& out, std::span<const DecisionRecord> decisions) {
  out << "clock,cycle,intersection,optimizer,ds_max,ds_diff,greens_before,greens_after,cycle_before,cycle_after,"
         "offsets,ttg,teg\n";
  for (const DecisionRecord& d : decisions) {
    out << fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{}\n", d.clock, d.cycle,
                       d.intersection == npos ? std::string("network") : fmt::format("{}", d.intersection),
                       d.optimizer, d.ds_max, d.ds_diff, fmt::join(d.greens_before, " "),
                       fmt::join(d.greens_after, " "), d.cycle_before, d.cycle_after, fmt::join(d.offsets, " "),
                       d.ttg, d.teg);
  }
}

}  // namespace fairsig
