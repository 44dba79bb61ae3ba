#include "fairsig/controllers.hpp"

#include <algorithm>

#include <fmt/format.h>

namespace fairsig {

CyclicController::CyclicController(const Network& net, SignalPlan initial, GreenBounds bounds)
    : net_(&net), plan_(std::move(initial)) {
  if (plan_.timings.size() != net.intersection_count())
    throw PlanError(fmt::format("plan has {} timings for {} intersections", plan_.timings.size(),
                                net.intersection_count()));
  for (std::size_t n = 0; n < net.intersection_count(); ++n) {
    if (plan_.timings[n].cycle != plan_.timings.front().cycle)
      throw PlanError("all intersections must share the network cycle length");
    const GreenBounds b{std::max(bounds.min, net.intersection(n).min_green), bounds.max};
    signals_.emplace_back(net, n, plan_.timings[n], b);
  }
  master_.start = 0;
  master_.length = plan_.timings.front().cycle;
}

void CyclicController::set_plan(SignalPlan plan) {
  if (plan.timings.size() != signals_.size()) throw PlanError("plan does not cover every intersection");
  for (std::size_t n = 0; n < signals_.size(); ++n) {
    if (plan.timings[n].cycle != plan.timings.front().cycle)
      throw PlanError("all intersections must share the network cycle length");
    validate_timing(plan.timings[n], signals_[n].yellow(), signals_[n].phase_count(), signals_[n].bounds());
  }
  for (std::size_t n = 0; n < signals_.size(); ++n)
    signals_[n].apply_plan(plan.timings[n], signals_[n].cycle_index() + 1);
  plan_ = std::move(plan);
}

void CyclicController::update(Simulation& sim, std::span<Face> faces) {
  const int t = sim.clock();
  if (t == master_.start + master_.length) {
    ++master_.index;
    master_.start = t;
    NetworkContext ctx{master_.index, t, net_, &plan_, &sim};
    if (auto p = on_master_cycle_end(ctx)) set_plan(std::move(*p));
    master_.length = plan_.timings.front().cycle;
  }

  for (std::size_t n = 0; n < signals_.size(); ++n) {
    IntersectionSignal& s = signals_[n];
    if (!s.cycle_ends_at(t)) continue;
    const int k = s.cycle_index();
    for (std::size_t li : net_->inbound_links(n)) sim.detectors().close_cycle(li, k);

    ControllerContext ctx;
    ctx.intersection = n;
    ctx.cycle = k;
    ctx.clock = t;
    ctx.network = net_;
    ctx.plan = &plan_;
    ctx.record = &s.current();
    for (std::size_t li : net_->inbound_links(n)) {
      ctx.links.push_back(LinkObservation{li, sim.detectors().read(li, k), sim.vehicles_on(li), sim.queue_length(li),
                                          sim.waiting_total(li)});
    }
    if (auto p = on_cycle_end(ctx)) set_plan(std::move(*p));
    s.apply_plan(plan_.timings[n], k + 1);
    cycle_log_.push_back(s.advance_cycle(t, master_));
  }

  on_step(sim, t);
  for (const auto& s : signals_) s.write_faces(t, faces);
}

FixedCycleController::FixedCycleController(const Network& net, SignalPlan plan)
    : CyclicController(net, std::move(plan), GreenBounds{0, 1 << 20}) {}

double phase_pressure(const Network& net, std::span<const std::vector<Turn>> turns, std::size_t n, std::size_t phase,
                      const std::function<double(std::size_t)>& queue) {
  double p = 0.0;
  for (std::size_t u : net.intersection(n).phases.at(phase).movements) {
    double downstream = 0.0;
    for (const Turn& turn : turns[u])
      if (!net.is_exit_link(turn.to_link)) downstream += turn.fraction * queue(turn.to_link);
    p += queue(u) - downstream;
  }
  return p;
}

std::size_t argmax_lowest(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

MaxPressureController::MaxPressureController(const Network& net, std::vector<std::vector<Turn>> turns,
                                             MaxPressureParams params, int g_min)
    : net_(&net), turns_(std::move(turns)), params_(params), g_min_(g_min), states_(net.intersection_count()) {
  if (params_.decision_interval <= 0) throw std::invalid_argument("decision_interval must be positive");
  if (turns_.size() != net.link_count()) throw std::invalid_argument("turn table does not match network");
}

void MaxPressureController::update(Simulation& sim, std::span<Face> faces) {
  const int t = sim.clock();
  const auto queue = [&](std::size_t li) {
    return params_.pce_weighted ? sim.queued_pce(li) : static_cast<double>(sim.queue_length(li));
  };
  std::vector<double> pressure;
  for (std::size_t n = 0; n < states_.size(); ++n) {
    const Intersection& x = net_->intersection(n);
    State& st = states_[n];
    if (st.in_yellow && t - st.since >= x.yellow_time) {
      st.in_yellow = false;
      st.active = st.next;
      st.since = t;
    }
    const int min_green = std::max(g_min_, x.min_green);
    if (!st.in_yellow && t % params_.decision_interval == 0 && t - st.since >= min_green && x.phases.size() > 1) {
      pressure.assign(x.phases.size(), 0.0);
      for (std::size_t j = 0; j < x.phases.size(); ++j) pressure[j] = phase_pressure(*net_, turns_, n, j, queue);
      const std::size_t best = argmax_lowest(pressure);
      if (best != st.active) {
        switches_.push_back({t, n, st.active, best, t - st.since});
        st.in_yellow = true;
        st.next = best;
        st.since = t;
      }
    }
    PhaseClock c;
    c.active_phase = st.active;
    c.in_yellow = st.in_yellow;
    faces_at(*net_, n, c, faces);
  }
}

}  // namespace fairsig
