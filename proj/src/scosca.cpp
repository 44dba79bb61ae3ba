#include "fairsig/scosca.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

namespace fairsig {

namespace {

constexpr double kMaxExponent = 700.0;

int floor_mod(long a, int m) {
  const long r = a % m;
  return static_cast<int>(r < 0 ? r + m : r);
}

std::vector<double> as_weights(std::span<const int> g) { return {g.begin(), g.end()}; }

}  // namespace

void ScoscaParams::validate() const {
  if (!(lambda1 > 0.0) || !(lambda2 > 0.0) || !(lambda3 > 0.0))
    throw std::invalid_argument("lambda1, lambda2 and lambda3 must be positive");
  if (!(tau1 >= 0.0) || !(tau2 >= 0.0)) throw std::invalid_argument("tau1 and tau2 must be non-negative");
  if (g_min <= 0 || g_min >= g_max) throw std::invalid_argument(fmt::format("need 0 < g_min < g_max, got {} and {}", g_min, g_max));
  if (cycle_min <= 0 || cycle_min >= cycle_max)
    throw std::invalid_argument(fmt::format("need 0 < cycle_min < cycle_max, got {} and {}", cycle_min, cycle_max));
  if (!(ds_target_lo < ds_target_hi)) throw std::invalid_argument("ds_target_lo must be below ds_target_hi");
  if (cycle_opt_period < 1 || offset_opt_period < 1) throw std::invalid_argument("optimizer periods must be >= 1");
}

void Fair1Params::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument(fmt::format("alpha {} outside [0, 1]", alpha));
  if (!(theta > 0.0)) throw std::invalid_argument("theta must be positive");
}

void Fair2Params::validate() const {
  if (teg <= 0) throw std::invalid_argument("teg must be positive");
  if (!(ttg > 0.0)) throw std::invalid_argument("ttg must be positive");
}

double waste_time(double unoccupied, double discharged, double optimal_space_time) {
  return unoccupied - discharged * optimal_space_time;
}

double compute_ds(double green, double unoccupied, double discharged, double optimal_space_time) {
  if (!(green > 0.0)) throw std::invalid_argument("degree of saturation needs a positive green time");
  return (green - waste_time(unoccupied, discharged, optimal_space_time)) / green;
}

DsRecord make_ds_record(const Network& net, std::size_t n, std::span<const int> effective_greens,
                        std::span<const LinkObservation> links) {
  const Intersection& x = net.intersection(n);
  DsRecord r;
  r.phase_max.assign(x.phases.size(), 0.0);
  std::vector<bool> seen(x.phases.size(), false);
  double best = -std::numeric_limits<double>::infinity();
  for (const LinkObservation& obs : links) {
    const Link& l = net.link(obs.link);
    const std::size_t j = net.phase_of(obs.link);
    double ds = 0.0;
    if (l.has_stopline_detector) {
      ds = compute_ds(effective_greens[j], obs.detectors.unoccupied_seconds, obs.detectors.discharged,
                      l.optimal_space_time());
      if (!seen[j] || ds > r.phase_max[j]) r.phase_max[j] = ds;
      seen[j] = true;
      if (ds > best) {
        best = ds;
        r.critical_link = obs.link;
      }
    }
    r.link_ds.push_back(ds);
  }
  r.dominant_phase = 0;
  for (std::size_t j = 1; j < r.phase_max.size(); ++j)
    if (r.phase_max[j] > r.phase_max[r.dominant_phase]) r.dominant_phase = j;
  const auto [lo, hi] = std::minmax_element(r.phase_max.begin(), r.phase_max.end());
  r.ds_diff = *hi - *lo;
  r.ds_max = *hi;
  return r;
}

std::optional<std::vector<int>> redistribute_greens(const IntersectionTiming& timing, int yellow, std::size_t dominant,
                                                    int dominant_green, GreenBounds bounds) {
  const std::size_t p = timing.greens.size();
  if (dominant >= p) return std::nullopt;
  if (dominant_green < bounds.min || dominant_green > bounds.max) return std::nullopt;
  const int rest = timing.cycle - static_cast<int>(p) * yellow - dominant_green;
  std::vector<double> w;
  for (std::size_t j = 0; j < p; ++j)
    if (j != dominant) w.push_back(timing.greens[j]);
  auto others = apportion(rest, w, bounds.min, bounds.max);
  if (!others) return std::nullopt;
  std::vector<int> out(p);
  std::size_t r = 0;
  for (std::size_t j = 0; j < p; ++j) out[j] = j == dominant ? dominant_green : (*others)[r++];
  return out;
}

namespace {

std::vector<int> apply_dominant(const DsRecord& ds, const IntersectionTiming& timing, int yellow, double target,
                                const ScoscaParams& params, int critical_link_vehicles, GreenBounds bounds) {
  if (ds.critical_link == npos || critical_link_vehicles <= params.tau1) return timing.greens;
  const int g = static_cast<int>(std::lround(target));
  auto out = redistribute_greens(timing, yellow, ds.dominant_phase, g, bounds);
  return out ? *out : timing.greens;
}

}  // namespace

std::vector<int> green_phase_optimize(const DsRecord& ds, const IntersectionTiming& timing, int yellow,
                                      const ScoscaParams& params, int critical_link_vehicles, GreenBounds bounds) {
  const double g = timing.greens.at(ds.dominant_phase);
  const double target = std::min<double>(params.g_max, g + ds.ds_diff * params.lambda1);
  return apply_dominant(ds, timing, yellow, target, params, critical_link_vehicles, bounds);
}

int cycle_length_optimize(double ds_max, int cycle, const ScoscaParams& params) {
  double c = cycle;
  if (ds_max > params.ds_target_hi)
    c = std::min<double>(params.cycle_max, cycle + (ds_max - params.ds_target_hi) * params.lambda2);
  else if (ds_max < params.ds_target_lo)
    c = std::max<double>(params.cycle_min, cycle - (params.ds_target_lo - ds_max) * params.lambda2);
  return static_cast<int>(std::lround(c));
}

std::optional<std::vector<int>> rescale_greens(const IntersectionTiming& timing, int yellow, int new_cycle,
                                               GreenBounds bounds) {
  const int budget = new_cycle - static_cast<int>(timing.greens.size()) * yellow;
  return apportion(budget, as_weights(timing.greens), bounds.min, bounds.max);
}

std::vector<int> offset_optimize(std::span<const double> congestion, std::span<const int> current,
                                 const TravelTimeMatrix& tt, const ScoscaParams& params, int cycle,
                                 CriticalDistrict* chosen) {
  if (chosen) *chosen = CriticalDistrict::None;
  std::vector<int> out(current.begin(), current.end());
  if (congestion.size() < 2 || current.empty()) return out;
  if (tt.hops.size() + 1 != current.size()) throw std::invalid_argument("travel-time matrix does not match offsets");

  std::size_t top = 0;
  for (std::size_t d = 1; d < congestion.size(); ++d)
    if (congestion[d] > congestion[top]) top = d;
  double second = -std::numeric_limits<double>::infinity();
  for (std::size_t d = 0; d < congestion.size(); ++d)
    if (d != top) second = std::max(second, congestion[d]);
  if (congestion[top] - second <= params.tau2) return out;

  const std::size_t count = current.size();
  std::size_t ref = 0;
  CriticalDistrict which = CriticalDistrict::Middle;
  if (top == 0) {
    which = CriticalDistrict::Front;
  } else if (top + 1 == congestion.size()) {
    which = CriticalDistrict::Back;
    ref = count - 1;
  } else {
    ref = (count - 1) / 2;
  }
  if (chosen) *chosen = which;

  std::vector<double> o(count, 0.0);
  for (std::size_t r = ref + 1; r < count; ++r) o[r] = o[r - 1] + params.lambda3 * tt.hops[r - 1];
  for (std::size_t r = ref; r-- > 0;) o[r] = o[r + 1] + params.lambda3 * tt.hops[r];
  for (std::size_t r = 0; r < count; ++r) {
    const long v = std::lround(o[r]);
    out[r] = params.offset_cap == OffsetCap::Modulo ? floor_mod(v, cycle)
                                                   : static_cast<int>(std::min<long>(v, cycle - 1));
  }
  return out;
}

double fair1_penalty(double waiting_raw, double theta) {
  if (!(theta > 0.0)) throw std::invalid_argument("theta must be positive");
  return std::expm1(std::min(waiting_raw / theta, kMaxExponent));
}

std::vector<int> fair1_green_update(const DsRecord& ds, double penalty, const IntersectionTiming& timing, int yellow,
                                    const ScoscaParams& params, const Fair1Params& fair, int critical_link_vehicles,
                                    GreenBounds bounds) {
  const double g = timing.greens.at(ds.dominant_phase);
  const double g_rw = (fair.alpha * ds.ds_diff - (1.0 - fair.alpha) * penalty) * params.lambda1;
  const double target = std::min<double>(params.g_max, std::max(g, g + g_rw));
  return apply_dominant(ds, timing, yellow, target, params, critical_link_vehicles, bounds);
}

double opposing_wait(const Network& net, std::size_t n, std::size_t phase, std::span<const LinkObservation> links) {
  double w = 0.0;
  for (const LinkObservation& obs : links)
    if (net.controlling_intersection(obs.link) == n && net.phase_of(obs.link) != phase)
      w = std::max(w, obs.waiting_total);
  return w;
}

std::optional<PreemptionCommand> fair2_monitor(const IntersectionSignal& signal, int t, std::size_t arrival_phase,
                                               const Fair2Params& params, const PreemptionLedger& ledger) {
  if (params.disabled()) return std::nullopt;
  const PhaseClock c = signal.clock(t);
  if (c.in_yellow || c.active_phase == arrival_phase) return std::nullopt;
  const int wait = signal.time_until_green(t, arrival_phase);
  if (!(wait > params.ttg)) return std::nullopt;
  if (!ledger.permits(signal.cycle_index())) return std::nullopt;
  if (!signal.preempt_blocker(t, params.teg, arrival_phase).empty()) return std::nullopt;
  return PreemptionCommand{c.active_phase, arrival_phase, params.teg, wait};
}

ScoscaController::ScoscaController(const Network& net, SignalPlan initial, ScoscaParams params,
                                   std::optional<Fair1Params> fair1, std::optional<Fair2Params> fair2,
                                   std::string name)
    : CyclicController(net, std::move(initial), GreenBounds{params.g_min, params.g_max}),
      params_(params),
      fair1_(fair1),
      fair2_(fair2),
      name_(std::move(name)),
      latest_ds_max_(net.intersection_count()),
      ledgers_(net.intersection_count()) {
  params_.validate();
  if (fair1_) fair1_->validate();
  if (fair2_) {
    fair2_->validate();
    const int teg = fair2_->teg;
    if (params_.g_min + teg > params_.g_max)
      throw std::invalid_argument(fmt::format("teg {} leaves no room between g_min and g_max", teg));
    for (std::size_t n = 0; n < net.intersection_count(); ++n) {
      const int p = static_cast<int>(net.intersection(n).phases.size());
      const int y = net.intersection(n).yellow_time;
      if (p < 2) continue;
      if (teg > (p - 1) * (params_.g_max - params_.g_min))
        throw std::invalid_argument(fmt::format("teg {} cannot be compensated at intersection {}", teg, n));
      const int lo = p * params_.g_min + p * y + teg;
      const int hi = p * params_.g_max + p * y - teg;
      if (params_.cycle_min < lo || params_.cycle_max > hi)
        throw std::invalid_argument(fmt::format(
            "cycle range [{}, {}] must lie inside [{}, {}] at intersection {} so compensation stays feasible",
            params_.cycle_min, params_.cycle_max, lo, hi, n));
      if (plan().timings[n].cycle < lo || plan().timings[n].cycle > hi)
        throw std::invalid_argument(fmt::format("initial cycle {} outside [{}, {}] at intersection {}",
                                                plan().timings[n].cycle, lo, hi, n));
    }
  }
}

std::optional<SignalPlan> ScoscaController::on_cycle_end(const ControllerContext& ctx) {
  const std::size_t n = ctx.intersection;
  const Network& net = *ctx.network;
  const CycleRecord& rec = *ctx.record;
  const DsRecord ds = make_ds_record(net, n, rec.effective_greens, ctx.links);
  int critical_vehicles = 0;
  for (const LinkObservation& obs : ctx.links)
    if (obs.link == ds.critical_link) critical_vehicles = obs.vehicles;
  // The tau1 gate also keeps idle junctions out of the cycle-length update.
  latest_ds_max_[n] = critical_vehicles > params_.tau1 ? std::optional<double>(ds.ds_max) : std::nullopt;

  const IntersectionTiming& timing = ctx.plan->timings[n];
  const int yellow = net.intersection(n).yellow_time;
  const GreenBounds bounds = signal(n).bounds();
  std::vector<int> greens;
  if (fair1_) {
    const double wait = opposing_wait(net, n, ds.dominant_phase, ctx.links);
    greens = fair1_green_update(ds, fair1_penalty(wait, fair1_->theta), timing, yellow, params_, *fair1_,
                                critical_vehicles, bounds);
  } else {
    greens = green_phase_optimize(ds, timing, yellow, params_, critical_vehicles, bounds);
  }

  DecisionRecord d;
  d.clock = ctx.clock;
  d.cycle = ctx.cycle;
  d.intersection = n;
  d.optimizer = fair1_ ? "green_fair1" : "green";
  d.ds_max = ds.ds_max;
  d.ds_diff = ds.ds_diff;
  d.greens_before = timing.greens;
  d.greens_after = greens;
  d.cycle_before = d.cycle_after = timing.cycle;
  decisions_.push_back(std::move(d));

  if (greens == timing.greens) return std::nullopt;
  SignalPlan next = *ctx.plan;
  next.timings[n].greens = std::move(greens);
  return next;
}

std::optional<SignalPlan> ScoscaController::on_master_cycle_end(const NetworkContext& ctx) {
  const bool run_cycle = ctx.master_cycle % params_.cycle_opt_period == 0;
  const bool run_offset = ctx.master_cycle % params_.offset_opt_period == 0;
  if (!run_cycle && !run_offset) return std::nullopt;

  const Network& net = *ctx.network;
  SignalPlan next = *ctx.plan;
  bool changed = false;

  if (run_cycle) {
    std::optional<double> ds_max;
    for (const auto& v : latest_ds_max_)
      if (v) ds_max = ds_max ? std::max(*ds_max, *v) : *v;
    if (ds_max) {
      const int before = next.timings.front().cycle;
      int c = cycle_length_optimize(*ds_max, before, params_);
      int lo = params_.cycle_min, hi = params_.cycle_max;
      for (std::size_t n = 0; n < net.intersection_count(); ++n) {
        const int p = static_cast<int>(net.intersection(n).phases.size());
        const int y = net.intersection(n).yellow_time;
        const GreenBounds b = signal(n).bounds();
        lo = std::max(lo, p * (b.min + y));
        hi = std::min(hi, p * (b.max + y));
      }
      if (lo <= hi) c = std::clamp(c, lo, hi);
      if (c != before) {
        SignalPlan rescaled = next;
        bool ok = true;
        for (std::size_t n = 0; n < net.intersection_count() && ok; ++n) {
          auto g = rescale_greens(next.timings[n], net.intersection(n).yellow_time, c, signal(n).bounds());
          if (!g) {
            ok = false;
            break;
          }
          rescaled.timings[n].cycle = c;
          rescaled.timings[n].greens = *g;
          rescaled.timings[n].offset = floor_mod(next.timings[n].offset, c);
        }
        if (ok) {
          next = std::move(rescaled);
          changed = true;
        }
      }
      DecisionRecord d;
      d.clock = ctx.clock;
      d.cycle = ctx.master_cycle;
      d.optimizer = "cycle";
      d.ds_max = *ds_max;
      d.cycle_before = before;
      d.cycle_after = next.timings.front().cycle;
      decisions_.push_back(std::move(d));
    }
  }

  if (run_offset) {
    const auto& order = net.arterial_order();
    const auto& districts = net.districts().districts;
    std::vector<double> congestion;
    for (const District& dist : districts) {
      int vehicles = 0;
      for (std::size_t n : dist.intersections)
        for (std::size_t li : net.inbound_links(n)) vehicles += ctx.sim->vehicles_on(li);
      congestion.push_back(dist.lane_count > 0 ? static_cast<double>(vehicles) / dist.lane_count : 0.0);
    }
    const int c = next.timings.front().cycle;
    std::vector<int> current;
    for (std::size_t n : order) current.push_back(next.timings[n].offset);
    CriticalDistrict chosen = CriticalDistrict::None;
    const std::vector<int> offsets = offset_optimize(congestion, current, net.travel_times(), params_, c, &chosen);
    if (offsets != current) {
      for (std::size_t r = 0; r < order.size(); ++r) next.timings[order[r]].offset = offsets[r];
      changed = true;
    }
    DecisionRecord d;
    d.clock = ctx.clock;
    d.cycle = ctx.master_cycle;
    d.optimizer = chosen == CriticalDistrict::None ? "offset_hold" : "offset";
    d.cycle_before = d.cycle_after = c;
    for (const auto& t : next.timings) d.offsets.push_back(t.offset);
    decisions_.push_back(std::move(d));
  }

  if (!changed) return std::nullopt;
  return next;
}

void ScoscaController::on_step(Simulation& sim, int t) {
  if (!fair2_ || fair2_->disabled()) return;
  const Network& net = network();
  for (const StopLineArrival& a : sim.arrivals_last_step()) {
    if (a.face != Face::Red) continue;
    const std::size_t n = net.controlling_intersection(a.link);
    if (n == npos) continue;
    IntersectionSignal& s = mutable_signal(n);
    const auto cmd = fair2_monitor(s, t, net.phase_of(a.link), *fair2_, ledgers_[n]);
    if (!cmd) continue;
    const std::vector<int> before = s.current().effective_greens;
    s.preempt_active_phase(t, cmd->amount, cmd->to_phase);
    s.schedule_compensation(cmd->from_phase, cmd->amount);
    ledgers_[n].record(s.cycle_index());

    DecisionRecord d;
    d.clock = t;
    d.cycle = s.cycle_index();
    d.intersection = n;
    d.optimizer = "preempt";
    d.greens_before = before;
    d.greens_after = s.current().effective_greens;
    d.cycle_before = d.cycle_after = s.current().planned_cycle;
    d.ttg = fair2_->ttg;
    d.teg = cmd->amount;
    decisions_.push_back(std::move(d));
  }
}

}  // namespace fairsig
