#include "fairsig/signal_core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

namespace fairsig {

namespace {

int floor_mod(int a, int m) {
  const int r = a % m;
  return r < 0 ? r + m : r;
}

}  // namespace

int closure_residual(const IntersectionTiming& timing, int yellow) {
  const int greens = std::accumulate(timing.greens.begin(), timing.greens.end(), 0);
  return greens + static_cast<int>(timing.greens.size()) * yellow - timing.cycle;
}

void validate_timing(const IntersectionTiming& timing, int yellow, std::size_t phase_count, GreenBounds bounds) {
  if (timing.greens.size() != phase_count)
    throw PlanError(fmt::format("timing has {} greens for {} phases", timing.greens.size(), phase_count));
  if (timing.cycle <= 0) throw PlanError("cycle length must be positive");
  if (const int r = closure_residual(timing, yellow); r != 0)
    throw PlanError(fmt::format("cycle closure violated: greens + yellows - C = {}", r));
  for (std::size_t j = 0; j < timing.greens.size(); ++j) {
    if (timing.greens[j] < bounds.min || timing.greens[j] > bounds.max)
      throw PlanError(fmt::format("green {} of phase {} outside [{}, {}]", timing.greens[j], j, bounds.min, bounds.max));
  }
  if (timing.offset < 0 || timing.offset >= timing.cycle)
    throw PlanError(fmt::format("offset {} outside [0, {})", timing.offset, timing.cycle));
}

std::optional<std::vector<int>> apportion(int total, std::span<const double> weights, std::span<const int> lo,
                                          std::span<const int> hi) {
  const std::size_t n = weights.size();
  if (lo.size() != n || hi.size() != n) throw std::invalid_argument("apportion: size mismatch");
  if (n == 0) return total == 0 ? std::optional<std::vector<int>>(std::vector<int>{}) : std::nullopt;
  long sum_lo = 0, sum_hi = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (lo[i] > hi[i]) return std::nullopt;
    sum_lo += lo[i];
    sum_hi += hi[i];
  }
  if (total < sum_lo || total > sum_hi) return std::nullopt;

  std::vector<double> w(n);
  bool any = false;
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = std::max(0.0, weights[i]);
    any = any || w[i] > 0.0;
  }
  if (!any) std::fill(w.begin(), w.end(), 1.0);

  // Proportional share with iterative clamping of the dominant violation side.
  std::vector<double> x(n, 0.0);
  std::vector<bool> fixed(n, false);
  for (std::size_t iter = 0; iter <= n; ++iter) {
    double rem = total, wsum = 0.0;
    std::size_t free_count = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (fixed[i]) {
        rem -= x[i];
      } else {
        wsum += w[i];
        ++free_count;
      }
    }
    if (free_count == 0) break;
    for (std::size_t i = 0; i < n; ++i) {
      if (fixed[i]) continue;
      x[i] = wsum > 0.0 ? rem * w[i] / wsum : rem / static_cast<double>(free_count);
    }
    double under = 0.0, over = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (fixed[i]) continue;
      if (x[i] < lo[i]) under += lo[i] - x[i];
      if (x[i] > hi[i]) over += x[i] - hi[i];
    }
    if (under == 0.0 && over == 0.0) break;
    for (std::size_t i = 0; i < n; ++i) {
      if (fixed[i]) continue;
      if (under >= over && x[i] < lo[i]) {
        x[i] = lo[i];
        fixed[i] = true;
      } else if (under < over && x[i] > hi[i]) {
        x[i] = hi[i];
        fixed[i] = true;
      }
    }
  }

  std::vector<int> out(n);
  long assigned = 0;
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = std::clamp(static_cast<int>(std::floor(x[i] + 1e-9)), lo[i], hi[i]);
    assigned += out[i];
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return (x[a] - out[a]) > (x[b] - out[b]); });
  while (assigned < total) {
    bool moved = false;
    for (std::size_t i : order) {
      if (assigned == total) break;
      if (out[i] < hi[i]) {
        ++out[i];
        ++assigned;
        moved = true;
      }
    }
    if (!moved) return std::nullopt;
  }
  while (assigned > total) {
    bool moved = false;
    for (auto it = order.rbegin(); it != order.rend() && assigned > total; ++it) {
      if (out[*it] > lo[*it]) {
        --out[*it];
        --assigned;
        moved = true;
      }
    }
    if (!moved) return std::nullopt;
  }
  return out;
}

std::optional<std::vector<int>> apportion(int total, std::span<const double> weights, int lo, int hi) {
  const std::vector<int> l(weights.size(), lo), h(weights.size(), hi);
  return apportion(total, weights, l, h);
}

namespace {

PhaseClock locate(std::span<const int> greens, int yellow, int pos, int cycle) {
  PhaseClock c;
  c.cycle_index = cycle;
  for (std::size_t j = 0; j < greens.size(); ++j) {
    if (pos < greens[j]) {
      c.active_phase = j;
      c.time_into_phase = pos;
      return c;
    }
    pos -= greens[j];
    if (pos < yellow) {
      c.active_phase = j;
      c.time_into_phase = pos;
      c.in_yellow = true;
      return c;
    }
    pos -= yellow;
  }
  throw std::logic_error("clock position beyond cycle end");
}

std::vector<double> as_weights(const std::vector<int>& g) { return {g.begin(), g.end()}; }

}  // namespace

PhaseClock clock_at(const IntersectionTiming& timing, int yellow, int t) {
  const int since = t - timing.offset;
  const int pos = floor_mod(since, timing.cycle);
  const int k = (since - pos) / timing.cycle;
  return locate(timing.greens, yellow, pos, k);
}

void faces_at(const Network& net, std::size_t n, const PhaseClock& clock, std::span<Face> faces) {
  const Intersection& x = net.intersection(n);
  for (std::size_t j = 0; j < x.phases.size(); ++j) {
    const Face f = j != clock.active_phase ? Face::Red : (clock.in_yellow ? Face::Yellow : Face::Green);
    for (std::size_t li : x.phases[j].movements) faces[li] = f;
  }
}

IntersectionSignal::IntersectionSignal(const Network& net, std::size_t n, IntersectionTiming initial,
                                       GreenBounds bounds)
    : net_(&net),
      n_(n),
      phases_(net.intersection(n).phases.size()),
      yellow_(net.intersection(n).yellow_time),
      bounds_(bounds),
      timing_(std::move(initial)) {
  validate_timing(timing_, yellow_, phases_, bounds_);
  const int p = floor_mod(-timing_.offset, timing_.cycle);
  current_.intersection = n_;
  current_.cycle = 0;
  current_.start = -p;
  current_.length = timing_.cycle;
  current_.planned_cycle = timing_.cycle;
  current_.offset = timing_.offset;
  current_.yellow = yellow_;
  current_.scheduled_greens = timing_.greens;
  current_.effective_greens = timing_.greens;
}

PhaseClock IntersectionSignal::clock(int t) const {
  const int pos = t - current_.start;
  if (pos < 0 || pos >= current_.length) throw std::logic_error("signal clock queried outside the running cycle");
  return locate(current_.effective_greens, yellow_, pos, current_.cycle);
}

void IntersectionSignal::write_faces(int t, std::span<Face> faces) const { faces_at(*net_, n_, clock(t), faces); }

void IntersectionSignal::apply_plan(const IntersectionTiming& timing, int effective_cycle) {
  if (effective_cycle <= current_.cycle)
    throw PlanError(fmt::format("plan for cycle {} would truncate running cycle {}", effective_cycle, current_.cycle));
  validate_timing(timing, yellow_, phases_, bounds_);
  if (timing == timing_) {
    pending_.reset();
    return;
  }
  pending_ = timing;
  pending_cycle_ = effective_cycle;
}

std::vector<int> IntersectionSignal::effective_for(const IntersectionTiming& base, int length) const {
  auto g = apportion(length - static_cast<int>(phases_) * yellow_, as_weights(base.greens), bounds_.min, bounds_.max);
  return g ? *g : base.greens;
}

CycleRecord IntersectionSignal::advance_cycle(int t, const MasterClock& master) {
  if (t != cycle_end()) throw std::logic_error("advance_cycle called off a cycle boundary");
  CycleRecord done = current_;
  const int k = current_.cycle + 1;
  if (pending_ && pending_cycle_ <= k) {
    timing_ = *pending_;
    pending_.reset();
  }

  const int n = static_cast<int>(phases_);
  const int c = timing_.cycle;
  const int budget = c - n * yellow_;
  CycleRecord next;
  next.intersection = n_;
  next.cycle = k;
  next.start = t;
  next.length = c;
  next.planned_cycle = c;
  next.offset = timing_.offset;
  next.yellow = yellow_;
  next.scheduled_greens = timing_.greens;
  next.effective_greens = timing_.greens;

  if (compensation_) {
    const auto [a, amount] = *compensation_;
    compensation_.reset();
    // Project the scheduled greens so that +amount on `a` stays inside the bounds.
    const int upper = std::min(bounds_.max, budget - (n - 1) * bounds_.min) - amount;
    const int lower = std::max(bounds_.min, budget - (n - 1) * bounds_.max);
    if (n >= 2 && lower <= upper) {
      std::vector<int> sched = timing_.greens;
      const int ga = std::clamp(sched[a], lower, upper);
      std::vector<double> w;
      for (int j = 0; j < n; ++j)
        if (static_cast<std::size_t>(j) != a) w.push_back(sched[j]);
      auto rest = apportion(budget - ga, w, bounds_.min, bounds_.max);
      if (rest) {
        std::vector<double> w2(rest->begin(), rest->end());
        auto given = apportion(budget - ga - amount, w2, bounds_.min, bounds_.max);
        if (given) {
          std::vector<int> eff(n);
          std::size_t r = 0;
          for (int j = 0; j < n; ++j) {
            if (static_cast<std::size_t>(j) == a) {
              sched[j] = ga;
              eff[j] = ga + amount;
            } else {
              sched[j] = (*rest)[r];
              eff[j] = (*given)[r];
              ++r;
            }
          }
          next.scheduled_greens = sched;
          next.effective_greens = eff;
          next.compensated_phase = a;
          next.compensation = amount;
        }
      }
    }
  } else {
    int e = floor_mod(t - master.start - timing_.offset, c);
    if (e > c / 2) e -= c;
    if (e != 0) {
      const int lo = n * bounds_.min + n * yellow_;
      const int hi = n * bounds_.max + n * yellow_;
      const int length = std::clamp(c - e, lo, hi);
      if (length != c) {
        next.length = length;
        next.effective_greens = effective_for(timing_, length);
        next.transition = true;
      }
    }
  }
  current_ = std::move(next);
  return done;
}

int IntersectionSignal::remaining_green(int t) const {
  const PhaseClock c = clock(t);
  return c.in_yellow ? 0 : current_.effective_greens[c.active_phase] - c.time_into_phase;
}

int IntersectionSignal::time_until_green(int t, std::size_t phase) const {
  if (phase >= phases_) throw std::out_of_range("time_until_green: phase index");
  const PhaseClock c = clock(t);
  if (!c.in_yellow && c.active_phase == phase) return 0;
  int wait = c.in_yellow ? yellow_ - c.time_into_phase
                         : current_.effective_greens[c.active_phase] - c.time_into_phase + yellow_;
  const std::vector<int>* greens = &current_.effective_greens;
  const std::vector<int>& upcoming = pending_ ? pending_->greens : timing_.greens;
  std::size_t j = c.active_phase + 1;
  for (std::size_t guard = 0; guard <= 2 * phases_; ++guard) {
    if (j == phases_) {
      j = 0;
      greens = &upcoming;
    }
    if (j == phase) return wait;
    wait += (*greens)[j] + yellow_;
    ++j;
  }
  throw std::logic_error("time_until_green: phase not reached");
}

std::string IntersectionSignal::preempt_blocker(int t, int cut, std::size_t to_phase) const {
  if (phases_ < 2) return "single-phase intersection";
  if (to_phase >= phases_) return "unknown phase";
  if (current_.preempted) return "a pre-emption already happened in this cycle";
  if (cut <= 0) return "cut must be positive";
  const PhaseClock c = clock(t);
  if (c.in_yellow) return "active phase is already in yellow";
  if (to_phase <= c.active_phase) return "waiting phase is not served later in this cycle";
  const int a = static_cast<int>(c.active_phase);
  const int remaining = current_.effective_greens[a] - c.time_into_phase;
  if (cut >= remaining) return fmt::format("cut {} >= remaining green {}", cut, remaining);
  if (current_.effective_greens[a] - cut < bounds_.min) return "active phase would fall below g_min";
  if (current_.effective_greens[to_phase] + cut > bounds_.max) return "waiting phase would exceed g_max";
  return {};
}

void IntersectionSignal::preempt_active_phase(int t, int cut, std::size_t to_phase) {
  if (auto why = preempt_blocker(t, cut, to_phase); !why.empty()) throw PlanError("pre-emption rejected: " + why);
  const std::size_t a = clock(t).active_phase;
  current_.effective_greens[a] -= cut;
  current_.effective_greens[to_phase] += cut;
  current_.preempted = true;
  current_.preempt_from = a;
  current_.preempt_to = to_phase;
  current_.preempt_amount = cut;
}

void IntersectionSignal::schedule_compensation(std::size_t phase, int amount) {
  if (phase >= phases_) throw PlanError("compensation for unknown phase");
  if (compensation_) throw PlanError("compensation already scheduled for the next cycle");
  compensation_ = std::make_pair(phase, amount);
}

}  // namespace fairsig
