#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fairsig/microsim.hpp"
#include "fairsig/network.hpp"

namespace fairsig {

/// Timing of one intersection: cycle length, offset of the first phase onset
/// relative to the network master cycle, and per-phase greens (integer seconds).
struct IntersectionTiming {
  int cycle = 0;
  int offset = 0;
  std::vector<int> greens;

  bool operator==(const IntersectionTiming&) const = default;
};

struct SignalPlan {
  std::vector<IntersectionTiming> timings;  // indexed like Network::intersections()

  bool operator==(const SignalPlan&) const = default;
};

struct GreenBounds {
  int min = 5;
  int max = 1 << 20;
};

class PlanError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Σ greens + phases × yellow − cycle; zero for a closed timing.
int closure_residual(const IntersectionTiming& timing, int yellow);

/// Throws PlanError on closure, bounds or offset violations.
void validate_timing(const IntersectionTiming& timing, int yellow, std::size_t phase_count, GreenBounds bounds);

/// Integer split of `total` proportional to `weights` with per-item bounds.
/// Largest-remainder rounding, ties to the lowest index. nullopt if the bounds
/// cannot accommodate `total`.
std::optional<std::vector<int>> apportion(int total, std::span<const double> weights, std::span<const int> lo,
                                          std::span<const int> hi);
/// Same with uniform bounds.
std::optional<std::vector<int>> apportion(int total, std::span<const double> weights, int lo, int hi);

struct PhaseClock {
  std::size_t active_phase = 0;
  int time_into_phase = 0;
  int cycle_index = 0;
  bool in_yellow = false;
};

/// Clock of a timing that has been running unchanged since its cycle origin,
/// which sits at `offset` (mod cycle) on the absolute time axis.
PhaseClock clock_at(const IntersectionTiming& timing, int yellow, int t);

/// Writes faces for the links of intersection `n`: Green (or Yellow during the
/// transition) for the active phase, Red for every other phase.
void faces_at(const Network& net, std::size_t n, const PhaseClock& clock, std::span<Face> faces);

struct MasterClock {
  int index = 0;  // master cycles completed
  int start = 0;
  int length = 0;
};

/// One executed (or running) cycle of one intersection.
struct CycleRecord {
  std::size_t intersection = 0;
  int cycle = 0;
  int start = 0;
  int length = 0;            // actual duration
  int planned_cycle = 0;     // C of the timing in force
  int offset = 0;
  int yellow = 0;
  std::vector<int> scheduled_greens;
  std::vector<int> effective_greens;
  bool transition = false;   // stretched or shrunk to realign the offset
  bool preempted = false;
  std::size_t preempt_from = npos;
  std::size_t preempt_to = npos;
  int preempt_amount = 0;
  std::size_t compensated_phase = npos;
  int compensation = 0;
};

/// Cyclic phase state machine for a single intersection.
///
/// Plans change only at cycle boundaries. When a new cycle starts the signal
/// realigns to its offset against the master clock with at most one stretched
/// or shrunk cycle (bounded by half a cycle and by the green bounds). A
/// pending compensation takes precedence and defers realignment by a cycle.
class IntersectionSignal {
 public:
  IntersectionSignal(const Network& net, std::size_t n, IntersectionTiming initial, GreenBounds bounds);

  std::size_t index() const { return n_; }
  std::size_t phase_count() const { return phases_; }
  int yellow() const { return yellow_; }
  GreenBounds bounds() const { return bounds_; }
  const IntersectionTiming& timing() const { return timing_; }
  const CycleRecord& current() const { return current_; }
  int cycle_index() const { return current_.cycle; }
  int cycle_end() const { return current_.start + current_.length; }
  bool cycle_ends_at(int t) const { return t == cycle_end(); }

  PhaseClock clock(int t) const;
  void write_faces(int t, std::span<Face> faces) const;

  /// Queues `timing` for cycle `effective_cycle` (must be a future cycle). The
  /// running cycle is never truncated. Throws PlanError on invalid timings.
  void apply_plan(const IntersectionTiming& timing, int effective_cycle);
  /// Ends the running cycle at `t` and starts the next one.
  CycleRecord advance_cycle(int t, const MasterClock& master);

  /// Green seconds left for the active phase from `t` on (0 during yellow).
  int remaining_green(int t) const;
  /// Seconds from `t` until `phase` next shows green under the current schedule.
  int time_until_green(int t, std::size_t phase) const;

  /// Empty string if preempt_active_phase(t, cut, to_phase) would succeed.
  std::string preempt_blocker(int t, int cut, std::size_t to_phase) const;
  /// Ends the active phase `cut` seconds early and gives the time to the
  /// waiting phase `to_phase` later in the same cycle. Throws PlanError.
  void preempt_active_phase(int t, int cut, std::size_t to_phase);
  /// Adds `amount` to `phase` in the next cycle, taken from the other phases.
  void schedule_compensation(std::size_t phase, int amount);

 private:
  std::vector<int> effective_for(const IntersectionTiming& base, int length) const;

  const Network* net_;
  std::size_t n_;
  std::size_t phases_;
  int yellow_;
  GreenBounds bounds_;
  IntersectionTiming timing_;
  std::optional<IntersectionTiming> pending_;
  int pending_cycle_ = 0;
  std::optional<std::pair<std::size_t, int>> compensation_;
  CycleRecord current_;
};

}  // namespace fairsig
