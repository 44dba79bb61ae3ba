#pragma once

#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fairsig/controllers.hpp"
#include "fairsig/network.hpp"
#include "fairsig/signal_core.hpp"

namespace fairsig {

enum class OffsetCap { Modulo, Clamp };

struct ScoscaParams {
  double lambda1 = 10.0;   // s per DS unit, green adjustment
  double lambda2 = 200.0;  // s per DS unit, cycle adjustment
  double lambda3 = 1.0;    // scale on travel times for offsets
  double tau1 = 3.0;       // vehicles on the critical link before greens move
  double tau2 = 1.0;       // vehicles per lane between the top two districts
  int g_min = 5;
  int g_max = 60;
  int cycle_min = 40;
  int cycle_max = 120;
  double ds_target_hi = 0.925;
  double ds_target_lo = 0.875;
  int cycle_opt_period = 5;
  int offset_opt_period = 5;
  /// Modulo reduces offsets mod C; Clamp keeps the literal cap min(O, C - 1).
  OffsetCap offset_cap = OffsetCap::Modulo;

  void validate() const;
};

struct Fair1Params {
  double alpha = 0.5;   // demand vs. waiting-penalty balance, [0, 1]
  double theta = 300.0; // s, normalization of the opposing wait before exponentiation

  void validate() const;
};

struct Fair2Params {
  double ttg = 15.0;  // s; remaining wait that triggers an early termination
  int teg = 5;        // s transferred, then handed back next cycle

  void validate() const;
  bool disabled() const { return !(ttg < std::numeric_limits<double>::infinity()); }
};

/// Unused green on a link: T_NO − s·T_OST.
double waste_time(double unoccupied, double discharged, double optimal_space_time);

/// Degree of saturation (g − W)/g. Not clamped: values above 1 mean the green
/// was oversubscribed. Throws std::invalid_argument for g <= 0.
double compute_ds(double green, double unoccupied, double discharged, double optimal_space_time);

/// Degrees of saturation of one intersection for a completed cycle.
struct DsRecord {
  std::vector<double> link_ds;        // aligned with Network::inbound_links(n)
  std::vector<double> phase_max;      // max DS over each phase's detector links
  std::size_t dominant_phase = 0;     // highest phase_max, lowest index on ties
  std::size_t critical_link = npos;   // network index of the link holding the maximum
  double ds_diff = 0.0;               // highest minus lowest phase maximum
  double ds_max = 0.0;
};

DsRecord make_ds_record(const Network& net, std::size_t n, std::span<const int> effective_greens,
                        std::span<const LinkObservation> links);

/// Sets phase `dominant` to `dominant_green` and shares the remaining cycle
/// budget among the other phases in proportion to their current greens.
std::optional<std::vector<int>> redistribute_greens(const IntersectionTiming& timing, int yellow,
                                                    std::size_t dominant, int dominant_green, GreenBounds bounds);

/// Split update run after every cycle. Greens are unchanged when the critical
/// link carries no more than tau1 vehicles or the redistribution is infeasible.
std::vector<int> green_phase_optimize(const DsRecord& ds, const IntersectionTiming& timing, int yellow,
                                      const ScoscaParams& params, int critical_link_vehicles,
                                      GreenBounds bounds);

/// Dual-threshold cycle update on the network-wide maximum DS. Above the upper
/// threshold the cycle grows, below the lower one it shrinks, in between it holds.
int cycle_length_optimize(double ds_max, int cycle, const ScoscaParams& params);

/// Proportional rescale of the greens to a new cycle length.
std::optional<std::vector<int>> rescale_greens(const IntersectionTiming& timing, int yellow, int new_cycle,
                                               GreenBounds bounds);

enum class CriticalDistrict { None, Front, Middle, Back };

/// Offsets in arterial order. `congestion` is vehicles per lane per district
/// (front to back), `current` the offsets in arterial order.
std::vector<int> offset_optimize(std::span<const double> congestion, std::span<const int> current,
                                 const TravelTimeMatrix& tt, const ScoscaParams& params, int cycle,
                                 CriticalDistrict* chosen = nullptr);

/// exp(N_s) − 1 with N_s = waiting / theta. The exponent is capped so the
/// penalty stays finite.
double fair1_penalty(double waiting_raw, double theta);

/// Green update with the waiting-time penalty. A negative adjustment leaves the
/// dominant green where it is.
std::vector<int> fair1_green_update(const DsRecord& ds, double penalty, const IntersectionTiming& timing, int yellow,
                                    const ScoscaParams& params, const Fair1Params& fair, int critical_link_vehicles,
                                    GreenBounds bounds);

/// Largest N_z over the intersection's links that are not in `phase`.
double opposing_wait(const Network& net, std::size_t n, std::size_t phase, std::span<const LinkObservation> links);

/// At most one pre-emption per junction per cycle, and none in the cycle that
/// follows one (that cycle carries the compensation).
class PreemptionLedger {
 public:
  bool permits(int cycle) const { return !last_ || (cycle != *last_ && cycle != *last_ + 1); }
  void record(int cycle) { last_ = cycle; }
  std::optional<int> last() const { return last_; }

 private:
  std::optional<int> last_;
};

struct PreemptionCommand {
  std::size_t from_phase = 0;
  std::size_t to_phase = 0;
  int amount = 0;
  int remaining_wait = 0;
};

/// Reaction to a vehicle reaching the red stop line of `arrival_phase` at `t`.
std::optional<PreemptionCommand> fair2_monitor(const IntersectionSignal& signal, int t, std::size_t arrival_phase,
                                               const Fair2Params& params, const PreemptionLedger& ledger);

/// The split/cycle/offset controller, optionally with the waiting-time penalty
/// in the split update (fair1) and early phase termination (fair2).
class ScoscaController final : public CyclicController {
 public:
  ScoscaController(const Network& net, SignalPlan initial, ScoscaParams params,
                   std::optional<Fair1Params> fair1 = std::nullopt, std::optional<Fair2Params> fair2 = std::nullopt,
                   std::string name = "scosca");

  std::string_view name() const override { return name_; }
  const std::vector<PreemptionLedger>& ledgers() const { return ledgers_; }

 protected:
  std::optional<SignalPlan> on_cycle_end(const ControllerContext& ctx) override;
  std::optional<SignalPlan> on_master_cycle_end(const NetworkContext& ctx) override;
  void on_step(Simulation& sim, int t) override;

 private:
  ScoscaParams params_;
  std::optional<Fair1Params> fair1_;
  std::optional<Fair2Params> fair2_;
  std::string name_;
  std::vector<std::optional<double>> latest_ds_max_;
  std::vector<PreemptionLedger> ledgers_;
};

}  // namespace fairsig
