#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "builders.hpp"
#include "fairsig/scosca.hpp"

using namespace fairsig;

namespace {

const Network& junction() {
  static const Network net = fairsig::testing::single_junction();
  return net;
}

DsRecord ds_record(std::size_t dominant, double diff) {
  DsRecord r;
  r.dominant_phase = dominant;
  r.critical_link = 0;
  r.ds_diff = diff;
  r.ds_max = 1.0;
  return r;
}

const GreenBounds kBounds{5, 60};

ScoscaParams params() {
  ScoscaParams p;
  p.lambda1 = 10;
  p.lambda2 = 200;
  p.lambda3 = 1;
  p.tau1 = 3;
  p.tau2 = 1;
  p.g_min = 5;
  p.g_max = 60;
  p.cycle_min = 40;
  p.cycle_max = 120;
  return p;
}

TravelTimeMatrix hops(double each) { return TravelTimeMatrix{std::vector<double>(4, each)}; }

}  // namespace

TEST(DegreeOfSaturation, IdleGreen) { EXPECT_DOUBLE_EQ(compute_ds(30, 30, 0, 2), 0.0); }

TEST(DegreeOfSaturation, Oversaturated) {
  EXPECT_DOUBLE_EQ(waste_time(0, 15, 2), -30.0);
  EXPECT_DOUBLE_EQ(compute_ds(30, 0, 15, 2), 2.0);
}

TEST(DegreeOfSaturation, PartlyUsed) {
  EXPECT_DOUBLE_EQ(waste_time(12, 4, 0.5), 10.0);
  EXPECT_DOUBLE_EQ(compute_ds(40, 12, 4, 0.5), 0.75);
}

TEST(DegreeOfSaturation, ZeroGreenThrows) { EXPECT_THROW(compute_ds(0, 0, 0, 2), std::invalid_argument); }

TEST(DegreeOfSaturation, RecordPicksDominantPhase) {
  // Link a (phase 0): 20 s green, 12 s idle, 4 vehicles at T_OST 2 -> 0.8.
  // Link b (phase 1): idle -> 0.
  std::vector<LinkObservation> obs{{0, {20, 12, 4}, 6, 2, 0.0}, {1, {20, 20, 0}, 0, 0, 0.0}};
  const std::vector<int> greens{20, 20};
  const DsRecord r = make_ds_record(junction(), 0, greens, obs);
  EXPECT_DOUBLE_EQ(r.link_ds[0], 0.8);
  EXPECT_DOUBLE_EQ(r.link_ds[1], 0.0);
  EXPECT_EQ(r.dominant_phase, 0u);
  EXPECT_EQ(r.critical_link, 0u);
  EXPECT_DOUBLE_EQ(r.ds_diff, 0.8);
  EXPECT_DOUBLE_EQ(r.ds_max, 0.8);
}

TEST(GreenOptimizer, DominantGainsComplementShrinks) {
  const IntersectionTiming t{66, 0, {30, 30}};
  EXPECT_EQ(green_phase_optimize(ds_record(0, 0.2), t, 3, params(), 10, kBounds), (std::vector<int>{32, 28}));
}

TEST(GreenOptimizer, DominantCappedAtGMax) {
  const IntersectionTiming t{96, 0, {58, 32}};
  const auto g = green_phase_optimize(ds_record(0, 0.5), t, 3, params(), 10, kBounds);
  EXPECT_EQ(g, (std::vector<int>{60, 30}));
}

TEST(GreenOptimizer, BelowTau1KeepsGreens) {
  const IntersectionTiming t{66, 0, {30, 30}};
  EXPECT_EQ(green_phase_optimize(ds_record(0, 0.5), t, 3, params(), 3, kBounds), t.greens);
  EXPECT_EQ(green_phase_optimize(ds_record(0, 0.5), t, 3, params(), 2, kBounds), t.greens);
  EXPECT_NE(green_phase_optimize(ds_record(0, 0.5), t, 3, params(), 4, kBounds), t.greens);
}

TEST(GreenOptimizer, InfeasibleRedistributionKeepsGreens) {
  // Three phases at g_min = 5 with a 24 s budget: nothing can grow.
  const IntersectionTiming t{33, 0, {8, 8, 8}};
  const auto g = green_phase_optimize(ds_record(1, 2.0), t, 3, params(), 10, {8, 60});
  EXPECT_EQ(g, t.greens);
}

TEST(GreenOptimizer, ThreePhaseProportionalShare) {
  const IntersectionTiming t{75, 0, {30, 20, 16}};
  // Dominant 0 -> 40, remaining 26 split 20:16 -> 14.44, 11.56 -> [14, 12].
  const auto g = green_phase_optimize(ds_record(0, 1.0), t, 3, params(), 10, kBounds);
  EXPECT_EQ(g, (std::vector<int>{40, 14, 12}));
  EXPECT_EQ(closure_residual({75, 0, g}, 3), 0);
}

TEST(CycleOptimizer, IncreaseAboveUpperThreshold) { EXPECT_EQ(cycle_length_optimize(0.95, 90, params()), 95); }

TEST(CycleOptimizer, DeadBandHolds) { EXPECT_EQ(cycle_length_optimize(0.90, 90, params()), 90); }

TEST(CycleOptimizer, DecreaseBelowLowerThreshold) { EXPECT_EQ(cycle_length_optimize(0.80, 90, params()), 75); }

TEST(CycleOptimizer, ClampedToRange) {
  EXPECT_EQ(cycle_length_optimize(2.0, 110, params()), 120);
  EXPECT_EQ(cycle_length_optimize(0.0, 60, params()), 40);
}

TEST(CycleOptimizer, HysteresisOverFiftyCycles) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> ds(0.875, 0.925);
  int c = 90;
  for (int k = 0; k < 50; ++k) c = cycle_length_optimize(k == 0 ? 0.875 : k == 1 ? 0.925 : ds(gen), c, params());
  EXPECT_EQ(c, 90);
}

TEST(CycleOptimizer, RescaleKeepsClosure) {
  const IntersectionTiming t{90, 0, {42, 42}};
  const auto g = rescale_greens(t, 3, 95, kBounds);
  ASSERT_TRUE(g.has_value());
  EXPECT_EQ(*g, (std::vector<int>{45, 44}));
  EXPECT_FALSE(rescale_greens(t, 3, 200, kBounds).has_value());
}

TEST(OffsetOptimizer, MiddleCritical) {
  const std::vector<double> congestion{1.0, 5.0, 1.0};
  const std::vector<int> current(5, 0);
  CriticalDistrict which{};
  EXPECT_EQ(offset_optimize(congestion, current, hops(10), params(), 90, &which),
            (std::vector<int>{20, 10, 0, 10, 20}));
  EXPECT_EQ(which, CriticalDistrict::Middle);
}

TEST(OffsetOptimizer, FrontCritical) {
  const std::vector<double> congestion{5.0, 1.0, 1.0};
  const std::vector<int> current(5, 0);
  CriticalDistrict which{};
  EXPECT_EQ(offset_optimize(congestion, current, hops(10), params(), 90, &which),
            (std::vector<int>{0, 10, 20, 30, 40}));
  EXPECT_EQ(which, CriticalDistrict::Front);
}

TEST(OffsetOptimizer, BackCritical) {
  const std::vector<double> congestion{1.0, 1.0, 5.0};
  const std::vector<int> current(5, 0);
  EXPECT_EQ(offset_optimize(congestion, current, hops(10), params(), 90), (std::vector<int>{40, 30, 20, 10, 0}));
}

TEST(OffsetOptimizer, SmallGapKeepsOffsets) {
  const std::vector<double> congestion{1.0, 2.0, 1.5};
  const std::vector<int> current{3, 1, 4, 1, 5};
  CriticalDistrict which = CriticalDistrict::Front;
  EXPECT_EQ(offset_optimize(congestion, current, hops(10), params(), 90, &which), current);
  EXPECT_EQ(which, CriticalDistrict::None);
}

TEST(OffsetOptimizer, ModuloAndClampCaps) {
  const std::vector<double> congestion{5.0, 1.0, 1.0};
  const std::vector<int> current(5, 0);
  ScoscaParams p = params();
  EXPECT_EQ(offset_optimize(congestion, current, hops(30), p, 90), (std::vector<int>{0, 30, 60, 0, 30}));
  p.offset_cap = OffsetCap::Clamp;
  EXPECT_EQ(offset_optimize(congestion, current, hops(30), p, 90), (std::vector<int>{0, 30, 60, 89, 89}));
}

TEST(OffsetOptimizer, Lambda3ScalesTravelTimes) {
  const std::vector<double> congestion{5.0, 1.0, 1.0};
  const std::vector<int> current(5, 0);
  ScoscaParams p = params();
  p.lambda3 = 0.5;
  EXPECT_EQ(offset_optimize(congestion, current, hops(10), p, 90), (std::vector<int>{0, 5, 10, 15, 20}));
}

TEST(Fair1, PenaltyValues) {
  EXPECT_DOUBLE_EQ(fair1_penalty(0.0, 300.0), 0.0);
  EXPECT_NEAR(fair1_penalty(300.0, 300.0), std::exp(1.0) - 1.0, 1e-12);
  EXPECT_NEAR(fair1_penalty(600.0, 300.0), std::exp(2.0) - 1.0, 1e-12);
  EXPECT_NEAR(fair1_penalty(300.0, 300.0), 1.7183, 1e-4);
  EXPECT_NEAR(fair1_penalty(600.0, 300.0), 6.389, 1e-3);
  EXPECT_TRUE(std::isfinite(fair1_penalty(1e12, 1.0)));
}

TEST(Fair1, PositiveAdjustment) {
  const IntersectionTiming t{66, 0, {30, 30}};
  Fair1Params f{0.5, 300};
  const auto g = fair1_green_update(ds_record(0, 0.4), 0.2, t, 3, params(), f, 10, kBounds);
  EXPECT_EQ(g, (std::vector<int>{31, 29}));
}

TEST(Fair1, NegativeAdjustmentKeepsCurrentGreen) {
  const IntersectionTiming t{66, 0, {30, 30}};
  Fair1Params f{0.5, 300};
  const auto g = fair1_green_update(ds_record(0, 0.2), 0.8, t, 3, params(), f, 10, kBounds);
  EXPECT_EQ(g, (std::vector<int>{30, 30}));
}

TEST(Fair1, AlphaOneMatchesScosca) {
  std::mt19937_64 gen(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Fair1Params f{1.0, 300};
  for (int i = 0; i < 2000; ++i) {
    const int g0 = 5 + static_cast<int>(u(gen) * 50), g1 = 5 + static_cast<int>(u(gen) * 50);
    const IntersectionTiming t{g0 + g1 + 6, 0, {g0, g1}};
    const DsRecord ds = ds_record(u(gen) < 0.5 ? 0 : 1, 2.0 * u(gen));
    const int vehicles = static_cast<int>(u(gen) * 8);
    const double penalty = 10.0 * u(gen);
    ASSERT_EQ(fair1_green_update(ds, penalty, t, 3, params(), f, vehicles, kBounds),
              green_phase_optimize(ds, t, 3, params(), vehicles, kBounds));
  }
}

TEST(Fair1, OpposingWaitIgnoresDominantPhase) {
  std::vector<LinkObservation> obs{{0, {}, 3, 3, 50.0}, {1, {}, 2, 2, 20.0}};
  EXPECT_DOUBLE_EQ(opposing_wait(junction(), 0, 0, obs), 20.0);
  EXPECT_DOUBLE_EQ(opposing_wait(junction(), 0, 1, obs), 50.0);
}

TEST(Fair2, PreemptsWhenWaitExceedsTtg) {
  IntersectionSignal s(junction(), 0, IntersectionTiming{76, 0, {40, 30}}, kBounds);
  PreemptionLedger ledger;
  ASSERT_EQ(s.time_until_green(18, 1), 25);
  const auto cmd = fair2_monitor(s, 18, 1, Fair2Params{15, 10}, ledger);
  ASSERT_TRUE(cmd.has_value());
  EXPECT_EQ(cmd->from_phase, 0u);
  EXPECT_EQ(cmd->to_phase, 1u);
  EXPECT_EQ(cmd->amount, 10);
  EXPECT_EQ(cmd->remaining_wait, 25);

  s.preempt_active_phase(18, cmd->amount, cmd->to_phase);
  s.schedule_compensation(cmd->from_phase, cmd->amount);
  ledger.record(s.cycle_index());
  EXPECT_EQ(s.current().effective_greens, (std::vector<int>{30, 40}));
  s.advance_cycle(76, MasterClock{1, 76, 76});
  EXPECT_EQ(s.current().effective_greens, (std::vector<int>{50, 20}));
  EXPECT_EQ(s.current().compensation, 10);
}

TEST(Fair2, ShortWaitDoesNothing) {
  IntersectionSignal s(junction(), 0, IntersectionTiming{76, 0, {40, 30}}, kBounds);
  ASSERT_EQ(s.time_until_green(31, 1), 12);
  EXPECT_FALSE(fair2_monitor(s, 31, 1, Fair2Params{15, 10}, PreemptionLedger{}).has_value());
}

TEST(Fair2, LedgerBlocksSecondPreemption) {
  IntersectionSignal s(junction(), 0, IntersectionTiming{76, 0, {40, 30}}, kBounds);
  PreemptionLedger ledger;
  ledger.record(0);
  EXPECT_FALSE(fair2_monitor(s, 5, 1, Fair2Params{15, 5}, ledger).has_value());
  EXPECT_FALSE(ledger.permits(0));
  EXPECT_FALSE(ledger.permits(1));
  EXPECT_TRUE(ledger.permits(2));
}

TEST(Fair2, InfiniteTtgDisables) {
  IntersectionSignal s(junction(), 0, IntersectionTiming{76, 0, {40, 30}}, kBounds);
  const Fair2Params off{std::numeric_limits<double>::infinity(), 5};
  EXPECT_TRUE(off.disabled());
  EXPECT_FALSE(fair2_monitor(s, 5, 1, off, PreemptionLedger{}).has_value());
}

TEST(Fair2, InfeasibleTegRejectedAtConstruction) {
  const SignalPlan plan{{IntersectionTiming{66, 0, {30, 30}}}};
  EXPECT_THROW(ScoscaController(junction(), plan, params(), std::nullopt, Fair2Params{15, 56}), std::invalid_argument);
  EXPECT_NO_THROW(ScoscaController(junction(), plan, params(), std::nullopt, Fair2Params{15, 5}));
}
