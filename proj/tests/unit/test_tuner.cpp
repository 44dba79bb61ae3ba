#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "fairsig/tuner.hpp"

using namespace fairsig;

namespace {

ParamSpace line(double lo = 0.0, double hi = 6.0) { return ParamSpace{{{"x", lo, hi, false, false}}}; }

const Objective kQuadratic = [](const std::vector<double>& x, const std::vector<std::uint64_t>&) {
  return (x[0] - 3.0) * (x[0] - 3.0);
};

const std::vector<std::uint64_t> kSeeds{1, 2, 3};

}  // namespace

TEST(Tuner, BudgetOneReturnsThatTrial) {
  const TuneResult r = optimize(line(), kQuadratic, kSeeds, 1, TunerStrategy::Random, 5);
  ASSERT_EQ(r.history.size(), 1u);
  EXPECT_EQ(r.best.id, 0u);
  EXPECT_EQ(r.best.x, r.history[0].x);
  EXPECT_DOUBLE_EQ(r.best.objective, r.history[0].objective);
}

TEST(Tuner, SameSeedSameHistory) {
  for (TunerStrategy s : {TunerStrategy::Random, TunerStrategy::Surrogate}) {
    const TuneResult a = optimize(line(), kQuadratic, kSeeds, 20, s, 9);
    const TuneResult b = optimize(line(), kQuadratic, kSeeds, 20, s, 9);
    ASSERT_EQ(a.history.size(), b.history.size());
    for (std::size_t i = 0; i < a.history.size(); ++i) {
      EXPECT_EQ(a.history[i].x, b.history[i].x);
      EXPECT_EQ(a.history[i].objective, b.history[i].objective);
      EXPECT_EQ(a.history[i].origin, b.history[i].origin);
    }
  }
}

TEST(Tuner, RandomSearchFindsQuadraticMinimum) {
  int hits = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const TuneResult r = optimize(line(), kQuadratic, kSeeds, 50, TunerStrategy::Random, seed);
    hits += std::abs(r.best.x[0] - 3.0) < 0.5 ? 1 : 0;
  }
  EXPECT_GE(hits, 100);
}

TEST(Tuner, SurrogateFindsQuadraticMinimum) {
  const TuneResult r = optimize(line(), kQuadratic, kSeeds, 25, TunerStrategy::Surrogate, 4);
  EXPECT_LT(std::abs(r.best.x[0] - 3.0), 0.25);
  int surrogate = 0;
  for (const auto& t : r.history) surrogate += t.origin == "surrogate" ? 1 : 0;
  EXPECT_EQ(surrogate, 20);
}

TEST(Tuner, BestSoFarIsMonotone) {
  const TuneResult r = optimize(line(), kQuadratic, kSeeds, 40, TunerStrategy::Surrogate, 2);
  for (std::size_t i = 1; i < r.history.size(); ++i)
    EXPECT_LE(r.history[i].best_so_far, r.history[i - 1].best_so_far);
  EXPECT_DOUBLE_EQ(r.history.back().best_so_far, r.best.objective);
}

TEST(Tuner, EveryTrialSeesCommonSeeds) {
  std::vector<std::vector<std::uint64_t>> seen;
  const Objective record = [&](const std::vector<double>& x, const std::vector<std::uint64_t>& s) {
    seen.push_back(s);
    return x[0];
  };
  optimize(line(), record, kSeeds, 8, TunerStrategy::Random, 1);
  ASSERT_EQ(seen.size(), 8u);
  for (const auto& s : seen) EXPECT_EQ(s, kSeeds);
}

TEST(Tuner, FailedTrialsAreInfiniteAndSearchContinues) {
  int calls = 0;
  const Objective flaky = [&](const std::vector<double>& x, const std::vector<std::uint64_t>&) {
    if (++calls % 2 == 0) throw std::runtime_error("simulated failure");
    return x[0];
  };
  const TuneResult r = optimize(line(), flaky, kSeeds, 10, TunerStrategy::Surrogate, 3);
  ASSERT_EQ(r.history.size(), 10u);
  for (std::size_t i = 0; i < r.history.size(); ++i) {
    if (i % 2 == 1) {
      EXPECT_TRUE(r.history[i].failed);
      EXPECT_TRUE(std::isinf(r.history[i].objective));
      EXPECT_EQ(r.history[i].error, "simulated failure");
    } else {
      EXPECT_FALSE(r.history[i].failed);
    }
  }
  EXPECT_FALSE(r.best.failed);
}

TEST(Tuner, IntegerAndLogParameters) {
  const ParamSpace s{{{"n", 5, 30, false, true}, {"theta", 30, 3000, true, false}}};
  const Objective obj = [](const std::vector<double>& x, const std::vector<std::uint64_t>&) { return x[0] + x[1]; };
  const TuneResult r = optimize(s, obj, kSeeds, 30, TunerStrategy::Random, 8);
  for (const auto& t : r.history) {
    EXPECT_EQ(t.x[0], std::round(t.x[0]));
    EXPECT_GE(t.x[0], 5);
    EXPECT_LE(t.x[0], 30);
    EXPECT_GE(t.x[1], 30);
    EXPECT_LE(t.x[1], 3000);
  }
}

TEST(Tuner, RejectsBadInput) {
  EXPECT_THROW(optimize(ParamSpace{}, kQuadratic, kSeeds, 5, TunerStrategy::Random, 1), std::invalid_argument);
  EXPECT_THROW(optimize(line(3, 3), kQuadratic, kSeeds, 5, TunerStrategy::Random, 1), std::invalid_argument);
  EXPECT_THROW(optimize(ParamSpace{{{"t", 0, 1, true, false}}}, kQuadratic, kSeeds, 5, TunerStrategy::Random, 1),
               std::invalid_argument);
  EXPECT_THROW(optimize(line(), kQuadratic, kSeeds, 0, TunerStrategy::Random, 1), std::invalid_argument);
  EXPECT_THROW(optimize(line(), kQuadratic, {}, 5, TunerStrategy::Random, 1), std::invalid_argument);
  EXPECT_THROW(default_space(ControllerKind::Fixed), std::invalid_argument);
}

TEST(Tuner, ParseStrategy) {
  EXPECT_EQ(parse_strategy("random"), TunerStrategy::Random);
  EXPECT_EQ(parse_strategy("surrogate"), TunerStrategy::Surrogate);
  EXPECT_FALSE(parse_strategy("grid").has_value());
}

TEST(Tuner, DefaultSpacesNameRealParameters) {
  const auto& names = parameter_names();
  for (ControllerKind k : {ControllerKind::MaxPressure, ControllerKind::Scosca, ControllerKind::Fair1,
                           ControllerKind::Fair2}) {
    for (const ParamSpec& p : default_space(k).params)
      EXPECT_NE(std::find(names.begin(), names.end(), p.name), names.end()) << p.name;
  }
}

TEST(Tuner, ScenarioObjectiveOnMinimalScenario) {
  const Scenario s = load_scenario(std::string(FAIRSIG_SCENARIO_DIR) + "/minimal.yaml");
  const ParamSpace space{{{"scosca.lambda1", 1, 40, false, false}}};
  const Objective obj = scenario_objective(s, ControllerKind::Scosca, space, 2);
  const double a = obj({10.0}, {1, 2});
  const double b = obj({10.0}, {1, 2});
  EXPECT_GT(a, 0.0);
  EXPECT_EQ(a, b);
  const TuneResult r = optimize(space, obj, {1, 2}, 3, TunerStrategy::Random, 1);
  EXPECT_EQ(r.history.size(), 3u);
  std::ostringstream csv;
  write_history_csv(csv, space, r.history);
  EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')), "trial,scosca.lambda1,objective,best_so_far,origin,failed,error");
}
