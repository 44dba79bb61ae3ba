// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <fmt/format.h>

#include "fairsig/benchmark.hpp"
#include "fairsig/metrics.hpp"
#include "fairsig/runner.hpp"
#include "fairsig/scenario.hpp"
#include "fairsig/scosca.hpp"
#include "fairsig/tuner.hpp"

using namespace fairsig;

namespace {

using Clock = std::chrono::steady_clock;
constexpr ControllerKind kFixed = ControllerKind::Fixed;
constexpr ControllerKind kMp = ControllerKind::MaxPressure;
constexpr ControllerKind kScosca = ControllerKind::Scosca;
constexpr ControllerKind kFair1 = ControllerKind::Fair1;
constexpr ControllerKind kFair2 = ControllerKind::Fair2;

int failures = 0;

void report(int id, bool ok, const std::string& what, const std::string& detail) {
  if (!ok) ++failures;
  std::cout << fmt::format("{} {:>2} {}: {}\n", ok ? "PASS" : "FAIL", id, what, detail) << std::flush;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string vehicles_csv(const RunResult& r) {
  std::ostringstream out;
  write_vehicles_csv(out, r.vehicles);
  return out.str();
}

// O(n^2) mean absolute difference form.
double gini_pairwise(const std::vector<double>& x) {
  const auto n = static_cast<double>(x.size());
  double sum = 0.0, diff = 0.0;
  for (double a : x) sum += a;
  if (x.empty() || sum == 0.0) return 0.0;
  for (double a : x)
    for (double b : x) diff += std::abs(a - b);
  return diff / (2.0 * n * sum);
}

void gini_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 gen(20240601);
  std::uniform_int_distribution<int> len(1, 1000);
  std::exponential_distribution<double> expo(1.0 / 120.0);
  std::uniform_real_distribution<double> unif(0.0, 600.0);
  double worst = 0.0;
  for (int v = 0; v < 1000; ++v) {
    std::vector<double> x(static_cast<std::size_t>(len(gen)));
    const int shape = v % 3;
    for (double& e : x) e = shape == 0 ? expo(gen) : shape == 1 ? unif(gen) : std::floor(unif(gen) / 100.0);
    worst = std::max(worst, std::abs(gini(x) - gini_pairwise(x)));
  }
  const double s = seconds_since(t0);
  report(1, worst <= 1e-9 && s < 10.0, "gini matches pairwise oracle",
         fmt::format("1000 vectors, max |diff| {:.2e}, {:.2f} s", worst, s));
}

TravelTimeMatrix hops(double each) { return TravelTimeMatrix{std::vector<double>(4, each)}; }

DsRecord ds_record(std::size_t dominant, double diff) {
  DsRecord r;
  r.dominant_phase = dominant;
  r.critical_link = 0;
  r.ds_diff = diff;
  r.ds_max = 1.0;
  return r;
}

void formula_values(const ScoscaParams& p) {
  const GreenBounds bounds{p.g_min, p.g_max};
  std::vector<std::string> bad;
  const auto expect = [&bad](bool ok, const char* name) {
    if (!ok) bad.emplace_back(name);
  };
  expect(compute_ds(30, 30, 0, 2) == 0.0, "ds idle");
  expect(waste_time(0, 15, 2) == -30.0 && compute_ds(30, 0, 15, 2) == 2.0, "ds oversaturated");
  expect(waste_time(12, 4, 0.5) == 10.0 && compute_ds(40, 12, 4, 0.5) == 0.75, "ds partial");
  expect(green_phase_optimize(ds_record(0, 0.2), {66, 0, {30, 30}}, 3, p, 10, bounds) == std::vector<int>{32, 28},
         "green update");
  expect(green_phase_optimize(ds_record(0, 0.5), {96, 0, {58, 32}}, 3, p, 10, bounds) == std::vector<int>{60, 30},
         "green cap");
  expect(cycle_length_optimize(0.95, 90, p) == 95, "cycle up");
  expect(cycle_length_optimize(0.90, 90, p) == 90, "cycle hold");
  expect(cycle_length_optimize(0.80, 90, p) == 75, "cycle down");
  const std::vector<int> zero(5, 0);
  const std::vector<double> middle{1.0, 5.0, 1.0}, front{5.0, 1.0, 1.0};
  expect(offset_optimize(middle, zero, hops(10), p, 90) == std::vector<int>{20, 10, 0, 10, 20}, "offsets middle");
  expect(offset_optimize(front, zero, hops(10), p, 90) == std::vector<int>{0, 10, 20, 30, 40}, "offsets front");
  expect(fair1_penalty(0.0, 300.0) == 0.0, "penalty 0");
  expect(std::abs(fair1_penalty(300.0, 300.0) - 1.7183) < 1e-4, "penalty 1");
  expect(std::abs(fair1_penalty(600.0, 300.0) - 6.389) < 1e-3, "penalty 2");
  const Fair1Params f{0.5, 300};
  expect(fair1_green_update(ds_record(0, 0.4), 0.2, {66, 0, {30, 30}}, 3, p, f, 10, bounds) == std::vector<int>{31, 29},
         "fair1 positive");
  expect(fair1_green_update(ds_record(0, 0.2), 0.8, {66, 0, {30, 30}}, 3, p, f, 10, bounds) == std::vector<int>{30, 30},
         "fair1 negative");
  std::string detail = bad.empty() ? "15 hand values reproduced" : "mismatch:";
  for (const auto& b : bad) detail += " " + b;
  report(2, bad.empty(), "formula hand values", detail);
}

void fair2_cycle_integrity(const BenchmarkReport& rep) {
  std::size_t cycles = 0, preemptions = 0, open_at_horizon = 0;
  std::vector<std::string> bad;
  for (const RunResult& r : rep.results.at(kFair2)) {
    std::map<std::size_t, std::vector<const CycleRecord*>> by_node;
    for (const CycleRecord& c : r.cycles) by_node[c.intersection].push_back(&c);
    for (const auto& [node, list] : by_node) {
      for (std::size_t i = 0; i < list.size(); ++i) {
        const CycleRecord& c = *list[i];
        ++cycles;
        int sum = 0;
        for (int g : c.effective_greens) sum += g;
        sum += c.yellow * static_cast<int>(c.effective_greens.size());
        if (sum != c.length || (!c.transition && c.length != c.planned_cycle))
          bad.push_back(fmt::format("seed {} node {} cycle {}: closure", r.seed, node, c.cycle));
        if (!c.preempted) continue;
        ++preemptions;
        if (i + 1 == list.size()) {
          ++open_at_horizon;
          continue;
        }
        const CycleRecord& next = *list[i + 1];
        if (next.cycle != c.cycle + 1 || next.compensated_phase != c.preempt_from ||
            next.compensation != c.preempt_amount)
          bad.push_back(fmt::format("seed {} node {} cycle {}: compensation", r.seed, node, c.cycle));
        if (next.preempted) bad.push_back(fmt::format("seed {} node {} cycle {}: consecutive", r.seed, node, c.cycle));
      }
    }
  }
  std::string detail = fmt::format("{} cycles, {} pre-emptions ({} at the horizon)", cycles, preemptions,
                                   open_at_horizon);
  if (!bad.empty()) detail += fmt::format(", {} violations, first: {}", bad.size(), bad.front());
  report(3, bad.empty() && preemptions > 0, "fairscosca2 cycle closure and compensation", detail);
}

void degeneracy(const Scenario& s) {
  const std::size_t n = std::min<std::size_t>(3, s.runs.seeds.size());
  ControllerConfig alpha_one = s.controller;
  alpha_one.fair1.alpha = 1.0;
  ControllerConfig no_preempt = s.controller;
  no_preempt.fair2.ttg = std::numeric_limits<double>::infinity();
  int same1 = 0, same2 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t seed = s.runs.seeds[i];
    const std::string base = vehicles_csv(run_simulation(s, kScosca, seed));
    same1 += vehicles_csv(run_simulation(s, kFair1, seed, &alpha_one)) == base;
    same2 += vehicles_csv(run_simulation(s, kFair2, seed, &no_preempt)) == base;
  }
  report(4, n == 3 && same1 == 3 && same2 == 3, "degenerate fairness settings reproduce scosca",
         fmt::format("alpha=1 identical {}/{}, ttg=inf identical {}/{}", same1, n, same2, n));
}

void hysteresis(const ScoscaParams& p) {
  std::mt19937_64 gen(50);
  std::uniform_real_distribution<double> ds(p.ds_target_lo, p.ds_target_hi);
  bool held = true;
  for (int start : {p.cycle_min, 90, p.cycle_max}) {
    int c = start;
    for (int k = 0; k < 50; ++k) {
      const double v = k == 0 ? p.ds_target_lo : k == 1 ? p.ds_target_hi : ds(gen);
      c = cycle_length_optimize(v, c, p);
      held = held && c == start;
    }
  }
  report(5, held, "cycle length holds inside the dead band", fmt::format("50 cycles from C = {}, 90, {}", p.cycle_min, p.cycle_max));
}

std::vector<double> metric(const BenchmarkReport& rep, ControllerKind k, Extractor f) { return samples(rep, k, f); }

double throughput(const RunSummary& s) { return s.throughput; }
double gini_of(const RunSummary& s) { return s.quartet.gini; }
double max_delay(const RunSummary& s) { return s.quartet.max_delay; }
double feeder_gini(const RunSummary& s) {
  return s.horizontal.feeder.raw ? s.horizontal.feeder.raw->gini : std::numeric_limits<double>::quiet_NaN();
}
double arterial_gini(const RunSummary& s) {
  return s.horizontal.arterial.raw ? s.horizontal.arterial.raw->gini : std::numeric_limits<double>::quiet_NaN();
}

struct Comparison {
  double lhs = 0.0, rhs = 0.0, p = 1.0;
};

Comparison compare(const BenchmarkReport& rep, ControllerKind a, ControllerKind b, Extractor f) {
  const auto x = metric(rep, a, f), y = metric(rep, b, f);
  return {mean(x), mean(y), welch_t_test(x, y).p};
}

void throughput_ordering(const BenchmarkReport& rep) {
  const double fixed = mean(metric(rep, kFixed, throughput)), mp = mean(metric(rep, kMp, throughput));
  bool order = fixed < mp;
  std::string detail = fmt::format("fixed {:.1f} < mp {:.1f} <", fixed, mp);
  for (ControllerKind k : {kScosca, kFair1, kFair2}) {
    const double v = mean(metric(rep, k, throughput));
    order = order && mp < v;
    detail += fmt::format(" {} {:.1f}", to_string(k), v);
  }
  const Comparison fs = compare(rep, kFixed, kScosca, throughput), ms = compare(rep, kMp, kScosca, throughput);
  detail += fmt::format("; p(fixed, scosca) {:.2e}, p(mp, scosca) {:.2e}", fs.p, ms.p);
  report(6, order && fs.p < 0.05 && ms.p < 0.05, "throughput ordering", detail);
}

void vertical_equity(const BenchmarkReport& rep) {
  bool ok = true;
  std::string detail;
  for (ControllerKind k : {kFixed, kMp}) {
    for (auto [name, f] : {std::pair{"gini", &gini_of}, std::pair{"max delay", &max_delay}}) {
      const Comparison c = compare(rep, k, kScosca, f);
      ok = ok && c.lhs > c.rhs && c.p < 0.05;
      detail += fmt::format("{} {} {:.3f} vs {:.3f} (p {:.2e}); ", to_string(k), name, c.lhs, c.rhs, c.p);
    }
  }
  const Comparison f2 = compare(rep, kFair2, kScosca, max_delay);
  ok = ok && f2.lhs <= f2.rhs;
  detail += fmt::format("fairscosca2 max delay {:.1f} <= {:.1f} (p {:.3f})", f2.lhs, f2.rhs, f2.p);
  report(7, ok, "vertical equity ordering", detail);
}

void horizontal_equity_check(const BenchmarkReport& rep) {
  bool ok = true;
  std::string detail;
  for (ControllerKind k : rep.controllers) {
    const double feeder = mean(metric(rep, k, feeder_gini)), arterial = mean(metric(rep, k, arterial_gini));
    ok = ok && feeder > arterial;
    detail += fmt::format("{} {:.3f}/{:.3f}; ", to_string(k), feeder, arterial);
  }
  const double f1 = mean(metric(rep, kFair1, feeder_gini)), sc = mean(metric(rep, kScosca, feeder_gini));
  ok = ok && f1 < sc;
  detail += fmt::format("feeder gini fairscosca1 {:.3f} < scosca {:.3f}", f1, sc);
  report(8, ok, "feeder inequity exceeds arterial", detail);
}

void conservation_and_determinism(const BenchmarkReport& rep, const BenchmarkReport& rerun) {
  std::size_t steps = 0, broken = 0, runs = 0, identical = 0;
  for (const auto& [kind, list] : rep.results) {
    const auto& again = rerun.results.at(kind);
    for (std::size_t i = 0; i < list.size(); ++i) {
      const RunResult& r = list[i];
      ++runs;
      if (!r.conservation_held) ++broken;
      for (const StepRecord& st : r.steps) {
        ++steps;
        if (st.entered_cum - st.exited_cum != st.vehicles_present) ++broken;
      }
      identical += i < again.size() && vehicles_csv(r) == vehicles_csv(again[i]);
    }
  }
  report(9, runs > 0 && broken == 0 && identical == runs, "conservation and reproducibility",
         fmt::format("{} steps over {} runs, {} violations; reruns byte-identical {}/{}", steps, runs, broken,
                     identical, runs));
}

void mfd_check(const BenchmarkReport& rep) {
  std::size_t runs = 0, mismatched = 0;
  bool shape = true;
  std::string detail;
  for (const auto& [kind, list] : rep.results) {
    std::vector<MfdBin> pooled;
    for (const RunResult& r : list) {
      ++runs;
      int exits = 0;
      for (const MfdBin& b : r.mfd) exits += b.exits;
      if (exits != r.efficiency.throughput) ++mismatched;
      pooled.insert(pooled.end(), r.mfd.begin(), r.mfd.end());
    }
    if (pooled.empty()) {
      shape = false;
      continue;
    }
    const auto top = std::max_element(pooled.begin(), pooled.end(),
                                      [](const MfdBin& a, const MfdBin& b) { return a.flow < b.flow; });
    const auto low = std::min_element(pooled.begin(), pooled.end(),
                                      [](const MfdBin& a, const MfdBin& b) { return a.density < b.density; });
    shape = shape && top->density > low->density;
    detail += fmt::format("{} peak flow {:.0f} veh/h at {:.1f} veh vs min density {:.1f}; ", to_string(kind),
                          top->flow, top->density, low->density);
  }
  detail += fmt::format("bin exits = throughput in {}/{} runs", runs - mismatched, runs);
  report(10, runs > 0 && mismatched == 0 && shape, "macroscopic fundamental diagram", detail);
}

void tuner_quadratic() {
  ParamSpace space;
  space.params = {{"x", 0.0, 6.0, false, false}};
  const Objective f = [](const std::vector<double>& x, const std::vector<std::uint64_t>&) {
    return (x[0] - 3.0) * (x[0] - 3.0);
  };
  int hits = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const TuneResult r = optimize(space, f, {1}, 50, TunerStrategy::Random, seed);
    hits += std::abs(r.best.x[0] - 3.0) <= 0.5;
  }
  report(11, hits / 100.0 > 0.99, "random search finds the quadratic minimum",
         fmt::format("{}/100 tuner seeds within 0.5 of x = 3", hits));
}

}  // namespace

int main() {
  const std::string path = std::string(FAIRSIG_SCENARIO_DIR) + "/corridor5.yaml";
  const auto t0 = Clock::now();

  gini_oracle();

  Scenario scenario;
  try {
    scenario = load_scenario(path);
  } catch (const std::exception& e) {
    std::cout << "FAIL cannot load " << path << ": " << e.what() << "\n";
    return 1;
  }
  formula_values(ScoscaParams{10, 200, 1, 3, 1, 5, 60, 40, 120});

  RunMatrix m;
  m.scenario_path = path;
  m.controllers = {kFixed, kMp, kScosca, kFair1, kFair2};
  m.keep_results = true;
  m.write_run_logs = false;
  m.jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  const BenchmarkReport rep = run_benchmark(scenario, m);
  if (!rep.ok) {
    std::cout << "FAIL benchmark: " << rep.error << "\n";
    return 1;
  }
  std::cout << fmt::format("benchmark: {} controllers x {} seeds in {:.1f} s\n", rep.controllers.size(),
                           rep.seeds.size(), rep.wall_seconds);

  fair2_cycle_integrity(rep);
  degeneracy(scenario);
  hysteresis(scenario.controller.scosca);
  throughput_ordering(rep);
  vertical_equity(rep);
  horizontal_equity_check(rep);

  m.jobs = 1;
  const BenchmarkReport rerun = run_benchmark(scenario, m);
  if (!rerun.ok) {
    std::cout << "FAIL rerun: " << rerun.error << "\n";
    return 1;
  }
  conservation_and_determinism(rep, rerun);
  mfd_check(rep);
  tuner_quadratic();

  std::cout << fmt::format("{} of 11 criteria failed ({:.1f} s)\n", failures, seconds_since(t0));
  return failures == 0 ? 0 : 1;
}
