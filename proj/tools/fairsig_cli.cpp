#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "fairsig/benchmark.hpp"
#include "fairsig/runner.hpp"
#include "fairsig/scenario.hpp"
#include "fairsig/tuner.hpp"

using namespace fairsig;

namespace {

ControllerKind controller_arg(const std::string& s) {
  const auto k = parse_controller(s);
  if (!k) throw CLI::ValidationError("--controller", fmt::format("unknown controller '{}'", s));
  return *k;
}

std::ofstream open_out(const std::filesystem::path& p) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", p.string()));
  return out;
}

int cmd_validate(const std::string& path) {
  const Scenario s = load_scenario(path);
  const Network& net = *s.network;
  std::cout << fmt::format("ok: {} intersections, {} links, {} origins, {} districts\n", net.intersection_count(),
                           net.link_count(), s.demand.origins.size(), net.districts().districts.size());
  return 0;
}

int cmd_run(const std::string& path, const std::string& controller, std::uint64_t seed, int horizon,
            const std::string& out_dir, bool steps, bool timeline, bool decisions) {
  Scenario s = load_scenario(path);
  if (horizon > 0) s.runs.horizon = horizon;
  const RunResult r = run_simulation(s, controller_arg(controller), seed);
  const std::filesystem::path dir = resolve_output_dir(out_dir);
  std::filesystem::create_directories(dir);
  {
    auto out = open_out(dir / "vehicles.csv");
    write_vehicles_csv(out, r.vehicles);
  }
  if (steps) {
    auto out = open_out(dir / "steps.csv");
    write_steps_csv(out, r.steps);
  }
  if (timeline) {
    auto out = open_out(dir / "timeline.csv");
    write_timeline_csv(out, r.cycles);
  }
  if (decisions) {
    auto out = open_out(dir / "decisions.csv");
    write_decisions_csv(out, r.decisions);
  }
  const Quartet q = r.ledger.entries.empty() ? Quartet{} : fairness_quartet(r.ledger.entries);
  std::cout << fmt::format("{} seed {}: throughput {} veh, avg delay {:.2f} s, max delay {:.1f} s, gini {:.4f}\n",
                           controller, seed, r.efficiency.throughput, q.avg_delay, q.max_delay, q.gini);
  return r.conservation_held ? 0 : 1;
}

int cmd_bench(const std::string& path, const std::vector<std::string>& controllers,
              const std::vector<std::uint64_t>& seeds, int horizon, int warmup, const std::string& out_dir,
              const std::string& baseline, int jobs) {
  RunMatrix m;
  m.scenario_path = path;
  for (const auto& c : controllers) m.controllers.push_back(controller_arg(c));
  m.seeds = seeds;
  if (horizon > 0) m.horizon = horizon;
  if (warmup >= 0) m.warmup = warmup;
  m.output_dir = out_dir;
  if (!baseline.empty()) m.baseline = controller_arg(baseline);
  m.jobs = jobs;
  const BenchmarkReport rep = run_benchmark(m);
  if (!rep.ok) {
    std::cerr << "benchmark failed: " << rep.error << "\n";
    return 1;
  }
  std::cout << fmt::format("{:<12} {:>10} {:>10} {:>10} {:>8}\n", "controller", "throughput", "avg_delay",
                           "max_delay", "gini");
  for (ControllerKind k : rep.controllers) {
    const Stat t = summarize(rep, k, [](const RunSummary& s) { return static_cast<double>(s.throughput); });
    const Stat a = summarize(rep, k, [](const RunSummary& s) { return s.quartet.avg_delay; });
    const Stat x = summarize(rep, k, [](const RunSummary& s) { return s.quartet.max_delay; });
    const Stat g = summarize(rep, k, [](const RunSummary& s) { return s.quartet.gini; });
    std::cout << fmt::format("{:<12} {:>7.0f}{:<3} {:>7.1f}{:<3} {:>7.0f}{:<3} {:>5.3f}{:<3}\n", to_string(k), t.mean,
                             t.marker, a.mean, a.marker, x.mean, x.marker, g.mean, g.marker);
  }
  std::cout << fmt::format("outputs in {} ({:.1f} s)\n", resolve_output_dir(out_dir).string(), rep.wall_seconds);
  return 0;
}

int cmd_tune(const std::string& path, const std::string& controller, int budget,
             const std::vector<std::uint64_t>& seeds, const std::string& strategy, const std::string& out,
             std::uint64_t tuner_seed, int jobs) {
  const Scenario s = load_scenario(path);
  const ControllerKind kind = controller_arg(controller);
  const auto strat = parse_strategy(strategy);
  if (!strat) throw CLI::ValidationError("--strategy", "expected random or surrogate");
  const ParamSpace space = default_space(kind);
  const TuneResult r = optimize(space, scenario_objective(s, kind, space, jobs), seeds.empty() ? s.runs.seeds : seeds,
                                budget, *strat, tuner_seed);
  {
    auto f = open_out(out);
    write_history_csv(f, space, r.history);
  }
  std::cout << fmt::format("best objective {:.3f} s at trial {}:", r.best.objective, r.best.id);
  for (std::size_t i = 0; i < space.params.size(); ++i)
    std::cout << fmt::format(" {}={}", space.params[i].name, r.best.x[i]);
  std::cout << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Arterial corridor signal-control simulator and benchmark"};
  app.set_version_flag("--version", FAIRSIG_VERSION);
  app.require_subcommand(1);

  std::string scenario;
  auto* validate = app.add_subcommand("validate", "Check a scenario document");
  validate->add_option("scenario", scenario, "Scenario file")->required();

  std::string controller = "scosca", out_dir = "out", baseline, strategy = "random",
              history = "history.csv";
  std::uint64_t seed = 1, tuner_seed = 1;
  int horizon = 0, warmup = -1, jobs = 1, budget = 20;
  bool steps = false, timeline = false, decisions = false;
  std::vector<std::string> controllers;
  std::vector<std::uint64_t> seeds;

  auto* run = app.add_subcommand("run", "Run one controller with one seed");
  run->add_option("scenario", scenario, "Scenario file")->required();
  run->add_option("--controller", controller, "fixed|maxpressure|scosca|fairscosca1|fairscosca2");
  run->add_option("--seed", seed, "Demand seed");
  run->add_option("--horizon", horizon, "Simulated seconds (default from scenario)");
  run->add_option("--out", out_dir, "Output directory");
  run->add_flag("--steps", steps, "Write the per-step network log");
  run->add_flag("--timeline", timeline, "Write the signal timeline");
  run->add_flag("--decisions", decisions, "Write the controller decision log");

  auto* bench = app.add_subcommand("bench", "Run a controller x seed matrix and write the tables");
  bench->add_option("scenario", scenario, "Scenario file")->required();
  bench->add_option("--controllers", controllers, "Controllers (default from scenario)")->delimiter(',');
  bench->add_option("--seeds", seeds, "Seeds (default from scenario)")->delimiter(',');
  bench->add_option("--horizon", horizon, "Simulated seconds");
  bench->add_option("--warmup", warmup, "Seconds excluded from the delay ledgers");
  bench->add_option("--out", out_dir, "Output directory (FAIRSIG_OUT_DIR overrides)");
  bench->add_option("--baseline", baseline, "Baseline for significance markers (default from scenario)");
  bench->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);

  auto* tune = app.add_subcommand("tune", "Calibrate controller parameters on mean average delay");
  tune->add_option("scenario", scenario, "Scenario file")->required();
  tune->add_option("--controller", controller, "Controller to tune");
  tune->add_option("--budget", budget, "Number of trials")->check(CLI::PositiveNumber);
  tune->add_option("--seeds", seeds, "Common seed list")->delimiter(',');
  tune->add_option("--strategy", strategy, "random|surrogate");
  tune->add_option("--out", history, "History CSV");
  tune->add_option("--tuner-seed", tuner_seed, "Seed of the search itself");
  tune->add_option("--jobs", jobs, "Worker threads per trial")->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*validate) return cmd_validate(scenario);
    if (*run) return cmd_run(scenario, controller, seed, horizon, out_dir, steps, timeline, decisions);
    if (*bench) return cmd_bench(scenario, controllers, seeds, horizon, warmup, out_dir, baseline, jobs);
    if (*tune) return cmd_tune(scenario, controller, budget, seeds, strategy, history, tuner_seed, jobs);
  } catch (const ScenarioError& e) {
    std::cerr << "scenario error: " << e.what() << "\n";
    return 2;
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
