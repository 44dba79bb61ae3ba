#include "fairsig/benchmark.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <thread>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace fairsig {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

RunSummary summarize_run(const RunResult& r) {
  RunSummary s;
  s.seed = r.seed;
  s.throughput = r.efficiency.throughput;
  s.mean_speed = r.efficiency.mean_speed;
  if (!r.ledger.entries.empty()) s.quartet = fairness_quartet(r.ledger.entries);
  s.horizontal = horizontal_equity(r.ledger);
  s.mfd = r.mfd;
  s.conservation_held = r.conservation_held;
  for (const auto& e : r.ledger.entries) s.censored += e.censored ? 1 : 0;
  s.wall_seconds = r.wall_seconds;
  return s;
}

std::ofstream open_csv(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", p.string()));
  return out;
}

std::string run_dir_name(ControllerKind k, std::uint64_t seed) { return fmt::format("{}_seed{}", to_string(k), seed); }

void write_run_logs(const std::filesystem::path& dir, const RunResult& r) {
  std::filesystem::create_directories(dir);
  auto v = open_csv(dir / "vehicles.csv");
  write_vehicles_csv(v, r.vehicles);
  auto t = open_csv(dir / "timeline.csv");
  write_timeline_csv(t, r.cycles);
  auto d = open_csv(dir / "decisions.csv");
  write_decisions_csv(d, r.decisions);
}

std::string cell(const Stat& s) { return fmt::format("{},{},{}", s.mean, s.stddev, s.marker); }

struct Column {
  const char* name;
  Extractor f;
};

void write_table(const std::filesystem::path& p, const BenchmarkReport& rep, const std::vector<Column>& cols) {
  auto out = open_csv(p);
  out << "controller,seeds";
  for (const Column& c : cols) out << fmt::format(",{0}_mean,{0}_std,{0}_marker", c.name);
  out << "\n";
  for (ControllerKind k : rep.controllers) {
    out << fmt::format("{},{}", to_string(k), rep.runs.at(k).size());
    for (const Column& c : cols) out << "," << cell(summarize(rep, k, c.f));
    out << "\n";
  }
}

const Quartet* class_quartet(const RunSummary& s, OriginClass c, bool per_km) {
  const ClassEquity& e = c == OriginClass::Arterial ? s.horizontal.arterial : s.horizontal.feeder;
  const auto& q = per_km ? e.per_km : e.raw;
  return q ? &*q : nullptr;
}

template <OriginClass C, bool K>
double h_gini(const RunSummary& s) {
  auto q = class_quartet(s, C, K);
  return q ? q->gini : kNaN;
}
template <OriginClass C, bool K>
double h_max(const RunSummary& s) {
  auto q = class_quartet(s, C, K);
  return q ? q->max_delay : kNaN;
}
template <OriginClass C, bool K>
double h_total(const RunSummary& s) {
  auto q = class_quartet(s, C, K);
  return q ? q->total_travel_time : kNaN;
}
template <OriginClass C, bool K>
double h_avg(const RunSummary& s) {
  auto q = class_quartet(s, C, K);
  return q ? q->avg_delay : kNaN;
}
template <OriginClass C, bool K>
double h_median(const RunSummary& s) {
  auto q = class_quartet(s, C, K);
  return q ? q->median_delay : kNaN;
}

template <OriginClass C, bool K>
void horizontal_row(std::ostream& out, const BenchmarkReport& rep, ControllerKind k) {
  out << fmt::format("{},{},{},{}", to_string(k), to_string(C), K ? "per_km" : "raw", rep.runs.at(k).size());
  out << "," << cell(summarize(rep, k, &h_gini<C, K>));
  out << "," << cell(summarize(rep, k, &h_max<C, K>));
  if (K)
    out << ",,,";
  else
    out << "," << cell(summarize(rep, k, &h_total<C, K>));
  out << "," << cell(summarize(rep, k, &h_avg<C, K>));
  out << "," << cell(summarize(rep, k, &h_median<C, K>));
  out << "\n";
}

void write_tables(const std::filesystem::path& dir, const BenchmarkReport& rep) {
  write_table(dir / "table_efficiency.csv", rep,
              {{"throughput", [](const RunSummary& s) { return static_cast<double>(s.throughput); }},
               {"mean_speed", [](const RunSummary& s) { return s.mean_speed; }}});
  write_table(dir / "table_equity.csv", rep,
              {{"gini", [](const RunSummary& s) { return s.quartet.gini; }},
               {"max_delay", [](const RunSummary& s) { return s.quartet.max_delay; }},
               {"total_travel_time_h", [](const RunSummary& s) { return s.quartet.total_travel_time; }},
               {"avg_delay", [](const RunSummary& s) { return s.quartet.avg_delay; }},
               {"median_delay", [](const RunSummary& s) { return s.quartet.median_delay; }}});
  {
    auto out = open_csv(dir / "table_horizontal.csv");
    out << "controller,class,variant,seeds";
    for (const char* m : {"gini", "max_delay", "total_travel_time_h", "avg_delay", "median_delay"})
      out << fmt::format(",{0}_mean,{0}_std,{0}_marker", m);
    out << "\n";
    for (ControllerKind k : rep.controllers) {
      horizontal_row<OriginClass::Arterial, false>(out, rep, k);
      horizontal_row<OriginClass::Feeder, false>(out, rep, k);
      horizontal_row<OriginClass::Arterial, true>(out, rep, k);
      horizontal_row<OriginClass::Feeder, true>(out, rep, k);
    }
  }
  {
    auto out = open_csv(dir / "mfd.csv");
    out << "controller,seed,window_start,exits,flow,density,speed\n";
    for (ControllerKind k : rep.controllers)
      for (const RunSummary& s : rep.runs.at(k))
        for (const MfdBin& b : s.mfd)
          out << fmt::format("{},{},{},{},{},{},{}\n", to_string(k), s.seed, b.window_start, b.exits, b.flow,
                             b.density, b.speed);
  }
}

}  // namespace

std::string fnv1a_hex(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return fmt::format("{:016x}", h);
}

std::filesystem::path resolve_output_dir(const std::filesystem::path& requested) {
  if (const char* env = std::getenv("FAIRSIG_OUT_DIR"); env && *env) return env;
  return requested;
}

std::vector<double> samples(const BenchmarkReport& report, ControllerKind kind, Extractor f) {
  std::vector<double> out;
  auto it = report.runs.find(kind);
  if (it == report.runs.end()) return out;
  for (const RunSummary& s : it->second) {
    const double v = f(s);
    if (!std::isnan(v)) out.push_back(v);
  }
  return out;
}

Stat summarize(const BenchmarkReport& report, ControllerKind kind, Extractor f) {
  Stat s;
  const auto x = samples(report, kind, f);
  s.mean = mean(x);
  s.stddev = stddev(x);
  if (kind != report.baseline && report.runs.count(report.baseline)) {
    const auto b = samples(report, report.baseline, f);
    if (x.size() >= 2 && b.size() >= 2) {
      s.p = welch_t_test(b, x).p;
      s.marker = significance_marker(b, x);
    }
  }
  return s;
}

BenchmarkReport run_benchmark(const RunMatrix& matrix) {
  return run_benchmark(load_scenario(matrix.scenario_path), matrix);
}

BenchmarkReport run_benchmark(const Scenario& base, const RunMatrix& matrix) {
  const auto t0 = std::chrono::steady_clock::now();
  Scenario scenario = base;
  if (matrix.horizon) scenario.runs.horizon = *matrix.horizon;
  if (matrix.warmup) scenario.metrics.warmup = *matrix.warmup;
  if (scenario.runs.horizon <= 0) throw std::invalid_argument("horizon must be positive");

  BenchmarkReport rep;
  rep.controllers = matrix.controllers.empty() ? scenario.runs.controllers : matrix.controllers;
  rep.seeds = matrix.seeds.empty() ? scenario.runs.seeds : matrix.seeds;
  rep.baseline = matrix.baseline.value_or(scenario.runs.baseline);
  {
    std::set<std::uint64_t> distinct(rep.seeds.begin(), rep.seeds.end());
    if (distinct.size() != rep.seeds.size()) throw std::invalid_argument("seeds must be distinct");
  }
  rep.config_hash = fnv1a_hex(fmt::format("{}\nhorizon={}\nwarmup={}", scenario.source_text, scenario.runs.horizon,
                                          scenario.metrics.warmup));

  struct Task {
    ControllerKind kind;
    std::size_t seed_index;
  };
  std::vector<Task> tasks;
  for (ControllerKind k : rep.controllers)
    for (std::size_t i = 0; i < rep.seeds.size(); ++i) tasks.push_back({k, i});

  std::vector<std::optional<RunResult>> done(tasks.size());
  std::vector<std::string> errors(tasks.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> abort{false};
  const std::filesystem::path out_dir = matrix.output_dir.empty() ? std::filesystem::path{}
                                                                  : resolve_output_dir(matrix.output_dir);
  if (!out_dir.empty()) std::filesystem::create_directories(out_dir);

  const auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size() || abort.load()) return;
      try {
        RunResult r = run_simulation(scenario, tasks[i].kind, rep.seeds[tasks[i].seed_index]);
        if (!out_dir.empty() && matrix.write_run_logs)
          write_run_logs(out_dir / "runs" / run_dir_name(r.controller, r.seed), r);
        done[i] = std::move(r);
      } catch (const std::exception& e) {
        errors[i] = e.what();
        abort.store(true);
      }
    }
  };
  const int jobs = std::max(1, matrix.jobs);
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  nlohmann::ordered_json manifest;
  manifest["version"] = FAIRSIG_VERSION;
  manifest["config_hash"] = rep.config_hash;
  manifest["horizon"] = scenario.runs.horizon;
  manifest["warmup"] = scenario.metrics.warmup;
  manifest["baseline"] = std::string(to_string(rep.baseline));
  manifest["seeds"] = rep.seeds;
  auto& runs_json = manifest["runs"] = nlohmann::ordered_json::array();

  for (std::size_t i = 0; i < tasks.size(); ++i) {
    nlohmann::ordered_json entry;
    entry["controller"] = std::string(to_string(tasks[i].kind));
    entry["seed"] = rep.seeds[tasks[i].seed_index];
    if (done[i]) {
      entry["status"] = "ok";
      entry["wall_seconds"] = done[i]->wall_seconds;
      rep.runs[tasks[i].kind].push_back(summarize_run(*done[i]));
      if (matrix.keep_results) rep.results[tasks[i].kind].push_back(std::move(*done[i]));
    } else if (!errors[i].empty()) {
      entry["status"] = "failed";
      entry["error"] = errors[i];
      if (rep.ok) rep.error = fmt::format("{} seed {}: {}", to_string(tasks[i].kind), rep.seeds[tasks[i].seed_index], errors[i]);
      rep.ok = false;
    } else {
      entry["status"] = "skipped";
      rep.ok = false;
    }
    runs_json.push_back(std::move(entry));
  }

  if (rep.ok && !out_dir.empty()) write_tables(out_dir, rep);
  rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  manifest["status"] = rep.ok ? "complete" : "failed";
  if (!rep.ok) manifest["error"] = rep.error;
  manifest["wall_seconds"] = rep.wall_seconds;
  if (!out_dir.empty()) {
    std::ofstream m(out_dir / "manifest.json", std::ios::binary);
    m << manifest.dump(2) << "\n";
  }
  return rep;
}

}  // namespace fairsig
