#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fairsig/metrics.hpp"
#include "fairsig/runner.hpp"
#include "fairsig/scenario.hpp"

namespace fairsig {

struct RunMatrix {
  std::filesystem::path scenario_path;
  std::vector<ControllerKind> controllers;  // empty: scenario default
  std::vector<std::uint64_t> seeds;         // empty: scenario default
  std::optional<int> horizon;
  std::optional<int> warmup;
  std::filesystem::path output_dir;         // empty: no files written
  std::optional<ControllerKind> baseline;   // empty: scenario default
  int jobs = 1;
  bool keep_results = false;
  bool write_run_logs = true;  // per-run vehicles/timeline/decisions CSVs
};

struct RunSummary {
  std::uint64_t seed = 0;
  int throughput = 0;
  double mean_speed = 0.0;
  Quartet quartet;
  HorizontalEquity horizontal;
  std::vector<MfdBin> mfd;
  bool conservation_held = true;
  std::size_t censored = 0;
  double wall_seconds = 0.0;
};

struct Stat {
  double mean = 0.0;
  double stddev = 0.0;
  std::string marker;
  std::optional<double> p;  // Welch p-value against the baseline
};

struct BenchmarkReport {
  bool ok = true;
  std::string error;
  std::vector<ControllerKind> controllers;
  std::vector<std::uint64_t> seeds;
  ControllerKind baseline = ControllerKind::Scosca;
  std::map<ControllerKind, std::vector<RunSummary>> runs;   // seed order
  std::map<ControllerKind, std::vector<RunResult>> results; // only with keep_results
  std::string config_hash;
  double wall_seconds = 0.0;
};

/// FNV-1a 64-bit digest as 16 hex digits.
std::string fnv1a_hex(std::string_view data);

/// Output directory after applying the FAIRSIG_OUT_DIR environment override.
std::filesystem::path resolve_output_dir(const std::filesystem::path& requested);

/// Samples of one metric across the seeds of a controller.
using Extractor = double (*)(const RunSummary&);
std::vector<double> samples(const BenchmarkReport& report, ControllerKind kind, Extractor f);
Stat summarize(const BenchmarkReport& report, ControllerKind kind, Extractor f);

BenchmarkReport run_benchmark(const RunMatrix& matrix);
BenchmarkReport run_benchmark(const Scenario& scenario, const RunMatrix& matrix);

}  // namespace fairsig
