#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fairsig/microsim.hpp"
#include "fairsig/network.hpp"

namespace fairsig {

/// Gini coefficient via the sorted form Σ(2i − n − 1)·x(i) / (n·Σx).
/// Zero when every value is zero. Throws std::invalid_argument on empty input
/// or negative values.
double gini(std::span<const double> values);

struct DelayEntry {
  double delay = 0.0;        // s
  double distance = 0.0;     // m
  double travel_time = 0.0;  // s
  OriginClass origin_class = OriginClass::Arterial;
  bool censored = false;     // still in the network at the horizon
};

struct DelayLedger {
  std::vector<DelayEntry> entries;
};

struct Quartet {
  double gini = 0.0;
  double max_delay = 0.0;         // s
  double total_travel_time = 0.0; // h
  double avg_delay = 0.0;         // s
  double median_delay = 0.0;      // s
  std::size_t count = 0;
};

/// Egalitarian, Rawlsian, Utilitarian and Harsanyian summaries of a ledger.
/// Throws std::invalid_argument for an empty ledger.
Quartet fairness_quartet(std::span<const DelayEntry> entries);

struct ClassEquity {
  std::optional<Quartet> raw;     // delays in s
  std::optional<Quartet> per_km;  // delays in s/km; total_travel_time is not reported
};

struct HorizontalEquity {
  ClassEquity arterial;
  ClassEquity feeder;
  std::size_t internal_excluded = 0;
};

HorizontalEquity horizontal_equity(const DelayLedger& ledger);

struct MfdBin {
  int window_start = 0;  // s
  int exits = 0;
  double flow = 0.0;     // veh/h
  double density = 0.0;  // mean vehicles present
  double speed = 0.0;    // m/s, mean over moving vehicles, 0 without movement
};

/// Windows of `window` seconds tiling [0, horizon). `step_log` carries one
/// record per simulated second.
std::vector<MfdBin> mfd(std::span<const StepRecord> step_log, int horizon, int window = 300);

struct Efficiency {
  int throughput = 0;  // vehicles that left the network within the horizon
  int entered = 0;
  double mean_speed = 0.0;
};

Efficiency efficiency(std::span<const StepRecord> step_log);

struct WelchResult {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;  // two-sided
};

/// Welch two-sample t-test. Throws std::invalid_argument for fewer than two
/// samples on either side.
WelchResult welch_t_test(std::span<const double> a, std::span<const double> b);

/// "+++", "++" or "+" at p < 1%, 2%, 5% when `sample` has the larger mean,
/// "---", "--", "-" when smaller, empty otherwise.
std::string significance_marker(std::span<const double> baseline, std::span<const double> sample);

double mean(std::span<const double> v);
/// Sample standard deviation (n − 1); 0 for fewer than two values.
double stddev(std::span<const double> v);
double median(std::vector<double> v);

}  // namespace fairsig
