#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fairsig/scenario.hpp"

namespace fairsig {

struct ParamSpec {
  std::string name;
  double lo = 0.0;
  double hi = 1.0;
  bool log_scale = false;
  bool integer = false;
};

struct ParamSpace {
  std::vector<ParamSpec> params;
  /// Throws std::invalid_argument for empty spaces, lo >= hi or log bounds <= 0.
  void validate() const;
};

struct TrialRecord {
  std::size_t id = 0;
  std::vector<double> x;
  double objective = 0.0;  // +inf for failed trials
  double best_so_far = 0.0;
  std::vector<std::uint64_t> seeds;
  double wall_seconds = 0.0;
  bool failed = false;
  std::string error;
  std::string origin;  // "random" or "surrogate"
};

enum class TunerStrategy { Random, Surrogate };

std::optional<TunerStrategy> parse_strategy(std::string_view s);

struct TuneResult {
  TrialRecord best;
  std::vector<TrialRecord> history;
};

/// Objective evaluated on a parameter vector and the common seed list.
using Objective = std::function<double(const std::vector<double>&, const std::vector<std::uint64_t>&)>;

/// Minimizes `objective` with `budget` evaluations. Identical arguments give an
/// identical history. An objective that throws or returns a non-finite value
/// marks the trial failed with +inf and the search continues.
TuneResult optimize(const ParamSpace& space, const Objective& objective, const std::vector<std::uint64_t>& seeds,
                    int budget, TunerStrategy strategy, std::uint64_t tuner_seed);

/// Mean average delay of `kind` over the seeds with the parameters of `space`
/// set on the scenario's controller section.
Objective scenario_objective(const Scenario& scenario, ControllerKind kind, const ParamSpace& space,
                             int jobs = 1);

/// Default search space per controller.
ParamSpace default_space(ControllerKind kind);

void write_history_csv(std::ostream& out, const ParamSpace& space, const std::vector<TrialRecord>& history);

}  // namespace fairsig
