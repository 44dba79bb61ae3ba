#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fairsig/controllers.hpp"
#include "fairsig/demand.hpp"
#include "fairsig/network.hpp"
#include "fairsig/scosca.hpp"
#include "fairsig/signal_core.hpp"

namespace fairsig {

enum class ControllerKind { Fixed, MaxPressure, Scosca, Fair1, Fair2 };

std::string_view to_string(ControllerKind k);
std::optional<ControllerKind> parse_controller(std::string_view s);
const std::vector<ControllerKind>& all_controllers();

struct ControllerConfig {
  SignalPlan plan;  // initial plan of the cyclic controllers
  MaxPressureParams maxpressure;
  int maxpressure_min_green = 5;
  ScoscaParams scosca;
  Fair1Params fair1;
  Fair2Params fair2;
};

struct MetricsConfig {
  int mfd_window = 300;  // s
  int warmup = 0;        // s; vehicles entering earlier are excluded from the ledgers
};

struct RunsConfig {
  int horizon = 3600;
  std::vector<std::uint64_t> seeds{1};
  std::vector<ControllerKind> controllers{ControllerKind::Scosca};
  ControllerKind baseline = ControllerKind::Scosca;
  bool spillback = false;
};

struct Scenario {
  std::shared_ptr<const Network> network;
  DemandProfile demand;
  ControllerConfig controller;
  MetricsConfig metrics;
  RunsConfig runs;
  std::string source_text;  // document as loaded; hashed into manifests
};

/// Parses and validates a scenario document. Errors are ScenarioError with a
/// dotted path, e.g. `network.links[2].length`.
Scenario parse_scenario(const std::string& text);
Scenario load_scenario(const std::filesystem::path& path);

/// Tunable controller parameters addressed as `<controller>.<name>`, e.g.
/// `scosca.lambda1`, `fairscosca1.alpha`, `fairscosca2.ttg`.
const std::vector<std::string>& parameter_names();
/// Throws std::invalid_argument for unknown names.
void set_parameter(ControllerConfig& config, std::string_view name, double value);
double get_parameter(const ControllerConfig& config, std::string_view name);

}  // namespace fairsig
