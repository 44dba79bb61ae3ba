#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "fairsig/network.hpp"

namespace fairsig {

/// Seeded generator with platform-independent floating point draws.
/// std::mt19937_64 output is fixed by the standard; the std distributions are
/// not, so uniforms are built directly from the raw 64-bit words.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double exponential(double rate);
  /// Index drawn from a discrete distribution with the given (non-negative) weights.
  std::size_t categorical(const std::vector<double>& weights);

 private:
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

struct RateSegment {
  int start = 0;               // s
  double vehicles_per_hour = 0.0;
};

struct OriginDemand {
  std::size_t link = npos;
  std::vector<RateSegment> segments;  // piecewise constant, sorted by start
};

struct Turn {
  std::size_t to_link = npos;
  double fraction = 0.0;
};

struct VehicleClass {
  std::string name = "car";
  double share = 1.0;
  double pce = 1.0;  // passenger-car equivalents; scales the discharge headway
};

struct DemandProfile {
  std::vector<OriginDemand> origins;
  /// turns[link] lists the downstream choices at the end of `link`; empty for exit links.
  std::vector<std::vector<Turn>> turns;
  std::vector<VehicleClass> classes{VehicleClass{}};

  /// Checks rates, turning fractions and reachability against the network.
  void validate(const Network& net) const;
};

struct ArrivalEvent {
  double time = 0.0;                 // s, entry on the origin link
  std::size_t origin = npos;         // index into DemandProfile::origins
  std::vector<std::size_t> route;    // link sequence, origin link first
  std::size_t vehicle_class = 0;
};

/// Poisson arrivals over [0, horizon) on every origin, with routes sampled from
/// turning fractions. Each origin draws from its own derived stream so adding
/// an origin does not perturb the others. Ordered by (time, origin).
std::vector<ArrivalEvent> generate_demand(const DemandProfile& profile, const Network& net, std::uint64_t seed,
                                          int horizon);

std::vector<std::size_t> sample_route(const DemandProfile& profile, const Network& net, std::size_t origin_link,
                                      Rng& rng);

}  // namespace fairsig
