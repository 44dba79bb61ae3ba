#include "fairsig/demand.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace fairsig {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

Rng::Rng(std::uint64_t seed, std::uint64_t stream) {
  const std::uint64_t a = splitmix64(seed);
  const std::uint64_t b = splitmix64(a ^ splitmix64(stream + 0x632BE59BD9B4E019ULL));
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
  engine_.seed(seq);
}

double Rng::exponential(double rate) { return -std::log1p(-uniform()) / rate; }

std::size_t Rng::categorical(const std::vector<double>& weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  double u = uniform() * total;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (u < weights[i]) return i;
    u -= weights[i];
  }
  // Rounding can leave u a hair above the last bucket.
  for (std::size_t i = weights.size(); i-- > 0;)
    if (weights[i] > 0.0) return i;
  return 0;
}

void DemandProfile::validate(const Network& net) const {
  if (turns.size() != net.link_count()) throw ScenarioError("demand.turns", "turn table does not match link count");
  if (classes.empty()) throw ScenarioError("demand.classes", "at least one vehicle class required");
  double share = 0.0;
  for (std::size_t c = 0; c < classes.size(); ++c) {
    const auto path = fmt::format("demand.classes[{}]", c);
    if (!(classes[c].share >= 0.0)) throw ScenarioError(path + ".share", "share must be >= 0");
    if (!(classes[c].pce > 0.0)) throw ScenarioError(path + ".pce", "pce must be > 0");
    share += classes[c].share;
  }
  if (!(share > 0.0)) throw ScenarioError("demand.classes", "class shares sum to zero");

  for (std::size_t o = 0; o < origins.size(); ++o) {
    const auto path = fmt::format("demand.origins[{}]", o);
    const auto& od = origins[o];
    if (od.link >= net.link_count()) throw ScenarioError(path + ".link", "unknown origin link");
    const Link& l = net.link(od.link);
    if (net.is_intersection_node(l.from))
      throw ScenarioError(path + ".link", fmt::format("origin link '{}' starts inside the network", l.id));
    if (l.origin_class == OriginClass::Internal)
      throw ScenarioError(path + ".link", fmt::format("origin link '{}' must be arterial or feeder", l.id));
    if (od.segments.empty()) throw ScenarioError(path + ".rates", "no rate segments");
    for (std::size_t s = 0; s < od.segments.size(); ++s) {
      const auto spath = fmt::format("{}.rates[{}]", path, s);
      if (!(od.segments[s].vehicles_per_hour >= 0.0)) throw ScenarioError(spath, "rate must be >= 0");
      if (od.segments[s].start < 0) throw ScenarioError(spath, "segment start must be >= 0");
      if (s > 0 && od.segments[s].start <= od.segments[s - 1].start)
        throw ScenarioError(spath, "segment starts must be strictly increasing");
    }
  }

  for (std::size_t i = 0; i < turns.size(); ++i) {
    const Link& l = net.link(i);
    const auto path = fmt::format("demand.turns.{}", l.id);
    if (net.is_exit_link(i)) {
      if (!turns[i].empty()) throw ScenarioError(path, "exit links take no turning fractions");
      continue;
    }
    if (turns[i].empty()) throw ScenarioError(path, fmt::format("missing turning fractions for '{}'", l.id));
    double sum = 0.0;
    for (const auto& t : turns[i]) {
      if (t.to_link >= net.link_count()) throw ScenarioError(path, "unknown downstream link");
      if (net.link(t.to_link).from != l.to)
        throw ScenarioError(path, fmt::format("'{}' does not leave node '{}'", net.link(t.to_link).id, l.to));
      if (!(t.fraction >= 0.0)) throw ScenarioError(path, "turning fraction must be >= 0");
      sum += t.fraction;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ScenarioError(path, fmt::format("turning fractions sum to {}, not 1", sum));
  }

  // Routes must terminate: no cycle reachable through positive fractions.
  std::vector<int> mark(net.link_count(), 0);
  auto dfs = [&](auto&& self, std::size_t li) -> void {
    if (mark[li] == 2) return;
    if (mark[li] == 1)
      throw ScenarioError("demand.turns", fmt::format("turning fractions form a loop through '{}'", net.link(li).id));
    mark[li] = 1;
    for (const auto& t : turns[li])
      if (t.fraction > 0.0) self(self, t.to_link);
    mark[li] = 2;
  };
  for (const auto& od : origins) dfs(dfs, od.link);
}

std::vector<std::size_t> sample_route(const DemandProfile& profile, const Network& net, std::size_t origin_link,
                                      Rng& rng) {
  std::vector<std::size_t> route{origin_link};
  std::vector<double> w;
  while (!net.is_exit_link(route.back())) {
    const auto& choices = profile.turns[route.back()];
    w.clear();
    for (const auto& t : choices) w.push_back(t.fraction);
    route.push_back(choices[rng.categorical(w)].to_link);
  }
  return route;
}

std::vector<ArrivalEvent> generate_demand(const DemandProfile& profile, const Network& net, std::uint64_t seed,
                                          int horizon) {
  std::vector<ArrivalEvent> events;
  std::vector<double> class_weights;
  for (const auto& c : profile.classes) class_weights.push_back(c.share);

  for (std::size_t o = 0; o < profile.origins.size(); ++o) {
    const auto& od = profile.origins[o];
    Rng rng(seed, o + 1);
    for (std::size_t s = 0; s < od.segments.size(); ++s) {
      const double begin = od.segments[s].start;
      const double end = s + 1 < od.segments.size() ? od.segments[s + 1].start : static_cast<double>(horizon);
      const double rate = od.segments[s].vehicles_per_hour / 3600.0;
      if (rate <= 0.0 || begin >= horizon) continue;
      double t = begin;
      const double stop = std::min(end, static_cast<double>(horizon));
      while (true) {
        t += rng.exponential(rate);
        if (t >= stop) break;
        ArrivalEvent ev;
        ev.time = t;
        ev.origin = o;
        ev.route = sample_route(profile, net, od.link, rng);
        ev.vehicle_class = profile.classes.size() > 1 ? rng.categorical(class_weights) : 0;
        events.push_back(std::move(ev));
      }
    }
  }
  std::stable_sort(events.begin(), events.end(), [](const ArrivalEvent& a, const ArrivalEvent& b) {
    return a.time < b.time || (a.time == b.time && a.origin < b.origin);
  });
  return events;
}

}  // namespace fairsig
