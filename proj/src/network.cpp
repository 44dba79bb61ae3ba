#include "fairsig/network.hpp"

#include <algorithm>
#include <functional>
#include <set>

#include <fmt/format.h>

namespace fairsig {

std::string_view to_string(OriginClass c) {
  switch (c) {
    case OriginClass::Arterial: return "arterial";
    case OriginClass::Feeder: return "feeder";
    case OriginClass::Internal: return "internal";
  }
  return "internal";
}

std::optional<OriginClass> parse_origin_class(std::string_view s) {
  if (s == "arterial") return OriginClass::Arterial;
  if (s == "feeder") return OriginClass::Feeder;
  if (s == "internal") return OriginClass::Internal;
  return std::nullopt;
}

namespace {

void check_link(const Link& l, std::size_t i) {
  const auto path = fmt::format("network.links[{}]", i);
  if (l.id.empty()) throw ScenarioError(path + ".id", "empty link id");
  if (!(l.length > 0.0)) throw ScenarioError(path + ".length", fmt::format("link '{}' needs length > 0", l.id));
  if (l.lane_count < 1) throw ScenarioError(path + ".lanes", fmt::format("link '{}' needs at least one lane", l.id));
  if (!(l.free_flow_speed > 0.0))
    throw ScenarioError(path + ".speed", fmt::format("link '{}' needs free_flow_speed > 0", l.id));
  if (!(l.saturation_flow > 0.0))
    throw ScenarioError(path + ".saturation_flow", fmt::format("link '{}' needs saturation_flow > 0", l.id));
  if (l.storage_capacity < 0)
    throw ScenarioError(path + ".capacity", fmt::format("link '{}' has negative storage capacity", l.id));
  if (l.from == l.to) throw ScenarioError(path, fmt::format("link '{}' is a self loop", l.id));
}

std::vector<std::vector<std::size_t>> default_districts(std::size_t n) {
  std::vector<std::vector<std::size_t>> out;
  if (n < 3) {
    for (std::size_t i = 0; i < n; ++i) out.push_back({i});
    return out;
  }
  const std::size_t mid = (n - 1) / 2;
  std::vector<std::size_t> front, middle{mid}, back;
  for (std::size_t i = 0; i < mid; ++i) front.push_back(i);
  for (std::size_t i = mid + 1; i < n; ++i) back.push_back(i);
  out.push_back(front);
  out.push_back(middle);
  out.push_back(back);
  return out;
}

}  // namespace

Network::Network(std::vector<Link> links, std::vector<IntersectionDecl> intersections,
                 std::vector<DistrictDecl> districts)
    : links_(std::move(links)) {
  if (intersections.empty()) throw ScenarioError("network.intersections", "at least one intersection required");

  for (std::size_t i = 0; i < links_.size(); ++i) {
    check_link(links_[i], i);
    if (!link_index_.emplace(links_[i].id, i).second)
      throw ScenarioError(fmt::format("network.links[{}].id", i), fmt::format("duplicate link id '{}'", links_[i].id));
  }

  for (std::size_t n = 0; n < intersections.size(); ++n) {
    const auto& decl = intersections[n];
    const auto path = fmt::format("network.intersections[{}]", n);
    if (decl.intersection.id.empty()) throw ScenarioError(path + ".id", "empty intersection id");
    if (!node_index_.emplace(decl.intersection.id, n).second)
      throw ScenarioError(path + ".id", fmt::format("duplicate intersection id '{}'", decl.intersection.id));
    if (decl.intersection.min_green < 0) throw ScenarioError(path + ".min_green", "min_green must be >= 0");
    if (decl.intersection.yellow_time <= 0) throw ScenarioError(path + ".yellow_time", "yellow_time must be > 0");
    if (decl.phase_links.empty()) throw ScenarioError(path + ".phases", "intersection needs at least one phase");
  }

  link_owner_.assign(links_.size(), npos);
  link_phase_.assign(links_.size(), npos);
  inbound_.resize(intersections.size());

  for (std::size_t n = 0; n < intersections.size(); ++n) {
    auto& decl = intersections[n];
    Intersection x = std::move(decl.intersection);
    x.phases.clear();
    for (std::size_t j = 0; j < decl.phase_links.size(); ++j) {
      const auto path = fmt::format("network.intersections[{}].phases[{}]", n, j);
      if (decl.phase_links[j].empty()) throw ScenarioError(path, "phase has no movements");
      Phase p;
      p.id = static_cast<int>(j);
      for (std::size_t m = 0; m < decl.phase_links[j].size(); ++m) {
        const auto& lid = decl.phase_links[j][m];
        const auto mpath = fmt::format("{}[{}]", path, m);
        auto it = link_index_.find(lid);
        if (it == link_index_.end()) throw ScenarioError(mpath, fmt::format("unknown link '{}'", lid));
        const std::size_t li = it->second;
        if (links_[li].to != x.id)
          throw ScenarioError(mpath, fmt::format("link '{}' does not enter intersection '{}'", lid, x.id));
        if (link_owner_[li] != npos)
          throw ScenarioError(mpath, fmt::format("link '{}' appears in more than one phase", lid));
        link_owner_[li] = n;
        link_phase_[li] = j;
        p.movements.push_back(li);
        inbound_[n].push_back(li);
      }
      x.phases.push_back(std::move(p));
    }
    intersections_.push_back(std::move(x));
  }

  // Every link that ends at an intersection must be served by one of its phases.
  for (std::size_t i = 0; i < links_.size(); ++i) {
    if (is_intersection_node(links_[i].to) && link_owner_[i] == npos)
      throw ScenarioError(fmt::format("network.links[{}]", i),
                          fmt::format("link '{}' enters '{}' but no phase serves it", links_[i].id, links_[i].to));
  }

  order_.resize(intersections_.size());
  for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
  std::stable_sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) {
    return intersections_[a].position_index < intersections_[b].position_index;
  });
  for (std::size_t i = 1; i < order_.size(); ++i) {
    if (intersections_[order_[i]].position_index == intersections_[order_[i - 1]].position_index)
      throw ScenarioError(fmt::format("network.intersections[{}].position", order_[i]),
                          "position indices must be distinct");
  }
  position_rank_.resize(order_.size());
  for (std::size_t r = 0; r < order_.size(); ++r) position_rank_[order_[r]] = r;

  // District partition over arterial ranks.
  std::vector<std::vector<std::size_t>> groups;
  std::vector<std::string> names;
  if (districts.empty()) {
    groups = default_districts(order_.size());
    static const char* kNames[] = {"front", "middle", "back"};
    for (std::size_t d = 0; d < groups.size(); ++d)
      names.push_back(groups.size() == 3 ? kNames[d] : fmt::format("district{}", d));
  } else {
    for (std::size_t d = 0; d < districts.size(); ++d) {
      const auto path = fmt::format("network.districts[{}]", d);
      if (districts[d].intersections.empty()) throw ScenarioError(path + ".intersections", "empty district");
      std::vector<std::size_t> ranks;
      for (std::size_t k = 0; k < districts[d].intersections.size(); ++k) {
        auto it = node_index_.find(districts[d].intersections[k]);
        if (it == node_index_.end())
          throw ScenarioError(fmt::format("{}.intersections[{}]", path, k),
                              fmt::format("unknown intersection '{}'", districts[d].intersections[k]));
        ranks.push_back(position_rank_[it->second]);
      }
      std::sort(ranks.begin(), ranks.end());
      groups.push_back(ranks);
      names.push_back(districts[d].name.empty() ? fmt::format("district{}", d) : districts[d].name);
    }
  }
  std::size_t expect = 0;
  for (std::size_t d = 0; d < groups.size(); ++d) {
    for (std::size_t r : groups[d]) {
      if (r != expect)
        throw ScenarioError(fmt::format("network.districts[{}]", d),
                            "districts must be contiguous runs in position order covering every intersection once");
      ++expect;
    }
  }
  if (expect != order_.size())
    throw ScenarioError("network.districts", "districts must cover every intersection exactly once");

  district_of_.assign(intersections_.size(), npos);
  for (std::size_t d = 0; d < groups.size(); ++d) {
    District dist;
    dist.name = names[d];
    for (std::size_t r : groups[d]) {
      const std::size_t n = order_[r];
      dist.intersections.push_back(n);
      district_of_[n] = d;
      for (std::size_t li : inbound_[n]) dist.lane_count += links_[li].lane_count;
    }
    districts_.districts.push_back(std::move(dist));
  }
}

std::size_t Network::find_link(std::string_view id) const {
  auto it = link_index_.find(std::string(id));
  return it == link_index_.end() ? npos : it->second;
}

std::size_t Network::find_intersection(std::string_view id) const {
  auto it = node_index_.find(std::string(id));
  return it == node_index_.end() ? npos : it->second;
}

bool Network::is_intersection_node(std::string_view node_id) const {
  return node_index_.count(std::string(node_id)) != 0;
}

std::vector<std::size_t> Network::outgoing_links(std::string_view node_id) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < links_.size(); ++i)
    if (links_[i].from == node_id) out.push_back(i);
  return out;
}

double Network::travel_time(std::size_t n, std::size_t m) const {
  if (n >= intersections_.size() || m >= intersections_.size())
    throw std::out_of_range("travel_time: intersection index out of range");
  if (n == m) throw std::invalid_argument("travel_time: zero-length path request");
  const auto rn = position_rank_[n], rm = position_rank_[m];
  if ((rn > rm ? rn - rm : rm - rn) != 1)
    throw std::invalid_argument("travel_time: intersections are not adjacent along the arterial");

  const std::string& target = intersections_[m].id;
  std::set<std::string> visited;
  std::function<std::optional<double>(const std::string&)> walk = [&](const std::string& node) -> std::optional<double> {
    if (!visited.insert(node).second) return std::nullopt;
    for (std::size_t li : outgoing_links(node)) {
      const Link& l = links_[li];
      if (l.to == target) return l.travel_time();
      if (is_intersection_node(l.to)) continue;
      if (auto rest = walk(l.to)) return l.travel_time() + *rest;
    }
    return std::nullopt;
  };
  auto tt = walk(intersections_[n].id);
  if (!tt) throw std::invalid_argument("travel_time: no link path between adjacent intersections");
  return *tt;
}

TravelTimeMatrix Network::travel_times() const {
  TravelTimeMatrix m;
  for (std::size_t r = 0; r + 1 < order_.size(); ++r) m.hops.push_back(travel_time(order_[r], order_[r + 1]));
  return m;
}

}  // namespace fairsig
