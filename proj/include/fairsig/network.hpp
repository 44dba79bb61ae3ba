#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace fairsig {

inline constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

enum class OriginClass { Arterial, Feeder, Internal };

std::string_view to_string(OriginClass c);
std::optional<OriginClass> parse_origin_class(std::string_view s);

/// Raised for any structural or physical inconsistency in a scenario. `path`
/// points into the scenario document, e.g. `network.links[3].length`.
class ScenarioError : public std::runtime_error {
 public:
  ScenarioError(std::string path, const std::string& what)
      : std::runtime_error(path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

struct Link {
  std::string id;
  std::string from;
  std::string to;
  double length = 0.0;           // m
  int lane_count = 1;
  double free_flow_speed = 0.0;  // m/s
  double saturation_flow = 0.0;  // veh/s of green, per lane
  OriginClass origin_class = OriginClass::Internal;
  bool has_stopline_detector = true;
  int storage_capacity = 0;      // vehicles; 0 means unbounded

  double travel_time() const { return length / free_flow_speed; }
  /// Ideal headway at the stop line for the link as a whole.
  double optimal_space_time() const { return 1.0 / (saturation_flow * lane_count); }
  double discharge_rate() const { return saturation_flow * lane_count; }
};

struct Phase {
  int id = 0;
  std::vector<std::size_t> movements;  // inbound link indices
};

struct Intersection {
  std::string id;
  std::vector<Phase> phases;
  int min_green = 5;
  int yellow_time = 3;
  int position_index = 0;
};

struct District {
  std::string name;
  std::vector<std::size_t> intersections;
  int lane_count = 0;
};

struct DistrictPartition {
  std::vector<District> districts;
};

/// Free-flow travel time between consecutive intersections in arterial order:
/// hops[i] is the time from the i-th to the (i+1)-th intersection.
struct TravelTimeMatrix {
  std::vector<double> hops;
};

/// Immutable corridor description. Construction validates every invariant and
/// throws ScenarioError naming the offending document path.
class Network {
 public:
  struct IntersectionDecl {
    Intersection intersection;
    std::vector<std::vector<std::string>> phase_links;
  };
  struct DistrictDecl {
    std::string name;
    std::vector<std::string> intersections;
  };

  Network(std::vector<Link> links, std::vector<IntersectionDecl> intersections,
          std::vector<DistrictDecl> districts);

  std::size_t link_count() const { return links_.size(); }
  std::size_t intersection_count() const { return intersections_.size(); }
  const std::vector<Link>& links() const { return links_; }
  const Link& link(std::size_t i) const { return links_.at(i); }
  const std::vector<Intersection>& intersections() const { return intersections_; }
  const Intersection& intersection(std::size_t i) const { return intersections_.at(i); }
  const DistrictPartition& districts() const { return districts_; }

  std::size_t find_link(std::string_view id) const;
  std::size_t find_intersection(std::string_view id) const;

  /// Intersection whose stop line terminates this link, or npos for exit links.
  std::size_t controlling_intersection(std::size_t link) const { return link_owner_.at(link); }
  /// Phase index (within the controlling intersection) serving this link, or npos.
  std::size_t phase_of(std::size_t link) const { return link_phase_.at(link); }
  /// Inbound controlled links of an intersection, in phase order.
  const std::vector<std::size_t>& inbound_links(std::size_t n) const { return inbound_.at(n); }
  /// Links leaving the node `node_id` in document order.
  std::vector<std::size_t> outgoing_links(std::string_view node_id) const;
  bool is_intersection_node(std::string_view node_id) const;
  bool is_exit_link(std::size_t link) const { return link_owner_.at(link) == npos; }

  /// Intersection indices sorted by position_index (front to back).
  const std::vector<std::size_t>& arterial_order() const { return order_; }
  /// Index in arterial_order() of intersection n.
  std::size_t position_of(std::size_t n) const { return position_rank_.at(n); }
  std::size_t district_of(std::size_t n) const { return district_of_.at(n); }

  /// Free-flow time along the connecting path between two intersections that
  /// are adjacent in arterial order.
  double travel_time(std::size_t n, std::size_t m) const;
  TravelTimeMatrix travel_times() const;

 private:
  std::vector<Link> links_;
  std::vector<Intersection> intersections_;
  DistrictPartition districts_;
  std::unordered_map<std::string, std::size_t> link_index_;
  std::unordered_map<std::string, std::size_t> node_index_;
  std::vector<std::size_t> link_owner_;
  std::vector<std::size_t> link_phase_;
  std::vector<std::vector<std::size_t>> inbound_;
  std::vector<std::size_t> order_;
  std::vector<std::size_t> position_rank_;
  std::vector<std::size_t> district_of_;
};

}  // namespace fairsig
