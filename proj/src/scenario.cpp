#include "fairsig/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

namespace fairsig {

std::string_view to_string(ControllerKind k) {
  switch (k) {
    case ControllerKind::Fixed: return "fixed";
    case ControllerKind::MaxPressure: return "maxpressure";
    case ControllerKind::Scosca: return "scosca";
    case ControllerKind::Fair1: return "fairscosca1";
    case ControllerKind::Fair2: return "fairscosca2";
  }
  return "scosca";
}

std::optional<ControllerKind> parse_controller(std::string_view s) {
  for (ControllerKind k : all_controllers())
    if (to_string(k) == s) return k;
  return std::nullopt;
}

const std::vector<ControllerKind>& all_controllers() {
  static const std::vector<ControllerKind> all{ControllerKind::Fixed, ControllerKind::MaxPressure,
                                               ControllerKind::Scosca, ControllerKind::Fair1, ControllerKind::Fair2};
  return all;
}

namespace {

// A YAML node together with its document path; every accessor reports errors
// against that path.
class Doc {
 public:
  Doc(YAML::Node node, std::string path) : node_(std::move(node)), path_(std::move(path)) {}

  const std::string& path() const { return path_; }
  const YAML::Node& node() const { return node_; }
  bool is_map() const { return node_.IsMap(); }
  bool is_seq() const { return node_.IsSequence(); }

  Doc key(const std::string& k) const { return Doc(node_[k], join(k)); }
  Doc at(std::size_t i) const { return Doc(node_[i], fmt::format("{}[{}]", path_, i)); }
  bool has(const std::string& k) const { return node_.IsMap() && node_[k].IsDefined() && !node_[k].IsNull(); }
  std::size_t size() const { return node_.size(); }

  void expect_map() const {
    if (!node_.IsMap()) throw ScenarioError(path_, "expected a mapping");
  }
  void expect_seq() const {
    if (!node_.IsSequence()) throw ScenarioError(path_, "expected a list");
  }
  void allow_keys(std::initializer_list<const char*> keys) const {
    expect_map();
    for (const auto& kv : node_) {
      const auto k = kv.first.as<std::string>();
      if (std::none_of(keys.begin(), keys.end(), [&](const char* a) { return k == a; }))
        throw ScenarioError(join(k), "unknown key");
    }
  }

  template <typename T>
  T as() const {
    if (!node_.IsDefined() || node_.IsNull()) throw ScenarioError(path_, "missing value");
    try {
      return node_.as<T>();
    } catch (const YAML::Exception&) {
      throw ScenarioError(path_, "value has the wrong type");
    }
  }
  template <typename T>
  T get(const std::string& k, T fallback) const {
    return has(k) ? key(k).as<T>() : fallback;
  }
  template <typename T>
  T require(const std::string& k) const {
    if (!has(k)) throw ScenarioError(join(k), "required key missing");
    return key(k).as<T>();
  }

 private:
  std::string join(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }

  YAML::Node node_;
  std::string path_;
};

double read_ttg(const Doc& d) {
  if (d.node().IsScalar()) {
    const auto s = d.node().as<std::string>();
    if (s == "inf" || s == ".inf" || s == "infinity") return std::numeric_limits<double>::infinity();
  }
  return d.as<double>();
}

std::shared_ptr<const Network> parse_network(const Doc& net) {
  net.allow_keys({"links", "intersections", "districts"});
  const Doc links = net.key("links");
  links.expect_seq();
  std::vector<Link> out;
  for (std::size_t i = 0; i < links.size(); ++i) {
    const Doc l = links.at(i);
    l.allow_keys({"id", "from", "to", "length", "lanes", "speed", "saturation_flow", "origin_class", "detector",
                  "capacity"});
    Link link;
    link.id = l.require<std::string>("id");
    link.from = l.require<std::string>("from");
    link.to = l.require<std::string>("to");
    link.length = l.require<double>("length");
    link.lane_count = l.get<int>("lanes", 1);
    link.free_flow_speed = l.require<double>("speed");
    link.saturation_flow = l.get<double>("saturation_flow", 0.5);
    const auto cls = l.get<std::string>("origin_class", "internal");
    const auto parsed = parse_origin_class(cls);
    if (!parsed) throw ScenarioError(l.path() + ".origin_class", fmt::format("unknown origin class '{}'", cls));
    link.origin_class = *parsed;
    link.has_stopline_detector = l.get<bool>("detector", true);
    link.storage_capacity = l.get<int>("capacity", 0);
    out.push_back(std::move(link));
  }

  const Doc xs = net.key("intersections");
  xs.expect_seq();
  std::vector<Network::IntersectionDecl> decls;
  for (std::size_t n = 0; n < xs.size(); ++n) {
    const Doc x = xs.at(n);
    x.allow_keys({"id", "position", "min_green", "yellow_time", "phases"});
    Network::IntersectionDecl d;
    d.intersection.id = x.require<std::string>("id");
    d.intersection.position_index = x.get<int>("position", static_cast<int>(n) + 1);
    d.intersection.min_green = x.get<int>("min_green", 5);
    d.intersection.yellow_time = x.get<int>("yellow_time", 3);
    const Doc phases = x.key("phases");
    phases.expect_seq();
    for (std::size_t j = 0; j < phases.size(); ++j) {
      const Doc p = phases.at(j);
      p.expect_seq();
      std::vector<std::string> ids;
      for (std::size_t m = 0; m < p.size(); ++m) ids.push_back(p.at(m).as<std::string>());
      d.phase_links.push_back(std::move(ids));
    }
    decls.push_back(std::move(d));
  }

  std::vector<Network::DistrictDecl> districts;
  if (net.has("districts")) {
    const Doc ds = net.key("districts");
    ds.expect_seq();
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const Doc d = ds.at(i);
      d.allow_keys({"name", "intersections"});
      Network::DistrictDecl decl;
      decl.name = d.get<std::string>("name", "");
      const Doc members = d.key("intersections");
      members.expect_seq();
      for (std::size_t k = 0; k < members.size(); ++k) decl.intersections.push_back(members.at(k).as<std::string>());
      districts.push_back(std::move(decl));
    }
  }
  return std::make_shared<const Network>(std::move(out), std::move(decls), std::move(districts));
}

std::size_t link_ref(const Network& net, const Doc& d) {
  const auto id = d.as<std::string>();
  const std::size_t li = net.find_link(id);
  if (li == npos) throw ScenarioError(d.path(), fmt::format("unknown link '{}'", id));
  return li;
}

DemandProfile parse_demand(const Doc& dem, const Network& net) {
  dem.allow_keys({"origins", "turns", "classes"});
  DemandProfile p;
  p.turns.assign(net.link_count(), {});
  if (dem.has("classes")) {
    const Doc cs = dem.key("classes");
    cs.expect_seq();
    p.classes.clear();
    for (std::size_t c = 0; c < cs.size(); ++c) {
      const Doc d = cs.at(c);
      d.allow_keys({"name", "share", "pce"});
      p.classes.push_back({d.get<std::string>("name", fmt::format("class{}", c)), d.require<double>("share"),
                           d.get<double>("pce", 1.0)});
    }
  }

  const Doc os = dem.key("origins");
  os.expect_seq();
  for (std::size_t o = 0; o < os.size(); ++o) {
    const Doc d = os.at(o);
    d.allow_keys({"link", "rates"});
    OriginDemand od;
    od.link = link_ref(net, d.key("link"));
    const Doc rates = d.key("rates");
    rates.expect_seq();
    for (std::size_t s = 0; s < rates.size(); ++s) {
      const Doc r = rates.at(s);
      r.expect_seq();
      if (r.size() != 2) throw ScenarioError(r.path(), "rate segment is [start_s, vehicles_per_hour]");
      od.segments.push_back({r.at(0).as<int>(), r.at(1).as<double>()});
    }
    p.origins.push_back(std::move(od));
  }

  if (dem.has("turns")) {
    const Doc ts = dem.key("turns");
    ts.expect_map();
    for (const auto& kv : ts.node()) {
      const auto from = kv.first.as<std::string>();
      const Doc entry = ts.key(from);
      const std::size_t li = net.find_link(from);
      if (li == npos) throw ScenarioError(entry.path(), fmt::format("unknown link '{}'", from));
      entry.expect_map();
      for (const auto& tv : entry.node()) {
        const auto to = tv.first.as<std::string>();
        const Doc frac = entry.key(to);
        const std::size_t tj = net.find_link(to);
        if (tj == npos) throw ScenarioError(frac.path(), fmt::format("unknown link '{}'", to));
        p.turns[li].push_back({tj, frac.as<double>()});
      }
    }
  }
  // A link with a single continuation needs no explicit entry.
  for (std::size_t li = 0; li < net.link_count(); ++li) {
    if (!p.turns[li].empty() || net.is_exit_link(li)) continue;
    const auto next = net.outgoing_links(net.link(li).to);
    if (next.size() == 1) p.turns[li].push_back({next.front(), 1.0});
  }
  p.validate(net);
  return p;
}

void parse_scosca(const Doc& d, ScoscaParams& p) {
  d.allow_keys({"lambda1", "lambda2", "lambda3", "tau1", "tau2", "g_min", "g_max", "cycle_min", "cycle_max",
                "ds_target_hi", "ds_target_lo", "cycle_opt_period", "offset_opt_period", "offset_cap"});
  p.lambda1 = d.get("lambda1", p.lambda1);
  p.lambda2 = d.get("lambda2", p.lambda2);
  p.lambda3 = d.get("lambda3", p.lambda3);
  p.tau1 = d.get("tau1", p.tau1);
  p.tau2 = d.get("tau2", p.tau2);
  p.g_min = d.get("g_min", p.g_min);
  p.g_max = d.get("g_max", p.g_max);
  p.cycle_min = d.get("cycle_min", p.cycle_min);
  p.cycle_max = d.get("cycle_max", p.cycle_max);
  p.ds_target_hi = d.get("ds_target_hi", p.ds_target_hi);
  p.ds_target_lo = d.get("ds_target_lo", p.ds_target_lo);
  p.cycle_opt_period = d.get("cycle_opt_period", p.cycle_opt_period);
  p.offset_opt_period = d.get("offset_opt_period", p.offset_opt_period);
  if (d.has("offset_cap")) {
    const auto mode = d.key("offset_cap").as<std::string>();
    if (mode == "modulo")
      p.offset_cap = OffsetCap::Modulo;
    else if (mode == "clamp")
      p.offset_cap = OffsetCap::Clamp;
    else
      throw ScenarioError(d.path() + ".offset_cap", "expected 'modulo' or 'clamp'");
  }
  try {
    p.validate();
  } catch (const std::invalid_argument& e) {
    throw ScenarioError(d.path(), e.what());
  }
}

SignalPlan parse_plan(const Doc& d, const Network& net) {
  d.allow_keys({"cycle", "intersections"});
  const int cycle = d.require<int>("cycle");
  SignalPlan plan;
  std::vector<bool> given(net.intersection_count(), false);
  for (std::size_t n = 0; n < net.intersection_count(); ++n) {
    const Intersection& x = net.intersection(n);
    IntersectionTiming t;
    t.cycle = cycle;
    const int p = static_cast<int>(x.phases.size());
    const int budget = cycle - p * x.yellow_time;
    if (budget < p) throw ScenarioError(d.path() + ".cycle", fmt::format("cycle too short for '{}'", x.id));
    for (int j = 0; j < p; ++j) t.greens.push_back(budget / p + (j < budget % p ? 1 : 0));
    plan.timings.push_back(std::move(t));
  }
  if (d.has("intersections")) {
    const Doc xs = d.key("intersections");
    xs.expect_map();
    for (const auto& kv : xs.node()) {
      const auto id = kv.first.as<std::string>();
      const Doc e = xs.key(id);
      const std::size_t n = net.find_intersection(id);
      if (n == npos) throw ScenarioError(e.path(), fmt::format("unknown intersection '{}'", id));
      e.allow_keys({"greens", "offset"});
      IntersectionTiming& t = plan.timings[n];
      if (e.has("greens")) {
        const Doc g = e.key("greens");
        g.expect_seq();
        t.greens.clear();
        for (std::size_t j = 0; j < g.size(); ++j) t.greens.push_back(g.at(j).as<int>());
      }
      t.offset = e.get<int>("offset", 0);
      given[n] = true;
    }
  }
  for (std::size_t n = 0; n < net.intersection_count(); ++n) {
    const Intersection& x = net.intersection(n);
    try {
      validate_timing(plan.timings[n], x.yellow_time, x.phases.size(), GreenBounds{x.min_green, 1 << 20});
    } catch (const PlanError& e) {
      throw ScenarioError(fmt::format("{}.intersections.{}", d.path(), x.id), e.what());
    }
  }
  return plan;
}

ControllerConfig parse_controller_section(const Doc& d, const Network& net) {
  d.allow_keys({"plan", "maxpressure", "scosca", "fairscosca1", "fairscosca2"});
  ControllerConfig c;
  c.plan = parse_plan(d.key("plan"), net);
  if (d.has("maxpressure")) {
    const Doc m = d.key("maxpressure");
    m.allow_keys({"decision_interval", "pce_weighted", "min_green"});
    c.maxpressure.decision_interval = m.get("decision_interval", c.maxpressure.decision_interval);
    c.maxpressure.pce_weighted = m.get("pce_weighted", c.maxpressure.pce_weighted);
    c.maxpressure_min_green = m.get("min_green", c.maxpressure_min_green);
    if (c.maxpressure.decision_interval <= 0)
      throw ScenarioError(m.path() + ".decision_interval", "must be positive");
  }
  if (d.has("scosca")) parse_scosca(d.key("scosca"), c.scosca);
  if (d.has("fairscosca1")) {
    const Doc f = d.key("fairscosca1");
    f.allow_keys({"alpha", "theta"});
    c.fair1.alpha = f.get("alpha", c.fair1.alpha);
    c.fair1.theta = f.get("theta", c.fair1.theta);
    try {
      c.fair1.validate();
    } catch (const std::invalid_argument& e) {
      throw ScenarioError(f.path(), e.what());
    }
  }
  if (d.has("fairscosca2")) {
    const Doc f = d.key("fairscosca2");
    f.allow_keys({"ttg", "teg"});
    if (f.has("ttg")) c.fair2.ttg = read_ttg(f.key("ttg"));
    c.fair2.teg = f.get("teg", c.fair2.teg);
    try {
      c.fair2.validate();
    } catch (const std::invalid_argument& e) {
      throw ScenarioError(f.path(), e.what());
    }
  }
  return c;
}

std::vector<ControllerKind> parse_kinds(const Doc& d) {
  d.expect_seq();
  std::vector<ControllerKind> out;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto s = d.at(i).as<std::string>();
    const auto k = parse_controller(s);
    if (!k) throw ScenarioError(d.at(i).path(), fmt::format("unknown controller '{}'", s));
    out.push_back(*k);
  }
  return out;
}

RunsConfig parse_runs(const Doc& d) {
  RunsConfig r;
  if (!d.node().IsDefined() || d.node().IsNull()) return r;
  d.allow_keys({"horizon", "seeds", "controllers", "baseline", "spillback"});
  r.horizon = d.get("horizon", r.horizon);
  if (r.horizon <= 0) throw ScenarioError(d.path() + ".horizon", "horizon must be positive");
  if (d.has("seeds")) {
    const Doc s = d.key("seeds");
    r.seeds.clear();
    if (s.is_map()) {
      s.allow_keys({"first", "count"});
      const auto first = s.get<std::uint64_t>("first", 1);
      const auto count = s.require<int>("count");
      if (count < 1) throw ScenarioError(s.path() + ".count", "need at least one seed");
      for (int i = 0; i < count; ++i) r.seeds.push_back(first + static_cast<std::uint64_t>(i));
    } else {
      s.expect_seq();
      for (std::size_t i = 0; i < s.size(); ++i) r.seeds.push_back(s.at(i).as<std::uint64_t>());
    }
    std::set<std::uint64_t> distinct(r.seeds.begin(), r.seeds.end());
    if (distinct.size() != r.seeds.size()) throw ScenarioError(s.path(), "seeds must be distinct");
    if (r.seeds.empty()) throw ScenarioError(s.path(), "need at least one seed");
  }
  if (d.has("controllers")) r.controllers = parse_kinds(d.key("controllers"));
  if (d.has("baseline")) {
    const auto s = d.key("baseline").as<std::string>();
    const auto k = parse_controller(s);
    if (!k) throw ScenarioError(d.path() + ".baseline", fmt::format("unknown controller '{}'", s));
    r.baseline = *k;
  }
  r.spillback = d.get("spillback", r.spillback);
  return r;
}

}  // namespace

Scenario parse_scenario(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ScenarioError("", fmt::format("document does not parse: {}", e.what()));
  }
  const Doc doc(root, "");
  doc.allow_keys({"network", "demand", "controller", "metrics", "runs"});
  Scenario s;
  s.network = parse_network(doc.key("network"));
  s.demand = parse_demand(doc.key("demand"), *s.network);
  s.controller = parse_controller_section(doc.key("controller"), *s.network);
  if (doc.has("metrics")) {
    const Doc m = doc.key("metrics");
    m.allow_keys({"mfd_window", "warmup"});
    s.metrics.mfd_window = m.get("mfd_window", s.metrics.mfd_window);
    s.metrics.warmup = m.get("warmup", s.metrics.warmup);
    if (s.metrics.mfd_window <= 0) throw ScenarioError("metrics.mfd_window", "must be positive");
    if (s.metrics.warmup < 0) throw ScenarioError("metrics.warmup", "must be >= 0");
  }
  s.runs = parse_runs(doc.key("runs"));
  s.source_text = text;
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ScenarioError("", fmt::format("cannot open '{}'", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

namespace {

struct ParamSlot {
  const char* name;
  std::function<double&(ControllerConfig&)> real;
  std::function<int&(ControllerConfig&)> integer;
};

const std::vector<ParamSlot>& slots() {
  static const std::vector<ParamSlot> s = [] {
    std::vector<ParamSlot> v;
    const auto real = [&v](const char* n, double& (*f)(ControllerConfig&)) { v.push_back({n, f, nullptr}); };
    const auto integer = [&v](const char* n, int& (*f)(ControllerConfig&)) { v.push_back({n, nullptr, f}); };
    real("scosca.lambda1", [](ControllerConfig& c) -> double& { return c.scosca.lambda1; });
    real("scosca.lambda2", [](ControllerConfig& c) -> double& { return c.scosca.lambda2; });
    real("scosca.lambda3", [](ControllerConfig& c) -> double& { return c.scosca.lambda3; });
    real("scosca.tau1", [](ControllerConfig& c) -> double& { return c.scosca.tau1; });
    real("scosca.tau2", [](ControllerConfig& c) -> double& { return c.scosca.tau2; });
    integer("scosca.g_min", [](ControllerConfig& c) -> int& { return c.scosca.g_min; });
    integer("scosca.g_max", [](ControllerConfig& c) -> int& { return c.scosca.g_max; });
    integer("scosca.cycle_min", [](ControllerConfig& c) -> int& { return c.scosca.cycle_min; });
    integer("scosca.cycle_max", [](ControllerConfig& c) -> int& { return c.scosca.cycle_max; });
    real("fairscosca1.alpha", [](ControllerConfig& c) -> double& { return c.fair1.alpha; });
    real("fairscosca1.theta", [](ControllerConfig& c) -> double& { return c.fair1.theta; });
    real("fairscosca2.ttg", [](ControllerConfig& c) -> double& { return c.fair2.ttg; });
    integer("fairscosca2.teg", [](ControllerConfig& c) -> int& { return c.fair2.teg; });
    integer("maxpressure.decision_interval",
            [](ControllerConfig& c) -> int& { return c.maxpressure.decision_interval; });
    return v;
  }();
  return s;
}

const ParamSlot& slot(std::string_view name) {
  for (const auto& s : slots())
    if (name == s.name) return s;
  throw std::invalid_argument(fmt::format("unknown parameter '{}'", name));
}

}  // namespace

const std::vector<std::string>& parameter_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& s : slots()) v.emplace_back(s.name);
    return v;
  }();
  return names;
}

void set_parameter(ControllerConfig& config, std::string_view name, double value) {
  const ParamSlot& s = slot(name);
  if (s.real)
    s.real(config) = value;
  else
    s.integer(config) = static_cast<int>(std::lround(value));
}

double get_parameter(const ControllerConfig& config, std::string_view name) {
  const ParamSlot& s = slot(name);
  ControllerConfig c = config;
  return s.real ? s.real(c) : s.integer(c);
}

}  // namespace fairsig
