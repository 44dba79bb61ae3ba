#include "fairsig/microsim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

namespace fairsig {

void DetectorBank::record_step(std::size_t link, bool green, bool occupied, int discharged) {
  auto& d = current_.at(link);
  if (!green) return;
  ++d.green_seconds;
  if (!occupied) ++d.unoccupied_seconds;
  d.discharged += discharged;
}

void DetectorBank::close_cycle(std::size_t link, int cycle) {
  closed_.at(link)[cycle] = current_.at(link);
  current_[link] = DetectorReading{};
}

DetectorReading DetectorBank::read(std::size_t link, int cycle) const {
  const auto& m = closed_.at(link);
  auto it = m.find(cycle);
  if (it == m.end()) throw std::out_of_range(fmt::format("detector cycle {} not complete for link {}", cycle, link));
  return it->second;
}

DetectorReading read_cycle_detectors(const DetectorBank& bank, std::size_t link, int cycle) {
  return bank.read(link, cycle);
}

double vehicle_delay(const Vehicle& v) {
  if (!v.exit_time) throw std::logic_error(fmt::format("vehicle {} is still in the network", v.id));
  return std::max(0.0, (*v.exit_time - v.entry_time) - v.free_flow_time);
}

double delay_so_far(const Vehicle& v, const Network& net, double now) {
  if (v.exit_time) return vehicle_delay(v);
  double ff = 0.0;
  for (std::size_t i = 0; i < v.leg && i < v.route.size(); ++i) ff += net.link(v.route[i]).travel_time();
  if (v.leg < v.route.size())
    ff += std::clamp(now - v.link_entry_time, 0.0, net.link(v.route[v.leg]).travel_time());
  return std::max(0.0, (now - v.entry_time) - ff);
}

Simulation::Simulation(const Network& net, const DemandProfile& demand, std::vector<ArrivalEvent> arrivals,
                       SimOptions options)
    : net_(&net),
      demand_(&demand),
      options_(options),
      arrivals_(std::move(arrivals)),
      backlog_(demand.origins.size()),
      links_(net.link_count()),
      crossings_(net.link_count()),
      detectors_(net.link_count()) {
  for (auto& s : links_) s.credit = 0.0;
}

bool Simulation::has_room(std::size_t link) const {
  if (!options_.spillback) return true;
  const int cap = net_->link(link).storage_capacity;
  return cap <= 0 || vehicles_on(link) < cap;
}

void Simulation::move_to(std::size_t vi, std::size_t leg, double at) {
  Vehicle& v = vehicles_[vi];
  v.leg = leg;
  v.link_entry_time = at;
  v.ready_time = at + net_->link(v.route[leg]).travel_time();
  v.queue_join = -1;
  links_[v.route[leg]].in_transit.push_back(vi);
}

void Simulation::inject(double until) {
  while (next_arrival_ < arrivals_.size() && arrivals_[next_arrival_].time < until) {
    const ArrivalEvent& ev = arrivals_[next_arrival_++];
    Vehicle v;
    v.id = vehicles_.size() + 1;
    v.route = ev.route;
    v.entry_time = ev.time;
    v.origin_class = net_->link(ev.route.front()).origin_class;
    for (std::size_t li : v.route) {
      v.distance += net_->link(li).length;
      v.free_flow_time += net_->link(li).travel_time();
    }
    v.vehicle_class = ev.vehicle_class;
    v.pce = demand_->classes.at(ev.vehicle_class).pce;
    vehicles_.push_back(std::move(v));
    ++entered_;
    ++present_;
    backlog_[ev.origin].push_back(vehicles_.size() - 1);
  }
  for (std::size_t o = 0; o < backlog_.size(); ++o) {
    const std::size_t origin_link = demand_->origins[o].link;
    while (!backlog_[o].empty() && has_room(origin_link)) {
      const std::size_t vi = backlog_[o].front();
      backlog_[o].pop_front();
      // A held vehicle enters as soon as there is room; its clock started at arrival.
      move_to(vi, 0, std::max(vehicles_[vi].entry_time, static_cast<double>(clock_)));
    }
  }
}

void Simulation::step(std::span<const Face> faces) {
  if (faces.size() != net_->link_count()) throw std::invalid_argument("faces must cover every link");
  const int t = clock_;
  inject(t + 1.0);
  arrivals_last_.clear();

  // Stop-line arrivals and exits.
  for (std::size_t li = 0; li < links_.size(); ++li) {
    auto& s = links_[li];
    const bool exit_link = net_->is_exit_link(li);
    while (!s.in_transit.empty()) {
      const std::size_t vi = s.in_transit.front();
      Vehicle& v = vehicles_[vi];
      if (exit_link) {
        if (!(v.ready_time < t + 1.0)) break;
        s.in_transit.pop_front();
        v.exit_time = v.ready_time;
        v.leg = v.route.size();
        ++exited_;
        --present_;
      } else {
        if (!(v.ready_time <= t)) break;
        s.in_transit.pop_front();
        v.queue_join = t;
        s.queue.push_back(vi);
        s.queued_pce += v.pce;
        arrivals_last_.push_back({li, vi, faces[li]});
      }
    }
  }

  // Discharge on green.
  for (std::size_t li = 0; li < links_.size(); ++li) {
    if (net_->is_exit_link(li)) continue;
    auto& s = links_[li];
    const Link& link = net_->link(li);
    if (faces[li] != Face::Green) {
      s.credit = 0.0;
      detectors_.record_step(li, false, false, 0);
      continue;
    }
    const double rate = link.discharge_rate();
    const bool occupied = !s.queue.empty();
    const double head_pce = s.queue.empty() ? 1.0 : vehicles_[s.queue.front()].pce;
    s.credit = std::min(s.credit + rate, std::max(rate, head_pce));
    const int limit = std::max(1, static_cast<int>(std::ceil(rate - 1e-12)));
    int departures = 0;
    while (!s.queue.empty() && departures < limit) {
      const std::size_t vi = s.queue.front();
      Vehicle& v = vehicles_[vi];
      if (s.credit + 1e-9 < v.pce) break;
      const std::size_t next = v.route[v.leg + 1];
      if (!has_room(next)) break;
      s.queue.pop_front();
      s.queued_pce -= v.pce;
      s.credit -= v.pce;
      crossings_[li].push_back(vi);
      move_to(vi, v.leg + 1, t);
      ++departures;
    }
    if (s.queue.empty()) s.queued_pce = 0.0;
    detectors_.record_step(li, true, occupied, departures);
  }

  // Anyone still queued waited this second.
  int moving = 0;
  int counted = 0;
  double speed_sum = 0.0;
  for (std::size_t li = 0; li < links_.size(); ++li) {
    auto& s = links_[li];
    double total = 0.0;
    for (std::size_t vi : s.queue) {
      Vehicle& v = vehicles_[vi];
      ++v.cumulative_wait;
      total += (t + 1) - v.queue_join;
    }
    s.waiting_total = total;
    moving += static_cast<int>(s.in_transit.size());
    counted += static_cast<int>(s.in_transit.size() + s.queue.size());
    speed_sum += static_cast<double>(s.in_transit.size()) * net_->link(li).free_flow_speed;
  }

  for (const auto& b : backlog_) counted += static_cast<int>(b.size());
  if (counted != present_ || entered_ != exited_ + counted) conservation_ok_ = false;

  clock_ = t + 1;
  if (options_.record_steps) steps_.push_back({t, counted, entered_, exited_, moving, speed_sum});
}

}  // namespace fairsig
