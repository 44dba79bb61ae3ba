#include "fairsig/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <boost/math/distributions/students_t.hpp>

namespace fairsig {

double gini(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("gini of an empty set");
  std::vector<double> x(values.begin(), values.end());
  for (double v : x)
    if (!(v >= 0.0)) throw std::invalid_argument("gini needs non-negative values");
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double sum = 0.0, weighted = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sum += x[i];
    weighted += (2.0 * static_cast<double>(i + 1) - n - 1.0) * x[i];
  }
  return sum > 0.0 ? weighted / (n * sum) : 0.0;
}

double mean(std::span<const double> v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double stddev(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

Quartet fairness_quartet(std::span<const DelayEntry> entries) {
  if (entries.empty()) throw std::invalid_argument("fairness quartet of an empty ledger");
  std::vector<double> d;
  d.reserve(entries.size());
  Quartet q;
  for (const DelayEntry& e : entries) {
    d.push_back(e.delay);
    q.total_travel_time += e.travel_time;
  }
  q.total_travel_time /= 3600.0;
  q.gini = gini(d);
  q.max_delay = *std::max_element(d.begin(), d.end());
  q.avg_delay = mean(d);
  q.median_delay = median(d);
  q.count = d.size();
  return q;
}

HorizontalEquity horizontal_equity(const DelayLedger& ledger) {
  HorizontalEquity h;
  std::vector<DelayEntry> art, feed;
  for (const DelayEntry& e : ledger.entries) {
    if (e.origin_class == OriginClass::Arterial)
      art.push_back(e);
    else if (e.origin_class == OriginClass::Feeder)
      feed.push_back(e);
    else
      ++h.internal_excluded;
  }
  const auto fill = [](ClassEquity& out, const std::vector<DelayEntry>& es) {
    if (es.empty()) return;
    out.raw = fairness_quartet(es);
    std::vector<DelayEntry> km = es;
    for (DelayEntry& e : km) e.delay = e.delay / (e.distance / 1000.0);
    Quartet q = fairness_quartet(km);
    q.total_travel_time = 0.0;
    out.per_km = q;
  };
  fill(h.arterial, art);
  fill(h.feeder, feed);
  return h;
}

std::vector<MfdBin> mfd(std::span<const StepRecord> step_log, int horizon, int window) {
  if (window <= 0) throw std::invalid_argument("mfd window must be positive");
  std::vector<MfdBin> bins;
  for (int start = 0; start < horizon; start += window) {
    MfdBin b;
    b.window_start = start;
    bins.push_back(b);
  }
  std::vector<double> present(bins.size(), 0.0), speed(bins.size(), 0.0);
  std::vector<int> steps(bins.size(), 0), moving(bins.size(), 0);
  int prev_exits = 0;
  for (const StepRecord& r : step_log) {
    if (r.clock < 0 || r.clock >= horizon) continue;
    const std::size_t i = static_cast<std::size_t>(r.clock / window);
    bins[i].exits += r.exited_cum - prev_exits;
    prev_exits = r.exited_cum;
    present[i] += r.vehicles_present;
    ++steps[i];
    speed[i] += r.speed_sum;
    moving[i] += r.moving;
  }
  for (std::size_t i = 0; i < bins.size(); ++i) {
    bins[i].flow = bins[i].exits * 3600.0 / window;
    bins[i].density = steps[i] ? present[i] / steps[i] : 0.0;
    bins[i].speed = moving[i] ? speed[i] / moving[i] : 0.0;
  }
  return bins;
}

Efficiency efficiency(std::span<const StepRecord> step_log) {
  Efficiency e;
  if (step_log.empty()) return e;
  e.throughput = step_log.back().exited_cum;
  e.entered = step_log.back().entered_cum;
  double speed = 0.0;
  long moving = 0;
  for (const StepRecord& r : step_log) {
    speed += r.speed_sum;
    moving += r.moving;
  }
  e.mean_speed = moving ? speed / static_cast<double>(moving) : 0.0;
  return e;
}

WelchResult welch_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw std::invalid_argument("welch test needs at least two samples per group");
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double va = std::pow(stddev(a), 2) / na, vb = std::pow(stddev(b), 2) / nb;
  WelchResult r;
  const double diff = mean(a) - mean(b);
  if (va + vb == 0.0) {
    if (diff == 0.0) return r;
    r.t = diff > 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
    r.df = na + nb - 2.0;
    r.p = 0.0;
    return r;
  }
  r.t = diff / std::sqrt(va + vb);
  r.df = (va + vb) * (va + vb) / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
  const boost::math::students_t dist(r.df);
  r.p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t)));
  return r;
}

std::string significance_marker(std::span<const double> baseline, std::span<const double> sample) {
  const WelchResult w = welch_t_test(baseline, sample);
  int level = 0;
  if (w.p < 0.01)
    level = 3;
  else if (w.p < 0.02)
    level = 2;
  else if (w.p < 0.05)
    level = 1;
  if (level == 0) return {};
  return std::string(static_cast<std::size_t>(level), mean(sample) > mean(baseline) ? '+' : '-');
}

}  // namespace fairsig
