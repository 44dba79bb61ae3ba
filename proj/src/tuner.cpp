#include "fairsig/tuner.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>
#include <thread>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <fmt/format.h>

#include "fairsig/demand.hpp"
#include "fairsig/runner.hpp"

namespace fairsig {

void ParamSpace::validate() const {
  if (params.empty()) throw std::invalid_argument("parameter space is empty");
  for (const ParamSpec& p : params) {
    if (!(p.lo < p.hi)) throw std::invalid_argument(fmt::format("parameter '{}' needs lo < hi", p.name));
    if (p.log_scale && !(p.lo > 0.0))
      throw std::invalid_argument(fmt::format("log-scaled parameter '{}' needs lo > 0", p.name));
  }
}

std::optional<TunerStrategy> parse_strategy(std::string_view s) {
  if (s == "random") return TunerStrategy::Random;
  if (s == "surrogate") return TunerStrategy::Surrogate;
  return std::nullopt;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double from_unit(const ParamSpec& p, double u) {
  double v = p.log_scale ? std::exp(std::log(p.lo) + u * (std::log(p.hi) - std::log(p.lo))) : p.lo + u * (p.hi - p.lo);
  if (p.integer) v = std::clamp(std::round(v), std::ceil(p.lo), std::floor(p.hi));
  return v;
}

double to_unit(const ParamSpec& p, double v) {
  if (p.log_scale) return (std::log(v) - std::log(p.lo)) / (std::log(p.hi) - std::log(p.lo));
  return (v - p.lo) / (p.hi - p.lo);
}

std::vector<double> decode(const ParamSpace& s, const std::vector<double>& u) {
  std::vector<double> x(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) x[i] = from_unit(s.params[i], u[i]);
  return x;
}

std::vector<double> random_unit(Rng& rng, std::size_t d) {
  std::vector<double> u(d);
  for (double& v : u) v = rng.uniform();
  return u;
}

double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI); }
double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Gaussian-process regression with an RBF kernel on the unit cube.
class Surrogate {
 public:
  bool fit(const std::vector<std::vector<double>>& xs, const std::vector<double>& ys) {
    const auto n = static_cast<Eigen::Index>(xs.size());
    if (n < 2) return false;
    x_ = xs;
    double m = 0.0;
    for (double y : ys) m += y;
    m /= static_cast<double>(n);
    double v = 0.0;
    for (double y : ys) v += (y - m) * (y - m);
    v /= static_cast<double>(n);
    if (!(v > 1e-18) || !std::isfinite(v)) return false;
    mean_ = m;
    scale_ = std::sqrt(v);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) y(i) = (ys[i] - mean_) / scale_;

    double best_ll = -kInf;
    for (double ell : {0.05, 0.1, 0.2, 0.35, 0.6, 1.0}) {
      Eigen::MatrixXd k = gram(ell);
      Eigen::LLT<Eigen::MatrixXd> llt(k);
      if (llt.info() != Eigen::Success) continue;
      const Eigen::VectorXd alpha = llt.solve(y);
      const Eigen::MatrixXd l = llt.matrixL();
      const double ll = -0.5 * y.dot(alpha) - l.diagonal().array().log().sum();
      if (std::isfinite(ll) && ll > best_ll) {
        best_ll = ll;
        ell_ = ell;
        alpha_ = alpha;
        llt_ = llt;
      }
    }
    return std::isfinite(best_ll);
  }

  // Predictive mean and standard deviation in objective units.
  std::pair<double, double> predict(const std::vector<double>& u) const {
    const auto n = static_cast<Eigen::Index>(x_.size());
    Eigen::VectorXd k(n);
    for (Eigen::Index i = 0; i < n; ++i) k(i) = kernel(u, x_[i], ell_);
    const double mu = k.dot(alpha_);
    const Eigen::VectorXd w = llt_.solve(k);
    const double var = std::max(1e-12, 1.0 + kNoise - k.dot(w));
    return {mean_ + scale_ * mu, scale_ * std::sqrt(var)};
  }

 private:
  static constexpr double kNoise = 1e-6;

  static double kernel(const std::vector<double>& a, const std::vector<double>& b, double ell) {
    double d2 = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d2 += (a[i] - b[i]) * (a[i] - b[i]);
    return std::exp(-0.5 * d2 / (ell * ell));
  }

  Eigen::MatrixXd gram(double ell) const {
    const auto n = static_cast<Eigen::Index>(x_.size());
    Eigen::MatrixXd k(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) k(i, j) = kernel(x_[i], x_[j], ell) + (i == j ? kNoise : 0.0);
    return k;
  }

  std::vector<std::vector<double>> x_;
  double mean_ = 0.0, scale_ = 1.0, ell_ = 0.2;
  Eigen::VectorXd alpha_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

}  // namespace

TuneResult optimize(const ParamSpace& space, const Objective& objective, const std::vector<std::uint64_t>& seeds,
                    int budget, TunerStrategy strategy, std::uint64_t tuner_seed) {
  space.validate();
  if (budget < 1) throw std::invalid_argument("budget must be >= 1");
  if (seeds.empty()) throw std::invalid_argument("seed list is empty");
  const std::size_t d = space.params.size();
  Rng rng(tuner_seed, 0x7475);
  const int initial = std::min(budget, std::max(5, static_cast<int>(2 * d)));

  TuneResult result;
  std::vector<std::vector<double>> ok_u;
  std::vector<double> ok_y;
  double best = kInf;
  for (int trial = 0; trial < budget; ++trial) {
    std::vector<double> u;
    std::string origin = "random";
    if (strategy == TunerStrategy::Surrogate && trial >= initial) {
      Surrogate gp;
      if (gp.fit(ok_u, ok_y)) {
        double best_ei = -1.0;
        for (int c = 0; c < 512; ++c) {
          auto cand = random_unit(rng, d);
          const auto [mu, sd] = gp.predict(cand);
          const double z = (best - mu) / sd;
          const double ei = (best - mu) * normal_cdf(z) + sd * normal_pdf(z);
          if (ei > best_ei) {
            best_ei = ei;
            u = std::move(cand);
          }
        }
        origin = "surrogate";
      }
    }
    if (u.empty()) u = random_unit(rng, d);

    TrialRecord rec;
    rec.id = static_cast<std::size_t>(trial);
    rec.x = decode(space, u);
    rec.seeds = seeds;
    rec.origin = origin;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      rec.objective = objective(rec.x, seeds);
      if (!std::isfinite(rec.objective)) {
        rec.failed = true;
        rec.error = "objective is not finite";
      }
    } catch (const std::exception& e) {
      rec.failed = true;
      rec.error = e.what();
    }
    if (rec.failed) rec.objective = kInf;
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!rec.failed) {
      std::vector<double> snapped(d);
      for (std::size_t i = 0; i < d; ++i) snapped[i] = to_unit(space.params[i], rec.x[i]);
      ok_u.push_back(std::move(snapped));
      ok_y.push_back(rec.objective);
    }
    if (result.history.empty() || rec.objective < best) result.best = rec;
    best = std::min(best, rec.objective);
    rec.best_so_far = best;
    result.history.push_back(std::move(rec));
  }
  result.best.best_so_far = best;
  return result;
}

Objective scenario_objective(const Scenario& scenario, ControllerKind kind, const ParamSpace& space, int jobs) {
  return [&scenario, kind, space, jobs](const std::vector<double>& x, const std::vector<std::uint64_t>& seeds) {
    ControllerConfig config = scenario.controller;
    for (std::size_t i = 0; i < x.size(); ++i) set_parameter(config, space.params[i].name, x[i]);
    std::vector<double> delays(seeds.size(), 0.0);
    std::vector<std::string> errors(seeds.size());
    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
      for (std::size_t i; (i = next.fetch_add(1)) < seeds.size();) {
        try {
          const RunResult r = run_simulation(scenario, kind, seeds[i], &config);
          if (r.ledger.entries.empty()) throw std::runtime_error("no vehicles in the ledger");
          delays[i] = fairness_quartet(r.ledger.entries).avg_delay;
        } catch (const std::exception& e) {
          errors[i] = e.what();
        }
      }
    };
    const int n = std::max(1, jobs);
    if (n == 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      for (int j = 0; j < n; ++j) pool.emplace_back(worker);
      for (auto& t : pool) t.join();
    }
    for (const auto& e : errors)
      if (!e.empty()) throw std::runtime_error(e);
    double sum = 0.0;
    for (double v : delays) sum += v;
    return sum / static_cast<double>(seeds.size());
  };
}

ParamSpace default_space(ControllerKind kind) {
  ParamSpace s;
  switch (kind) {
    case ControllerKind::Fixed:
      throw std::invalid_argument("the fixed-cycle controller has no tunable parameters");
    case ControllerKind::MaxPressure:
      s.params = {{"maxpressure.decision_interval", 5, 30, false, true}};
      break;
    case ControllerKind::Fair2:
      s.params.push_back({"fairscosca2.ttg", 5, 40, false, false});
      s.params.push_back({"fairscosca2.teg", 1, 10, false, true});
      [[fallthrough]];
    case ControllerKind::Scosca:
      s.params.push_back({"scosca.lambda1", 1, 40, false, false});
      s.params.push_back({"scosca.tau1", 0, 10, false, false});
      s.params.push_back({"scosca.tau2", 0, 5, false, false});
      break;
    case ControllerKind::Fair1:
      s.params = {{"fairscosca1.alpha", 0, 1, false, false},
                  {"fairscosca1.theta", 30, 3000, true, false},
                  {"scosca.lambda1", 1, 40, false, false},
                  {"scosca.tau1", 0, 10, false, false},
                  {"scosca.tau2", 0, 5, false, false}};
      break;
  }
  return s;
}

void write_history_csv(std::ostream& out, const ParamSpace& space, const std::vector<TrialRecord>& history) {
  out << "trial";
  for (const ParamSpec& p : space.params) out << "," << p.name;
  out << ",objective,best_so_far,origin,failed,error\n";
  for (const TrialRecord& r : history) {
    out << r.id;
    for (double v : r.x) out << fmt::format(",{}", v);
    out << fmt::format(",{},{},{},{},\"{}\"\n", r.objective, r.best_so_far, r.origin, r.failed ? 1 : 0, r.error);
  }
}

}  // namespace fairsig
