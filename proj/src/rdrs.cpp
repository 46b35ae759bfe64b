#include "ratesched/rdrs.hpp"

#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>

#include "ratesched/dual_cost.hpp"
#include "ratesched/rng.hpp"

namespace ratesched {

void RdrsSpec::validate() const {
  const int k = static_cast<int>(theta.rows());
  const int j = static_cast<int>(theta.cols());
  if (k < 1 || j < 1) throw std::invalid_argument("RdrsSpec: empty theta");
  if (gamma_e.rows() != k || gamma_e.cols() != j || gamma_s.rows() != k || gamma_s.cols() != j) {
    throw std::invalid_argument("RdrsSpec: covariance shape mismatch");
  }
  if ((gamma_e.array() < 0.0).any() || (gamma_s.array() < 0.0).any()) {
    throw std::invalid_argument("RdrsSpec: covariance entries must be nonnegative");
  }
  if (mu.size() != j || !(mu.array() > 0.0).all()) {
    throw std::invalid_argument("RdrsSpec: mu must be positive, one per user");
  }
  if (!(dt > 0.0)) throw std::invalid_argument("RdrsSpec: dt must be positive");
  if (!(horizon > 0.0)) throw std::invalid_argument("RdrsSpec: horizon must be positive");
}

RdrsPath simulate_rdrs(const RdrsSpec& spec, const EnvPath& env, std::uint64_t seed) {
  spec.validate();
  if (env.horizon + 1e-12 < spec.horizon) {
    throw std::invalid_argument("simulate_rdrs: environment path shorter than the horizon");
  }
  const int users = static_cast<int>(spec.mu.size());

  std::vector<std::mt19937_64> eng_e, eng_s;
  for (int j = 0; j < users; ++j) {
    eng_e.push_back(make_engine(seed, Stream::NoiseE, static_cast<std::uint64_t>(j)));
    eng_s.push_back(make_engine(seed, Stream::NoiseS, static_cast<std::uint64_t>(j)));
  }
  std::normal_distribution<double> normal(0.0, 1.0);

  RdrsPath path;
  path.times.push_back(0.0);
  path.states.push_back(env.state_at(0.0));

  std::vector<double> xs{0.0}, ys{0.0}, ws{0.0};
  double x = 0.0, y = 0.0;

  // segment ends: regime jumps within the horizon, then the horizon itself
  std::vector<double> seg_ends;
  for (std::size_t k = 1; k < env.jump_times.size(); ++k) {
    if (env.jump_times[k] < spec.horizon) seg_ends.push_back(env.jump_times[k]);
  }
  seg_ends.push_back(spec.horizon);

  double t = 0.0;
  for (double seg_end : seg_ends) {
    const int state = env.state_at(t);
    const double len = seg_end - t;
    if (len <= 0.0) continue;
    const int steps = std::max(1, static_cast<int>(std::ceil(len / spec.dt - 1e-12)));
    const double h = len / steps;
    double drift = 0.0;
    Eigen::VectorXd vol_e(users), vol_s(users);
    for (int j = 0; j < users; ++j) {
      drift += spec.theta(state, j) / spec.mu(j);
      vol_e(j) = std::sqrt(spec.gamma_e(state, j));
      vol_s(j) = std::sqrt(spec.gamma_s(state, j));
    }
    const double sqrt_h = std::sqrt(h);
    for (int s = 0; s < steps; ++s) {
      double dx = drift * h;
      for (int j = 0; j < users; ++j) {
        dx += (vol_e(j) * normal(eng_e[static_cast<std::size_t>(j)]) +
               vol_s(j) * normal(eng_s[static_cast<std::size_t>(j)])) *
              sqrt_h / spec.mu(j);
      }
      x += dx;
      // discrete one-dimensional Skorohod map, incremental form
      y = std::max(y, -x);
      t = (s + 1 == steps) ? seg_end : t + h;
      path.times.push_back(t);
      path.states.push_back(env.state_at(t));
      xs.push_back(x);
      ys.push_back(y);
      ws.push_back(x + y);
    }
  }

  path.x = Eigen::Map<Eigen::VectorXd>(xs.data(), static_cast<Eigen::Index>(xs.size()));
  path.y = Eigen::Map<Eigen::VectorXd>(ys.data(), static_cast<Eigen::Index>(ys.size()));
  path.w = Eigen::Map<Eigen::VectorXd>(ws.data(), static_cast<Eigen::Index>(ws.size()));
  return path;
}

void lift_to_queues(RdrsPath& path, const UtilityFamily& utility, const Eigen::VectorXd& mu,
                    const Eigen::MatrixXd& rho_by_state) {
  const Eigen::Index rows = path.w.size();
  path.q.resize(rows, mu.size());
  for (Eigen::Index k = 0; k < rows; ++k) {
    const Eigen::VectorXd rho = rho_by_state.row(path.states[static_cast<std::size_t>(k)]);
    path.q.row(k) = fixed_point(utility, mu, path.w(k), rho).q;
  }
}

EnsembleComparison compare_to_simulation(const std::vector<double>& rdrs_samples,
                                         const std::vector<double>& sim_samples) {
  if (rdrs_samples.size() < 100 || sim_samples.size() < 100) {
    throw std::invalid_argument("compare_to_simulation: ensemble size too small (need >= 100)");
  }
  EnsembleComparison cmp;
  cmp.ks = ks_statistic(rdrs_samples, sim_samples);
  const int n = static_cast<int>(rdrs_samples.size());
  const int m = static_cast<int>(sim_samples.size());
  cmp.critical_5pct = ks_critical(n, m, 0.05);
  cmp.critical_1pct = ks_critical(n, m, 0.01);
  cmp.below_1pct = cmp.ks < cmp.critical_1pct;
  cmp.first = mean_se(rdrs_samples);
  cmp.second = mean_se(sim_samples);
  return cmp;
}

double rdrs_time_average_w(const RdrsSpec& spec, const EnvPath& env, std::uint64_t seed) {
  spec.validate();
  if (env.horizon + 1e-12 < spec.horizon) {
    throw std::invalid_argument("rdrs_time_average_w: environment path shorter than the horizon");
  }
  const int users = static_cast<int>(spec.mu.size());
  std::vector<std::mt19937_64> eng_e, eng_s;
  for (int j = 0; j < users; ++j) {
    eng_e.push_back(make_engine(seed, Stream::NoiseE, static_cast<std::uint64_t>(j)));
    eng_s.push_back(make_engine(seed, Stream::NoiseS, static_cast<std::uint64_t>(j)));
  }
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<double> seg_ends;
  for (std::size_t k = 1; k < env.jump_times.size(); ++k) {
    if (env.jump_times[k] < spec.horizon) seg_ends.push_back(env.jump_times[k]);
  }
  seg_ends.push_back(spec.horizon);

  double x = 0.0, y = 0.0, t = 0.0, acc = 0.0;
  for (double seg_end : seg_ends) {
    const int state = env.state_at(t);
    const double len = seg_end - t;
    if (len <= 0.0) continue;
    const int steps = std::max(1, static_cast<int>(std::ceil(len / spec.dt - 1e-12)));
    const double h = len / steps;
    double drift = 0.0;
    Eigen::VectorXd vol_e(users), vol_s(users);
    for (int j = 0; j < users; ++j) {
      drift += spec.theta(state, j) / spec.mu(j);
      vol_e(j) = std::sqrt(spec.gamma_e(state, j));
      vol_s(j) = std::sqrt(spec.gamma_s(state, j));
    }
    const double sqrt_h = std::sqrt(h);
    for (int s = 0; s < steps; ++s) {
      double dx = drift * h;
      for (int j = 0; j < users; ++j) {
        dx += (vol_e(j) * normal(eng_e[static_cast<std::size_t>(j)]) +
               vol_s(j) * normal(eng_s[static_cast<std::size_t>(j)])) *
              sqrt_h / spec.mu(j);
      }
      x += dx;
      y = std::max(y, -x);
      acc += (x + y) * h;
    }
    t = seg_end;
  }
  return acc / spec.horizon;
}

Eigen::VectorXd rdrs_workload_samples(const RdrsSpec& spec, const EnvGenerator& generator,
                                      int initial_state, int paths, double t_probe,
                                      std::uint64_t root_seed, int jobs) {
  if (t_probe < 0.0 || t_probe > spec.horizon) {
    throw std::invalid_argument("rdrs_workload_samples: t_probe outside the horizon");
  }
  Eigen::VectorXd samples(paths);
  std::atomic<int> next{0};
  auto body = [&]() {
    for (;;) {
      const int p = next.fetch_add(1);
      if (p >= paths) return;
      const std::uint64_t seed =
          derive_seed(root_seed, Stream::Replica, static_cast<std::uint64_t>(p), 7);
      const EnvPath env = sample_path(generator, spec.horizon, initial_state, seed);
      const RdrsPath path = simulate_rdrs(spec, env, seed);
      // last grid time <= t_probe (grids are jump-refined, not uniform)
      auto it = std::upper_bound(path.times.begin(), path.times.end(), t_probe + 1e-12);
      const Eigen::Index k = static_cast<Eigen::Index>(it - path.times.begin()) - 1;
      samples(p) = path.w(k);
    }
  };
  if (jobs <= 1) {
    body();
  } else {
    std::vector<std::thread> workers;
    for (int w = 0; w < jobs; ++w) workers.emplace_back(body);
    for (auto& t : workers) t.join();
  }
  return samples;
}

}  // namespace ratesched
