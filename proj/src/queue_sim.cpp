#include "ratesched/queue_sim.hpp"

#include <cmath>
#include <deque>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <unordered_map>

#include "ratesched/allocator.hpp"
#include "ratesched/rng.hpp"
#include "ratesched/solver.hpp"

namespace ratesched {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct QueueKey {
  int state;
  std::vector<int> q;
  bool operator==(const QueueKey& other) const = default;
};

struct QueueKeyHash {
  std::size_t operator()(const QueueKey& k) const {
    std::uint64_t h = splitmix64(static_cast<std::uint64_t>(k.state) + 0x1234);
    for (int v : k.q) h = splitmix64(h ^ static_cast<std::uint64_t>(v));
    return static_cast<std::size_t>(h);
  }
};

class PolicyCache {
 public:
  Eigen::VectorXd get_or_compute(const Eigen::VectorXi& q, int state,
                                 const std::function<Eigen::VectorXd()>& compute) {
    QueueKey key{state, {q.data(), q.data() + q.size()}};
    {
      std::lock_guard<std::mutex> lock(mutex_);
      auto it = cache_.find(key);
      if (it != cache_.end()) return it->second;
    }
    Eigen::VectorXd value = compute();
    std::lock_guard<std::mutex> lock(mutex_);
    return cache_.emplace(std::move(key), std::move(value)).first->second;
  }

 private:
  std::mutex mutex_;
  std::unordered_map<QueueKey, Eigen::VectorXd, QueueKeyHash> cache_;
};

}  // namespace

void TrafficSpec::validate() const {
  if (states() < 1 || users() < 1) throw std::invalid_argument("TrafficSpec: empty");
  if (alpha_sq.rows() != states() || alpha_sq.cols() != users()) {
    throw std::invalid_argument("TrafficSpec: alpha_sq shape mismatch");
  }
  if (mu.size() != users() || beta_sq.size() != users()) {
    throw std::invalid_argument("TrafficSpec: per-user vectors must have J entries");
  }
  if ((lambda.array() < 0.0).any()) throw std::invalid_argument("TrafficSpec: negative arrival rate");
  if (!(alpha_sq.array() > 0.0).all()) throw std::invalid_argument("TrafficSpec: alpha_sq must be positive");
  if (!(mu.array() > 0.0).all()) throw std::invalid_argument("TrafficSpec: mu must be positive");
  if (!(beta_sq.array() > 0.0).all()) throw std::invalid_argument("TrafficSpec: beta_sq must be positive");
}

SystemTrajectory simulate(const TrafficSpec& traffic, const CapacityRegion& region,
                          const PolicyHandle& policy, const EnvPath& env, double horizon,
                          double grid_step, std::uint64_t seed,
                          const Eigen::MatrixXd& rho_by_state, bool keep_events) {
  traffic.validate();
  if (!(horizon > 0.0)) throw std::invalid_argument("simulate: horizon must be positive");
  if (!(grid_step > 0.0)) throw std::invalid_argument("simulate: grid_step must be positive");
  if (horizon > env.horizon + 1e-12) {
    throw std::invalid_argument("simulate: environment path is shorter than the horizon");
  }
  const int users = traffic.users();
  if (region.users() != users || region.states() != traffic.states() ||
      rho_by_state.cols() != users || rho_by_state.rows() != traffic.states()) {
    throw std::invalid_argument("simulate: region/traffic/rho dimension mismatch");
  }

  // per-user streams for interarrivals and packet lengths
  std::vector<std::mt19937_64> arrival_eng, length_eng;
  for (int j = 0; j < users; ++j) {
    arrival_eng.push_back(make_engine(seed, Stream::Arrival, static_cast<std::uint64_t>(j)));
    length_eng.push_back(make_engine(seed, Stream::PacketLength, static_cast<std::uint64_t>(j)));
  }

  double t = 0.0;
  int state = env.state_at(0.0);
  std::size_t next_jump = 1;  // env.jump_times[0] == 0 carries the initial state

  std::vector<std::deque<double>> packets(static_cast<std::size_t>(users));
  Eigen::VectorXi q = Eigen::VectorXi::Zero(users);
  Eigen::VectorXd service = Eigen::VectorXd::Zero(users);
  Eigen::VectorXi arrivals = Eigen::VectorXi::Zero(users);
  Eigen::VectorXi departures = Eigen::VectorXi::Zero(users);
  double rho_int = 0.0;

  std::vector<double> next_arrival(static_cast<std::size_t>(users), kInf);
  auto draw_arrival = [&](int j) {
    const double rate = traffic.lambda(state, j);
    next_arrival[static_cast<std::size_t>(j)] =
        rate > 0.0 ? t + gamma_mean_scv(arrival_eng[static_cast<std::size_t>(j)], 1.0 / rate,
                                        traffic.alpha_sq(state, j))
                   : kInf;
  };
  for (int j = 0; j < users; ++j) draw_arrival(j);

  Eigen::VectorXd rates = Eigen::VectorXd::Zero(users);
  auto refresh_rates = [&]() {
    rates = policy.rate(q, state);
    if (region.membership(state, rates, 1e-6) == Membership::Outside) {
      throw std::runtime_error("simulate: policy returned an infeasible rate vector at t=" +
                               std::to_string(t));
    }
    for (int j = 0; j < users; ++j) {
      if (q(j) == 0 && rates(j) > 1e-9) {
        throw std::runtime_error("simulate: policy serves an empty queue at t=" + std::to_string(t));
      }
      if (q(j) == 0) rates(j) = 0.0;
    }
  };
  refresh_rates();

  SystemTrajectory out;
  out.grid_step = grid_step;
  out.horizon = horizon;
  const int grid_count = static_cast<int>(std::floor(horizon / grid_step + 1e-9)) + 1;
  out.queue.resize(grid_count, users);
  out.service.resize(grid_count, users);
  out.workload.resize(grid_count);
  out.unused.resize(grid_count);
  out.rho_integral.resize(grid_count);
  out.env_jump_times.push_back(0.0);
  out.env_states.push_back(state);

  int grid_row = 0;
  auto emit_grid_rows_until = [&](double limit) {
    while (grid_row < grid_count) {
      const double gt = grid_row * grid_step;
      if (gt > limit) break;
      const double dt = gt - t;
      out.times.push_back(gt);
      out.states.push_back(state);
      for (int j = 0; j < users; ++j) {
        out.queue(grid_row, j) = q(j);
        out.service(grid_row, j) = service(j) + rates(j) * dt;
      }
      const double rho_here = rho_int + rho_by_state.row(state).sum() * dt;
      out.rho_integral(grid_row) = rho_here;
      out.workload(grid_row) = (q.cast<double>().array() / traffic.mu.array()).sum();
      out.unused(grid_row) = rho_here - out.service.row(grid_row).sum();
      ++grid_row;
    }
  };

  auto record_event = [&](char type, int user) {
    if (keep_events) out.events.push_back({t, type, user, state});
  };

  while (t < horizon) {
    double t_event = horizon;
    int kind = 0;  // 0 horizon, 1 arrival, 2 departure, 3 switch
    int who = -1;
    for (int j = 0; j < users; ++j) {
      if (next_arrival[static_cast<std::size_t>(j)] < t_event) {
        t_event = next_arrival[static_cast<std::size_t>(j)];
        kind = 1;
        who = j;
      }
    }
    for (int j = 0; j < users; ++j) {
      if (q(j) > 0 && rates(j) > 0.0) {
        const double done = t + packets[static_cast<std::size_t>(j)].front() / rates(j);
        if (done < t_event) {
          t_event = done;
          kind = 2;
          who = j;
        }
      }
    }
    if (next_jump < env.jump_times.size() && env.jump_times[next_jump] < t_event) {
      t_event = env.jump_times[next_jump];
      kind = 3;
      who = -1;
    }
    if (t_event > horizon) {
      t_event = horizon;
      kind = 0;
    }

    // rows strictly before the event keep the pre-event values; a row at the
    // event time itself is emitted afterwards, keeping sampled paths
    // right-continuous
    emit_grid_rows_until(std::nextafter(t_event, 0.0));

    const double dt = t_event - t;
    if (dt > 0.0) {
      rho_int += rho_by_state.row(state).sum() * dt;
      for (int j = 0; j < users; ++j) {
        if (rates(j) > 0.0) {
          service(j) += rates(j) * dt;
          auto& head = packets[static_cast<std::size_t>(j)].front();
          head = std::max(0.0, head - rates(j) * dt);
        }
      }
    }
    t = t_event;

    if (kind == 0) break;
    if (kind == 1) {
      packets[static_cast<std::size_t>(who)].push_back(gamma_mean_scv(
          length_eng[static_cast<std::size_t>(who)], 1.0 / traffic.mu(who), traffic.beta_sq(who)));
      q(who) += 1;
      arrivals(who) += 1;
      draw_arrival(who);
      record_event('a', who);
    } else if (kind == 2) {
      packets[static_cast<std::size_t>(who)].pop_front();
      q(who) -= 1;
      departures(who) += 1;
      record_event('d', who);
    } else {
      state = env.states[next_jump];
      ++next_jump;
      out.env_jump_times.push_back(t);
      out.env_states.push_back(state);
      // the pending interarrival is discarded; clocks restart from the new
      // state's law, keeping draws i.i.d. within each holding interval
      for (int j = 0; j < users; ++j) draw_arrival(j);
      record_event('s', -1);
    }
    refresh_rates();
  }
  emit_grid_rows_until(horizon);

  out.arrivals = arrivals;
  out.departures = departures;
  return out;
}

Eigen::VectorXd unused_capacity(const SystemTrajectory& trajectory, const CapacityRegion& region) {
  Eigen::MatrixXd rho = balanced_points(region);
  const std::size_t rows = trajectory.times.size();
  Eigen::VectorXd y(static_cast<Eigen::Index>(rows));
  // exact integral of the piecewise-constant rho sum along the regime path
  std::size_t seg = 0;
  double acc = 0.0;
  double prev_t = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const double t = trajectory.times[r];
    double cursor = prev_t;
    while (seg + 1 < trajectory.env_jump_times.size() && trajectory.env_jump_times[seg + 1] <= t) {
      acc += rho.row(trajectory.env_states[seg]).sum() *
             (trajectory.env_jump_times[seg + 1] - cursor);
      cursor = trajectory.env_jump_times[seg + 1];
      ++seg;
    }
    acc += rho.row(trajectory.env_states[seg]).sum() * (t - cursor);
    prev_t = t;
    y(static_cast<Eigen::Index>(r)) =
        acc - trajectory.service.row(static_cast<Eigen::Index>(r)).sum();
  }
  return y;
}

Eigen::VectorXd maxweight_rate(const CapacityRegion& region, int state, const Eigen::VectorXi& q,
                               const Eigen::VectorXd& mu) {
  const int users = region.users();
  if ((q.array() < 0).any()) throw std::invalid_argument("maxweight_rate: negative queue");
  if ((q.array() == 0).all()) return Eigen::VectorXd::Zero(users);

  std::vector<int> zero_set;
  for (int j = 0; j < users; ++j) {
    if (q(j) == 0) zero_set.push_back(j);
  }
  Eigen::VectorXd weights = q.cast<double>().array() * mu.array();
  if (zero_set.empty()) {
    SolveResult res = maximize_on_region(region, state, linear_objective(weights));
    if (!res.converged) {
      throw std::runtime_error("maxweight_rate: solver did not converge, residual=" +
                               std::to_string(res.kkt_residual));
    }
    return res.c;
  }
  ReducedRegion red = reduce(region, state, zero_set);
  Eigen::VectorXd sub_weights(static_cast<Eigen::Index>(red.kept.size()));
  for (std::size_t i = 0; i < red.kept.size(); ++i) {
    sub_weights(static_cast<Eigen::Index>(i)) = weights(red.kept[i]);
  }
  SolveResult res = maximize_on_region(red.region, 0, linear_objective(sub_weights));
  if (!res.converged) {
    throw std::runtime_error("maxweight_rate: solver did not converge, residual=" +
                             std::to_string(res.kkt_residual));
  }
  Eigen::VectorXd full = Eigen::VectorXd::Zero(users);
  for (std::size_t i = 0; i < red.kept.size(); ++i) {
    full(red.kept[i]) = res.c(static_cast<Eigen::Index>(i));
  }
  return full;
}

PolicyHandle make_policy(const std::string& name, const CapacityRegion& region,
                         const UtilityFamily& utility, const Eigen::VectorXd& mu,
                         const Eigen::MatrixXd& rho_by_state) {
  PolicyHandle handle;
  handle.name = name;
  auto cache = std::make_shared<PolicyCache>();
  if (name == "utility-max") {
    handle.rate = [cache, region, utility](const Eigen::VectorXi& q, int state) {
      return cache->get_or_compute(q, state, [&]() {
        return allocate(region, state, q.cast<double>(), utility).rates;
      });
    };
  } else if (name == "maxweight") {
    Eigen::VectorXd mu_copy = mu;
    handle.rate = [cache, region, mu_copy](const Eigen::VectorXi& q, int state) {
      return cache->get_or_compute(q, state,
                                   [&]() { return maxweight_rate(region, state, q, mu_copy); });
    };
  } else if (name == "static-rho") {
    Eigen::MatrixXd rho = rho_by_state;
    handle.rate = [rho](const Eigen::VectorXi& q, int state) {
      Eigen::VectorXd c = rho.row(state);
      for (int j = 0; j < q.size(); ++j) {
        if (q(j) == 0) c(j) = 0.0;
      }
      return c;
    };
  } else {
    throw std::invalid_argument("make_policy: unknown policy '" + name + "'");
  }
  return handle;
}

}  // namespace ratesched
