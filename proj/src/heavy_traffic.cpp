#include "ratesched/heavy_traffic.hpp"

#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>

#include "ratesched/rng.hpp"

namespace ratesched {

std::vector<ScaledSystem> build_sequence(const HeavyTrafficSpec& spec,
                                         const EnvGenerator& base_generator,
                                         const Eigen::MatrixXd& rho_by_state) {
  const int states = base_generator.state_count;
  const int users = static_cast<int>(spec.mu.size());
  if (spec.theta.rows() != states || spec.theta.cols() != users ||
      rho_by_state.rows() != states || rho_by_state.cols() != users) {
    throw std::invalid_argument("build_sequence: theta/rho shape mismatch");
  }
  if (spec.r_ladder.empty()) throw std::invalid_argument("build_sequence: empty r ladder");

  std::vector<ScaledSystem> out;
  for (double r : spec.r_ladder) {
    if (!(r > 0.0)) throw std::invalid_argument("build_sequence: r must be positive");
    ScaledSystem sys;
    sys.r = r;
    sys.traffic.mu = spec.mu;
    sys.traffic.beta_sq = spec.beta_sq;
    sys.traffic.alpha_sq = spec.alpha_sq;
    sys.traffic.lambda.resize(states, users);
    for (int i = 0; i < states; ++i) {
      for (int j = 0; j < users; ++j) {
        // nominal rate mu_j rho_j(i) plus the exact theta/r perturbation
        sys.traffic.lambda(i, j) = spec.mu(j) * rho_by_state(i, j) + spec.theta(i, j) / r;
        if (!(sys.traffic.lambda(i, j) > 0.0)) {
          throw std::invalid_argument("build_sequence: nonpositive arrival rate at r=" +
                                      std::to_string(r));
        }
      }
    }
    sys.generator = scale_holding(base_generator, r);
    sys.physical_horizon = r * r * spec.horizon;
    sys.physical_grid_step = r * r * spec.grid_step;
    out.push_back(std::move(sys));
  }
  return out;
}

ScaledPaths diffusion_scale(const SystemTrajectory& trajectory, double r,
                            const Eigen::VectorXd& mu) {
  ScaledPaths out;
  out.r = r;
  const std::size_t rows = trajectory.times.size();
  out.grid.resize(rows);
  out.states = trajectory.states;
  out.q_hat = trajectory.queue.cast<double>() / r;
  out.w_hat.resize(static_cast<Eigen::Index>(rows));
  out.y_hat = trajectory.unused / r;
  for (std::size_t k = 0; k < rows; ++k) {
    out.grid[k] = trajectory.times[k] / (r * r);
    out.w_hat(static_cast<Eigen::Index>(k)) =
        (out.q_hat.row(static_cast<Eigen::Index>(k)).transpose().array() / mu.array()).sum();
  }
  return out;
}

CollapseMetric collapse_metric(const ScaledPaths& scaled, const UtilityFamily& utility,
                               const Eigen::VectorXd& mu, const Eigen::MatrixXd& rho_by_state) {
  CollapseMetric metric;
  const Eigen::Index rows = scaled.w_hat.size();
  for (Eigen::Index k = 0; k < rows; ++k) {
    const Eigen::VectorXd rho = rho_by_state.row(scaled.states[static_cast<std::size_t>(k)]);
    const FixedPoint fp = fixed_point(utility, mu, scaled.w_hat(k), rho);
    const double d = (scaled.q_hat.row(k).transpose() - fp.q).lpNorm<1>();
    metric.sup = std::max(metric.sup, d);
    metric.average += d;
  }
  if (rows > 0) metric.average /= static_cast<double>(rows);
  return metric;
}

FluidDiagnostics fluid_diagnostics(const ScaledPaths& scaled, const UtilityFamily& utility,
                                   const Eigen::VectorXd& mu, const Eigen::MatrixXd& rho_by_state) {
  FluidDiagnostics diag;
  diag.grid = scaled.grid;
  diag.states = scaled.states;
  const Eigen::Index rows = scaled.w_hat.size();
  diag.psi.resize(static_cast<std::size_t>(rows));
  for (Eigen::Index k = 0; k < rows; ++k) {
    const Eigen::VectorXd q_bar = scaled.q_hat.row(k).transpose() / scaled.r;
    diag.sup_norm = std::max(diag.sup_norm, q_bar.lpNorm<1>());
    const Eigen::VectorXd rho = rho_by_state.row(scaled.states[static_cast<std::size_t>(k)]);
    diag.psi[static_cast<std::size_t>(k)] = lyapunov(utility, mu, q_bar, rho);
  }
  return diag;
}

namespace {

void parallel_for(int count, int jobs, const std::function<void(int)>& body) {
  if (jobs <= 1 || count <= 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> workers;
  const int nthreads = std::min(jobs, count);
  std::exception_ptr first_error;
  std::mutex error_mutex;
  for (int w = 0; w < nthreads; ++w) {
    workers.emplace_back([&]() {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= count) return;
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace

std::vector<SweepRow> run_sweep(const SweepRequest& request, const EnvGenerator& base_generator,
                                const CapacityRegion& region, const UtilityFamily& utility) {
  if (request.policies.empty()) throw std::invalid_argument("run_sweep: no policies");
  const Eigen::MatrixXd rho = balanced_points(region);
  const auto systems = build_sequence(request.spec, base_generator, rho);

  std::vector<PolicyHandle> policies;
  for (const auto& name : request.policies) {
    policies.push_back(make_policy(name, region, utility, request.spec.mu, rho));
  }

  const int n_r = static_cast<int>(systems.size());
  const int n_rep = request.spec.replicas;
  const int n_pol = static_cast<int>(policies.size());
  std::vector<SweepRow> rows(static_cast<std::size_t>(n_r * n_rep * n_pol));

  parallel_for(n_r * n_rep, request.jobs, [&](int task) {
    const int ri = task / n_rep;
    const int rep = task % n_rep;
    const ScaledSystem& sys = systems[static_cast<std::size_t>(ri)];
    // one seed per (scale, replica); shared across policies for paired runs
    const std::uint64_t seed =
        derive_seed(request.root_seed, Stream::Replica, static_cast<std::uint64_t>(rep),
                    static_cast<std::uint64_t>(ri));
    const EnvPath env =
        sample_path(sys.generator, sys.physical_horizon, request.initial_state, seed);
    for (int p = 0; p < n_pol; ++p) {
      SystemTrajectory traj =
          simulate(sys.traffic, region, policies[static_cast<std::size_t>(p)], env,
                   sys.physical_horizon, sys.physical_grid_step, seed, rho, false);
      ScaledPaths scaled = diffusion_scale(traj, sys.r, request.spec.mu);
      const CollapseMetric cm = collapse_metric(scaled, utility, request.spec.mu, rho);
      const FluidDiagnostics fd = fluid_diagnostics(scaled, utility, request.spec.mu, rho);
      SweepRow row;
      row.r = sys.r;
      row.seed_index = static_cast<std::uint64_t>(rep);
      row.policy = request.policies[static_cast<std::size_t>(p)];
      row.sup_collapse = cm.sup;
      row.avg_collapse = cm.average;
      row.avg_w_hat = scaled.w_hat.mean();
      row.sup_fluid = fd.sup_norm;
      rows[static_cast<std::size_t>((ri * n_rep + rep) * n_pol + p)] = row;
    }
  });
  return rows;
}

Eigen::VectorXd sweep_workload_samples(const SweepRequest& request,
                                       const EnvGenerator& base_generator,
                                       const CapacityRegion& region, const UtilityFamily& utility,
                                       double r, const std::string& policy, double t_probe,
                                       int replicas) {
  if (t_probe < 0.0 || t_probe > request.spec.horizon) {
    throw std::invalid_argument("sweep_workload_samples: t_probe outside the horizon");
  }
  const Eigen::MatrixXd rho = balanced_points(region);
  HeavyTrafficSpec spec = request.spec;
  spec.r_ladder = {r};
  const auto systems = build_sequence(spec, base_generator, rho);
  const ScaledSystem& sys = systems.front();
  PolicyHandle handle = make_policy(policy, region, utility, spec.mu, rho);

  Eigen::VectorXd samples(replicas);
  parallel_for(replicas, request.jobs, [&](int rep) {
    const std::uint64_t seed = derive_seed(request.root_seed, Stream::Replica,
                                           static_cast<std::uint64_t>(rep), /*r index*/ 1000);
    const EnvPath env =
        sample_path(sys.generator, sys.physical_horizon, request.initial_state, seed);
    SystemTrajectory traj = simulate(sys.traffic, region, handle, env, sys.physical_horizon,
                                     sys.physical_grid_step, seed, rho, false);
    ScaledPaths scaled = diffusion_scale(traj, sys.r, spec.mu);
    // nearest grid index to the probe time
    const double step = spec.grid_step;
    Eigen::Index k = static_cast<Eigen::Index>(std::llround(t_probe / step));
    k = std::min<Eigen::Index>(std::max<Eigen::Index>(k, 0), scaled.w_hat.size() - 1);
    samples(rep) = scaled.w_hat(k);
  });
  return samples;
}

}  // namespace ratesched
