#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "ratesched/capacity.hpp"
#include "ratesched/dual_cost.hpp"
#include "ratesched/markov_env.hpp"
#include "ratesched/queue_sim.hpp"

namespace ratesched {

// The r-indexed system sequence: lambda^r_j(i) = mu_j rho_j(i) + theta_j(i)/r
// (so r (lambda^r - lambda) = theta exactly) and gamma^r = gamma / r^2.
struct HeavyTrafficSpec {
  Eigen::MatrixXd theta;  // K x J drift coefficients
  std::vector<double> r_ladder;
  int replicas = 20;
  double horizon = 5.0;     // in scaled time
  double grid_step = 0.05;  // in scaled time
  Eigen::VectorXd mu;
  Eigen::MatrixXd alpha_sq;  // K x J
  Eigen::VectorXd beta_sq;
};

struct ScaledSystem {
  double r = 1.0;
  TrafficSpec traffic;
  EnvGenerator generator;
  double physical_horizon = 0.0;
  double physical_grid_step = 0.0;
};

std::vector<ScaledSystem> build_sequence(const HeavyTrafficSpec& spec,
                                         const EnvGenerator& base_generator,
                                         const Eigen::MatrixXd& rho_by_state);

// Diffusion-scaled entry: Qhat(t) = Q(r^2 t)/r on the scaled grid.
struct ScaledPaths {
  double r = 1.0;
  std::vector<double> grid;  // scaled times
  std::vector<int> states;
  Eigen::MatrixXd q_hat;
  Eigen::VectorXd w_hat;
  Eigen::VectorXd y_hat;
};

ScaledPaths diffusion_scale(const SystemTrajectory& trajectory, double r,
                            const Eigen::VectorXd& mu);

struct CollapseMetric {
  double sup = 0.0;
  double average = 0.0;
};

// sup_t ||Qhat(t) - q*(What(t), rho(state(t)))||_1 over the grid
CollapseMetric collapse_metric(const ScaledPaths& scaled, const UtilityFamily& utility,
                               const Eigen::VectorXd& mu, const Eigen::MatrixXd& rho_by_state);

struct FluidDiagnostics {
  double sup_norm = 0.0;                 // sup_t ||Qbar(t)||_1
  std::vector<double> psi;               // Lyapunov path on the grid
  std::vector<int> states;
  std::vector<double> grid;
};

FluidDiagnostics fluid_diagnostics(const ScaledPaths& scaled, const UtilityFamily& utility,
                                   const Eigen::VectorXd& mu, const Eigen::MatrixXd& rho_by_state);

struct SweepRow {
  double r = 0.0;
  std::uint64_t seed_index = 0;
  std::string policy;
  double sup_collapse = 0.0;
  double avg_collapse = 0.0;
  double avg_w_hat = 0.0;
  double sup_fluid = 0.0;
};

struct SweepRequest {
  HeavyTrafficSpec spec;
  std::vector<std::string> policies;  // first entry is the reference policy
  std::uint64_t root_seed = 1;
  int jobs = 1;
  int initial_state = 0;
};

// (scale x replica x policy) grid of simulations with paired seeds across
// policies. Rows come back in deterministic order regardless of jobs.
std::vector<SweepRow> run_sweep(const SweepRequest& request, const EnvGenerator& base_generator,
                                const CapacityRegion& region, const UtilityFamily& utility);

// Diffusion-scaled workload of one replica at one scale, for ensemble probes.
Eigen::VectorXd sweep_workload_samples(const SweepRequest& request,
                                       const EnvGenerator& base_generator,
                                       const CapacityRegion& region, const UtilityFamily& utility,
                                       double r, const std::string& policy, double t_probe,
                                       int replicas);

}  // namespace ratesched
