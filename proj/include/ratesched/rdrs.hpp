#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "ratesched/markov_env.hpp"
#include "ratesched/stats.hpp"
#include "ratesched/utility.hpp"

namespace ratesched {

// Coefficients of the limiting workload diffusion: per-state drifts theta and
// diagonal covariances Gamma^E(i) = diag(lambda_j(i) alpha_j^2(i)),
// Gamma^S(i) = diag(lambda_j(i) beta_j^2).
struct RdrsSpec {
  Eigen::MatrixXd theta;    // K x J
  Eigen::MatrixXd gamma_e;  // K x J diagonal entries
  Eigen::MatrixXd gamma_s;  // K x J diagonal entries
  Eigen::VectorXd mu;
  double dt = 1e-3;
  double horizon = 1.0;

  void validate() const;
};

// Euler path of the reflected workload diffusion. The grid is refined inside
// each holding interval so every regime jump lands on a grid point.
struct RdrsPath {
  std::vector<double> times;
  std::vector<int> states;
  Eigen::VectorXd x;  // free diffusion
  Eigen::VectorXd y;  // reflection, nondecreasing from 0
  Eigen::VectorXd w;  // x + y >= 0
  Eigen::MatrixXd q;  // lifted queue path; empty until lift_to_queues
};

RdrsPath simulate_rdrs(const RdrsSpec& spec, const EnvPath& env, std::uint64_t seed);

// Qhat(t) = q*(What(t), rho(state(t))) pointwise.
void lift_to_queues(RdrsPath& path, const UtilityFamily& utility, const Eigen::VectorXd& mu,
                    const Eigen::MatrixXd& rho_by_state);

struct EnsembleComparison {
  double ks = 0.0;
  double critical_5pct = 0.0;
  double critical_1pct = 0.0;
  bool below_1pct = false;
  MeanSe first;
  MeanSe second;
};

// Two-sample comparison of workload values (e.g. What(t_probe) ensembles).
// Requires at least 100 paths on each side.
EnsembleComparison compare_to_simulation(const std::vector<double>& rdrs_samples,
                                         const std::vector<double>& sim_samples);

// What(t_probe) for an ensemble of RDRS paths driven by fresh environments.
Eigen::VectorXd rdrs_workload_samples(const RdrsSpec& spec, const EnvGenerator& generator,
                                      int initial_state, int paths, double t_probe,
                                      std::uint64_t root_seed, int jobs = 1);

// (1/T) int_0^T What dt without storing the path; for long-horizon oracles.
double rdrs_time_average_w(const RdrsSpec& spec, const EnvPath& env, std::uint64_t seed);

}  // namespace ratesched
