#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "ratesched/capacity.hpp"
#include "ratesched/markov_env.hpp"
#include "ratesched/utility.hpp"

namespace ratesched {

// Arrival and packet-length statistics. lambda and alpha_sq are K x J
// (per state, per user); mu and beta_sq are per user. A zero lambda entry
// disables arrivals for that user in that state.
struct TrafficSpec {
  Eigen::MatrixXd lambda;
  Eigen::MatrixXd alpha_sq;
  Eigen::VectorXd mu;
  Eigen::VectorXd beta_sq;

  int states() const { return static_cast<int>(lambda.rows()); }
  int users() const { return static_cast<int>(lambda.cols()); }
  void validate() const;
};

// Named rate rule (q, state) -> c in R(state).
struct PolicyHandle {
  std::string name;
  std::function<Eigen::VectorXd(const Eigen::VectorXi&, int)> rate;
};

struct SimEvent {
  double time;
  char type;  // 'a' arrival, 'd' departure, 's' regime switch
  int user;   // -1 for switches
  int state;
};

// Sampled paths on a uniform grid plus exact event bookkeeping.
struct SystemTrajectory {
  double grid_step = 0.0;
  double horizon = 0.0;
  std::vector<double> times;
  std::vector<int> states;
  Eigen::MatrixXi queue;        // grid x J
  Eigen::MatrixXd service;      // grid x J, T_j(t) in bits
  Eigen::VectorXd workload;     // W(t) = sum Q_j / mu_j
  Eigen::VectorXd unused;       // Y(t)
  Eigen::VectorXd rho_integral; // int_0^t sum_j rho_j(alpha(s)) ds
  std::vector<double> env_jump_times;  // regime path within [0, horizon]
  std::vector<int> env_states;
  Eigen::VectorXi arrivals;     // totals per user
  Eigen::VectorXi departures;
  std::vector<SimEvent> events; // kept only when requested
};

// Event-driven simulation under a pluggable policy. Rates are constant
// between events; head-of-line packets are served in arrival order; the
// system starts empty. rho_by_state (K x J) defines the unused-capacity
// reference. Deterministic given the seed.
SystemTrajectory simulate(const TrafficSpec& traffic, const CapacityRegion& region,
                          const PolicyHandle& policy, const EnvPath& env, double horizon,
                          double grid_step, std::uint64_t seed,
                          const Eigen::MatrixXd& rho_by_state, bool keep_events = false);

// Y(t) recomputed from the trajectory and the balanced points of the region.
Eigen::VectorXd unused_capacity(const SystemTrajectory& trajectory, const CapacityRegion& region);

// argmax of sum_j q_j mu_j c_j over the region with c_j = 0 forced when q_j = 0.
Eigen::VectorXd maxweight_rate(const CapacityRegion& region, int state, const Eigen::VectorXi& q,
                               const Eigen::VectorXd& mu);

// Builds the named policy: "utility-max", "maxweight", or "static-rho".
// Allocations are memoized on (state, q), shared across threads.
PolicyHandle make_policy(const std::string& name, const CapacityRegion& region,
                         const UtilityFamily& utility, const Eigen::VectorXd& mu,
                         const Eigen::MatrixXd& rho_by_state);

}  // namespace ratesched
