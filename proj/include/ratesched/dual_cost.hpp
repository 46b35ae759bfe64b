#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "ratesched/capacity.hpp"
#include "ratesched/utility.hpp"

namespace ratesched {

// Cost induced by the utility: C_j(q, c) = (1/mu_j) Psi'(c) int_0^q Phi_j(u) du.
double user_cost(const UtilityFamily& utility, const Eigen::VectorXd& mu, int j, double q,
                 double c);
// dC_j/dq = (1/mu_j) Phi_j(q) Psi'(c)
double user_cost_q_derivative(const UtilityFamily& utility, const Eigen::VectorXd& mu, int j,
                              double q, double c);
// V(q, c) = sum_j C_j(q_j, c_j)
double total_cost(const UtilityFamily& utility, const Eigen::VectorXd& mu,
                  const Eigen::VectorXd& q, const Eigen::VectorXd& c);

struct FixedPoint {
  Eigen::VectorXd q;
  double theta = 0.0;  // multiplier of the workload constraint
  double workload = 0.0;
};

// Unique minimizer of V(., rho) subject to sum q_j / mu_j >= w, q >= 0,
// by monotone bisection on theta with q_j(theta) = Phi_j^{-1}(theta / Psi'(rho_j)).
FixedPoint fixed_point(const UtilityFamily& utility, const Eigen::VectorXd& mu, double w,
                       const Eigen::VectorXd& rho);

// ||allocate(q*(w, rho(i))) - rho(i)||_1; zero when the utility/cost duality holds.
double duality_roundtrip(const CapacityRegion& region, int state, const UtilityFamily& utility,
                         const Eigen::VectorXd& mu, double w);

struct UtilizationReport {
  double worst_gap = 0.0;
  double sigma = 0.0;
  int samples = 0;
};

// Worst |sum_j Lambda_j(q) - sum_j rho_j| over random q within distance
// sigma_probe of the fixed point, restricted to workload >= eps_floor.
UtilizationReport full_utilization_check(const CapacityRegion& region, int state,
                                         const UtilityFamily& utility, const Eigen::VectorXd& mu,
                                         double w, double sigma_probe, int samples,
                                         std::uint64_t seed, double eps_floor = 1e-3);

// psi(q, i) = sum_j C_j(q_j, rho_j(i)); the fluid-scale descent diagnostic.
double lyapunov(const UtilityFamily& utility, const Eigen::VectorXd& mu, const Eigen::VectorXd& q,
                const Eigen::VectorXd& rho);

}  // namespace ratesched
