#pragma once

#include <Eigen/Dense>
#include <vector>

#include "ratesched/capacity.hpp"
#include "ratesched/solver.hpp"
#include "ratesched/utility.hpp"

namespace ratesched {

// Rate vector returned by the scheduling policy, with its KKT certificate.
struct Allocation {
  Eigen::VectorXd rates;
  Eigen::VectorXd multipliers;  // one per interior facet of the state
  std::vector<int> active_facets;
  double kkt_residual = 0.0;
  int iterations = 0;
};

// The scheduling policy: maximize sum_j Phi_j(q_j) Psi(c_j) over the region.
// q = 0 returns the zero rate; users with q_j = 0 are pinned to zero by exact
// recursion on the reduced region.
Allocation allocate(const CapacityRegion& region, int state, const Eigen::VectorXd& queue,
                    const UtilityFamily& utility, const SolveOptions& opts = {});

// max_j |c_j (dU_j/dc_j - sum_k eta_k dh_k/dc_j)| + max_k |eta_k h_k(c)|
double allocation_kkt_residual(const CapacityRegion& region, int state,
                               const Eigen::VectorXd& queue, const UtilityFamily& utility,
                               const Eigen::VectorXd& c, const Eigen::VectorXd& eta);

struct HomogeneityReport {
  bool homogeneous = false;
  double discrepancy = 0.0;
};

// Checks the maximizer invariance Lambda(a q) = Lambda(q).
HomogeneityReport is_radially_homogeneous(const CapacityRegion& region, int state,
                                          const UtilityFamily& utility,
                                          const Eigen::VectorXd& queue, double a,
                                          double tol = 1e-6);

// Objective for a fixed queue vector, usable with the generic solver.
ConcaveObjective utility_objective(const UtilityFamily& utility, const Eigen::VectorXd& queue);

}  // namespace ratesched
