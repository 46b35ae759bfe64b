#pragma once

#include <Eigen/Dense>
#include <functional>
#include <limits>
#include <vector>

#include "ratesched/capacity.hpp"

namespace ratesched {

// Separable concave objective sum_j term(j, c_j), maximized over a capacity
// region. slope is d term / d c, curvature its derivative (used only by the
// Newton polish; may be a finite-difference fallback).
struct ConcaveObjective {
  std::function<double(int, double)> term;
  std::function<double(int, double)> slope;
  std::function<double(int, double)> curvature;

  double value(const Eigen::VectorXd& c) const {
    double v = 0.0;
    for (int j = 0; j < c.size(); ++j) v += term(j, c(j));
    return v;
  }
  Eigen::VectorXd gradient(const Eigen::VectorXd& c) const {
    Eigen::VectorXd g(c.size());
    for (int j = 0; j < c.size(); ++j) g(j) = slope(j, c(j));
    return g;
  }
};

ConcaveObjective linear_objective(const Eigen::VectorXd& weights);

struct SolveOptions {
  double kkt_tol = 1e-7;
  int max_iters = 10000;
  double armijo = 1e-4;
  double active_tol = 1e-6;   // |h_k| below this marks a candidate active facet
  double pin_tol = 1e-9;      // c_j below this is a candidate zero coordinate
};

struct SolveResult {
  Eigen::VectorXd c;
  Eigen::VectorXd eta;        // one multiplier per facet, >= 0
  std::vector<int> active;    // facets with eta > 0 or |h| <= active_tol
  double kkt_residual = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;
};

// Feasible-start projected gradient (projection by bisection along the
// segment to the last feasible iterate; regions are star-shaped from 0)
// followed by an active-set Newton polish on the KKT system.
SolveResult maximize_on_region(const CapacityRegion& region, int state,
                               const ConcaveObjective& objective,
                               const SolveOptions& opts = {});

// max_j |c_j (slope_j - sum_k eta_k dh_k/dc_j)| + max_k |eta_k h_k(c)|
double kkt_residual(const CapacityRegion& region, int state,
                    const ConcaveObjective& objective, const Eigen::VectorXd& c,
                    const Eigen::VectorXd& eta);

// Largest t >= 0 with t*direction feasible (membership != outside).
double boundary_scale(const CapacityRegion& region, int state,
                      const Eigen::VectorXd& direction);

}  // namespace ratesched
