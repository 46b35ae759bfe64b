#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "ratesched/capacity.hpp"

namespace ratesched {

// Downlink channel matrices H_j(i) of shape N x M per state and user; the
// uplink matrix of user j is the adjoint. powers are per-user budgets on the
// MAC side.
struct ChannelSet {
  std::vector<std::vector<Eigen::MatrixXcd>> channels;  // [state][user], N x M
  Eigen::VectorXd powers;

  int states() const { return static_cast<int>(channels.size()); }
  int users() const { return channels.empty() ? 0 : static_cast<int>(channels.front().size()); }
  int user_antennas() const;  // N
  int base_antennas() const;  // M

  void validate() const;
};

// Per-user transmit covariances, Hermitian PSD with Tr <= P_j.
struct CovarianceProfile {
  std::vector<Eigen::MatrixXcd> gamma;  // N x N
};

// Scalar-covariance MAC region (N = 1): the polymatroid
// sum_{j in S} c_j <= log|I + sum_{j in S} P_j H_j^† H_j| over nonempty S.
CapacityRegion mac_region_scalar(const ChannelSet& channels);

// f(Gamma, nu) = nu_J log|I + sum_j A_j| + sum_{j<J} (nu_j - nu_{j+1}) log|I + sum_{l<=j} A_l|
// with A_j = H_j^† Gamma_j H_j; nu must be sorted descending with sum 1.
double weighted_sum_rate(const ChannelSet& channels, int state, const Eigen::VectorXd& nu,
                         const CovarianceProfile& profile);

struct BoundaryPoint {
  Eigen::VectorXd rates;
  CovarianceProfile profile;
  double kkt_residual = 0.0;
  int iterations = 0;
};

struct BoundaryOptions {
  double kkt_tol = 1e-7;
  int max_iters = 10000;
  double armijo = 1e-4;
};

// Projected gradient ascent over {Gamma_j >= 0, Tr(Gamma_j) <= P_j}; rates
// decoded successively in order of increasing priority (user 1 last).
BoundaryPoint mac_boundary_point(const ChannelSet& channels, int state, const Eigen::VectorXd& nu,
                                 const BoundaryOptions& opts = {});

struct BcBoundaryPoint {
  Eigen::VectorXd rates;
  Eigen::VectorXd nu;
  Eigen::VectorXd power_split;
};

struct BcPointCloud {
  std::vector<BcBoundaryPoint> points;  // Pareto upper envelope of the union
  double sum_capacity = 0.0;            // max over splits of the dual MAC sum capacity
};

// Dual-MAC sweep over simplex power splits and priority vectors.
BcPointCloud bc_region_points(const ChannelSet& channels, double total_power, int state,
                              int split_grid_size, int nu_grid_size);

// BC region as tangent halfspaces nu.c <= s(nu) from the duality sweep; the
// equal-priority facet is the linear sum-capacity facet.
CapacityRegion bc2_region(const ChannelSet& channels, double total_power, int nu_grid_size,
                          int split_grid_size);

// Explicit two-user single-receive-antenna BC facets, in the same log
// convention as the MAC example region; diagnostic only.
std::vector<Facet> bc2_explicit_facets(const ChannelSet& channels, double total_power, int state,
                                       double sum_capacity);

// max ||c(nu') - c(nu)||_1 over random nu' with ||nu' - nu||_1 <= delta kept
// inside the strictly-descending priority simplex. Throws on a priority tie.
double boundary_continuity_probe(const ChannelSet& channels, int state, const Eigen::VectorXd& nu,
                                 double delta, int probes, std::uint64_t seed,
                                 double* lipschitz_constant = nullptr);

}  // namespace ratesched
