#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace ratesched {

// One boundary piece h_k(c) <= 0 of a convex rate region, with an analytic
// gradient. Facets are normalized so gradients are order one near the
// balanced point (linear facets have 0/1 coefficients).
struct Facet {
  std::string name;
  std::function<double(const Eigen::VectorXd&)> value;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> grad;
};

enum class Membership { Interior, Boundary, Outside };

inline constexpr double kBoundaryTol = 1e-8;

// Per-state convex capacity region {c >= 0 : h_k(c,i) <= 0 for all k}.
// Immutable after construction; all queries are const.
class CapacityRegion {
 public:
  CapacityRegion(int users, std::vector<std::vector<Facet>> facets_by_state,
                 std::vector<int> sum_facet_index, std::vector<double> sum_capacity_hint);

  int users() const { return users_; }
  int states() const { return static_cast<int>(facets_.size()); }
  const std::vector<Facet>& facets(int state) const;

  // index of the linear sum-capacity facet, -1 when the region has none
  int sum_facet_index(int state) const;
  // analytic sum capacity when known at construction, NaN otherwise
  double sum_capacity_hint(int state) const;

  double max_facet_value(int state, const Eigen::VectorXd& c) const;
  Membership membership(int state, const Eigen::VectorXd& c, double tol = kBoundaryTol) const;

  // {c >= 0 : sum c_j <= cu} per state
  static CapacityRegion simplex(int users, const std::vector<double>& sum_capacity);
  // {c >= 0 : sum (c_j / a_j)^2 <= 1} per state; a smooth test family
  static CapacityRegion ellipsoid(const std::vector<Eigen::VectorXd>& semi_axes);
  static CapacityRegion custom(int users, std::vector<std::vector<Facet>> facets_by_state,
                               std::vector<int> sum_facet_index = {},
                               std::vector<double> sum_capacity_hint = {});

 private:
  int users_;
  std::vector<std::vector<Facet>> facets_;
  std::vector<int> sum_index_;
  std::vector<double> sum_hint_;
};

struct BalancedPoint {
  Eigen::VectorXd rho;
  double sum_capacity = 0.0;
};

// Region restricted to the subspace where zero_set users are pinned to 0,
// re-indexed over the kept users. Carries a single state (state 0).
struct ReducedRegion {
  CapacityRegion region;
  std::vector<int> kept;  // original user indices, ascending
};

// Number of linear or smooth curved boundary pieces of the J-user region:
// L = J! + sum_{j=2..J} C(J,j) (J-j+1)! + J. Throws on 64-bit overflow.
std::uint64_t facet_count(int users);
std::uint64_t interior_facet_count(int users);  // B = L - J

// max sum(c) over the region, via the convex solver; cross-checked against
// the sum-capacity facet constant when the region carries one.
double sum_capacity(const CapacityRegion& region, int state);

// rho_j = C_U / J for all j; throws "balanced point infeasible" when the
// equal-split point is not in the region.
BalancedPoint balanced_point(const CapacityRegion& region, int state);

// balanced points for every state, as a K x J matrix
Eigen::MatrixXd balanced_points(const CapacityRegion& region);

ReducedRegion reduce(const CapacityRegion& region, int state, const std::vector<int>& zero_set);

}  // namespace ratesched
