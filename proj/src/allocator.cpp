#include "ratesched/allocator.hpp"

#include <stdexcept>

namespace ratesched {

ConcaveObjective utility_objective(const UtilityFamily& utility, const Eigen::VectorXd& queue) {
  Eigen::VectorXd weights(queue.size());
  for (int j = 0; j < queue.size(); ++j) weights(j) = utility.phi(j, queue(j));
  ConcaveObjective obj;
  obj.term = [utility, weights](int j, double c) { return weights(j) * utility.psi(c); };
  obj.slope = [utility, weights](int j, double c) { return weights(j) * utility.psi_prime(c); };
  obj.curvature = [utility, weights](int j, double c) {
    return weights(j) * utility.psi_second(c);
  };
  return obj;
}

namespace {

// view of the utility restricted to a subset of users
UtilityFamily subset_utility(const UtilityFamily& utility, const std::vector<int>& kept) {
  UtilityFamily::Spec s;
  s.users = static_cast<int>(kept.size());
  s.name = utility.name();
  s.phi = [utility, kept](int j, double q) { return utility.phi(kept[static_cast<std::size_t>(j)], q); };
  s.phi_prime = [utility, kept](int j, double q) {
    return utility.phi_prime(kept[static_cast<std::size_t>(j)], q);
  };
  s.phi_integral = [utility, kept](int j, double q) {
    return utility.phi_integral(kept[static_cast<std::size_t>(j)], q);
  };
  s.phi_inverse = [utility, kept](int j, double x) {
    return utility.phi_inverse(kept[static_cast<std::size_t>(j)], x);
  };
  s.psi = [utility](double c) { return utility.psi(c); };
  s.psi_prime = [utility](double c) { return utility.psi_prime(c); };
  s.psi_second = [utility](double c) { return utility.psi_second(c); };
  return UtilityFamily::custom(std::move(s));
}

}  // namespace

Allocation allocate(const CapacityRegion& region, int state, const Eigen::VectorXd& queue,
                    const UtilityFamily& utility, const SolveOptions& opts) {
  const int users = region.users();
  if (queue.size() != users || utility.users() != users) {
    throw std::invalid_argument("allocate: region/queue/utility dimension mismatch");
  }
  if ((queue.array() < 0.0).any()) {
    throw std::invalid_argument("allocate: queue lengths must be nonnegative");
  }

  const int facet_count = static_cast<int>(region.facets(state).size());
  Allocation out;
  out.rates = Eigen::VectorXd::Zero(users);
  out.multipliers = Eigen::VectorXd::Zero(facet_count);

  if ((queue.array() == 0.0).all()) return out;

  std::vector<int> zero_set;
  for (int j = 0; j < users; ++j) {
    if (queue(j) == 0.0) zero_set.push_back(j);
  }

  if (zero_set.empty()) {
    SolveResult res = maximize_on_region(region, state, utility_objective(utility, queue), opts);
    if (!res.converged) {
      throw std::runtime_error("allocate: solver did not converge, residual=" +
                               std::to_string(res.kkt_residual));
    }
    out.rates = res.c;
    out.multipliers = res.eta;
    out.active_facets = res.active;
    out.kkt_residual = res.kkt_residual;
    out.iterations = res.iterations;
    return out;
  }

  // reset convention: components with q_j = 0 are pinned to zero and the
  // remaining users are solved on the reduced region
  ReducedRegion reduced = reduce(region, state, zero_set);
  Eigen::VectorXd sub_queue(reduced.kept.size());
  for (std::size_t idx = 0; idx < reduced.kept.size(); ++idx) {
    sub_queue(static_cast<Eigen::Index>(idx)) = queue(reduced.kept[idx]);
  }
  Allocation sub = allocate(reduced.region, 0, sub_queue, subset_utility(utility, reduced.kept), opts);
  for (std::size_t idx = 0; idx < reduced.kept.size(); ++idx) {
    out.rates(reduced.kept[idx]) = sub.rates(static_cast<Eigen::Index>(idx));
  }
  // facet order is preserved by reduce, so multipliers carry over directly
  out.multipliers = sub.multipliers;
  out.active_facets = sub.active_facets;
  out.kkt_residual = sub.kkt_residual;
  out.iterations = sub.iterations;
  return out;
}

double allocation_kkt_residual(const CapacityRegion& region, int state,
                               const Eigen::VectorXd& queue, const UtilityFamily& utility,
                               const Eigen::VectorXd& c, const Eigen::VectorXd& eta) {
  return kkt_residual(region, state, utility_objective(utility, queue), c, eta);
}

HomogeneityReport is_radially_homogeneous(const CapacityRegion& region, int state,
                                          const UtilityFamily& utility,
                                          const Eigen::VectorXd& queue, double a, double tol) {
  if (!(a > 0.0)) throw std::invalid_argument("is_radially_homogeneous: a must be positive");
  Allocation base = allocate(region, state, queue, utility);
  Allocation scaled = allocate(region, state, (a * queue).eval(), utility);
  HomogeneityReport rep;
  rep.discrepancy = (base.rates - scaled.rates).lpNorm<1>();
  rep.homogeneous = rep.discrepancy <= tol;
  return rep;
}

}  // namespace ratesched
