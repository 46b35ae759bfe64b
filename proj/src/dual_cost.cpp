#include "ratesched/dual_cost.hpp"

#include <cmath>
#include <stdexcept>

#include "ratesched/allocator.hpp"
#include "ratesched/rng.hpp"

namespace ratesched {

double user_cost(const UtilityFamily& utility, const Eigen::VectorXd& mu, int j, double q,
                 double c) {
  return utility.psi_prime(c) * utility.phi_integral(j, q) / mu(j);
}

double user_cost_q_derivative(const UtilityFamily& utility, const Eigen::VectorXd& mu, int j,
                              double q, double c) {
  return utility.phi(j, q) * utility.psi_prime(c) / mu(j);
}

double total_cost(const UtilityFamily& utility, const Eigen::VectorXd& mu,
                  const Eigen::VectorXd& q, const Eigen::VectorXd& c) {
  if (q.size() != c.size() || q.size() != mu.size()) {
    throw std::invalid_argument("total_cost: dimension mismatch");
  }
  double v = 0.0;
  for (int j = 0; j < q.size(); ++j) v += user_cost(utility, mu, j, q(j), c(j));
  return v;
}

FixedPoint fixed_point(const UtilityFamily& utility, const Eigen::VectorXd& mu, double w,
                       const Eigen::VectorXd& rho) {
  if (w < 0.0) throw std::invalid_argument("fixed_point: workload must be nonnegative");
  if (!(rho.array() > 0.0).all()) {
    throw std::invalid_argument("fixed_point: rho must be strictly positive");
  }
  const int users = static_cast<int>(rho.size());

  FixedPoint fp;
  fp.q = Eigen::VectorXd::Zero(users);
  if (w == 0.0) return fp;

  auto q_of_theta = [&](double theta) {
    Eigen::VectorXd q(users);
    for (int j = 0; j < users; ++j) q(j) = utility.phi_inverse(j, theta / utility.psi_prime(rho(j)));
    return q;
  };
  auto workload_of = [&](double theta) { return (q_of_theta(theta).array() / mu.array()).sum(); };

  double hi = 1.0;
  int guard = 0;
  while (workload_of(hi) < w) {
    hi *= 2.0;
    if (++guard > 200) throw std::runtime_error("fixed_point: bracket growth failed");
  }
  double lo = 0.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (workload_of(mid) < w ? lo : hi) = mid;
    if (std::abs(workload_of(hi) - w) <= 1e-10 * std::max(1.0, w) && (hi - lo) <= 1e-14 * hi) break;
  }
  fp.theta = hi;
  fp.q = q_of_theta(hi);
  fp.workload = (fp.q.array() / mu.array()).sum();
  return fp;
}

double duality_roundtrip(const CapacityRegion& region, int state, const UtilityFamily& utility,
                         const Eigen::VectorXd& mu, double w) {
  if (!(w > 0.0)) throw std::invalid_argument("duality_roundtrip: w must be positive");
  const BalancedPoint bp = balanced_point(region, state);
  const FixedPoint fp = fixed_point(utility, mu, w, bp.rho);
  const Allocation alloc = allocate(region, state, fp.q, utility);
  return (alloc.rates - bp.rho).lpNorm<1>();
}

UtilizationReport full_utilization_check(const CapacityRegion& region, int state,
                                         const UtilityFamily& utility, const Eigen::VectorXd& mu,
                                         double w, double sigma_probe, int samples,
                                         std::uint64_t seed, double eps_floor) {
  if (w < eps_floor) {
    throw std::invalid_argument("full_utilization_check: w below the workload floor");
  }
  const BalancedPoint bp = balanced_point(region, state);
  const FixedPoint fp = fixed_point(utility, mu, w, bp.rho);
  const double rho_sum = bp.rho.sum();
  const int users = region.users();

  UtilizationReport rep;
  rep.sigma = sigma_probe;

  auto eng = make_engine(seed, Stream::Probe);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  auto gap_at = [&](const Eigen::VectorXd& q) {
    const Allocation alloc = allocate(region, state, q, utility);
    return std::abs(alloc.rates.sum() - rho_sum);
  };

  rep.worst_gap = gap_at(fp.q);
  rep.samples = 1;
  for (int s = 0; s < samples; ++s) {
    Eigen::VectorXd q;
    for (int attempt = 0; attempt < 1000; ++attempt) {
      Eigen::VectorXd u(users);
      for (int j = 0; j < users; ++j) u(j) = normal(eng);
      if (u.norm() == 0.0) continue;
      u *= sigma_probe * std::pow(unif(eng), 1.0 / users) / u.norm();
      Eigen::VectorXd cand = fp.q + u;
      if ((cand.array() >= 0.0).all() && (cand.array() / mu.array()).sum() >= eps_floor) {
        q = cand;
        break;
      }
    }
    if (q.size() == 0) continue;
    rep.worst_gap = std::max(rep.worst_gap, gap_at(q));
    ++rep.samples;
  }
  return rep;
}

double lyapunov(const UtilityFamily& utility, const Eigen::VectorXd& mu, const Eigen::VectorXd& q,
                const Eigen::VectorXd& rho) {
  return total_cost(utility, mu, q, rho);
}

}  // namespace ratesched
