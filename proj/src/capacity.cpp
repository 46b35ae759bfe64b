#include "ratesched/capacity.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "ratesched/solver.hpp"

namespace ratesched {

CapacityRegion::CapacityRegion(int users, std::vector<std::vector<Facet>> facets_by_state,
                               std::vector<int> sum_facet_index,
                               std::vector<double> sum_capacity_hint)
    : users_(users),
      facets_(std::move(facets_by_state)),
      sum_index_(std::move(sum_facet_index)),
      sum_hint_(std::move(sum_capacity_hint)) {
  if (users_ < 1) throw std::invalid_argument("CapacityRegion: users must be >= 1");
  if (facets_.empty()) throw std::invalid_argument("CapacityRegion: no states");
  if (sum_index_.empty()) sum_index_.assign(facets_.size(), -1);
  if (sum_hint_.empty()) sum_hint_.assign(facets_.size(), std::numeric_limits<double>::quiet_NaN());
  if (sum_index_.size() != facets_.size() || sum_hint_.size() != facets_.size()) {
    throw std::invalid_argument("CapacityRegion: per-state metadata size mismatch");
  }
  const Eigen::VectorXd origin = Eigen::VectorXd::Zero(users_);
  for (std::size_t i = 0; i < facets_.size(); ++i) {
    for (const auto& f : facets_[i]) {
      if (f.value(origin) > kBoundaryTol) {
        throw std::invalid_argument("CapacityRegion: facet '" + f.name +
                                    "' excludes the origin at state " + std::to_string(i));
      }
    }
  }
}

const std::vector<Facet>& CapacityRegion::facets(int state) const {
  if (state < 0 || state >= states()) {
    throw std::out_of_range("CapacityRegion: state " + std::to_string(state) + " out of range");
  }
  return facets_[static_cast<std::size_t>(state)];
}

int CapacityRegion::sum_facet_index(int state) const {
  return sum_index_.at(static_cast<std::size_t>(state));
}

double CapacityRegion::sum_capacity_hint(int state) const {
  return sum_hint_.at(static_cast<std::size_t>(state));
}

double CapacityRegion::max_facet_value(int state, const Eigen::VectorXd& c) const {
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& f : facets(state)) worst = std::max(worst, f.value(c));
  return worst;
}

Membership CapacityRegion::membership(int state, const Eigen::VectorXd& c, double tol) const {
  if (c.size() != users_) {
    throw std::invalid_argument("membership: rate vector has " + std::to_string(c.size()) +
                                " components, region has " + std::to_string(users_) + " users");
  }
  if ((c.array() < -tol).any()) return Membership::Outside;
  // boundary means "on the capacity surface": some facet within tol of zero;
  // points on the coordinate axes with all facets slack count as interior
  const double worst = max_facet_value(state, c);
  if (worst > tol) return Membership::Outside;
  if (worst >= -tol) return Membership::Boundary;
  return Membership::Interior;
}

CapacityRegion CapacityRegion::simplex(int users, const std::vector<double>& sum_capacity) {
  if (sum_capacity.empty()) throw std::invalid_argument("simplex: no states");
  std::vector<std::vector<Facet>> facets;
  std::vector<int> sum_index;
  std::vector<double> hint;
  for (double cu : sum_capacity) {
    if (!(cu > 0.0)) throw std::invalid_argument("simplex: sum capacity must be positive");
    Facet f;
    f.name = "sum";
    f.value = [cu](const Eigen::VectorXd& c) { return c.sum() - cu; };
    f.grad = [users](const Eigen::VectorXd&) { return Eigen::VectorXd::Ones(users).eval(); };
    facets.push_back({std::move(f)});
    sum_index.push_back(0);
    hint.push_back(cu);
  }
  return CapacityRegion(users, std::move(facets), std::move(sum_index), std::move(hint));
}

CapacityRegion CapacityRegion::ellipsoid(const std::vector<Eigen::VectorXd>& semi_axes) {
  if (semi_axes.empty()) throw std::invalid_argument("ellipsoid: no states");
  const int users = static_cast<int>(semi_axes.front().size());
  std::vector<std::vector<Facet>> facets;
  for (const auto& a : semi_axes) {
    if (a.size() != users) throw std::invalid_argument("ellipsoid: inconsistent dimensions");
    if (!(a.array() > 0.0).all()) throw std::invalid_argument("ellipsoid: semi-axes must be positive");
    Eigen::VectorXd ax = a;
    Facet f;
    f.name = "ellipsoid";
    f.value = [ax](const Eigen::VectorXd& c) {
      return (c.array() / ax.array()).square().sum() - 1.0;
    };
    f.grad = [ax](const Eigen::VectorXd& c) {
      return (2.0 * c.array() / ax.array().square()).matrix().eval();
    };
    facets.push_back({std::move(f)});
  }
  return CapacityRegion(users, std::move(facets), {}, {});
}

CapacityRegion CapacityRegion::custom(int users, std::vector<std::vector<Facet>> facets_by_state,
                                      std::vector<int> sum_facet_index,
                                      std::vector<double> sum_capacity_hint) {
  return CapacityRegion(users, std::move(facets_by_state), std::move(sum_facet_index),
                        std::move(sum_capacity_hint));
}

namespace {

std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b) {
  std::uint64_t r;
  if (__builtin_mul_overflow(a, b, &r)) {
    throw std::overflow_error("facet_count: 64-bit overflow");
  }
  return r;
}

std::uint64_t checked_add(std::uint64_t a, std::uint64_t b) {
  std::uint64_t r;
  if (__builtin_add_overflow(a, b, &r)) {
    throw std::overflow_error("facet_count: 64-bit overflow");
  }
  return r;
}

std::uint64_t factorial(int n) {
  std::uint64_t r = 1;
  for (int i = 2; i <= n; ++i) r = checked_mul(r, static_cast<std::uint64_t>(i));
  return r;
}

std::uint64_t binomial(int n, int k) {
  std::uint64_t r = 1;
  for (int i = 1; i <= k; ++i) {
    r = checked_mul(r, static_cast<std::uint64_t>(n - k + i));
    r /= static_cast<std::uint64_t>(i);
  }
  return r;
}

}  // namespace

std::uint64_t facet_count(int users) {
  if (users < 1) throw std::invalid_argument("facet_count: users must be >= 1");
  std::uint64_t l = factorial(users);
  for (int j = 2; j <= users; ++j) {
    l = checked_add(l, checked_mul(binomial(users, j), factorial(users - j + 1)));
  }
  return checked_add(l, static_cast<std::uint64_t>(users));
}

std::uint64_t interior_facet_count(int users) {
  return facet_count(users) - static_cast<std::uint64_t>(users);
}

double sum_capacity(const CapacityRegion& region, int state) {
  ConcaveObjective obj = linear_objective(Eigen::VectorXd::Ones(region.users()));
  SolveResult res = maximize_on_region(region, state, obj);
  if (!res.converged) {
    throw std::runtime_error("sum_capacity: solver did not converge, residual=" +
                             std::to_string(res.kkt_residual));
  }
  const double value = res.c.sum();
  const double hint = region.sum_capacity_hint(state);
  if (!std::isnan(hint) && std::abs(value - hint) > 1e-8) {
    throw std::runtime_error("sum_capacity: solver value " + std::to_string(value) +
                             " disagrees with the facet constant " + std::to_string(hint));
  }
  return std::isnan(hint) ? value : hint;
}

BalancedPoint balanced_point(const CapacityRegion& region, int state) {
  BalancedPoint bp;
  bp.sum_capacity = sum_capacity(region, state);
  bp.rho = Eigen::VectorXd::Constant(region.users(), bp.sum_capacity / region.users());
  if (region.membership(state, bp.rho) == Membership::Outside) {
    throw std::runtime_error("balanced point infeasible at state " + std::to_string(state));
  }
  return bp;
}

Eigen::MatrixXd balanced_points(const CapacityRegion& region) {
  Eigen::MatrixXd rho(region.states(), region.users());
  for (int i = 0; i < region.states(); ++i) rho.row(i) = balanced_point(region, i).rho;
  return rho;
}

ReducedRegion reduce(const CapacityRegion& region, int state, const std::vector<int>& zero_set) {
  const int users = region.users();
  std::vector<bool> zeroed(static_cast<std::size_t>(users), false);
  for (int j : zero_set) {
    if (j < 0 || j >= users) throw std::invalid_argument("reduce: user index out of range");
    zeroed[static_cast<std::size_t>(j)] = true;
  }
  std::vector<int> kept;
  for (int j = 0; j < users; ++j) {
    if (!zeroed[static_cast<std::size_t>(j)]) kept.push_back(j);
  }
  if (kept.empty()) throw std::invalid_argument("reduce: cannot remove every user");

  const auto& source = region.facets(state);
  std::vector<Facet> restricted;
  restricted.reserve(source.size());
  const int m = static_cast<int>(kept.size());
  auto embed = [kept, users](const Eigen::VectorXd& sub) {
    Eigen::VectorXd full = Eigen::VectorXd::Zero(users);
    for (std::size_t idx = 0; idx < kept.size(); ++idx) full(kept[idx]) = sub(static_cast<int>(idx));
    return full;
  };
  for (const auto& f : source) {
    Facet g;
    g.name = f.name;
    g.value = [f, embed](const Eigen::VectorXd& sub) { return f.value(embed(sub)); };
    g.grad = [f, embed, kept](const Eigen::VectorXd& sub) {
      Eigen::VectorXd full_grad = f.grad(embed(sub));
      Eigen::VectorXd sub_grad(kept.size());
      for (std::size_t idx = 0; idx < kept.size(); ++idx) sub_grad(static_cast<int>(idx)) = full_grad(kept[idx]);
      return sub_grad;
    };
    restricted.push_back(std::move(g));
  }

  ReducedRegion out{CapacityRegion(m, {std::move(restricted)}, {-1},
                                   {std::numeric_limits<double>::quiet_NaN()}),
                    kept};
  return out;
}

}  // namespace ratesched
