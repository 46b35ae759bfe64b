#include <functional>
#include "ratesched/mimo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "ratesched/rng.hpp"

namespace ratesched {

namespace {

constexpr double kNuTol = 1e-12;

// log|M| for Hermitian positive definite M, via Cholesky
double logdet_hpd(const Eigen::MatrixXcd& m) {
  Eigen::LLT<Eigen::MatrixXcd> llt(m);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("logdet: matrix is not positive definite");
  }
  double s = 0.0;
  const auto& l = llt.matrixL();
  for (Eigen::Index i = 0; i < m.rows(); ++i) s += std::log(l(i, i).real());
  return 2.0 * s;
}

Eigen::MatrixXcd uplink_term(const Eigen::MatrixXcd& h, const Eigen::MatrixXcd& gamma) {
  return h.adjoint() * gamma * h;  // M x M
}

void check_nu(const Eigen::VectorXd& nu) {
  if ((nu.array() < -kNuTol).any()) throw std::invalid_argument("priority vector has negative entries");
  if (std::abs(nu.sum() - 1.0) > kNuTol) {
    throw std::invalid_argument("priority vector must sum to 1");
  }
  for (int j = 0; j + 1 < nu.size(); ++j) {
    if (nu(j) < nu(j + 1) - kNuTol) {
      throw std::invalid_argument("priority vector must be sorted descending");
    }
  }
}

// Hermitian PSD projection with trace rescaling onto the budget only when it
// is exceeded (the optimum may be interior).
Eigen::MatrixXcd project_covariance(const Eigen::MatrixXcd& gamma, double budget) {
  Eigen::MatrixXcd h = 0.5 * (gamma + gamma.adjoint());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h);
  Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
  Eigen::MatrixXcd out =
      es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
  const double tr = out.trace().real();
  if (tr > budget && tr > 0.0) out *= budget / tr;
  return out;
}

// telescoped weights: w_j = nu_j - nu_{j+1}, w_J = nu_J
Eigen::VectorXd telescoped_weights(const Eigen::VectorXd& nu) {
  Eigen::VectorXd w(nu.size());
  for (int j = 0; j + 1 < nu.size(); ++j) w(j) = nu(j) - nu(j + 1);
  w(nu.size() - 1) = nu(nu.size() - 1);
  return w;
}

struct Objective {
  double value = 0.0;
  std::vector<Eigen::MatrixXcd> grad;  // per user, N x N Hermitian
};

Objective evaluate(const std::vector<Eigen::MatrixXcd>& h, const Eigen::VectorXd& nu,
                   const std::vector<Eigen::MatrixXcd>& gamma, bool with_grad) {
  const int users = static_cast<int>(h.size());
  const int m = static_cast<int>(h.front().cols());
  const Eigen::VectorXd w = telescoped_weights(nu);

  Objective out;
  std::vector<Eigen::MatrixXcd> inverses;
  Eigen::MatrixXcd acc = Eigen::MatrixXcd::Identity(m, m);
  for (int j = 0; j < users; ++j) {
    acc += uplink_term(h[static_cast<std::size_t>(j)], gamma[static_cast<std::size_t>(j)]);
    if (w(j) != 0.0) out.value += w(j) * logdet_hpd(acc);
    if (with_grad) inverses.push_back(acc.inverse());
  }
  if (with_grad) {
    out.grad.resize(static_cast<std::size_t>(users));
    // suffix sums of w_m * inv_m, m >= j
    Eigen::MatrixXcd suffix = Eigen::MatrixXcd::Zero(m, m);
    for (int j = users - 1; j >= 0; --j) {
      suffix += w(j) * inverses[static_cast<std::size_t>(j)];
      out.grad[static_cast<std::size_t>(j)] =
          h[static_cast<std::size_t>(j)] * suffix * h[static_cast<std::size_t>(j)].adjoint();
    }
  }
  return out;
}

Eigen::VectorXd decode_rates(const std::vector<Eigen::MatrixXcd>& h,
                             const std::vector<Eigen::MatrixXcd>& gamma) {
  const int users = static_cast<int>(h.size());
  const int m = static_cast<int>(h.front().cols());
  Eigen::VectorXd rates(users);
  Eigen::MatrixXcd acc = Eigen::MatrixXcd::Identity(m, m);
  double prev = 0.0;
  for (int j = 0; j < users; ++j) {
    acc += uplink_term(h[static_cast<std::size_t>(j)], gamma[static_cast<std::size_t>(j)]);
    const double cur = logdet_hpd(acc);
    rates(j) = cur - prev;
    prev = cur;
  }
  return rates;
}

// simplex lattice with `points` samples per edge (compositions of points-1)
std::vector<Eigen::VectorXd> simplex_grid(int dims, int points, double total) {
  if (points < 1) throw std::invalid_argument("simplex grid needs at least one point");
  std::vector<Eigen::VectorXd> grid;
  if (dims == 1) {
    grid.push_back(Eigen::VectorXd::Constant(1, total));
    return grid;
  }
  const int n = points - 1;
  std::vector<int> comp(static_cast<std::size_t>(dims), 0);
  std::function<void(int, int)> rec = [&](int pos, int remaining) {
    if (pos == dims - 1) {
      comp[static_cast<std::size_t>(pos)] = remaining;
      Eigen::VectorXd v(dims);
      for (int d = 0; d < dims; ++d) {
        v(d) = n == 0 ? total / dims : total * comp[static_cast<std::size_t>(d)] / n;
      }
      grid.push_back(v);
      return;
    }
    for (int c = 0; c <= remaining; ++c) {
      comp[static_cast<std::size_t>(pos)] = c;
      rec(pos + 1, remaining - c);
    }
  };
  rec(0, n);
  return grid;
}

BoundaryPoint boundary_point_sorted(const std::vector<Eigen::MatrixXcd>& h,
                                    const Eigen::VectorXd& powers, const Eigen::VectorXd& nu,
                                    const BoundaryOptions& opts) {
  const int users = static_cast<int>(h.size());
  const int n = static_cast<int>(h.front().rows());

  std::vector<Eigen::MatrixXcd> gamma(static_cast<std::size_t>(users));
  for (int j = 0; j < users; ++j) {
    gamma[static_cast<std::size_t>(j)] =
        (powers(j) / n) * Eigen::MatrixXcd::Identity(n, n);
  }

  auto residual_of = [&](const std::vector<Eigen::MatrixXcd>& g,
                         const std::vector<Eigen::MatrixXcd>& grad) {
    double r = 0.0;
    for (int j = 0; j < users; ++j) {
      Eigen::MatrixXcd moved = project_covariance(
          g[static_cast<std::size_t>(j)] + grad[static_cast<std::size_t>(j)], powers(j));
      r = std::max(r, (moved - g[static_cast<std::size_t>(j)]).norm());
    }
    return r;
  };

  Objective cur = evaluate(h, nu, gamma, true);
  double residual = residual_of(gamma, cur.grad);
  int iter = 0;
  double step = 1.0;
  for (; iter < opts.max_iters && residual > opts.kkt_tol; ++iter) {
    std::vector<Eigen::MatrixXcd> cand(static_cast<std::size_t>(users));
    bool accepted = false;
    for (int back = 0; back < 60; ++back) {
      double inner = 0.0;
      for (int j = 0; j < users; ++j) {
        cand[static_cast<std::size_t>(j)] = project_covariance(
            gamma[static_cast<std::size_t>(j)] + step * cur.grad[static_cast<std::size_t>(j)],
            powers(j));
        inner += (cur.grad[static_cast<std::size_t>(j)].cwiseProduct(
                      (cand[static_cast<std::size_t>(j)] - gamma[static_cast<std::size_t>(j)])
                          .conjugate()))
                     .sum()
                     .real();
      }
      const Objective trial = evaluate(h, nu, cand, false);
      if (trial.value >= cur.value + opts.armijo * inner) {
        accepted = true;
        break;
      }
      step *= 0.5;
      if (step < 1e-16) break;
    }
    if (!accepted) break;
    gamma = cand;
    cur = evaluate(h, nu, gamma, true);
    residual = residual_of(gamma, cur.grad);
    step = std::min(step * 1.5, 4.0);
  }

  if (residual > opts.kkt_tol) {
    throw std::runtime_error("mac_boundary_point: no convergence, residual=" +
                             std::to_string(residual));
  }

  BoundaryPoint out;
  out.rates = decode_rates(h, gamma);
  out.profile.gamma = gamma;
  out.kkt_residual = residual;
  out.iterations = iter;
  return out;
}

}  // namespace

int ChannelSet::user_antennas() const {
  return channels.empty() || channels.front().empty()
             ? 0
             : static_cast<int>(channels.front().front().rows());
}

int ChannelSet::base_antennas() const {
  return channels.empty() || channels.front().empty()
             ? 0
             : static_cast<int>(channels.front().front().cols());
}

void ChannelSet::validate() const {
  if (channels.empty()) throw std::invalid_argument("ChannelSet: no states");
  const int users_ = users();
  const int n = user_antennas();
  const int m = base_antennas();
  if (users_ < 1 || n < 1 || m < 1) throw std::invalid_argument("ChannelSet: empty channel matrices");
  for (const auto& state : channels) {
    if (static_cast<int>(state.size()) != users_) {
      throw std::invalid_argument("ChannelSet: user count differs across states");
    }
    for (const auto& hj : state) {
      if (hj.rows() != n || hj.cols() != m) {
        throw std::invalid_argument("ChannelSet: channel matrix shape differs across users/states");
      }
    }
  }
  if (powers.size() != users_ || !(powers.array() > 0.0).all()) {
    throw std::invalid_argument("ChannelSet: powers must be positive, one per user");
  }
}

CapacityRegion mac_region_scalar(const ChannelSet& channels) {
  channels.validate();
  if (channels.user_antennas() != 1) {
    throw std::invalid_argument("mac_region_scalar: requires N = 1 (use mac_boundary_point)");
  }
  const int users = channels.users();
  if (users > 16) throw std::invalid_argument("mac_region_scalar: too many users for subset facets");
  const int m = channels.base_antennas();

  std::vector<std::vector<Facet>> facets_by_state;
  std::vector<int> sum_index;
  std::vector<double> hint;
  const unsigned full = (1u << users) - 1u;
  for (int i = 0; i < channels.states(); ++i) {
    std::vector<Facet> facets;
    for (unsigned mask = 1; mask <= full; ++mask) {
      Eigen::MatrixXcd acc = Eigen::MatrixXcd::Identity(m, m);
      std::string name = "S{";
      for (int j = 0; j < users; ++j) {
        if (mask & (1u << j)) {
          const auto& hj = channels.channels[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
          acc += channels.powers(j) * hj.adjoint() * hj;
          name += std::to_string(j) + ",";
        }
      }
      name.back() = '}';
      const double bound = logdet_hpd(acc);
      Eigen::VectorXd sel = Eigen::VectorXd::Zero(users);
      for (int j = 0; j < users; ++j) {
        if (mask & (1u << j)) sel(j) = 1.0;
      }
      Facet f;
      f.name = std::move(name);
      f.value = [sel, bound](const Eigen::VectorXd& c) { return sel.dot(c) - bound; };
      f.grad = [sel](const Eigen::VectorXd&) { return sel; };
      facets.push_back(std::move(f));
      if (mask == full) hint.push_back(bound);
    }
    sum_index.push_back(static_cast<int>(facets.size()) - 1);
    facets_by_state.push_back(std::move(facets));
  }
  return CapacityRegion::custom(users, std::move(facets_by_state), std::move(sum_index),
                                std::move(hint));
}

double weighted_sum_rate(const ChannelSet& channels, int state, const Eigen::VectorXd& nu,
                         const CovarianceProfile& profile) {
  channels.validate();
  check_nu(nu);
  if (static_cast<int>(profile.gamma.size()) != channels.users()) {
    throw std::invalid_argument("weighted_sum_rate: profile size mismatch");
  }
  return evaluate(channels.channels.at(static_cast<std::size_t>(state)), nu, profile.gamma, false)
      .value;
}

BoundaryPoint mac_boundary_point(const ChannelSet& channels, int state, const Eigen::VectorXd& nu,
                                 const BoundaryOptions& opts) {
  channels.validate();
  check_nu(nu);
  if (nu.size() != channels.users()) {
    throw std::invalid_argument("mac_boundary_point: priority vector size mismatch");
  }
  return boundary_point_sorted(channels.channels.at(static_cast<std::size_t>(state)),
                               channels.powers, nu, opts);
}

BcPointCloud bc_region_points(const ChannelSet& channels, double total_power, int state,
                              int split_grid_size, int nu_grid_size) {
  channels.validate();
  if (!(total_power > 0.0)) throw std::invalid_argument("bc_region_points: total power must be positive");
  if (split_grid_size < 1 || nu_grid_size < 1) {
    throw std::invalid_argument("bc_region_points: grids must be nonempty");
  }
  const int users = channels.users();
  const auto& h = channels.channels.at(static_cast<std::size_t>(state));

  const auto splits = simplex_grid(users, split_grid_size, total_power);
  const auto nus = simplex_grid(users, nu_grid_size, 1.0);

  BcPointCloud cloud;
  std::vector<BcBoundaryPoint> all;
  for (const auto& split : splits) {
    // disabled users (zero power) keep a vanishing covariance via a tiny budget
    Eigen::VectorXd powers = split.cwiseMax(1e-12);
    double split_sum = -1.0;
    for (const auto& nu : nus) {
      // solve in descending priority order, then undo the permutation
      std::vector<int> order(static_cast<std::size_t>(users));
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return nu(a) > nu(b); });
      std::vector<Eigen::MatrixXcd> hs;
      Eigen::VectorXd ps(users), ns(users);
      for (int j = 0; j < users; ++j) {
        hs.push_back(h[static_cast<std::size_t>(order[static_cast<std::size_t>(j)])]);
        ps(j) = powers(order[static_cast<std::size_t>(j)]);
        ns(j) = nu(order[static_cast<std::size_t>(j)]);
      }
      BoundaryPoint bp = boundary_point_sorted(hs, ps, ns, {});
      BcBoundaryPoint point;
      point.rates = Eigen::VectorXd::Zero(users);
      for (int j = 0; j < users; ++j) point.rates(order[static_cast<std::size_t>(j)]) = bp.rates(j);
      point.nu = nu;
      point.power_split = split;
      split_sum = std::max(split_sum, bp.rates.sum());
      all.push_back(std::move(point));
    }
    cloud.sum_capacity = std::max(cloud.sum_capacity, split_sum);
  }

  // Pareto upper envelope of the union
  for (std::size_t a = 0; a < all.size(); ++a) {
    bool dominated = false;
    for (std::size_t b = 0; b < all.size() && !dominated; ++b) {
      if (a == b) continue;
      if (((all[b].rates - all[a].rates).array() >= -1e-12).all() &&
          (all[b].rates - all[a].rates).lpNorm<1>() > 1e-9) {
        dominated = true;
      }
    }
    if (!dominated) cloud.points.push_back(all[a]);
  }
  return cloud;
}

CapacityRegion bc2_region(const ChannelSet& channels, double total_power, int nu_grid_size,
                          int split_grid_size) {
  channels.validate();
  const int users = channels.users();
  if (nu_grid_size < 3) throw std::invalid_argument("bc2_region: need at least 3 priority points");

  std::vector<std::vector<Facet>> facets_by_state;
  std::vector<int> sum_index;
  std::vector<double> hint;
  for (int i = 0; i < channels.states(); ++i) {
    const auto& h = channels.channels.at(static_cast<std::size_t>(i));
    const auto splits = simplex_grid(users, split_grid_size, total_power);
    auto nus = simplex_grid(users, nu_grid_size, 1.0);
    // make sure the equal-priority direction is present
    nus.push_back(Eigen::VectorXd::Constant(users, 1.0 / users));

    std::vector<Facet> facets;
    int sum_idx = -1;
    double cu = 0.0;
    for (const auto& nu : nus) {
      std::vector<int> order(static_cast<std::size_t>(users));
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return nu(a) > nu(b); });
      double support = 0.0;
      for (const auto& split : splits) {
        Eigen::VectorXd powers = split.cwiseMax(1e-12);
        std::vector<Eigen::MatrixXcd> hs;
        Eigen::VectorXd ps(users), ns(users);
        for (int j = 0; j < users; ++j) {
          hs.push_back(h[static_cast<std::size_t>(order[static_cast<std::size_t>(j)])]);
          ps(j) = powers(order[static_cast<std::size_t>(j)]);
          ns(j) = nu(order[static_cast<std::size_t>(j)]);
        }
        support = std::max(support, evaluate(hs, ns, boundary_point_sorted(hs, ps, ns, {}).profile.gamma,
                                             false)
                                        .value);
      }
      const bool equal_priority = (nu.array() - 1.0 / users).abs().maxCoeff() < 1e-12;
      if (equal_priority && sum_idx >= 0) continue;  // already recorded
      Facet f;
      if (equal_priority) {
        // store the sum facet in sum form with unit gradient
        cu = support * users;
        const double bound = cu;
        f.name = "sum";
        f.value = [bound](const Eigen::VectorXd& c) { return c.sum() - bound; };
        f.grad = [users](const Eigen::VectorXd&) { return Eigen::VectorXd::Ones(users).eval(); };
        sum_idx = static_cast<int>(facets.size());
      } else {
        Eigen::VectorXd normal = nu;
        const double bound = support;
        f.name = "tangent";
        f.value = [normal, bound](const Eigen::VectorXd& c) { return normal.dot(c) - bound; };
        f.grad = [normal](const Eigen::VectorXd&) { return normal; };
      }
      facets.push_back(std::move(f));
    }
    facets_by_state.push_back(std::move(facets));
    sum_index.push_back(sum_idx);
    hint.push_back(cu);
  }
  return CapacityRegion::custom(users, std::move(facets_by_state), std::move(sum_index),
                                std::move(hint));
}

std::vector<Facet> bc2_explicit_facets(const ChannelSet& channels, double total_power, int state,
                                       double sum_capacity) {
  channels.validate();
  if (channels.users() != 2 || channels.user_antennas() != 1) {
    throw std::invalid_argument("bc2_explicit_facets: defined for J = 2, N = 1");
  }
  const auto& h = channels.channels.at(static_cast<std::size_t>(state));
  const int m = channels.base_antennas();
  const Eigen::MatrixXcd g1 = h[0].adjoint() * h[0];  // M x M, rank one
  const Eigen::MatrixXcd g2 = h[1].adjoint() * h[1];
  const double d1 = g1.trace().real();  // squared channel norm of user 1
  const double d2 = g2.trace().real();

  auto curved = [m, total_power](const Eigen::MatrixXcd& own, const Eigen::MatrixXcd& other,
                                 double denom, int self) {
    Facet f;
    f.name = self == 0 ? "bc-curved-1" : "bc-curved-2";
    auto det_term = [=](const Eigen::VectorXd& c) {
      const Eigen::MatrixXcd x = Eigen::MatrixXcd::Identity(m, m) +
                                 (own - other) * ((std::exp(c(self)) - 1.0) / denom) +
                                 other * total_power;
      return x.determinant().real();
    };
    f.value = [det_term](const Eigen::VectorXd& c) {
      const double det = det_term(c);
      return std::exp(c.sum()) - det * det;
    };
    f.grad = [det_term](const Eigen::VectorXd& c) {
      const double eps = 1e-7;
      Eigen::VectorXd g(c.size());
      auto val = [&](const Eigen::VectorXd& cc) {
        const double det = det_term(cc);
        return std::exp(cc.sum()) - det * det;
      };
      for (int j = 0; j < c.size(); ++j) {
        Eigen::VectorXd cp = c, cm = c;
        cp(j) += eps;
        cm(j) -= eps;
        g(j) = (val(cp) - val(cm)) / (2.0 * eps);
      }
      return g;
    };
    return f;
  };

  std::vector<Facet> facets;
  facets.push_back(curved(g1, g2, d1, 0));
  {
    Facet f;
    f.name = "bc-sum";
    const double bound = sum_capacity;
    f.value = [bound](const Eigen::VectorXd& c) { return c.sum() - bound; };
    f.grad = [](const Eigen::VectorXd& c) { return Eigen::VectorXd::Ones(c.size()).eval(); };
    facets.push_back(std::move(f));
  }
  facets.push_back(curved(g2, g1, d2, 1));
  return facets;
}

double boundary_continuity_probe(const ChannelSet& channels, int state, const Eigen::VectorXd& nu,
                                 double delta, int probes, std::uint64_t seed,
                                 double* lipschitz_constant) {
  channels.validate();
  check_nu(nu);
  const int users = channels.users();
  for (int j = 0; j + 1 < users; ++j) {
    if (nu(j) - nu(j + 1) < 1e-9) {
      throw std::invalid_argument("boundary_continuity_probe: priority tie, smoothness holds only within a facet");
    }
  }
  if (nu(users - 1) < 1e-9) {
    throw std::invalid_argument("boundary_continuity_probe: nu_J must be strictly positive");
  }
  if (delta < 0.0) throw std::invalid_argument("boundary_continuity_probe: delta must be >= 0");

  const Eigen::VectorXd base = mac_boundary_point(channels, state, nu).rates;
  double worst = 0.0;
  if (delta > 0.0) {
    auto eng = make_engine(seed, Stream::Probe);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    int done = 0;
    for (int attempt = 0; attempt < probes * 100 && done < probes; ++attempt) {
      Eigen::VectorXd u(users);
      for (int j = 0; j < users; ++j) u(j) = unif(eng);
      if (u.lpNorm<1>() == 0.0) continue;
      Eigen::VectorXd cand = nu + (delta / u.lpNorm<1>()) * u;
      if ((cand.array() <= 0.0).any()) continue;
      cand /= cand.sum();
      if ((cand - nu).lpNorm<1>() > delta) continue;
      bool descending = true;
      for (int j = 0; j + 1 < users; ++j) {
        if (cand(j) - cand(j + 1) < 1e-9) descending = false;
      }
      if (!descending) continue;
      const Eigen::VectorXd moved = mac_boundary_point(channels, state, cand).rates;
      worst = std::max(worst, (moved - base).lpNorm<1>());
      ++done;
    }
  }
  if (lipschitz_constant) *lipschitz_constant = delta > 0.0 ? worst / delta : 0.0;
  return worst;
}

}  // namespace ratesched
