#include "ratesched/solver.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ratesched {

namespace {

constexpr double kSlopeCap = 1e8;  // caps infinite marginals (e.g. c^-alpha at 0)

bool feasible(const CapacityRegion& region, int state, const Eigen::VectorXd& c) {
  return region.membership(state, c) != Membership::Outside;
}

Eigen::VectorXd capped_gradient(const ConcaveObjective& obj, const Eigen::VectorXd& c) {
  Eigen::VectorXd g = obj.gradient(c);
  for (int j = 0; j < g.size(); ++j) {
    if (!std::isfinite(g(j)) || g(j) > kSlopeCap) g(j) = kSlopeCap;
  }
  return g;
}

Eigen::MatrixXd facet_gradients(const std::vector<Facet>& facets, const Eigen::VectorXd& c) {
  Eigen::MatrixXd g(c.size(), static_cast<Eigen::Index>(facets.size()));
  for (std::size_t k = 0; k < facets.size(); ++k) g.col(static_cast<Eigen::Index>(k)) = facets[k].grad(c);
  return g;
}

// Nonnegative least squares over the active facet gradients restricted to the
// free coordinates, by enumeration of active subsets. Active sets are tiny
// (rarely more than three facets), so enumeration is both exact and cheap.
Eigen::VectorXd recover_multipliers(const CapacityRegion& region, int state,
                                    const ConcaveObjective& obj, const Eigen::VectorXd& c,
                                    const std::vector<int>& active, double pin_tol) {
  const auto& facets = region.facets(state);
  Eigen::VectorXd eta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(facets.size()));
  if (active.empty()) return eta;

  std::vector<int> free_coords;
  for (int j = 0; j < c.size(); ++j) {
    if (c(j) > pin_tol) free_coords.push_back(j);
  }
  if (free_coords.empty()) return eta;

  Eigen::VectorXd g = obj.gradient(c);
  Eigen::VectorXd rhs(static_cast<Eigen::Index>(free_coords.size()));
  for (std::size_t r = 0; r < free_coords.size(); ++r) rhs(static_cast<Eigen::Index>(r)) = g(free_coords[r]);

  Eigen::MatrixXd all_grads = facet_gradients(facets, c);

  const int na = static_cast<int>(active.size());
  const int max_enum = 12;
  double best_res = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_eta = eta;

  auto try_subset = [&](const std::vector<int>& subset) {
    Eigen::MatrixXd a(static_cast<Eigen::Index>(free_coords.size()),
                      static_cast<Eigen::Index>(subset.size()));
    for (std::size_t col = 0; col < subset.size(); ++col) {
      for (std::size_t r = 0; r < free_coords.size(); ++r) {
        a(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(col)) =
            all_grads(free_coords[r], subset[col]);
      }
    }
    Eigen::VectorXd sol = a.colPivHouseholderQr().solve(rhs);
    if ((sol.array() < -1e-12).any()) return;
    double res = (a * sol - rhs).lpNorm<Eigen::Infinity>();
    if (res < best_res) {
      best_res = res;
      best_eta.setZero();
      for (std::size_t col = 0; col < subset.size(); ++col) {
        best_eta(subset[col]) = std::max(0.0, sol(static_cast<Eigen::Index>(col)));
      }
    }
  };

  if (na <= max_enum) {
    for (unsigned mask = 1; mask < (1u << na); ++mask) {
      std::vector<int> subset;
      for (int b = 0; b < na; ++b) {
        if (mask & (1u << b)) subset.push_back(active[static_cast<std::size_t>(b)]);
      }
      try_subset(subset);
    }
  } else {
    try_subset(active);
  }
  // the empty subset (eta = 0) is always a candidate
  double res0 = rhs.lpNorm<Eigen::Infinity>();
  if (res0 < best_res) best_eta.setZero();
  return best_eta;
}

std::vector<int> detect_active(const CapacityRegion& region, int state, const Eigen::VectorXd& c,
                               double active_tol) {
  std::vector<int> active;
  const auto& facets = region.facets(state);
  for (std::size_t k = 0; k < facets.size(); ++k) {
    if (facets[k].value(c) > -active_tol) active.push_back(static_cast<int>(k));
  }
  return active;
}

// central-difference Hessian of one facet from its analytic gradient
Eigen::MatrixXd facet_hessian(const Facet& facet, const Eigen::VectorXd& c) {
  const int n = static_cast<int>(c.size());
  const double eps = 1e-6 * (1.0 + c.lpNorm<Eigen::Infinity>());
  Eigen::MatrixXd h(n, n);
  for (int l = 0; l < n; ++l) {
    Eigen::VectorXd cp = c, cm = c;
    cp(l) += eps;
    cm(l) -= eps;
    h.col(l) = (facet.grad(cp) - facet.grad(cm)) / (2.0 * eps);
  }
  return 0.5 * (h + h.transpose());
}

struct NewtonOutcome {
  Eigen::VectorXd c;
  Eigen::VectorXd eta_active;
  bool ok = false;
};

// Dual feasibility of the coordinate constraints: a pinned rate may not want
// to grow. Not part of the reported residual (which follows the c_j-weighted
// stationarity form) but required before a point counts as certified.
double pinned_dual_violation(const CapacityRegion& region, int state,
                             const ConcaveObjective& obj, const Eigen::VectorXd& c,
                             const Eigen::VectorXd& eta, double pin_tol) {
  const auto& facets = region.facets(state);
  double violation = 0.0;
  for (int j = 0; j < c.size(); ++j) {
    if (c(j) > pin_tol) continue;
    double s = obj.slope(j, 0.0);
    if (!std::isfinite(s)) return std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < facets.size(); ++k) {
      if (eta(static_cast<Eigen::Index>(k)) != 0.0) {
        s -= eta(static_cast<Eigen::Index>(k)) * facets[k].grad(c)(j);
      }
    }
    violation = std::max(violation, s);
  }
  return violation;
}

// Solves the stationarity system on a frozen active set:
//   slope_j(c_j) - sum_{k in A} eta_k dh_k/dc_j = 0   for free j
//   h_k(c) = 0                                        for k in A
// with pinned coordinates held at zero.
NewtonOutcome newton_polish(const CapacityRegion& region, int state,
                            const ConcaveObjective& obj, Eigen::VectorXd c,
                            const std::vector<int>& active, const std::vector<bool>& pinned,
                            Eigen::VectorXd eta_start) {
  NewtonOutcome out;
  const auto& facets = region.facets(state);
  const int n = static_cast<int>(c.size());
  const int m = static_cast<int>(active.size());
  std::vector<int> free_coords;
  for (int j = 0; j < n; ++j) {
    if (!pinned[static_cast<std::size_t>(j)]) free_coords.push_back(j);
  }
  const int nf = static_cast<int>(free_coords.size());
  if (nf == 0) {
    out.c = Eigen::VectorXd::Zero(n);
    out.eta_active = Eigen::VectorXd::Zero(m);
    out.ok = true;
    return out;
  }

  Eigen::VectorXd eta = eta_start;
  auto system_value = [&](const Eigen::VectorXd& cc, const Eigen::VectorXd& ee) {
    Eigen::VectorXd f(nf + m);
    Eigen::VectorXd g = obj.gradient(cc);
    Eigen::MatrixXd grads(n, m);
    for (int k = 0; k < m; ++k) grads.col(k) = facets[static_cast<std::size_t>(active[k])].grad(cc);
    for (int r = 0; r < nf; ++r) {
      double s = g(free_coords[static_cast<std::size_t>(r)]);
      for (int k = 0; k < m; ++k) s -= ee(k) * grads(free_coords[static_cast<std::size_t>(r)], k);
      f(r) = s;
    }
    for (int k = 0; k < m; ++k) f(nf + k) = facets[static_cast<std::size_t>(active[k])].value(cc);
    return f;
  };

  Eigen::VectorXd f = system_value(c, eta);
  double fnorm = f.lpNorm<Eigen::Infinity>();
  for (int iter = 0; iter < 60 && fnorm > 1e-13; ++iter) {
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(nf + m, nf + m);
    Eigen::MatrixXd grads(n, m);
    std::vector<Eigen::MatrixXd> hessians;
    hessians.reserve(static_cast<std::size_t>(m));
    for (int k = 0; k < m; ++k) {
      grads.col(k) = facets[static_cast<std::size_t>(active[k])].grad(c);
      hessians.push_back(facet_hessian(facets[static_cast<std::size_t>(active[k])], c));
    }
    for (int r = 0; r < nf; ++r) {
      const int j = free_coords[static_cast<std::size_t>(r)];
      for (int s = 0; s < nf; ++s) {
        const int l = free_coords[static_cast<std::size_t>(s)];
        double v = (j == l) ? obj.curvature(j, c(j)) : 0.0;
        for (int k = 0; k < m; ++k) v -= eta(k) * hessians[static_cast<std::size_t>(k)](j, l);
        jac(r, s) = v;
      }
      for (int k = 0; k < m; ++k) jac(r, nf + k) = -grads(j, k);
    }
    for (int k = 0; k < m; ++k) {
      for (int s = 0; s < nf; ++s) {
        jac(nf + k, s) = grads(free_coords[static_cast<std::size_t>(s)], k);
      }
    }

    Eigen::FullPivLU<Eigen::MatrixXd> lu(jac);
    if (!lu.isInvertible()) return out;  // degenerate system; caller keeps the PG point
    Eigen::VectorXd delta = lu.solve(-f);

    double t = 1.0;
    bool moved = false;
    for (int back = 0; back < 40; ++back) {
      Eigen::VectorXd cc = c;
      Eigen::VectorXd ee = eta;
      for (int r = 0; r < nf; ++r) cc(free_coords[static_cast<std::size_t>(r)]) += t * delta(r);
      for (int k = 0; k < m; ++k) ee(k) += t * delta(nf + k);
      bool in_domain = true;
      for (int r = 0; r < nf; ++r) {
        if (cc(free_coords[static_cast<std::size_t>(r)]) < 0.0) in_domain = false;
      }
      if (in_domain) {
        Eigen::VectorXd fnew = system_value(cc, ee);
        if (fnew.allFinite() && fnew.lpNorm<Eigen::Infinity>() < (1.0 - 1e-4 * t) * fnorm) {
          c = cc;
          eta = ee;
          f = fnew;
          fnorm = f.lpNorm<Eigen::Infinity>();
          moved = true;
          break;
        }
      }
      t *= 0.5;
    }
    if (!moved) break;
  }

  out.c = c;
  out.eta_active = eta;
  out.ok = fnorm < 1e-9;
  return out;
}

}  // namespace

ConcaveObjective linear_objective(const Eigen::VectorXd& weights) {
  ConcaveObjective obj;
  Eigen::VectorXd w = weights;
  obj.term = [w](int j, double c) { return w(j) * c; };
  obj.slope = [w](int j, double) { return w(j); };
  obj.curvature = [](int, double) { return 0.0; };
  return obj;
}

double boundary_scale(const CapacityRegion& region, int state, const Eigen::VectorXd& direction) {
  double hi = 1.0;
  int guard = 0;
  while (feasible(region, state, hi * direction)) {
    hi *= 2.0;
    if (++guard > 80) throw std::runtime_error("boundary_scale: region appears unbounded");
  }
  double lo = 0.0;
  for (int i = 0; i < 80; ++i) {
    double mid = 0.5 * (lo + hi);
    (feasible(region, state, mid * direction) ? lo : hi) = mid;
  }
  return lo;
}

double kkt_residual(const CapacityRegion& region, int state, const ConcaveObjective& objective,
                    const Eigen::VectorXd& c, const Eigen::VectorXd& eta) {
  const auto& facets = region.facets(state);
  double res = 0.0;
  Eigen::VectorXd g = objective.gradient(c);
  Eigen::MatrixXd grads = facet_gradients(facets, c);
  for (int j = 0; j < c.size(); ++j) {
    double s = g(j);
    if (c(j) == 0.0 && !std::isfinite(s)) s = 0.0;  // c_j multiplies the term away
    for (Eigen::Index k = 0; k < eta.size(); ++k) s -= eta(k) * grads(j, k);
    res = std::max(res, std::abs(c(j) * s));
  }
  for (std::size_t k = 0; k < facets.size(); ++k) {
    res = std::max(res, std::abs(eta(static_cast<Eigen::Index>(k)) * facets[k].value(c)));
  }
  return res;
}

SolveResult maximize_on_region(const CapacityRegion& region, int state,
                               const ConcaveObjective& objective, const SolveOptions& opts) {
  const int n = region.users();
  const auto& facets = region.facets(state);

  // strictly feasible start along the diagonal
  Eigen::VectorXd dir = Eigen::VectorXd::Ones(n);
  const double tmax = boundary_scale(region, state, dir);
  Eigen::VectorXd c = 0.45 * tmax * dir;
  if (!feasible(region, state, c)) c.setZero();

  SolveResult best;
  best.c = c;
  best.eta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(facets.size()));
  best.kkt_residual = std::numeric_limits<double>::infinity();
  // certification adds the coordinate-constraint duals to the reported
  // stationarity residual; only certified points decide convergence
  double best_cert = std::numeric_limits<double>::infinity();

  auto record = [&](const Eigen::VectorXd& point, const Eigen::VectorXd& eta,
                    const std::vector<int>& active) {
    if (!feasible(region, state, point)) return std::numeric_limits<double>::infinity();
    const double res = kkt_residual(region, state, objective, point, eta);
    const double cert =
        std::max(res, pinned_dual_violation(region, state, objective, point, eta, opts.pin_tol));
    if (cert < best_cert) {
      best.c = point;
      best.eta = eta;
      best.active = active;
      best.kkt_residual = res;
      best_cert = cert;
    }
    return cert;
  };

  auto score = [&](const Eigen::VectorXd& point) {
    std::vector<int> active = detect_active(region, state, point, opts.active_tol);
    Eigen::VectorXd eta = recover_multipliers(region, state, objective, point, active, opts.pin_tol);
    return record(point, eta, active);
  };

  // phase one: projected gradient with Armijo backtracking. On the boundary
  // the gradient is projected onto the tangent space of the active facets so
  // the iterate can slide along them instead of stalling against a wall.
  double step = 1.0;
  double fval = objective.value(c);
  int iter = 0;
  bool first_order_stop = false;
  for (; iter < opts.max_iters && !first_order_stop; ++iter) {
    Eigen::VectorXd g = capped_gradient(objective, c);
    Eigen::VectorXd dir = g;
    std::vector<int> near_active = detect_active(region, state, c, opts.active_tol);
    // slide along the active facets; at a degenerate corner drop the facet
    // with the most negative multiplier and re-project, so the iterate can
    // leave a wrong corner
    while (!near_active.empty()) {
      Eigen::MatrixXd normals(n, static_cast<Eigen::Index>(near_active.size()));
      for (std::size_t k = 0; k < near_active.size(); ++k) {
        normals.col(static_cast<Eigen::Index>(k)) =
            facets[static_cast<std::size_t>(near_active[k])].grad(c);
      }
      Eigen::VectorXd coef = normals.colPivHouseholderQr().solve(g);
      Eigen::VectorXd tangential = g - normals * coef;
      if (tangential.lpNorm<Eigen::Infinity>() > 1e-10 * g.lpNorm<Eigen::Infinity>()) {
        dir = tangential;
        break;
      }
      Eigen::Index worst;
      if (coef.minCoeff(&worst) >= -1e-12) {
        // first-order KKT point; snap exactly onto the boundary (the slide
        // keeps a small interior margin that the certificate should not pay)
        auto strictly_inside = [&](const Eigen::VectorXd& p) {
          return (p.array() >= 0.0).all() && region.max_facet_value(state, p) <= 0.0;
        };
        if (!strictly_inside(c + g)) {
          double lo = 0.0, hi = 1.0;
          for (int b = 0; b < 100; ++b) {
            double mid = 0.5 * (lo + hi);
            (strictly_inside(c + mid * g) ? lo : hi) = mid;
          }
          c += lo * g;
          fval = objective.value(c);
        }
        first_order_stop = true;
        dir.setZero();
        break;
      }
      near_active.erase(near_active.begin() + worst);
      if (near_active.empty()) dir = g;
    }
    if (first_order_stop) break;
    for (int j = 0; j < n; ++j) {
      if (c(j) <= opts.pin_tol && dir(j) < 0.0) dir(j) = 0.0;
    }

    // never cross the axis mid-step; land exactly on it instead so slides
    // along a facet terminate at the corner
    double s_eff = step;
    for (int j = 0; j < n; ++j) {
      if (dir(j) < 0.0) s_eff = std::min(s_eff, c(j) / -dir(j));
    }
    Eigen::VectorXd cand = (c + s_eff * dir).cwiseMax(0.0);
    if (!feasible(region, state, cand)) {
      double lo = 0.0, hi = 1.0;
      for (int b = 0; b < 60; ++b) {
        double mid = 0.5 * (lo + hi);
        (feasible(region, state, c + mid * (cand - c)) ? lo : hi) = mid;
      }
      // back off slightly so curved facets keep a usable interior margin
      cand = c + (0.995 * lo) * (cand - c);
    }
    double fcand = objective.value(cand);
    double gain = g.dot(cand - c);
    if (fcand >= fval + opts.armijo * gain && gain >= 0.0) {
      double movement = (cand - c).lpNorm<Eigen::Infinity>();
      c = cand;
      fval = fcand;
      step = std::min(step * 1.3, 1e3);
      if (movement < 1e-12) break;
      if (iter % 5 == 0 && score(c) < 1e-5) break;
    } else {
      step *= 0.5;
      if (step < 1e-14) break;
    }
    if (iter >= 400) break;  // hand over to the polish
  }
  score(c);

  // phase two: active-set Newton polish. The starting guess takes every facet
  // the projected gradient ended near (loose tolerance); wrong guesses are
  // dropped when their multiplier turns negative.
  std::vector<int> active = detect_active(region, state, best.c, 1e-3);
  std::vector<bool> pinned(static_cast<std::size_t>(n), false);
  for (int j = 0; j < n; ++j) {
    double s = objective.slope(j, 0.0);
    pinned[static_cast<std::size_t>(j)] = best.c(j) <= 1e-6 && std::isfinite(s);
  }

  for (int round = 0; round < 30; ++round) {
    Eigen::VectorXd eta_start(static_cast<Eigen::Index>(active.size()));
    for (std::size_t k = 0; k < active.size(); ++k) {
      eta_start(static_cast<Eigen::Index>(k)) = best.eta(active[k]);
    }
    Eigen::VectorXd c_start = best.c;
    for (int j = 0; j < n; ++j) {
      if (pinned[static_cast<std::size_t>(j)]) {
        c_start(j) = 0.0;
      } else if (c_start(j) <= opts.pin_tol) {
        c_start(j) = opts.pin_tol * 10;  // keep free coordinates off the axis
      }
    }
    NewtonOutcome nw = newton_polish(region, state, objective, c_start, active, pinned, eta_start);
    if (!nw.ok) break;

    // active-set updates
    bool changed = false;
    std::vector<int> next_active;
    for (std::size_t k = 0; k < active.size(); ++k) {
      if (nw.eta_active(static_cast<Eigen::Index>(k)) < -1e-10) {
        changed = true;  // facet leaves the active set
      } else {
        next_active.push_back(active[k]);
      }
    }
    for (std::size_t k = 0; k < facets.size(); ++k) {
      if (std::find(active.begin(), active.end(), static_cast<int>(k)) != active.end()) continue;
      if (facets[k].value(nw.c) > 1e-10) {
        next_active.push_back(static_cast<int>(k));
        changed = true;
      }
    }
    for (int j = 0; j < n; ++j) {
      if (pinned[static_cast<std::size_t>(j)]) continue;
      if (nw.c(j) < -1e-10 ||
          (nw.c(j) <= opts.pin_tol && std::isfinite(objective.slope(j, 0.0)))) {
        // a free coordinate collapsed onto the axis
        if (nw.c(j) < -1e-10) {
          pinned[static_cast<std::size_t>(j)] = true;
          changed = true;
        }
      }
    }
    // dual feasibility of pinned coordinates
    if (!changed) {
      Eigen::MatrixXd grads = facet_gradients(facets, nw.c);
      for (int j = 0; j < n; ++j) {
        if (!pinned[static_cast<std::size_t>(j)]) continue;
        double s = objective.slope(j, 0.0);
        for (std::size_t k = 0; k < active.size(); ++k) {
          s -= nw.eta_active(static_cast<Eigen::Index>(k)) * grads(j, active[k]);
        }
        if (s > 1e-10) {
          pinned[static_cast<std::size_t>(j)] = false;
          changed = true;
        }
      }
    }

    // record the round's point whenever it improves the certificate
    {
      Eigen::VectorXd cc = nw.c.cwiseMax(0.0);
      Eigen::VectorXd eta_full = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(facets.size()));
      for (std::size_t k = 0; k < active.size(); ++k) {
        eta_full(active[k]) = std::max(0.0, nw.eta_active(static_cast<Eigen::Index>(k)));
      }
      record(cc, eta_full, active);
    }
    if (!changed) break;
    active = next_active;
    std::sort(active.begin(), active.end());
    active.erase(std::unique(active.begin(), active.end()), active.end());
  }

  // rescue path for the rare instances where the active-set walk dead-ends
  // (a facet exchange coupled with a coordinate hitting zero): enumerate
  // small (active set, pinned set) bases and keep any certified solution
  if (best_cert >= opts.kkt_tol && facets.size() <= 12 && n <= 6) {
    const int b = static_cast<int>(facets.size());
    const Eigen::VectorXd start_base = 0.45 * tmax * Eigen::VectorXd::Ones(n);
    for (unsigned pmask = 0; pmask < (1u << n) && best_cert >= opts.kkt_tol; ++pmask) {
      std::vector<bool> pins(static_cast<std::size_t>(n), false);
      int np = 0;
      bool pin_ok = true;
      for (int j = 0; j < n; ++j) {
        if (pmask & (1u << j)) {
          pins[static_cast<std::size_t>(j)] = true;
          ++np;
          if (!std::isfinite(objective.slope(j, 0.0))) pin_ok = false;
        }
      }
      if (!pin_ok || np == n) continue;
      for (unsigned amask = 1; amask < (1u << b) && best_cert >= opts.kkt_tol; ++amask) {
        std::vector<int> basis;
        for (int k = 0; k < b; ++k) {
          if (amask & (1u << k)) basis.push_back(k);
        }
        if (static_cast<int>(basis.size()) + np > n) continue;
        Eigen::VectorXd c_start = start_base;
        for (int j = 0; j < n; ++j) {
          if (pins[static_cast<std::size_t>(j)]) c_start(j) = 0.0;
        }
        NewtonOutcome nw = newton_polish(region, state, objective, c_start, basis, pins,
                                         Eigen::VectorXd::Ones(static_cast<Eigen::Index>(basis.size())));
        if (!nw.ok || (nw.eta_active.array() < -1e-9).any()) continue;
        Eigen::VectorXd eta_full = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(facets.size()));
        for (std::size_t k = 0; k < basis.size(); ++k) {
          eta_full(basis[k]) = std::max(0.0, nw.eta_active(static_cast<Eigen::Index>(k)));
        }
        record(nw.c.cwiseMax(0.0), eta_full, basis);
      }
    }
  }

  best.iterations = iter;
  best.converged = best_cert < opts.kkt_tol;
  return best;
}

}  // namespace ratesched
