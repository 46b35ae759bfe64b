#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "ratesched/allocator.hpp"
#include "ratesched/mimo.hpp"
#include "ratesched/rng.hpp"

using namespace ratesched;

namespace {

Eigen::VectorXd vec2(double a, double b) {
  Eigen::VectorXd v(2);
  v << a, b;
  return v;
}

ChannelSet scalar_channels(std::vector<double> h, std::vector<double> p) {
  ChannelSet ch;
  ch.channels.resize(1);
  for (double v : h) {
    ch.channels[0].push_back(Eigen::MatrixXcd::Constant(1, 1, std::complex<double>(v, 0)));
  }
  ch.powers = Eigen::Map<Eigen::VectorXd>(p.data(), static_cast<Eigen::Index>(p.size()));
  return ch;
}

// pure-log rate factor: the textbook proportional-fair utility
UtilityFamily pure_log(int users) {
  UtilityFamily::Spec s;
  s.users = users;
  s.name = "linear-purelog";
  s.phi = [](int, double q) { return q; };
  s.phi_prime = [](int, double) { return 1.0; };
  s.phi_integral = [](int, double q) { return 0.5 * q * q; };
  s.phi_inverse = [](int, double x) { return x; };
  s.psi = [](double c) { return std::log(c); };
  s.psi_prime = [](double c) { return 1.0 / c; };
  s.psi_second = [](double c) { return -1.0 / (c * c); };
  return UtilityFamily::custom(std::move(s));
}

Eigen::VectorXd random_feasible(const CapacityRegion& region, int state, std::mt19937_64& eng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Eigen::VectorXd dir(region.users());
  for (int j = 0; j < region.users(); ++j) dir(j) = unif(eng) + 1e-3;
  const double tmax = boundary_scale(region, state, dir);
  return (unif(eng) * tmax) * dir;
}

double objective_value(const UtilityFamily& u, const Eigen::VectorXd& q, const Eigen::VectorXd& c) {
  double v = 0.0;
  for (int j = 0; j < q.size(); ++j) v += u.utility(j, q(j), c(j));
  return v;
}

}  // namespace

TEST_CASE("proportional share on the simplex facet") {
  // with Phi(q)=q and Psi=log c the stationarity q_j/c_j = eta gives
  // c_j = q_j C_U / sum(q)
  const double cu = 2.0;
  auto region = CapacityRegion::simplex(2, {cu});
  auto utility = pure_log(2);
  Eigen::VectorXd q = vec2(3.0, 1.0);
  auto alloc = allocate(region, 0, q, utility);
  CHECK(alloc.rates(0) == doctest::Approx(q(0) * cu / q.sum()).epsilon(1e-8));
  CHECK(alloc.rates(1) == doctest::Approx(q(1) * cu / q.sum()).epsilon(1e-8));
  CHECK(alloc.kkt_residual < 1e-7);

  // closed-form multiplier eta = q_j Psi'(c_j), equal across users
  Eigen::VectorXd eta = Eigen::VectorXd::Constant(1, q.sum() / cu);
  CHECK(allocation_kkt_residual(region, 0, q, utility, alloc.rates, eta) < 1e-10);
}

TEST_CASE("q = 0 yields the zero rate") {
  auto region = CapacityRegion::simplex(2, {2.0});
  auto alloc = allocate(region, 0, Eigen::VectorXd::Zero(2), UtilityFamily::linear_log(vec2(1, 1)));
  CHECK(alloc.rates.lpNorm<1>() == 0.0);
  CHECK(alloc.kkt_residual == 0.0);
}

TEST_CASE("zero queue components are reset to zero on the reduced region") {
  auto region = mac_region_scalar(scalar_channels({1.0, 1.0}, {1.0, 1.0}));
  auto utility = UtilityFamily::linear_log(vec2(1, 1));
  Eigen::VectorXd q = vec2(2.5, 0.0);
  auto alloc = allocate(region, 0, q, utility);
  CHECK(alloc.rates(1) == 0.0);
  // the single-user bound log(1 + P1 h1^2) = log 2
  CHECK(alloc.rates(0) == doctest::Approx(std::log(2.0)).epsilon(1e-8));
}

TEST_CASE("kkt residual evaluations") {
  auto region = CapacityRegion::simplex(2, {2.0});
  auto utility = pure_log(2);
  Eigen::VectorXd q = vec2(1.0, 1.0);

  SUBCASE("interior point with zero multipliers violates stationarity") {
    Eigen::VectorXd c = vec2(0.5, 0.5);
    Eigen::VectorXd eta = Eigen::VectorXd::Zero(1);
    // residual = max_j |c_j dU/dc_j| = max q_j = 1
    CHECK(allocation_kkt_residual(region, 0, q, utility, c, eta) == doctest::Approx(1.0));
  }
  SUBCASE("all products vanish at the origin") {
    Eigen::VectorXd c = Eigen::VectorXd::Zero(2);
    Eigen::VectorXd eta = Eigen::VectorXd::Zero(1);
    CHECK(allocation_kkt_residual(region, 0, q, UtilityFamily::linear_log(vec2(1, 1)), c, eta) ==
          0.0);
  }
}

TEST_CASE("allocations are feasible, on the surface, and certified") {
  auto mac = mac_region_scalar(scalar_channels({1.0, 0.8}, {1.0, 1.5}));
  auto ell = CapacityRegion::ellipsoid({vec2(1.0, 2.0)});
  auto simp = CapacityRegion::simplex(2, {2.0});
  auto lin = UtilityFamily::linear_log(vec2(1.0, 2.0));
  auto pow = UtilityFamily::power(2, 1.0, 0.5);

  auto eng = make_engine(99, Stream::Probe);
  std::uniform_real_distribution<double> unif(0.05, 8.0);
  for (const CapacityRegion* region : {&mac, &ell, &simp}) {
    for (const UtilityFamily* u : {&lin, &pow}) {
      for (int t = 0; t < 40; ++t) {
        Eigen::VectorXd q = vec2(unif(eng), unif(eng));
        auto alloc = allocate(*region, 0, q, *u);
        CHECK(alloc.kkt_residual < 1e-7);
        CHECK(region->membership(0, alloc.rates) == Membership::Boundary);
        // dominance over random feasible points
        double best = -1e300;
        for (int s = 0; s < 200; ++s) {
          best = std::max(best, objective_value(*u, q, random_feasible(*region, 0, eng)));
        }
        CHECK(objective_value(*u, q, alloc.rates) >= best - 1e-9);
      }
    }
  }
}

TEST_CASE("radial homogeneity of the built-in families") {
  auto region = mac_region_scalar(scalar_channels({1.0, 0.8}, {1.0, 1.5}));
  SUBCASE("linear weights scale by a common factor") {
    auto rep = is_radially_homogeneous(region, 0, UtilityFamily::linear_log(vec2(1, 1)),
                                       vec2(1.0, 2.0), 7.0);
    CHECK(rep.homogeneous);
    CHECK(rep.discrepancy < 1e-6);
  }
  SUBCASE("quadratic queue factor scales by a^2") {
    auto rep =
        is_radially_homogeneous(region, 0, UtilityFamily::power(2, 2.0, 0.5), vec2(0.5, 1.5), 3.0);
    CHECK(rep.homogeneous);
  }
  SUBCASE("simplex closed form") {
    auto rep = is_radially_homogeneous(CapacityRegion::simplex(2, {2.0}), 0, pure_log(2),
                                       vec2(1.0, 2.0), 7.0);
    CHECK(rep.discrepancy < 1e-8);
  }
}

TEST_CASE("allocation is continuous where queues stay positive") {
  auto region = mac_region_scalar(scalar_channels({1.0, 0.8}, {1.0, 1.5}));
  auto utility = UtilityFamily::linear_log(vec2(1, 1));
  auto eng = make_engine(7, Stream::Probe);
  std::uniform_real_distribution<double> unif(0.2, 4.0);
  std::uniform_real_distribution<double> sign(-1.0, 1.0);
  for (int t = 0; t < 20; ++t) {
    Eigen::VectorXd q = vec2(unif(eng), unif(eng));
    Eigen::VectorXd base = allocate(region, 0, q, utility).rates;
    Eigen::VectorXd dir = vec2(sign(eng), sign(eng));
    Eigen::VectorXd near = q + 1e-6 * dir;
    Eigen::VectorXd moved = allocate(region, 0, near, utility).rates;
    CHECK((moved - base).lpNorm<1>() < 1e-4);
  }
}

TEST_CASE("three-user polymatroid corners stay certified") {
  auto eng = make_engine(77, Stream::Probe);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::uniform_real_distribution<double> qd(0.02, 12.0);
  for (int t = 0; t < 150; ++t) {
    ChannelSet ch;
    ch.channels.resize(1);
    std::vector<double> p;
    for (int j = 0; j < 3; ++j) {
      ch.channels[0].push_back(
          Eigen::MatrixXcd::Constant(1, 1, std::complex<double>(0.3 + unif(eng), 0)));
      p.push_back(0.3 + 1.7 * unif(eng));
    }
    ch.powers = Eigen::Map<Eigen::VectorXd>(p.data(), 3);
    auto region = mac_region_scalar(ch);
    UtilityFamily u =
        (t % 2 == 0)
            ? UtilityFamily::linear_log((Eigen::VectorXd(3) << 0.3 + unif(eng), 0.3 + unif(eng),
                                         0.3 + unif(eng))
                                            .finished())
            : UtilityFamily::power(3, 0.4 + 1.8 * unif(eng), 0.25 + 0.5 * unif(eng));
    Eigen::VectorXd q(3);
    q << qd(eng), qd(eng), qd(eng);
    if (t % 7 == 0) q(t % 3) = 0.0;
    auto alloc = allocate(region, 0, q, u);
    CHECK(alloc.kkt_residual < 1e-7);
    CHECK(region.membership(0, alloc.rates) != Membership::Outside);
    // spot-check optimality against random feasible competitors
    double va = 0.0;
    for (int j = 0; j < 3; ++j) {
      if (q(j) > 0) va += u.utility(j, q(j), alloc.rates(j));
    }
    for (int s = 0; s < 60; ++s) {
      Eigen::VectorXd c = random_feasible(region, 0, eng);
      double vc = 0.0;
      for (int j = 0; j < 3; ++j) {
        if (q(j) > 0) vc += u.utility(j, q(j), c(j));
      }
      CHECK(vc <= va + 1e-8);
    }
  }
}

TEST_CASE("corner optimum pins a rate to zero with a certificate") {
  // strongly lopsided queue weights push user 2 to the simplex corner:
  // (C, 0) is optimal when q2 Psi'(0) < q1 Psi'(C)
  auto region = CapacityRegion::simplex(2, {2.0});
  auto utility = UtilityFamily::linear_log(vec2(1, 1));
  Eigen::VectorXd q = vec2(10.0, 1.0);
  REQUIRE(1.0 * 1.0 < 10.0 / 3.0);
  auto alloc = allocate(region, 0, q, utility);
  CHECK(alloc.rates(0) == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(alloc.rates(1) == doctest::Approx(0.0));
  CHECK(alloc.kkt_residual < 1e-7);
}
