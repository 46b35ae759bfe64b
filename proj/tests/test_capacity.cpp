#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "ratesched/capacity.hpp"
#include "ratesched/mimo.hpp"
#include "ratesched/rng.hpp"
#include "ratesched/solver.hpp"

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

// uniformly scaled feasible point: random direction, random radius
Eigen::VectorXd random_feasible(const CapacityRegion& region, int state, std::mt19937_64& eng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Eigen::VectorXd dir(region.users());
  for (int j = 0; j < region.users(); ++j) dir(j) = unif(eng) + 1e-3;
  const double tmax = boundary_scale(region, state, dir);
  return (unif(eng) * tmax) * dir;
}

}  // namespace

TEST_CASE("facet count formula") {
  CHECK(facet_count(1) == 2);
  CHECK(facet_count(2) == 5);
  CHECK(interior_facet_count(2) == 3);
  CHECK(facet_count(3) == 16);
  CHECK(interior_facet_count(3) == 13);
  CHECK_THROWS_AS(facet_count(25), std::overflow_error);
}

TEST_CASE("membership classification") {
  auto region = CapacityRegion::simplex(2, {2.0});
  CHECK(region.membership(0, vec2(0, 0)) == Membership::Interior);
  CHECK(region.membership(0, vec2(1, 1)) == Membership::Boundary);
  CHECK(region.membership(0, vec2(1.5, 1.5)) == Membership::Outside);
  CHECK(region.membership(0, vec2(0.3, 0.4)) == Membership::Interior);
  CHECK(region.membership(0, vec2(-0.1, 0.1)) == Membership::Outside);
  Eigen::VectorXd wrong(3);
  wrong.setZero();
  CHECK_THROWS_AS(region.membership(0, wrong), std::invalid_argument);
}

TEST_CASE("sum capacity via the solver") {
  SUBCASE("simplex") { CHECK(sum_capacity(CapacityRegion::simplex(2, {2.0}), 0) == doctest::Approx(2.0)); }
  SUBCASE("two-user scalar MAC equals the full-set facet constant") {
    auto region = mac_region_scalar(scalar_channels({1.0, 1.0}, {1.0, 1.0}));
    // log|1 + P1 h1^2 + P2 h2^2| = log 3
    CHECK(sum_capacity(region, 0) == doctest::Approx(std::log(3.0)).epsilon(1e-9));
  }
  SUBCASE("scaling the region scales the sum capacity") {
    const double a = 2.5;
    auto base = CapacityRegion::ellipsoid({vec2(1.0, 2.0)});
    auto scaled = CapacityRegion::custom(
        2, {{Facet{"scaled",
                   [a, base](const Eigen::VectorXd& c) { return base.facets(0)[0].value(c / a); },
                   [a, base](const Eigen::VectorXd& c) {
                     return (base.facets(0)[0].grad(c / a) / a).eval();
                   }}}});
    CHECK(sum_capacity(scaled, 0) == doctest::Approx(a * sum_capacity(base, 0)).epsilon(1e-6));
  }
}

TEST_CASE("balanced point") {
  SUBCASE("equal split on the simplex") {
    auto bp = balanced_point(CapacityRegion::simplex(2, {2.0}), 0);
    CHECK(bp.rho(0) == doctest::Approx(1.0));
    CHECK(bp.rho(1) == doctest::Approx(1.0));
    CHECK(bp.rho(0) == bp.rho(1));
  }
  SUBCASE("symmetric two-user MAC: feasible, on the surface") {
    auto region = mac_region_scalar(scalar_channels({1.0, 1.0}, {1.0, 1.0}));
    auto bp = balanced_point(region, 0);
    CHECK(bp.rho.sum() == doctest::Approx(bp.sum_capacity).epsilon(1e-10));
    CHECK(region.membership(0, bp.rho) == Membership::Boundary);
  }
  SUBCASE("strongly asymmetric MAC: equal split infeasible") {
    // single-user bound log(1+0.1) < C_U/2 = log(1+0.1+1)/2
    auto region = mac_region_scalar(scalar_channels({1.0, 1.0}, {0.1, 1.0}));
    REQUIRE(std::log(1.1) < 0.5 * std::log(2.1));
    CHECK_THROWS_WITH_AS(balanced_point(region, 0), doctest::Contains("infeasible"),
                         std::runtime_error);
  }
}

TEST_CASE("reduce pins users to the coordinate subspace") {
  auto region = mac_region_scalar(scalar_channels({1.0, 0.8}, {1.0, 1.5}));
  SUBCASE("dropping user 1 leaves the single-user interval") {
    auto red = reduce(region, 0, {1});
    REQUIRE(red.kept == std::vector<int>{0});
    const double bound = std::log(2.0);  // log(1 + P1 h1^2)
    Eigen::VectorXd inside(1), outside(1);
    inside << bound - 1e-3;
    outside << bound + 1e-3;
    CHECK(red.region.membership(0, inside) == Membership::Interior);
    CHECK(red.region.membership(0, outside) == Membership::Outside);
    CHECK(sum_capacity(red.region, 0) == doctest::Approx(bound).epsilon(1e-8));
  }
  SUBCASE("empty zero set keeps the region") {
    auto red = reduce(region, 0, {});
    REQUIRE(red.kept == std::vector<int>{0, 1});
    auto eng = make_engine(3, Stream::Probe);
    for (int t = 0; t < 50; ++t) {
      Eigen::VectorXd c = random_feasible(region, 0, eng);
      CHECK(red.region.membership(0, c) == region.membership(0, c));
    }
  }
  SUBCASE("cannot remove every user") { CHECK_THROWS_AS(reduce(region, 0, {0, 1}), std::invalid_argument); }
  SUBCASE("three-user restriction cannot enlarge the sum capacity") {
    auto region3 = mac_region_scalar(scalar_channels({1.0, 0.9, 0.7}, {1.0, 1.0, 2.0}));
    auto red = reduce(region3, 0, {2});
    CHECK(sum_capacity(red.region, 0) <= sum_capacity(region3, 0) + 1e-9);
  }
}

TEST_CASE("convexity and free disposal hold on sampled regions") {
  auto mac = mac_region_scalar(scalar_channels({1.0, 0.8}, {1.0, 1.5}));
  auto ell = CapacityRegion::ellipsoid({vec2(1.0, 2.0)});
  auto eng = make_engine(17, Stream::Probe);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (const CapacityRegion* region : {&mac, &ell}) {
    for (int t = 0; t < 1000; ++t) {
      Eigen::VectorXd a = random_feasible(*region, 0, eng);
      Eigen::VectorXd b = random_feasible(*region, 0, eng);
      const double lam = unif(eng);
      Eigen::VectorXd mid = lam * a + (1.0 - lam) * b;
      CHECK(region->membership(0, mid) != Membership::Outside);
      // chord test on each facet: convex functions never exceed the chord
      for (const auto& facet : region->facets(0)) {
        const double chord = lam * facet.value(a) + (1.0 - lam) * facet.value(b);
        CHECK(facet.value(mid) <= chord + 1e-9);
      }
      // free disposal
      Eigen::VectorXd down = mid;
      for (int j = 0; j < 2; ++j) down(j) *= unif(eng);
      CHECK(region->membership(0, down) != Membership::Outside);
    }
  }
}

TEST_CASE("two-user MAC exposes exactly B=3 interior facets") {
  auto region = mac_region_scalar(scalar_channels({1.0, 0.8}, {1.0, 1.5}));
  CHECK(region.facets(0).size() == interior_facet_count(2));
}
