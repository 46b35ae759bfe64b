#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "ratesched/allocator.hpp"
#include "ratesched/dual_cost.hpp"
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

}  // namespace

TEST_CASE("total cost closed forms") {
  auto u = UtilityFamily::linear_log(vec2(1, 1));
  Eigen::VectorXd mu = vec2(1, 1);
  SUBCASE("zero queue costs nothing") {
    CHECK(total_cost(u, mu, Eigen::VectorXd::Zero(2), vec2(1, 1)) == 0.0);
  }
  SUBCASE("worked example: q=(2,2), c=(1,1) gives V=2") {
    // per user: Psi'(1) * q^2/2 = (1/2)(4/2)... = 1
    CHECK(total_cost(u, mu, vec2(2, 2), vec2(1, 1)) == doctest::Approx(2.0));
  }
  SUBCASE("doubling q quadruples V for linear Phi") {
    const double v1 = total_cost(u, mu, vec2(1.0, 0.5), vec2(1, 1));
    const double v2 = total_cost(u, mu, vec2(2.0, 1.0), vec2(1, 1));
    CHECK(v2 == doctest::Approx(4.0 * v1));
  }
  SUBCASE("quadrature fallback agrees with the closed form") {
    UtilityFamily::Spec s;
    s.users = 2;
    s.name = "custom";
    s.phi = [](int, double q) { return q; };
    s.phi_prime = [](int, double) { return 1.0; };
    s.psi = [](double c) { return std::log1p(c); };
    s.psi_prime = [](double c) { return 1.0 / (1.0 + c); };
    auto cu = UtilityFamily::custom(std::move(s));
    CHECK(total_cost(cu, mu, vec2(2, 2), vec2(1, 1)) == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(cu.phi_inverse(0, 1.75) == doctest::Approx(1.75).epsilon(1e-9));
  }
}

TEST_CASE("marginal identity and finite differences") {
  auto u = UtilityFamily::power(2, 1.5, 0.3);
  Eigen::VectorXd mu = vec2(1.0, 2.0);
  auto eng = make_engine(31, Stream::Probe);
  std::uniform_real_distribution<double> unif(0.1, 5.0);
  for (int t = 0; t < 1000; ++t) {
    const int j = t % 2;
    const double q = unif(eng), c = unif(eng);
    // dC_j/dq = (1/mu_j) dU_j/dc
    CHECK(std::abs(user_cost_q_derivative(u, mu, j, q, c) - u.marginal(j, q, c) / mu(j)) < 1e-10);
    const double eps = 1e-5;
    const double fd = (user_cost(u, mu, j, q + eps, c) - user_cost(u, mu, j, q - eps, c)) / (2 * eps);
    CHECK(user_cost_q_derivative(u, mu, j, q, c) ==
          doctest::Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("fixed point of the cost minimization") {
  auto u = UtilityFamily::linear_log(vec2(1, 1));
  SUBCASE("w = 0 sits at the origin") {
    auto fp = fixed_point(u, vec2(1, 1), 0.0, vec2(1, 1));
    CHECK(fp.q.lpNorm<1>() == 0.0);
    CHECK(fp.theta == 0.0);
  }
  SUBCASE("hand-solved symmetric case: w=4 gives q*=(2,2), theta=1") {
    auto fp = fixed_point(u, vec2(1, 1), 4.0, vec2(1, 1));
    CHECK(fp.q(0) == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(fp.q(1) == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(fp.theta == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(fp.workload == doctest::Approx(4.0).epsilon(1e-10));
  }
  SUBCASE("mu enters only the workload constraint") {
    auto fp = fixed_point(u, vec2(1, 2), 3.0, vec2(1, 1));
    CHECK(fp.q(0) == doctest::Approx(fp.q(1)).epsilon(1e-9));
    CHECK(fp.q(0) + fp.q(1) / 2.0 == doctest::Approx(3.0).epsilon(1e-8));
  }
  SUBCASE("positivity and tightness for w > 0") {
    auto pu = UtilityFamily::power(2, 2.0, 0.5);
    for (double w : {0.01, 0.5, 2.0, 25.0}) {
      auto fp = fixed_point(pu, vec2(1.0, 3.0), w, vec2(0.5, 1.5));
      CHECK((fp.q.array() > 0.0).all());
      CHECK(std::abs((fp.q.array() / vec2(1.0, 3.0).array()).sum() - w) < 1e-8);
    }
  }
  SUBCASE("continuity in w") {
    double prev = -1.0;
    for (double w = 0.5; w < 1.5; w += 0.01) {
      auto fp = fixed_point(u, vec2(1, 1), w, vec2(1, 1));
      if (prev >= 0.0) CHECK(std::abs(fp.q(0) - prev) < 0.02);
      prev = fp.q(0);
    }
  }
  SUBCASE("value dominance among random feasible points") {
    auto eng = make_engine(4, Stream::Probe);
    std::uniform_real_distribution<double> unif(0.0, 3.0);
    Eigen::VectorXd mu = vec2(1.0, 2.0);
    Eigen::VectorXd rho = vec2(0.8, 1.2);
    const double w = 2.0;
    auto fp = fixed_point(u, mu, w, rho);
    const double vstar = total_cost(u, mu, fp.q, rho);
    for (int t = 0; t < 1000; ++t) {
      Eigen::VectorXd q = vec2(unif(eng), unif(eng));
      if ((q.array() / mu.array()).sum() < w) continue;
      CHECK(total_cost(u, mu, q, rho) >= vstar - 1e-10);
    }
  }
}

TEST_CASE("duality round trip returns the balanced point") {
  Eigen::VectorXd mu = vec2(1, 1);
  SUBCASE("simplex closed forms on both sides") {
    auto region = CapacityRegion::simplex(2, {2.0});
    for (double w : {0.5, 1.0, 4.0, 10.0}) {
      CHECK(duality_roundtrip(region, 0, UtilityFamily::linear_log(vec2(1, 1)), mu, w) < 1e-8);
    }
  }
  SUBCASE("symmetric two-user MAC") {
    auto region = mac_region_scalar(scalar_channels({1.0, 1.0}, {1.0, 1.0}));
    for (double w : {0.5, 1.0, 4.0, 10.0}) {
      CHECK(duality_roundtrip(region, 0, UtilityFamily::linear_log(vec2(1, 1)), mu, w) < 1e-6);
    }
  }
}

TEST_CASE("capacity fully used near the fixed point") {
  auto region = mac_region_scalar(scalar_channels({1.0, 1.0}, {1.0, 1.0}));
  auto u = UtilityFamily::linear_log(vec2(1, 1));
  Eigen::VectorXd mu = vec2(1, 1);
  SUBCASE("at the fixed point itself") {
    auto rep = full_utilization_check(region, 0, u, mu, 4.0, 0.0, 0, 1);
    CHECK(rep.worst_gap < 1e-7);
  }
  SUBCASE("within a 1% ball") {
    const double w = 4.0;
    auto rep = full_utilization_check(region, 0, u, mu, w, 0.01 * w, 100, 2);
    CHECK(rep.samples >= 100);
    CHECK(rep.worst_gap < 1e-4);
  }
}

TEST_CASE("lyapunov diagnostic") {
  auto u = UtilityFamily::linear_log(vec2(1, 1));
  Eigen::VectorXd mu = vec2(1, 1);
  CHECK(lyapunov(u, mu, Eigen::VectorXd::Zero(2), vec2(1, 1)) == 0.0);
  CHECK(lyapunov(u, mu, vec2(2, 2), vec2(1, 1)) == doctest::Approx(2.0));
  // monotone in each coordinate
  const double base = lyapunov(u, mu, vec2(1.0, 1.0), vec2(1, 1));
  CHECK(lyapunov(u, mu, vec2(1.3, 1.0), vec2(1, 1)) > base);
  CHECK(lyapunov(u, mu, vec2(1.0, 1.3), vec2(1, 1)) > base);
}
