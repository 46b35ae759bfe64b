#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ratesched/heavy_traffic.hpp"
#include "ratesched/mimo.hpp"
#include "ratesched/rng.hpp"
#include "ratesched/stats.hpp"

using namespace ratesched;

namespace {

Eigen::VectorXd vec2(double a, double b) {
  Eigen::VectorXd v(2);
  v << a, b;
  return v;
}

EnvGenerator two_state_env() {
  Eigen::VectorXd rates(2);
  rates << 1.0, 0.5;
  Eigen::MatrixXd embedded(2, 2);
  embedded << 0, 1, 1, 0;
  return build_generator(rates, embedded);
}

ChannelSet symmetric_channels() {
  ChannelSet ch;
  ch.channels.resize(2);
  for (int i = 0; i < 2; ++i) {
    const double gain = i == 0 ? 1.0 : 0.8;
    for (int j = 0; j < 2; ++j) {
      ch.channels[i].push_back(Eigen::MatrixXcd::Constant(1, 1, std::complex<double>(gain, 0)));
    }
  }
  ch.powers = vec2(1.0, 1.0);
  return ch;
}

HeavyTrafficSpec small_spec() {
  HeavyTrafficSpec spec;
  spec.theta = Eigen::MatrixXd::Constant(2, 2, -0.25);
  spec.r_ladder = {2.0, 4.0};
  spec.replicas = 4;
  spec.horizon = 2.0;
  spec.grid_step = 0.1;
  spec.mu = vec2(1.0, 1.0);
  spec.alpha_sq = Eigen::MatrixXd::Ones(2, 2);
  spec.beta_sq = vec2(1.0, 1.0);
  return spec;
}

}  // namespace

TEST_CASE("the r-sequence hits the drift condition exactly") {
  auto gen = two_state_env();
  auto region = mac_region_scalar(symmetric_channels());
  auto rho = balanced_points(region);
  auto spec = small_spec();
  spec.r_ladder = {10.0};
  auto systems = build_sequence(spec, gen, rho);
  REQUIRE(systems.size() == 1);
  const auto& sys = systems.front();
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      const double nominal = spec.mu(j) * rho(i, j);
      CHECK(10.0 * (sys.traffic.lambda(i, j) - nominal) == doctest::Approx(-0.25).epsilon(1e-12));
    }
  }
  CHECK(sys.generator.holding_rates(0) == doctest::Approx(0.01));
  CHECK(sys.physical_horizon == doctest::Approx(100.0 * spec.horizon));

  SUBCASE("theta = 0 keeps nominal rates") {
    spec.theta.setZero();
    auto flat = build_sequence(spec, gen, rho);
    CHECK(flat.front().traffic.lambda(0, 0) == doctest::Approx(rho(0, 0)));
  }
  SUBCASE("nonpositive rates are rejected") {
    spec.theta = Eigen::MatrixXd::Constant(2, 2, -1e4);
    CHECK_THROWS_AS(build_sequence(spec, gen, rho), std::invalid_argument);
  }
}

TEST_CASE("diffusion scaling is the exact arithmetic transform") {
  // synthetic trajectory: Q(r^2 t) = r x(t) recovers x
  const double r = 4.0;
  SystemTrajectory traj;
  traj.grid_step = r * r * 0.1;
  traj.horizon = r * r * 1.0;
  const int rows = 11;
  traj.queue.resize(rows, 1);
  traj.service.resize(rows, 1);
  traj.unused.resize(rows);
  traj.workload.resize(rows);
  traj.rho_integral.resize(rows);
  for (int k = 0; k < rows; ++k) {
    traj.times.push_back(k * traj.grid_step);
    traj.states.push_back(0);
    const double x = std::sin(0.2 * k);  // arbitrary shape
    traj.queue(k, 0) = static_cast<int>(std::lround(r * std::abs(x) * 10));
    traj.service(k, 0) = k * 1.0;
    traj.unused(k) = k * 0.5;
  }
  auto scaled = diffusion_scale(traj, r, Eigen::VectorXd::Ones(1));
  for (int k = 0; k < rows; ++k) {
    CHECK(scaled.grid[static_cast<std::size_t>(k)] == doctest::Approx(k * 0.1));
    CHECK(scaled.q_hat(k, 0) == doctest::Approx(traj.queue(k, 0) / r));
    CHECK(scaled.y_hat(k) == doctest::Approx(traj.unused(k) / r));
    // workload recomputed from scaled queues
    CHECK(scaled.w_hat(k) == doctest::Approx(scaled.q_hat(k, 0)).epsilon(1e-12));
  }
}

TEST_CASE("collapse metric vanishes in degenerate cases") {
  auto utility = UtilityFamily::linear_log(Eigen::VectorXd::Ones(1));
  Eigen::VectorXd mu = Eigen::VectorXd::Ones(1);
  Eigen::MatrixXd rho = Eigen::MatrixXd::Ones(1, 1);

  SUBCASE("single user: workload determines the queue") {
    ScaledPaths scaled;
    scaled.r = 4.0;
    scaled.q_hat.resize(5, 1);
    scaled.w_hat.resize(5);
    for (int k = 0; k < 5; ++k) {
      scaled.grid.push_back(0.1 * k);
      scaled.states.push_back(0);
      scaled.q_hat(k, 0) = 0.3 * k;
      scaled.w_hat(k) = 0.3 * k;
    }
    scaled.y_hat = Eigen::VectorXd::Zero(5);
    auto metric = collapse_metric(scaled, utility, mu, rho);
    CHECK(metric.sup < 1e-8);
    CHECK(metric.average < 1e-8);
  }
  SUBCASE("synthetic two-user path equal to the fixed point") {
    auto u2 = UtilityFamily::linear_log(vec2(1, 1));
    Eigen::VectorXd mu2 = vec2(1, 1);
    Eigen::MatrixXd rho2 = Eigen::MatrixXd::Ones(1, 2);
    ScaledPaths scaled;
    scaled.r = 4.0;
    scaled.q_hat.resize(4, 2);
    scaled.w_hat.resize(4);
    for (int k = 0; k < 4; ++k) {
      scaled.grid.push_back(0.1 * k);
      scaled.states.push_back(0);
      const double w = 0.5 * k;
      auto fp = fixed_point(u2, mu2, w, rho2.row(0));
      scaled.q_hat.row(k) = fp.q;
      scaled.w_hat(k) = w;
    }
    scaled.y_hat = Eigen::VectorXd::Zero(4);
    auto metric = collapse_metric(scaled, u2, mu2, rho2);
    CHECK(metric.sup < 1e-7);
  }
}

TEST_CASE("sweep produces paired deterministic rows") {
  auto gen = two_state_env();
  auto region = mac_region_scalar(symmetric_channels());
  auto utility = UtilityFamily::linear_log(vec2(1, 1));

  SweepRequest req;
  req.spec = small_spec();
  req.policies = {"utility-max", "static-rho"};
  req.root_seed = 3;
  req.jobs = 2;
  auto rows = run_sweep(req, gen, region, utility);
  REQUIRE(rows.size() == 2 * 4 * 2);  // scales x replicas x policies

  // identical reruns regardless of thread count
  req.jobs = 1;
  auto rows_seq = run_sweep(req, gen, region, utility);
  REQUIRE(rows_seq.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].r == rows_seq[i].r);
    CHECK(rows[i].policy == rows_seq[i].policy);
    CHECK(rows[i].sup_collapse == doctest::Approx(rows_seq[i].sup_collapse));
    CHECK(rows[i].avg_w_hat == doctest::Approx(rows_seq[i].avg_w_hat));
  }

  // the utility-max policy paired with itself gives exactly zero difference
  req.policies = {"utility-max", "utility-max"};
  auto paired = run_sweep(req, gen, region, utility);
  for (std::size_t i = 0; i < paired.size(); i += 2) {
    CHECK(paired[i].avg_w_hat == paired[i + 1].avg_w_hat);
  }
}

TEST_CASE("fluid diagnostics scale down the diffusion paths") {
  auto gen = two_state_env();
  auto region = mac_region_scalar(symmetric_channels());
  auto utility = UtilityFamily::linear_log(vec2(1, 1));
  auto rho = balanced_points(region);
  auto spec = small_spec();
  auto systems = build_sequence(spec, gen, rho);
  const auto& sys = systems.front();
  auto policy = make_policy("utility-max", region, utility, spec.mu, rho);
  auto env = sample_path(sys.generator, sys.physical_horizon, 0, 5);
  auto traj = simulate(sys.traffic, region, policy, env, sys.physical_horizon,
                       sys.physical_grid_step, 5, rho, false);
  auto scaled = diffusion_scale(traj, sys.r, spec.mu);
  auto fd = fluid_diagnostics(scaled, utility, spec.mu, rho);
  CHECK(fd.sup_norm == doctest::Approx(scaled.q_hat.cwiseAbs().rowwise().sum().maxCoeff() / sys.r));
  REQUIRE(fd.psi.size() == scaled.grid.size());
  for (double v : fd.psi) CHECK(v >= 0.0);
}
