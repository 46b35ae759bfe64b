#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace ratesched {

// Finite-state CTMC driving the random environment. States are 0-indexed.
// The generator G is derived from the holding rates and the embedded jump
// chain: G(i,i) = -gamma(i), G(i,l) = gamma(i) * Q(i,l) for l != i.
struct EnvGenerator {
  int state_count = 0;
  Eigen::VectorXd holding_rates;  // gamma(i) > 0, in 1/time
  Eigen::MatrixXd embedded;       // row-stochastic with zero diagonal
  Eigen::MatrixXd generator;      // rows sum to zero
};

// Piecewise-constant sample path of the chain on [0, horizon].
// jump_times[0] == 0 carries the initial state; consecutive states differ.
struct EnvPath {
  std::vector<double> jump_times;
  std::vector<int> states;
  double horizon = 0.0;

  // right-continuous state lookup
  int state_at(double t) const;
  std::size_t jump_count() const { return jump_times.size() - 1; }
};

EnvGenerator build_generator(const Eigen::VectorXd& holding_rates,
                             const Eigen::MatrixXd& embedded);

EnvPath sample_path(const EnvGenerator& gen, double horizon, int initial_state,
                    std::uint64_t seed);

// Solves pi G = 0 with sum(pi) = 1; throws if the chain is reducible.
Eigen::VectorXd stationary_distribution(const EnvGenerator& gen);

// gamma^r(i) = gamma(i) / r^2 with the embedded chain unchanged.
EnvGenerator scale_holding(const EnvGenerator& gen, double r);

}  // namespace ratesched
