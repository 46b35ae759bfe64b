#include "ratesched/markov_env.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "ratesched/rng.hpp"

namespace ratesched {

namespace {
constexpr double kRowSumTol = 1e-12;
}

int EnvPath::state_at(double t) const {
  if (t < 0.0 || t > horizon) {
    throw std::out_of_range("EnvPath::state_at: t=" + std::to_string(t) +
                            " outside [0, " + std::to_string(horizon) + "]");
  }
  auto it = std::upper_bound(jump_times.begin(), jump_times.end(), t);
  return states[static_cast<std::size_t>(it - jump_times.begin()) - 1];
}

EnvGenerator build_generator(const Eigen::VectorXd& holding_rates,
                             const Eigen::MatrixXd& embedded) {
  const int k = static_cast<int>(holding_rates.size());
  if (k < 1) throw std::invalid_argument("build_generator: empty holding rate vector");
  if (embedded.rows() != k || embedded.cols() != k) {
    throw std::invalid_argument(
        "build_generator: dimension mismatch, embedded matrix is " +
        std::to_string(embedded.rows()) + "x" + std::to_string(embedded.cols()) +
        " but there are " + std::to_string(k) + " holding rates");
  }
  for (int i = 0; i < k; ++i) {
    if (!(holding_rates(i) > 0.0)) {
      throw std::invalid_argument("build_generator: nonpositive rate at state " +
                                  std::to_string(i));
    }
    if (embedded(i, i) != 0.0) {
      throw std::invalid_argument("build_generator: nonzero diagonal at state " +
                                  std::to_string(i));
    }
    for (int l = 0; l < k; ++l) {
      if (embedded(i, l) < 0.0) {
        throw std::invalid_argument("build_generator: negative entry in embedded row " +
                                    std::to_string(i));
      }
    }
    const double row_sum = embedded.row(i).sum();
    // a single-state chain has no transitions at all; its only valid row is zero
    const double expected = (k == 1) ? 0.0 : 1.0;
    if (std::abs(row_sum - expected) > kRowSumTol) {
      throw std::invalid_argument("build_generator: non-stochastic row " +
                                  std::to_string(i) + " (sum=" + std::to_string(row_sum) + ")");
    }
  }

  EnvGenerator gen;
  gen.state_count = k;
  gen.holding_rates = holding_rates;
  gen.embedded = embedded;
  gen.generator = Eigen::MatrixXd::Zero(k, k);
  if (k > 1) {
    for (int i = 0; i < k; ++i) {
      gen.generator(i, i) = -holding_rates(i);
      for (int l = 0; l < k; ++l) {
        if (l != i) gen.generator(i, l) = holding_rates(i) * embedded(i, l);
      }
    }
  }
  return gen;
}

EnvPath sample_path(const EnvGenerator& gen, double horizon, int initial_state,
                    std::uint64_t seed) {
  if (!(horizon > 0.0)) throw std::invalid_argument("sample_path: horizon must be positive");
  if (initial_state < 0 || initial_state >= gen.state_count) {
    throw std::invalid_argument("sample_path: initial_state " +
                                std::to_string(initial_state) + " out of range");
  }

  EnvPath path;
  path.horizon = horizon;
  path.jump_times.push_back(0.0);
  path.states.push_back(initial_state);
  if (gen.state_count == 1) return path;

  auto eng = make_engine(seed, Stream::Environment);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::exponential_distribution<double> expo;

  double t = 0.0;
  int state = initial_state;
  for (;;) {
    expo.param(std::exponential_distribution<double>::param_type(gen.holding_rates(state)));
    t += expo(eng);
    if (t > horizon) break;
    // invert the CDF of the embedded row
    double u = unif(eng);
    int next = gen.state_count - 1;
    double acc = 0.0;
    for (int l = 0; l < gen.state_count; ++l) {
      acc += gen.embedded(state, l);
      if (u <= acc) {
        next = l;
        break;
      }
    }
    if (next == state) continue;  // possible only through rounding of the row CDF
    state = next;
    path.jump_times.push_back(t);
    path.states.push_back(state);
  }
  return path;
}

Eigen::VectorXd stationary_distribution(const EnvGenerator& gen) {
  const int k = gen.state_count;
  if (k == 1) return Eigen::VectorXd::Ones(1);

  // pi G = 0 with the normalization row appended in place of one equation
  Eigen::MatrixXd a = gen.generator.transpose();
  a.row(k - 1).setOnes();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(k);
  b(k - 1) = 1.0;

  Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
  if (!lu.isInvertible()) {
    throw std::runtime_error("stationary_distribution: singular system, chain is reducible");
  }
  Eigen::VectorXd pi = lu.solve(b);
  const double residual = (gen.generator.transpose() * pi).lpNorm<Eigen::Infinity>();
  bool positive = (pi.array() > 0.0).all();
  if (!positive || residual > 1e-10) {
    throw std::runtime_error(
        "stationary_distribution: chain is reducible (residual=" + std::to_string(residual) + ")");
  }
  return pi;
}

EnvGenerator scale_holding(const EnvGenerator& gen, double r) {
  if (!(r > 0.0)) throw std::invalid_argument("scale_holding: r must be positive");
  Eigen::VectorXd scaled = gen.holding_rates / (r * r);
  return build_generator(scaled, gen.embedded);
}

}  // namespace ratesched
