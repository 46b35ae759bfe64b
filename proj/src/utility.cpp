#include "ratesched/utility.hpp"

#include <cmath>
#include <stdexcept>

namespace ratesched {

namespace {

// adaptive Simpson to absolute tolerance
double simpson(const std::function<double(double)>& f, double a, double b, double fa, double fm,
               double fb, double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth <= 0 || std::abs(left + right - whole) < 15.0 * tol) {
    return left + right + (left + right - whole) / 15.0;
  }
  return simpson(f, a, m, fa, flm, fm, left, tol * 0.5, depth - 1) +
         simpson(f, m, b, fm, frm, fb, right, tol * 0.5, depth - 1);
}

double integrate(const std::function<double(double)>& f, double a, double b, double tol) {
  if (b <= a) return 0.0;
  const double m = 0.5 * (a + b);
  const double fa = f(a), fm = f(m), fb = f(b);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return simpson(f, a, b, fa, fm, fb, whole, tol, 48);
}

}  // namespace

UtilityFamily::UtilityFamily(Spec spec) : spec_(std::make_shared<const Spec>(std::move(spec))) {
  if (spec_->users < 1) throw std::invalid_argument("UtilityFamily: users must be >= 1");
  for (int j = 0; j < spec_->users; ++j) {
    if (std::abs(spec_->phi(j, 0.0)) > 1e-14) {
      throw std::invalid_argument("UtilityFamily: Phi_j(0) must vanish");
    }
  }
}

double UtilityFamily::psi_second(double c) const {
  if (spec_->psi_second) return spec_->psi_second(c);
  const double eps = 1e-6 * (1.0 + std::abs(c));
  const double lo = std::max(0.0, c - eps);
  return (psi_prime(c + eps) - psi_prime(lo)) / (c + eps - lo);
}

double UtilityFamily::phi_integral(int j, double q) const {
  if (spec_->phi_integral) return spec_->phi_integral(j, q);
  return integrate([this, j](double u) { return phi(j, u); }, 0.0, q, 1e-10);
}

double UtilityFamily::phi_inverse(int j, double x) const {
  if (spec_->phi_inverse) return spec_->phi_inverse(j, x);
  if (x <= 0.0) return 0.0;
  double hi = 1.0;
  int guard = 0;
  while (phi(j, hi) < x) {
    hi *= 2.0;
    if (++guard > 200) throw std::runtime_error("phi_inverse: bracket growth failed");
  }
  double lo = 0.0;
  for (int i = 0; i < 100 && hi - lo > 1e-12 * (1.0 + hi); ++i) {
    double mid = 0.5 * (lo + hi);
    (phi(j, mid) < x ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

UtilityFamily UtilityFamily::linear_log(const Eigen::VectorXd& weights) {
  if (!(weights.array() > 0.0).all()) {
    throw std::invalid_argument("linear_log: weights must be positive");
  }
  Eigen::VectorXd w = weights;
  Spec s;
  s.users = static_cast<int>(w.size());
  s.name = "linear-log";
  s.phi = [w](int j, double q) { return w(j) * q; };
  s.phi_prime = [w](int j, double) { return w(j); };
  s.phi_integral = [w](int j, double q) { return 0.5 * w(j) * q * q; };
  s.phi_inverse = [w](int j, double x) { return x / w(j); };
  s.psi = [](double c) { return std::log1p(c); };
  s.psi_prime = [](double c) { return 1.0 / (1.0 + c); };
  s.psi_second = [](double c) { return -1.0 / ((1.0 + c) * (1.0 + c)); };
  return UtilityFamily(std::move(s));
}

UtilityFamily UtilityFamily::power(int users, double beta, double alpha) {
  if (!(beta > 0.0)) throw std::invalid_argument("power: beta must be positive");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("power: alpha must be in (0,1)");
  Spec s;
  s.users = users;
  s.name = "power";
  s.phi = [beta](int, double q) { return std::pow(q, beta); };
  s.phi_prime = [beta](int, double q) { return beta * std::pow(q, beta - 1.0); };
  s.phi_integral = [beta](int, double q) { return std::pow(q, beta + 1.0) / (beta + 1.0); };
  s.phi_inverse = [beta](int, double x) { return std::pow(x, 1.0 / beta); };
  s.psi = [alpha](double c) { return std::pow(c, 1.0 - alpha) / (1.0 - alpha); };
  s.psi_prime = [alpha](double c) { return std::pow(c, -alpha); };
  s.psi_second = [alpha](double c) { return -alpha * std::pow(c, -alpha - 1.0); };
  return UtilityFamily(std::move(s));
}

UtilityFamily UtilityFamily::custom(Spec spec) { return UtilityFamily(std::move(spec)); }

}  // namespace ratesched
