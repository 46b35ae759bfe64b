#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <string>

namespace ratesched {

// Separable utility U_j(q, c) = Phi_j(q) Psi(c): a queue-side factor per user
// and one shared rate-side factor. Phi_j(0) = 0, Phi_j strictly increasing
// and unbounded; Psi strictly increasing and strictly concave.
class UtilityFamily {
 public:
  struct Spec {
    int users = 0;
    std::string name;
    std::function<double(int, double)> phi;
    std::function<double(int, double)> phi_prime;
    std::function<double(double)> psi;
    std::function<double(double)> psi_prime;
    // optional closed forms; quadrature / bisection fallbacks otherwise
    std::function<double(int, double)> phi_integral;
    std::function<double(int, double)> phi_inverse;
    std::function<double(double)> psi_second;
  };

  explicit UtilityFamily(Spec spec);

  int users() const { return spec_->users; }
  const std::string& name() const { return spec_->name; }

  double phi(int j, double q) const { return spec_->phi(j, q); }
  double phi_prime(int j, double q) const { return spec_->phi_prime(j, q); }
  double psi(double c) const { return spec_->psi(c); }
  double psi_prime(double c) const { return spec_->psi_prime(c); }
  double psi_second(double c) const;

  // integral of Phi_j over [0, q]
  double phi_integral(int j, double q) const;
  // monotone inverse of Phi_j, exact where a closed form exists
  double phi_inverse(int j, double x) const;

  double utility(int j, double q, double c) const { return phi(j, q) * psi(c); }
  double marginal(int j, double q, double c) const { return phi(j, q) * psi_prime(c); }

  // Phi_j(q) = w_j q, Psi(c) = log(1 + c)
  static UtilityFamily linear_log(const Eigen::VectorXd& weights);
  // Phi_j(q) = q^beta, Psi(c) = c^(1-alpha) / (1-alpha), beta > 0, alpha in (0,1)
  static UtilityFamily power(int users, double beta, double alpha);
  static UtilityFamily custom(Spec spec);

 private:
  std::shared_ptr<const Spec> spec_;
};

}  // namespace ratesched
