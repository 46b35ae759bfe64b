#include "ratesched/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ratesched {

MeanSe mean_se(const std::vector<double>& xs) {
  MeanSe out;
  out.n = static_cast<int>(xs.size());
  if (out.n == 0) return out;
  double sum = 0.0;
  for (double x : xs) sum += x;
  out.mean = sum / out.n;
  if (out.n > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - out.mean) * (x - out.mean);
    out.se = std::sqrt(ss / (out.n - 1) / out.n);
  }
  return out;
}

double ks_statistic(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("ks_statistic: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t ia = 0, ib = 0;
  double d = 0.0;
  while (ia < a.size() && ib < b.size()) {
    const double x = std::min(a[ia], b[ib]);
    while (ia < a.size() && a[ia] <= x) ++ia;
    while (ib < b.size() && b[ib] <= x) ++ib;
    d = std::max(d, std::abs(ia / na - ib / nb));
  }
  return d;
}

double ks_critical(int n, int m, double alpha) {
  double c;
  if (alpha == 0.05) {
    c = 1.358;
  } else if (alpha == 0.01) {
    c = 1.628;
  } else {
    c = std::sqrt(-0.5 * std::log(alpha / 2.0));
  }
  return c * std::sqrt(static_cast<double>(n + m) / (static_cast<double>(n) * m));
}

double chi_squared_quantile(double dof, double p) {
  if (!(dof > 0.0)) throw std::invalid_argument("chi_squared_quantile: dof must be positive");
  // normal quantile via Acklam-style rational approximation is overkill here;
  // the quantiles in use are fixed
  double z;
  if (p == 0.99) {
    z = 2.3263478740;
  } else if (p == 0.95) {
    z = 1.6448536270;
  } else {
    throw std::invalid_argument("chi_squared_quantile: unsupported p");
  }
  const double a = 2.0 / (9.0 * dof);
  const double term = 1.0 - a + z * std::sqrt(a);
  return dof * term * term * term;
}

}  // namespace ratesched
