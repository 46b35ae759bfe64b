#pragma once

#include <vector>

namespace ratesched {

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
  int n = 0;
};

MeanSe mean_se(const std::vector<double>& xs);

// two-sample Kolmogorov-Smirnov statistic sup |F_a - F_b|
double ks_statistic(std::vector<double> a, std::vector<double> b);

// Smirnov critical value c(alpha) sqrt((n+m)/(n m)) for alpha in {0.05, 0.01}
double ks_critical(int n, int m, double alpha);

// Wilson-Hilferty approximation to the chi-squared quantile
double chi_squared_quantile(double dof, double p);

}  // namespace ratesched
