#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace brwre {

/// A Monte Carlo mean with its standard error.
struct Estimate {
  double mean = 0.0;
  double standard_error = 0.0;
  std::size_t count = 0;
};

/// Neumaier-compensated sum, evaluated in index order.
double compensated_sum(std::span<const double> values);

/// Sample mean and standard error of the mean (n - 1 denominator).
Estimate mean_estimate(std::span<const double> values);

/// Proportion with binomial standard error.
Estimate proportion_estimate(std::size_t hits, std::size_t total);

/// sup_x |F_a(x) - F_b(x)| for two samples.
double ks_two_sample(std::vector<double> a, std::vector<double> b);

/// sup_x |F_n(x) - F(x)| against a continuous CDF.
double ks_against_cdf(std::vector<double> sample, const std::function<double(double)>& cdf);

double normal_cdf(double x);
double normal_survival(double x);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_standard_error = 0.0;
};

/// Ordinary least squares y = intercept + slope x.
LinearFit least_squares(std::span<const double> x, std::span<const double> y);

/// Fraction of values <= x, for each x in `points`.
std::vector<double> empirical_cdf(std::vector<double> sample, std::span<const double> points);

}  // namespace brwre
