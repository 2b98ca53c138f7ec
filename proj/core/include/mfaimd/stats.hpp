#pragma once

#include <cstddef>
#include <span>

namespace mfaimd::stats {

struct MeanEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t count = 0;
};

/// Sample mean and standard error (sample standard deviation / sqrt(n)).
MeanEstimate mean_and_error(std::span<const double> xs);

double sample_variance(std::span<const double> xs);
double sample_covariance(std::span<const double> xs, std::span<const double> ys);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_error = 0.0;  ///< OLS standard error; 0 when only two points
  double r_squared = 0.0;
};

/// Ordinary least squares y = intercept + slope * x (at least two points).
LinearFit ols(std::span<const double> xs, std::span<const double> ys);

/// q with P(T <= q) = p for Student's t with `dof` degrees of freedom.
double student_t_quantile(double p, std::size_t dof);
double normal_quantile(double p);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// Two-sample Kolmogorov-Smirnov test, asymptotic p-value.
KsResult ks_two_sample(std::span<const double> xs, std::span<const double> ys);

}  // namespace mfaimd::stats
