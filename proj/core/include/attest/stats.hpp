#pragma once

#include <span>

namespace attest {

double mean(std::span<const double> xs);

/// Sample variance (n - 1 denominator); 0 for fewer than two values.
double sample_variance(std::span<const double> xs);

/// Pearson correlation; 0 when either input has zero spread.
double pearson(std::span<const double> xs, std::span<const double> ys);

struct LineFit {
  double intercept = 0.0;
  double slope = 0.0;

  double operator()(double x) const noexcept { return intercept + slope * x; }
};

/// Ordinary least squares y ~ intercept + slope * x.
LineFit fit_line(std::span<const double> xs, std::span<const double> ys);

}  // namespace attest
