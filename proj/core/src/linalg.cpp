#include "attest/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace attest {

void Matrix::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("dot: dimension mismatch (" +
                                std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()) + ")");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double squared_norm(std::span<const double> a) noexcept {
  double s = 0.0;
  for (double x : a) s += x * x;
  return s;
}

double norm(std::span<const double> a) noexcept { return std::sqrt(squared_norm(a)); }

void axpy(double alpha, std::span<const double> x, std::span<double> y) noexcept {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("squared_distance: dimension mismatch");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = a[i] - b[i];
    s += diff * diff;
  }
  return s;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  const double denom = norm(a) * norm(b);
  if (denom == 0.0) return 0.0;
  return dot(a, b) / denom;
}

}  // namespace attest
