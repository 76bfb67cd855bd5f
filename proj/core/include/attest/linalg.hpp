#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace attest {

/// A d-dimensional real vector. Product vectors additionally have unit norm.
using Vec = std::vector<double>;

/// Dense row-major matrix of doubles. Rows are the natural unit of access
/// (one trigram vector, one attention row), so row() hands out spans.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  std::span<double> row(std::size_t r) noexcept {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  double& operator()(std::size_t r, std::size_t c) noexcept {
    return data_[r * cols_ + c];
  }
  double operator()(std::size_t r, std::size_t c) const noexcept {
    return data_[r * cols_ + c];
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  void fill(double value);

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Inner product. Throws std::invalid_argument on dimension mismatch.
double dot(std::span<const double> a, std::span<const double> b);

double squared_norm(std::span<const double> a) noexcept;
double norm(std::span<const double> a) noexcept;

/// y += alpha * x (sizes must match; unchecked).
void axpy(double alpha, std::span<const double> x, std::span<double> y) noexcept;

double squared_distance(std::span<const double> a, std::span<const double> b);

double cosine_similarity(std::span<const double> a, std::span<const double> b);

}  // namespace attest
