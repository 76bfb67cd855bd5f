#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "attest/core.hpp"

namespace attest {

/// Everything the generator produces for one configuration.
struct SyntheticDataset {
  GeneratorConfig config;
  Matrix vocab;     // m x d trigram vectors
  Matrix products;  // n_products x d unit vectors
  std::vector<Query> queries;
  QueryGraph graph;
  PurchaseMap purchases;

  friend bool operator==(const SyntheticDataset&, const SyntheticDataset&) = default;
};

/// Poisson(lambda) pmf conditioned on 1 <= k <= N; entry k-1 holds Pr[k].
std::vector<double> truncated_poisson_pmf(double lambda, std::size_t max_length);

/// Exact inverse-CDF draw from the truncated Poisson length distribution.
std::size_t sample_query_length(Rng& rng, double lambda, std::size_t max_length);

/// Z_{p,i} = sum_t exp(beta * <t, p>) over every vocabulary row.
double partition_function(std::span<const double> p, double beta, const Matrix& vocab);

/// Magnitude of the expected trigram at a position:
/// rho = m * alpha * beta * exp(beta^2 / 2) / Z.
double trigram_mean_scale(double alpha, double beta, std::size_t m, double partition);

/// Exact sampler for one (product, beta) pair. The exponential component is
/// drawn by inverting its cumulative weights, so construction is O(m) and
/// each draw O(log m). Draw order: one uniform for the component choice,
/// then one draw inside the chosen component.
class TrigramSampler {
 public:
  TrigramSampler(const Matrix& vocab, std::span<const double> p, double beta);

  TrigramId sample(Rng& rng, double alpha) const;
  TrigramId sample_exponential(Rng& rng) const;

  double beta() const noexcept { return beta_; }
  double partition() const noexcept { return partition_; }

  /// P_{p,i}(t) for every t under mixture weight alpha.
  std::vector<double> probabilities(double alpha) const;

 private:
  double beta_;
  double partition_;
  std::vector<double> cumulative_;  // scaled exp weights, running sum
};

/// One draw from the position-`position` mixture (1-based) for product p.
/// Builds a fresh TrigramSampler, so prefer TrigramSampler in loops.
TrigramId sample_trigram(Rng& rng, std::span<const double> p, std::size_t position,
                         const GeneratorConfig& config, const Matrix& vocab);

/// Edges join every pair of distinct queries whose generating products lie
/// within epsilon_p of each other (queries of the same product included).
QueryGraph build_query_graph(const Matrix& products, std::span<const Query> queries,
                             double epsilon_p);

/// Runs the full generator. Output is identical for any thread count.
SyntheticDataset generate_dataset(const GeneratorConfig& config, std::size_t threads = 1);

/// Monte Carlo mean of trigrams drawn at `position` for product p.
Vec trigram_empirical_mean(Rng& rng, std::span<const double> p, std::size_t position,
                           const GeneratorConfig& config, const Matrix& vocab,
                           std::size_t n_samples);

/// Monte Carlo estimate of E||t_i - rho_i p||^2 with rho_i computed from the
/// exact partition function of `vocab`. Requires n_samples >= 1000.
double trigram_empirical_variance(Rng& rng, std::span<const double> p, std::size_t position,
                                  const GeneratorConfig& config, const Matrix& vocab,
                                  std::size_t n_samples);

/// Mixture weights giving position variances proportional to position under
/// constant beta: alpha_i = sqrt(1 - fraction * (i - 1) / (N - 1)).
/// fraction must lie in [0, 0.75) so every alpha stays above 1/2.
std::vector<double> linear_variance_alphas(std::size_t max_length, double fraction);

}  // namespace attest
