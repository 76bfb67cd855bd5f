#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "attest/embedder.hpp"
#include "attest/genmodel.hpp"
#include "attest/stats.hpp"
#include "attest/trainer.hpp"

namespace attest {

// ---- inverse-variance weighting ----

/// w_i = (1/var_i) / sum_j (1/var_j). Throws std::invalid_argument on an
/// empty input or a non-positive variance.
std::vector<double> blue_weights(std::span<const double> variances);

struct EstimatorVariances {
  double unweighted = 0.0;  // sum var_i / k^2
  double weighted = 0.0;    // 1 / sum (1/var_i)
};

EstimatorVariances estimator_variances(std::span<const double> variances);

/// H_k = 1 + 1/2 + ... + 1/k.
double harmonic(std::size_t k);

// ---- PMI ----

struct PmiEstimate {
  std::vector<std::pair<QueryId, QueryId>> pairs;  // indices into the query sample
  std::vector<double> pmi;
  std::vector<double> dot_over_d;
  std::vector<double> standard_error;  // 0 for the enumeration route
  std::size_t dropped = 0;             // pairs without co-occurrence counts

  double correlation() const { return pearson(pmi, dot_over_d); }
};

/// Model query vector sum_i beta_i t_i.
Vec model_query_vector(std::span<const TrigramId> trigrams, const GeneratorConfig& config,
                       const Matrix& vocab);

/// Pr[q | p] under the generator: length pmf times the per-position
/// mixture probabilities.
double query_probability(std::span<const TrigramId> trigrams, std::span<const double> p,
                         const GeneratorConfig& config, const Matrix& vocab);

/// A point within distance epsilon of p on the unit sphere (rejection on a
/// Gaussian perturbation).
Vec sample_close_product(Rng& rng, std::span<const double> p, double epsilon);

/// Query sample for the tiny universe: every length-1 sequence, followed by
/// `extra` distinct longer sequences drawn from the generator.
std::vector<std::vector<TrigramId>> pmi_query_sample(const GeneratorConfig& config,
                                                     const Matrix& vocab, std::size_t extra,
                                                     std::uint64_t seed);

/// Probabilities of the sample integrated over `n_pairs` adjacent product
/// pairs. The joint is symmetrized, so PMI(q,q') == PMI(q',q) exactly.
PmiEstimate enumerate_pmi(const GeneratorConfig& config, const Matrix& vocab,
                          std::span<const std::vector<TrigramId>> sample, std::size_t n_pairs,
                          std::uint64_t seed, std::size_t threads = 1);

/// Counting estimate: draws `n_events` adjacent query pairs from the
/// generator and counts the sampled sequences. Pairs with no joint count are
/// dropped. Throws std::invalid_argument if n_events < 1000 and
/// std::runtime_error if no pair survives.
PmiEstimate estimate_pmi(const GeneratorConfig& config, const Matrix& vocab,
                         std::span<const std::vector<TrigramId>> sample, std::size_t n_events,
                         std::uint64_t seed, std::size_t threads = 1);

// ---- attention vs inverse variance ----

struct BlueOptions {
  std::size_t variance_products = 20;     // products averaged per position
  std::size_t variance_samples = 20000;   // draws per (product, position)
  bool require_trained = true;            // reject all-zero attention rows
  std::uint64_t seed = 0;
  std::size_t threads = 1;
};

struct BlueReport {
  std::vector<std::size_t> positions;         // 1-based, positions seen in queries
  std::vector<double> attention_weight;       // mean softmax weight at the position
  std::vector<double> relative_weight;        // mean of n(q) * weight
  std::vector<std::size_t> query_count;
  std::vector<double> empirical_variance;     // mean ||t_i - rho_i p||^2
  std::vector<double> blue_weight;
  double pearson_attention = 0.0;             // attention_weight vs blue_weight
  double pearson_relative = 0.0;              // relative_weight vs blue_weight
};

BlueReport blue_report(const AttentionModel& model, const SyntheticDataset& dataset,
                       const BlueOptions& options = {});

/// Per-position empirical variance averaged over products drawn from the
/// dataset (Monte Carlo, deterministic for a seed).
std::vector<double> position_variances(const SyntheticDataset& dataset,
                                       std::span<const std::size_t> positions,
                                       std::size_t n_products, std::size_t n_samples,
                                       std::uint64_t seed, std::size_t threads = 1);

/// rho(beta) = alpha * beta * m * exp(beta^2 / 2) / Zbar(beta) with Zbar the
/// partition function averaged over a set of reference products.
class RhoCurve {
 public:
  RhoCurve(const Matrix& vocab, const Matrix& reference_products);

  double mean_partition(double beta) const;
  double operator()(double alpha, double beta) const;

 private:
  std::size_t m_;
  std::vector<double> projections_;  // reference x vocab dot products
};

struct BetaFit {
  LineFit line;                          // variance ~ intercept + slope * position
  std::vector<double> ideal_variance;
  std::vector<double> betas;             // fitted per position (reference when flagged)
  std::vector<double> residuals;         // fitted minus reference beta
  std::vector<bool> flagged;             // no root in [0, beta_max]
};

/// Solves rho(alpha_i, beta_i)^2 = L_i - v_i + rho(alpha_i, beta_ref_i)^2 for
/// each position, where L is the least-squares line through the variances.
/// The smallest root is taken. Positions with a negative target or no root
/// below beta_max are flagged.
BetaFit fit_betas(std::span<const std::size_t> positions, std::span<const double> variances,
                  std::span<const double> alphas, std::span<const double> reference_betas,
                  const RhoCurve& rho, double beta_max = 8.0);

// ---- validation suites ----

struct Check {
  std::string name;
  bool passed = false;
  double measured = 0.0;
  double threshold = 0.0;
  std::string detail;
};

struct ValidationReport {
  std::string suite;
  std::vector<Check> checks;

  bool passed() const;
  std::string to_string() const;  // one "PASS|FAIL name measured threshold" line per check
};

struct MeanSuiteParams {
  std::size_t d = 16;
  std::size_t m = 10000;
  std::size_t samples = 100000;
  std::vector<double> alphas{1.0, 0.9, 0.75};
  std::vector<double> betas{0.5, 1.0, 1.5};
  double min_cosine = 0.95;
  double max_relative_error = 0.10;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
};

struct VarianceSuiteParams {
  std::size_t d = 16;
  std::size_t m = 10000;
  std::size_t samples = 100000;
  double alpha = 1.0;
  std::vector<double> betas{0.0, 0.5, 1.0};
  double anchor_tolerance = 0.05;
  std::uint64_t seed = 0;
};

struct PartitionSuiteParams {
  std::size_t d = 16;
  std::vector<std::size_t> vocab_sizes{100, 1000, 10000};
  std::size_t n_products = 100;
  double beta = 1.0;
  std::uint64_t seed = 0;
};

struct PmiSuiteParams {
  GeneratorConfig universe;  // needs d, m, max_length, lambda, alphas, betas, epsilon_p
  std::size_t extra_queries = 40;
  std::size_t product_pairs = 200000;
  std::size_t events = 2000000;
  double min_correlation = 0.8;
  double min_within_3se = 0.95;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
};

struct AttentionSuiteParams {
  GeneratorConfig dataset;
  TrainConfig train;
  BlueOptions blue;
  double uniform_tolerance = 0.15;   // blue suite: mean |w - 1/n|
  double min_correlation = 0.8;      // figure1 suite
  std::size_t threads = 1;
};

ValidationReport run_mean_suite(const MeanSuiteParams& params);
ValidationReport run_variance_suite(const VarianceSuiteParams& params);
ValidationReport run_partition_suite(const PartitionSuiteParams& params);
ValidationReport run_pmi_suite(const PmiSuiteParams& params);
/// Formula identities plus a trained model on a constant-position dataset.
ValidationReport run_blue_suite(const AttentionSuiteParams& params);

struct Figure1Data {
  BlueReport blue;
  BetaFit betas;
  TrainResult training;
};

/// Trains on a linear-variance dataset and checks attention vs BLUE weights.
ValidationReport run_figure1_suite(const AttentionSuiteParams& params, Figure1Data* data = nullptr);

/// Mean |w_j - 1/n(q)| over every position of every query.
double mean_uniform_deviation(const AttentionModel& model, std::span<const Query> queries);

/// figure1_a.csv (position, attention_weight, blue_weight, relative_weight),
/// figure1_b.csv (position, empirical_variance, ideal_variance),
/// figure1_c.csv (position, beta_residual). The first line names the panel.
std::vector<std::filesystem::path> write_figure1_csvs(const Figure1Data& data,
                                                      const std::filesystem::path& dir);

}  // namespace attest
