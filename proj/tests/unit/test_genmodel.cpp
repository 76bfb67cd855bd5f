#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "attest/genmodel.hpp"
#include "attest/stats.hpp"
#include "test_util.hpp"

namespace attest {
namespace {

GeneratorConfig small_config() {
  GeneratorConfig c;
  c.d = 4;
  c.m = 50;
  c.max_length = 5;
  c.lambda = 2.0;
  c.alphas.assign(5, 0.9);
  c.betas.assign(5, 1.5);
  c.epsilon_p = 0.4;
  c.n_products = 30;
  c.n_queries = 200;
  c.seed = 17;
  return c;
}

// Poisson pmf from factorials, conditioned on [1, N].
std::vector<double> poisson_oracle(double lambda, std::size_t n) {
  std::vector<double> p(n);
  double fact = 1.0;
  for (std::size_t k = 1; k <= n; ++k) {
    fact *= static_cast<double>(k);
    p[k - 1] = std::exp(-lambda) * std::pow(lambda, double(k)) / fact;
  }
  const double total = std::accumulate(p.begin(), p.end(), 0.0);
  for (double& x : p) x /= total;
  return p;
}

TEST(TruncatedPoisson, MatchesFactorialFormula) {
  const auto got = truncated_poisson_pmf(3.5, 12);
  const auto want = poisson_oracle(3.5, 12);
  ASSERT_EQ(got.size(), want.size());
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-13);
}

TEST(SampleQueryLength, NEqualsOneAlwaysOne) {
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) EXPECT_EQ(sample_query_length(rng, 4.0, 1), 1u);
}

TEST(SampleQueryLength, MeanMatchesPmfSummation) {
  const auto pmf = poisson_oracle(5.0, 50);
  double want = 0.0;
  for (std::size_t k = 1; k <= 50; ++k) want += double(k) * pmf[k - 1];
  Rng rng(2);
  double total = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const auto len = sample_query_length(rng, 5.0, 50);
    ASSERT_GE(len, 1u);
    ASSERT_LE(len, 50u);
    total += double(len);
  }
  EXPECT_NEAR(total / n, want, 0.02 * want);
}

TEST(SampleQueryLength, DistributionChiSquare) {
  const auto pmf = poisson_oracle(2.0, 6);
  Rng rng(3);
  std::vector<std::size_t> counts(6, 0);
  for (int i = 0; i < 100000; ++i) ++counts[sample_query_length(rng, 2.0, 6) - 1];
  EXPECT_GT(testing::chi_square_p(counts, pmf), 0.01);
}

TEST(SampleQueryLength, RejectsBadParameters) {
  Rng rng(1);
  EXPECT_THROW(sample_query_length(rng, 0.0, 5), std::invalid_argument);
  EXPECT_THROW(sample_query_length(rng, 1.0, 0), std::invalid_argument);
}

TEST(PartitionFunction, BetaZeroGivesM) {
  Rng rng(4);
  const Matrix vocab = sample_trigram_vocab(rng, 37, 3);
  const Vec p = sample_unit_sphere(rng, 3);
  EXPECT_EQ(partition_function(p, 0.0, vocab), 37.0);
}

TEST(PartitionFunction, TwoTermHandEvaluation) {
  Matrix vocab(2, 2);
  vocab(0, 0) = 1.0;
  vocab(0, 1) = 2.0;
  vocab(1, 0) = -0.5;
  vocab(1, 1) = 0.25;
  const Vec p{0.6, 0.8};
  const double want = std::exp(0.6 + 1.6) + std::exp(-0.3 + 0.2);
  EXPECT_NEAR(partition_function(p, 1.0, vocab), want, 1e-12);
}

TEST(PartitionFunction, ConcentratesAsVocabularyGrows) {
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t m : {1000u, 10000u}) {
    Rng rng(5 + m);
    const Matrix vocab = sample_trigram_vocab(rng, m, 16);
    std::vector<double> z;
    for (int i = 0; i < 100; ++i) z.push_back(partition_function(sample_unit_sphere(rng, 16), 1.0, vocab));
    const double rel = std::sqrt(sample_variance(z)) / mean(z);
    EXPECT_LT(rel, prev);
    prev = rel;
  }
}

TEST(TrigramMeanScale, Formula) {
  EXPECT_DOUBLE_EQ(trigram_mean_scale(0.8, 1.5, 100, 250.0),
                   100 * 0.8 * 1.5 * std::exp(1.125) / 250.0);
  EXPECT_EQ(trigram_mean_scale(1.0, 0.0, 10, 10.0), 0.0);
}

TEST(TrigramSampler, ProbabilitiesMatchMixtureFormula) {
  Rng rng(6);
  const Matrix vocab = sample_trigram_vocab(rng, 20, 3);
  const Vec p = sample_unit_sphere(rng, 3);
  const TrigramSampler sampler(vocab, p, 1.3);
  const auto probs = sampler.probabilities(0.7);
  const double z = partition_function(p, 1.3, vocab);
  double total = 0.0;
  for (std::size_t t = 0; t < 20; ++t) {
    const double want = 0.7 * std::exp(1.3 * dot(vocab.row(t), p)) / z + 0.3 / 20.0;
    EXPECT_NEAR(probs[t], want, 1e-14);
    total += probs[t];
  }
  EXPECT_NEAR(total, 1.0, 1e-12);
  EXPECT_NEAR(sampler.partition(), z, 1e-9 * z);
}

TEST(SampleTrigram, BetaZeroIsUniform) {
  Rng rng(7);
  const std::size_t m = 40;
  const Matrix vocab = sample_trigram_vocab(rng, m, 4);
  const Vec p = sample_unit_sphere(rng, 4);
  const TrigramSampler sampler(vocab, p, 0.0);
  std::vector<std::size_t> counts(m, 0);
  for (int i = 0; i < 100000; ++i) ++counts[sampler.sample(rng, 0.8)];
  std::vector<double> probs(m, 1.0 / m);
  EXPECT_GT(testing::chi_square_p(counts, probs), 0.01);
}

TEST(SampleTrigram, MatchesMixtureDistribution) {
  Rng rng(8);
  const std::size_t m = 25;
  const Matrix vocab = sample_trigram_vocab(rng, m, 3);
  const Vec p = sample_unit_sphere(rng, 3);
  const TrigramSampler sampler(vocab, p, 1.0);
  std::vector<std::size_t> counts(m, 0);
  for (int i = 0; i < 200000; ++i) ++counts[sampler.sample(rng, 0.75)];
  EXPECT_GT(testing::chi_square_p(counts, sampler.probabilities(0.75)), 0.01);
}

TEST(SampleTrigram, LargeBetaModeIsArgmaxProjection) {
  Rng rng(9);
  const std::size_t m = 100;
  const Matrix vocab = sample_trigram_vocab(rng, m, 4);
  const Vec p = sample_unit_sphere(rng, 4);
  std::size_t argmax = 0;
  for (std::size_t t = 1; t < m; ++t) {
    if (dot(vocab.row(t), p) > dot(vocab.row(argmax), p)) argmax = t;
  }
  GeneratorConfig c;
  c.d = 4;
  c.m = m;
  c.max_length = 1;
  c.lambda = 1.0;
  c.alphas = {1.0};
  c.betas = {10.0};
  std::vector<std::size_t> counts(m, 0);
  for (int i = 0; i < 2000; ++i) ++counts[sample_trigram(rng, p, 1, c, vocab)];
  EXPECT_EQ(static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin()),
            argmax);
}

TEST(TrigramEmpiricalMean, ParallelToProductWithMagnitudeRho) {
  Rng rng(10);
  const std::size_t d = 16, m = 10000;
  const Matrix vocab = sample_trigram_vocab(rng, m, d);
  const Vec p = sample_unit_sphere(rng, d);
  GeneratorConfig c;
  c.d = d;
  c.m = m;
  c.max_length = 3;
  c.lambda = 1.0;
  c.alphas = {1.0, 0.9, 0.75};
  c.betas = {0.5, 1.0, 1.5};
  for (std::size_t pos = 1; pos <= 3; ++pos) {
    const Vec mu = trigram_empirical_mean(rng, p, pos, c, vocab, 100000);
    const double rho = trigram_mean_scale(c.alpha(pos), c.beta(pos), m,
                                          partition_function(p, c.beta(pos), vocab));
    EXPECT_GT(cosine_similarity(mu, p), 0.95) << "position " << pos;
    EXPECT_NEAR(norm(mu) / rho, 1.0, 0.10) << "position " << pos;
  }
}

TEST(TrigramEmpiricalVariance, BetaZeroAlphaOneIsD) {
  Rng rng(11);
  const std::size_t d = 16;
  const Matrix vocab = sample_trigram_vocab(rng, 10000, d);
  const Vec p = sample_unit_sphere(rng, d);
  GeneratorConfig c;
  c.d = d;
  c.m = 10000;
  c.max_length = 1;
  c.lambda = 1.0;
  c.alphas = {1.0};
  c.betas = {0.0};
  EXPECT_NEAR(trigram_empirical_variance(rng, p, 1, c, vocab, 100000), double(d), 0.05 * d);
}

// Exact E||t - rho p||^2 over the vocabulary under the mixture.
double exact_variance(const Matrix& vocab, std::span<const double> p, double alpha, double beta) {
  const TrigramSampler sampler(vocab, p, beta);
  const auto probs = sampler.probabilities(alpha);
  const double rho = trigram_mean_scale(alpha, beta, vocab.rows(), sampler.partition());
  Vec center(p.begin(), p.end());
  for (double& x : center) x *= rho;
  double v = 0.0;
  for (std::size_t t = 0; t < vocab.rows(); ++t) v += probs[t] * squared_distance(vocab.row(t), center);
  return v;
}

TEST(TrigramEmpiricalVariance, MatchesExactExpectation) {
  Rng rng(12);
  const Matrix vocab = sample_trigram_vocab(rng, 2000, 8);
  const Vec p = sample_unit_sphere(rng, 8);
  for (double alpha : {1.0, 0.8}) {
    for (double beta : {0.0, 1.0, 2.0}) {
      GeneratorConfig c;
      c.d = 8;
      c.m = 2000;
      c.max_length = 1;
      c.lambda = 1.0;
      c.alphas = {alpha};
      c.betas = {beta};
      const double want = exact_variance(vocab, p, alpha, beta);
      const double got = trigram_empirical_variance(rng, p, 1, c, vocab, 200000);
      // ||t||^2 has sd about sqrt(2d) = 4; 4 / sqrt(2e5) ~ 0.009.
      EXPECT_NEAR(got, want, 0.05) << "alpha=" << alpha << " beta=" << beta;
    }
  }
}

TEST(TrigramEmpiricalVariance, IdenticalPositionsAgree) {
  Rng rng(13);
  const Matrix vocab = sample_trigram_vocab(rng, 3000, 8);
  const Vec p = sample_unit_sphere(rng, 8);
  GeneratorConfig c;
  c.d = 8;
  c.m = 3000;
  c.max_length = 2;
  c.lambda = 1.0;
  c.alphas = {0.8, 0.8};
  c.betas = {1.2, 1.2};
  const double a = trigram_empirical_variance(rng, p, 1, c, vocab, 100000);
  const double b = trigram_empirical_variance(rng, p, 2, c, vocab, 100000);
  EXPECT_NEAR(a, b, 4.0 * std::sqrt(2.0 * 2 * 16 / 100000.0));
}

TEST(TrigramEmpiricalVariance, RequiresThousandSamples) {
  Rng rng(1);
  const Matrix vocab = sample_trigram_vocab(rng, 10, 2);
  GeneratorConfig c = small_config();
  c.d = 2;
  c.m = 10;
  const Vec p{1.0, 0.0};
  EXPECT_THROW(trigram_empirical_variance(rng, p, 1, c, vocab, 999), std::invalid_argument);
}

TEST(LinearVarianceAlphas, Formula) {
  const auto a = linear_variance_alphas(5, 0.6);
  ASSERT_EQ(a.size(), 5u);
  for (std::size_t i = 1; i <= 5; ++i) {
    EXPECT_NEAR(a[i - 1], std::sqrt(1.0 - 0.6 * double(i - 1) / 4.0), 1e-15);
    EXPECT_GT(a[i - 1], 0.5);
  }
  EXPECT_THROW(linear_variance_alphas(5, 0.75), std::invalid_argument);
}

TEST(BuildQueryGraph, EdgesExactlyWithinEpsilon) {
  const auto c = small_config();
  const auto ds = generate_dataset(c);
  ASSERT_TRUE(ds.graph.is_well_formed());
  for (QueryId a = 0; a < ds.queries.size(); ++a) {
    for (QueryId b = a + 1; b < ds.queries.size(); ++b) {
      const double dist = std::sqrt(squared_distance(ds.products.row(ds.queries[a].product),
                                                     ds.products.row(ds.queries[b].product)));
      ASSERT_EQ(ds.graph.adjacent(a, b), dist <= c.epsilon_p) << a << "," << b;
    }
  }
}

TEST(BuildQueryGraph, SameProductAlwaysAdjacent) {
  Matrix products(2, 2);
  products(0, 0) = 1.0;
  products(1, 1) = 1.0;
  std::vector<Query> qs{{{0}, 0}, {{1}, 0}, {{2}, 1}};
  const auto g = build_query_graph(products, qs, 0.0);
  EXPECT_TRUE(g.adjacent(0, 1));
  EXPECT_FALSE(g.adjacent(0, 2));
  EXPECT_EQ(g.num_edges(), 1u);
}

TEST(BuildQueryGraph, DiameterThresholdGivesCompleteGraph) {
  auto c = small_config();
  c.epsilon_p = 2.0 * (1.0 + 1e-9);
  c.n_queries = 40;
  const auto ds = generate_dataset(c);
  EXPECT_EQ(ds.graph.num_edges(), 40u * 39u / 2u);
}

TEST(GenerateDataset, InvariantsHold) {
  const auto c = small_config();
  const auto ds = generate_dataset(c);
  EXPECT_EQ(ds.queries.size(), c.n_queries);
  EXPECT_EQ(ds.products.rows(), c.n_products);
  EXPECT_EQ(ds.vocab.rows(), c.m);
  for (std::size_t r = 0; r < ds.products.rows(); ++r) {
    EXPECT_NEAR(norm(ds.products.row(r)), 1.0, 1e-9);
  }
  ASSERT_EQ(ds.purchases.size(), ds.queries.size());
  for (QueryId q = 0; q < ds.queries.size(); ++q) {
    const auto& query = ds.queries[q];
    EXPECT_LT(query.product, c.n_products);
    EXPECT_GE(query.length(), 1u);
    EXPECT_LE(query.length(), c.max_length);
    for (auto t : query.trigrams) EXPECT_LT(t, c.m);
    ASSERT_EQ(ds.purchases[q].size(), 1u);
    EXPECT_EQ(ds.purchases[q][0].product, query.product);
    EXPECT_EQ(ds.purchases[q][0].count, 1u);
  }
}

TEST(GenerateDataset, DeterministicAcrossThreadCounts) {
  const auto c = small_config();
  const auto a = generate_dataset(c, 1);
  const auto b = generate_dataset(c, 1);
  const auto t = generate_dataset(c, 4);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, t);
  auto other = c;
  other.seed += 1;
  EXPECT_NE(generate_dataset(other).queries, a.queries);
}

TEST(GenerateDataset, EmptyQuerySet) {
  auto c = small_config();
  c.n_queries = 0;
  const auto ds = generate_dataset(c);
  EXPECT_TRUE(ds.queries.empty());
  EXPECT_EQ(ds.graph.num_edges(), 0u);
}

TEST(GenerateDataset, ProductsChosenUniformly) {
  auto c = small_config();
  c.n_products = 5;
  c.n_queries = 20000;
  c.epsilon_p = 0.0;
  const auto ds = generate_dataset(c);
  std::vector<std::size_t> counts(5, 0);
  for (const auto& q : ds.queries) ++counts[q.product];
  std::vector<double> probs(5, 0.2);
  EXPECT_GT(testing::chi_square_p(counts, probs), 0.01);
}

TEST(GenerateDataset, RejectsInvalidConfig) {
  auto c = small_config();
  c.alphas[0] = 0.4;
  EXPECT_THROW(generate_dataset(c), std::invalid_argument);
}

}  // namespace
}  // namespace attest
