#include "attest/genmodel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

#include "attest/parallel.hpp"

namespace attest {
namespace {

// Stream keys for the generator's independent substreams.
constexpr std::uint64_t kVocabStream = 0;
constexpr std::uint64_t kProductStream = 1;
constexpr std::uint64_t kFirstQueryStream = 2;

std::size_t sample_from_pmf(Rng& rng, std::span<const double> pmf) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t k = 0; k < pmf.size(); ++k) {
    acc += pmf[k];
    if (u < acc) return k;
  }
  // Rounding can leave acc a hair under 1.
  for (std::size_t k = pmf.size(); k-- > 0;) {
    if (pmf[k] > 0.0) return k;
  }
  return 0;
}

void check_position(std::size_t position, const GeneratorConfig& config) {
  if (position < 1 || position > config.max_length) {
    throw std::out_of_range("position must lie in [1, N]");
  }
}

}  // namespace

std::vector<double> truncated_poisson_pmf(double lambda, std::size_t max_length) {
  if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
  if (max_length < 1) throw std::invalid_argument("N must be >= 1");
  std::vector<double> log_pmf(max_length);
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k <= max_length; ++k) {
    const double kd = static_cast<double>(k);
    log_pmf[k - 1] = kd * std::log(lambda) - std::lgamma(kd + 1.0);
    peak = std::max(peak, log_pmf[k - 1]);
  }
  double total = 0.0;
  for (double& x : log_pmf) {
    x = std::exp(x - peak);
    total += x;
  }
  for (double& x : log_pmf) x /= total;
  return log_pmf;
}

std::size_t sample_query_length(Rng& rng, double lambda, std::size_t max_length) {
  const auto pmf = truncated_poisson_pmf(lambda, max_length);
  return sample_from_pmf(rng, pmf) + 1;
}

double partition_function(std::span<const double> p, double beta, const Matrix& vocab) {
  double z = 0.0;
  for (std::size_t t = 0; t < vocab.rows(); ++t) z += std::exp(beta * dot(vocab.row(t), p));
  return z;
}

double trigram_mean_scale(double alpha, double beta, std::size_t m, double partition) {
  return static_cast<double>(m) * alpha * beta * std::exp(0.5 * beta * beta) / partition;
}

TrigramSampler::TrigramSampler(const Matrix& vocab, std::span<const double> p, double beta)
    : beta_(beta), cumulative_(vocab.rows()) {
  if (vocab.rows() == 0) throw std::invalid_argument("TrigramSampler: empty vocabulary");
  if (p.size() != vocab.cols()) {
    throw std::invalid_argument("TrigramSampler: product dimension mismatch");
  }
  std::vector<double> logits(vocab.rows());
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < vocab.rows(); ++t) {
    logits[t] = beta * dot(vocab.row(t), p);
    peak = std::max(peak, logits[t]);
  }
  double acc = 0.0;
  for (std::size_t t = 0; t < logits.size(); ++t) {
    acc += std::exp(logits[t] - peak);
    cumulative_[t] = acc;
  }
  partition_ = acc * std::exp(peak);
}

TrigramId TrigramSampler::sample_exponential(Rng& rng) const {
  const double target = rng.uniform() * cumulative_.back();
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), target);
  const auto idx = std::min<std::size_t>(it - cumulative_.begin(), cumulative_.size() - 1);
  return static_cast<TrigramId>(idx);
}

TrigramId TrigramSampler::sample(Rng& rng, double alpha) const {
  if (rng.uniform() < alpha) return sample_exponential(rng);
  return static_cast<TrigramId>(rng.below(cumulative_.size()));
}

std::vector<double> TrigramSampler::probabilities(double alpha) const {
  const double m = static_cast<double>(cumulative_.size());
  const double total = cumulative_.back();
  std::vector<double> probs(cumulative_.size());
  double prev = 0.0;
  for (std::size_t t = 0; t < cumulative_.size(); ++t) {
    probs[t] = alpha * (cumulative_[t] - prev) / total + (1.0 - alpha) / m;
    prev = cumulative_[t];
  }
  return probs;
}

TrigramId sample_trigram(Rng& rng, std::span<const double> p, std::size_t position,
                         const GeneratorConfig& config, const Matrix& vocab) {
  check_position(position, config);
  const TrigramSampler sampler(vocab, p, config.beta(position));
  return sampler.sample(rng, config.alpha(position));
}

QueryGraph build_query_graph(const Matrix& products, std::span<const Query> queries,
                             double epsilon_p) {
  const std::size_t n_products = products.rows();
  std::vector<std::vector<QueryId>> by_product(n_products);
  for (QueryId q = 0; q < queries.size(); ++q) {
    const ProductId p = queries[q].product;
    if (p >= n_products) throw std::out_of_range("query references unknown product");
    by_product[p].push_back(q);
  }

  // Products close enough to link their queries; a product is always close
  // to itself since its distance is 0.
  const double eps2 = epsilon_p * epsilon_p;
  std::vector<std::vector<ProductId>> close(n_products);
  for (ProductId a = 0; a < n_products; ++a) {
    if (by_product[a].empty()) continue;
    for (ProductId b = 0; b < n_products; ++b) {
      if (by_product[b].empty()) continue;
      if (a == b || squared_distance(products.row(a), products.row(b)) <= eps2) {
        close[a].push_back(b);
      }
    }
  }

  std::vector<std::pair<QueryId, QueryId>> edges;
  for (ProductId a = 0; a < n_products; ++a) {
    for (ProductId b : close[a]) {
      if (b < a) continue;
      for (QueryId u : by_product[a]) {
        for (QueryId v : by_product[b]) {
          if (a == b && v <= u) continue;
          edges.emplace_back(std::min(u, v), std::max(u, v));
        }
      }
    }
  }
  return QueryGraph::from_edges(queries.size(), edges);
}

SyntheticDataset generate_dataset(const GeneratorConfig& config, std::size_t threads) {
  config.validate();
  SyntheticDataset ds;
  ds.config = config;

  Rng vocab_rng = Rng::stream(config.seed, kVocabStream);
  ds.vocab = sample_trigram_vocab(vocab_rng, config.m, config.d);

  Rng product_rng = Rng::stream(config.seed, kProductStream);
  ds.products = Matrix(config.n_products, config.d);
  for (std::size_t p = 0; p < config.n_products; ++p) {
    const Vec v = sample_unit_sphere(product_rng, config.d);
    std::copy(v.begin(), v.end(), ds.products.row(p).begin());
  }

  // Each query owns a substream keyed by its index. The product is drawn
  // first so queries can be grouped per product and share samplers.
  ds.queries.resize(config.n_queries);
  std::vector<Rng> query_rngs;
  query_rngs.reserve(config.n_queries);
  std::vector<std::vector<QueryId>> by_product(config.n_products);
  for (QueryId q = 0; q < config.n_queries; ++q) {
    query_rngs.push_back(Rng::stream(config.seed, kFirstQueryStream + q));
    const auto product = static_cast<ProductId>(query_rngs.back().below(config.n_products));
    ds.queries[q].product = product;
    by_product[product].push_back(q);
  }

  const auto length_pmf = truncated_poisson_pmf(config.lambda, config.max_length);
  parallel_for(config.n_products, threads, [&](std::size_t product) {
    if (by_product[product].empty()) return;
    const auto p = ds.products.row(product);
    std::map<double, TrigramSampler> samplers;
    auto sampler_for = [&](double beta) -> const TrigramSampler& {
      auto it = samplers.find(beta);
      if (it == samplers.end()) it = samplers.emplace(beta, TrigramSampler(ds.vocab, p, beta)).first;
      return it->second;
    };
    for (QueryId q : by_product[product]) {
      Rng& rng = query_rngs[q];
      const std::size_t length = sample_from_pmf(rng, length_pmf) + 1;
      auto& trigrams = ds.queries[q].trigrams;
      trigrams.resize(length);
      for (std::size_t i = 1; i <= length; ++i) {
        trigrams[i - 1] = sampler_for(config.beta(i)).sample(rng, config.alpha(i));
      }
    }
  });

  ds.graph = build_query_graph(ds.products, ds.queries, config.epsilon_p);
  ds.purchases.resize(config.n_queries);
  for (QueryId q = 0; q < config.n_queries; ++q) {
    ds.purchases[q] = {Purchase{ds.queries[q].product, 1}};
  }
  return ds;
}

Vec trigram_empirical_mean(Rng& rng, std::span<const double> p, std::size_t position,
                           const GeneratorConfig& config, const Matrix& vocab,
                           std::size_t n_samples) {
  check_position(position, config);
  if (n_samples == 0) throw std::invalid_argument("n_samples must be positive");
  const TrigramSampler sampler(vocab, p, config.beta(position));
  const double alpha = config.alpha(position);
  Vec sum(vocab.cols(), 0.0);
  for (std::size_t s = 0; s < n_samples; ++s) {
    axpy(1.0, vocab.row(sampler.sample(rng, alpha)), sum);
  }
  for (double& x : sum) x /= static_cast<double>(n_samples);
  return sum;
}

double trigram_empirical_variance(Rng& rng, std::span<const double> p, std::size_t position,
                                  const GeneratorConfig& config, const Matrix& vocab,
                                  std::size_t n_samples) {
  check_position(position, config);
  if (n_samples < 1000) throw std::invalid_argument("n_samples must be >= 1000");
  const TrigramSampler sampler(vocab, p, config.beta(position));
  const double alpha = config.alpha(position);
  const double rho = trigram_mean_scale(alpha, config.beta(position), vocab.rows(),
                                        sampler.partition());
  Vec center(p.begin(), p.end());
  for (double& x : center) x *= rho;
  double total = 0.0;
  for (std::size_t s = 0; s < n_samples; ++s) {
    total += squared_distance(vocab.row(sampler.sample(rng, alpha)), center);
  }
  return total / static_cast<double>(n_samples);
}

std::vector<double> linear_variance_alphas(std::size_t max_length, double fraction) {
  if (max_length < 1) throw std::invalid_argument("N must be >= 1");
  if (!(fraction >= 0.0 && fraction < 0.75)) {
    throw std::invalid_argument("fraction must lie in [0, 0.75)");
  }
  std::vector<double> alphas(max_length, 1.0);
  if (max_length == 1) return alphas;
  for (std::size_t i = 1; i <= max_length; ++i) {
    const double step = static_cast<double>(i - 1) / static_cast<double>(max_length - 1);
    alphas[i - 1] = std::sqrt(1.0 - fraction * step);
  }
  return alphas;
}

}  // namespace attest
