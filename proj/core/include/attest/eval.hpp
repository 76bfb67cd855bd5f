#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "attest/baseline.hpp"
#include "attest/core.hpp"

namespace attest {

inline constexpr std::size_t kReformulationCount = 5;
inline constexpr std::size_t kDefaultTopK = 20;
inline constexpr std::size_t kDefaultOraclePool = 25;

/// Products of one query sorted by purchase count (descending), ties by
/// ascending product id, truncated to K. Fewer than K products: all of them.
std::vector<ProductId> top_k_products(std::span<const Purchase> purchases, std::size_t k);

/// Brute-force dot-product index over query embeddings.
class EmbeddingIndex {
 public:
  EmbeddingIndex(Matrix vectors, std::vector<QueryId> ids);

  std::size_t size() const noexcept { return ids_.size(); }

  /// The `count` entries with the largest <probe, v>, ties by ascending id,
  /// skipping `exclude`. Throws std::invalid_argument if too few remain.
  std::vector<Neighbor> nearest(std::span<const double> probe, std::size_t count,
                                std::optional<QueryId> exclude = std::nullopt) const;

 private:
  Matrix vectors_;
  std::vector<QueryId> ids_;
};

std::vector<QueryId> reformulate(const EmbeddingIndex& index, std::span<const double> probe,
                                 std::optional<QueryId> self,
                                 std::size_t count = kReformulationCount);
std::vector<QueryId> reformulate(const HashedStore& store, const HashedQuery& probe,
                                 std::optional<QueryId> self,
                                 std::size_t count = kReformulationCount);

/// Fraction of reformulations whose top-K products meet q's top-K products.
double query_precision_at_k(QueryId q, std::span<const QueryId> reformulations,
                            const PurchaseMap& purchases, std::size_t k);

/// Fraction of q's top-K products found in some reformulation's top-K.
double product_recall_at_k(QueryId q, std::span<const QueryId> reformulations,
                           const PurchaseMap& purchases, std::size_t k);

/// 2PR / (P + R); 0 when both are 0.
double f1(double precision, double recall);

struct BestScores {
  double precision = 0.0;
  double recall = 0.0;
};

/// Best precision and best recall (each maximized separately) over every
/// size-min(count, pool) subset of the candidate pool. The pool is the
/// top-`pool_size` candidates by top-K product overlap with q (ties by id);
/// pool_size == 0 uses every candidate.
BestScores oracle_best_for_query(QueryId q, std::span<const QueryId> candidates,
                                 const PurchaseMap& purchases, std::size_t k,
                                 std::size_t pool_size = kDefaultOraclePool,
                                 std::size_t count = kReformulationCount);

/// Mean of the per-query best scores.
BestScores oracle_best(std::span<const QueryId> test_queries,
                       std::span<const QueryId> candidates, const PurchaseMap& purchases,
                       std::size_t k, std::size_t pool_size = kDefaultOraclePool,
                       std::size_t count = kReformulationCount, std::size_t threads = 1);

struct QueryEval {
  QueryId query = 0;
  std::vector<QueryId> reformulations;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct EvalReport {
  std::string model;
  std::size_t k = kDefaultTopK;
  std::vector<QueryEval> per_query;
  double mean_precision = 0.0;
  double mean_recall = 0.0;
  double f1 = 0.0;                 // 2PR/(P+R) of the means
  double mean_per_query_f1 = 0.0;
  BestScores best;
  double normalized_precision = 0.0;
  double normalized_recall = 0.0;
  double normalized_f1 = 0.0;      // f1 of the normalized means
};

using ReformulateFn = std::function<std::vector<QueryId>(QueryId)>;

EvalReport evaluate(std::string model_name, std::span<const QueryId> test_queries,
                    const ReformulateFn& reformulate_fn, const PurchaseMap& purchases,
                    std::size_t k, const BestScores& best, std::size_t threads = 1);

struct Split {
  std::vector<QueryId> train;
  std::vector<QueryId> test;
};

/// Deterministic split: a seeded shuffle puts round(fraction * n) queries in
/// the test set. Both lists come back sorted.
Split split_queries(std::size_t n, double test_fraction, std::uint64_t seed);

/// Per-query CSV: query,reformulations,precision,recall,f1 (reformulation ids
/// joined with ';').
void write_eval_csv(const EvalReport& report, const std::filesystem::path& path);

/// Table with model, precision, recall and F1 columns as percentages of the
/// best achievable scores, followed by the raw aggregates.
std::string format_summary(std::span<const EvalReport> reports);

}  // namespace attest
