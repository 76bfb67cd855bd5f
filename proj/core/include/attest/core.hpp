#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "attest/linalg.hpp"
#include "attest/rng.hpp"

namespace attest {

using QueryId = std::uint32_t;
using ProductId = std::uint32_t;
using TrigramId = std::uint32_t;

/// Parameters of the synthetic query generator. Positions are 1-based in
/// the model, so alphas[i - 1] belongs to position i.
struct GeneratorConfig {
  std::size_t d = 0;
  std::size_t m = 0;
  std::size_t max_length = 50;  // N
  double lambda = 0.0;          // Poisson mean of the query length
  std::vector<double> alphas;   // mixture weight of the exponential component
  std::vector<double> betas;    // spread of the exponential component
  double epsilon_p = 0.0;       // product proximity threshold for edges
  std::size_t n_products = 0;
  std::size_t n_queries = 0;
  std::uint64_t seed = 0;

  double alpha(std::size_t position) const { return alphas.at(position - 1); }
  double beta(std::size_t position) const { return betas.at(position - 1); }

  /// Throws std::invalid_argument naming the first violated invariant.
  void validate() const;

  friend bool operator==(const GeneratorConfig&, const GeneratorConfig&) = default;
};

struct Query {
  std::vector<TrigramId> trigrams;
  ProductId product = 0;

  std::size_t length() const noexcept { return trigrams.size(); }

  friend bool operator==(const Query&, const Query&) = default;
};

struct Purchase {
  ProductId product = 0;
  std::uint32_t count = 0;

  friend bool operator==(const Purchase&, const Purchase&) = default;
};

/// query id -> products bought after issuing the query.
using PurchaseMap = std::vector<std::vector<Purchase>>;

/// Undirected query-query graph with sorted adjacency lists.
class QueryGraph {
 public:
  QueryGraph() = default;
  explicit QueryGraph(std::size_t n_nodes) : adjacency_(n_nodes) {}

  /// Builds from an undirected edge list. Self-loops and duplicate edges are
  /// rejected with std::invalid_argument.
  static QueryGraph from_edges(std::size_t n_nodes,
                               std::span<const std::pair<QueryId, QueryId>> edges);

  std::size_t num_nodes() const noexcept { return adjacency_.size(); }
  std::size_t num_edges() const noexcept;

  std::span<const QueryId> neighbors(QueryId q) const { return adjacency_.at(q); }
  std::size_t degree(QueryId q) const { return adjacency_.at(q).size(); }
  bool adjacent(QueryId a, QueryId b) const;

  /// Undirected edges as (u, v) with u < v, in lexicographic order.
  std::vector<std::pair<QueryId, QueryId>> edges() const;

  /// Symmetric, loop-free, duplicate-free, sorted. Used by tests and loaders.
  bool is_well_formed() const;

  /// Subgraph induced by `nodes`; node k of the result is nodes[k].
  QueryGraph induced(std::span<const QueryId> nodes) const;

  friend bool operator==(const QueryGraph&, const QueryGraph&) = default;

 private:
  std::vector<std::vector<QueryId>> adjacency_;
};

/// Uniform draw from the unit sphere in R^d: Gaussian sample, normalized.
Vec sample_unit_sphere(Rng& rng, std::size_t d);

/// m trigram vectors drawn i.i.d. from N(0, I_d), one per row.
Matrix sample_trigram_vocab(Rng& rng, std::size_t m, std::size_t d);

}  // namespace attest
