#include "attest/sampling.hpp"

#include <stdexcept>

namespace attest {

std::vector<QueryId> sample_positives(const QueryGraph& graph, QueryId q,
                                      const PositiveSampling& params, Rng& rng) {
  if (q >= graph.num_nodes()) throw std::out_of_range("query not in graph");
  std::vector<QueryId> out;
  if (graph.degree(q) == 0) return out;

  if (params.mode == PositiveMode::kUniform) {
    const auto nbrs = graph.neighbors(q);
    out.reserve(params.uniform_count);
    for (std::size_t k = 0; k < params.uniform_count; ++k) {
      out.push_back(nbrs[rng.below(nbrs.size())]);
    }
    return out;
  }

  out.reserve(params.walks_per_node * params.walk_length);
  for (std::size_t w = 0; w < params.walks_per_node; ++w) {
    QueryId current = q;
    for (std::size_t step = 0; step < params.walk_length; ++step) {
      const auto nbrs = graph.neighbors(current);
      current = nbrs[rng.below(nbrs.size())];
      if (current != q) out.push_back(current);
    }
  }
  return out;
}

std::vector<QueryId> sample_negatives(const QueryGraph& graph, QueryId q, std::size_t k,
                                      Rng& rng) {
  if (q >= graph.num_nodes()) throw std::out_of_range("query not in graph");
  std::vector<QueryId> out;
  if (k == 0) return out;
  const std::size_t non_neighbors = graph.num_nodes() - 1 - graph.degree(q);
  if (non_neighbors < k) {
    throw std::invalid_argument("insufficient non-neighbors for negative sampling");
  }
  out.reserve(k);
  while (out.size() < k) {
    const auto v = static_cast<QueryId>(rng.below(graph.num_nodes()));
    if (v != q && !graph.adjacent(q, v)) out.push_back(v);
  }
  return out;
}

}  // namespace attest
