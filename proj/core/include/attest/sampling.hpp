#pragma once

#include <cstddef>
#include <vector>

#include "attest/core.hpp"

namespace attest {

enum class PositiveMode { kUniform, kWalks };

struct PositiveSampling {
  PositiveMode mode = PositiveMode::kWalks;
  std::size_t walk_length = 3;
  std::size_t walks_per_node = 10;
  std::size_t uniform_count = 10;  // draws per anchor in kUniform mode
};

/// kUniform: uniform_count i.i.d. uniform neighbors of q.
/// kWalks: every node other than q visited by walks_per_node random walks of
/// walk_length steps started at q, with multiplicity.
/// Returns an empty list for an isolated node.
std::vector<QueryId> sample_positives(const QueryGraph& graph, QueryId q,
                                      const PositiveSampling& params, Rng& rng);

/// k i.i.d. uniform draws from the non-neighbors of q (q itself excluded),
/// by rejection. Throws std::invalid_argument when q has fewer than k
/// non-neighbors.
std::vector<QueryId> sample_negatives(const QueryGraph& graph, QueryId q, std::size_t k,
                                      Rng& rng);

}  // namespace attest
