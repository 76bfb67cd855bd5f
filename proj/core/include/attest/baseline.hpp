#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "attest/core.hpp"

namespace attest {

inline constexpr std::size_t kDefaultHashDim = 300;

/// Stable 64-bit trigram hash: the SplitMix64 output for state = id, i.e.
/// mix64(id + 0x9e3779b97f4a7c15). trigram_hash(0) == 0xe220a8397b1dcdaf.
constexpr std::uint64_t trigram_hash(TrigramId id) noexcept {
  return mix64(static_cast<std::uint64_t>(id) + kGoldenGamma);
}

/// Bag-of-trigrams count vector.
struct HashedQuery {
  std::vector<double> buckets;
  QueryId id = 0;
};

/// bucket[trigram_hash(t) % dim] += 1 for every trigram occurrence.
HashedQuery hash_query(const Query& q, QueryId id, std::size_t dim = kDefaultHashDim);

/// sum|a_i - b_i| / sum(a_i + b_i). Throws std::invalid_argument when both
/// vectors are all-zero or their sizes differ.
double bray_curtis(std::span<const double> a, std::span<const double> b);
double bray_curtis(const HashedQuery& a, const HashedQuery& b);

struct Neighbor {
  QueryId id = 0;
  double score = 0.0;  // distance or similarity, per index
};

/// Brute-force Bray-Curtis index over hashed training queries.
class HashedStore {
 public:
  void add(HashedQuery q);
  std::size_t size() const noexcept { return items_.size(); }

  /// The k entries with smallest distance to `probe`, ties by ascending id,
  /// skipping `exclude`. Throws std::invalid_argument if fewer than k remain.
  std::vector<Neighbor> knn(const HashedQuery& probe, std::size_t k,
                            std::optional<QueryId> exclude = std::nullopt) const;

 private:
  std::vector<HashedQuery> items_;
};

}  // namespace attest
