#include "attest/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace attest {

HashedQuery hash_query(const Query& q, QueryId id, std::size_t dim) {
  if (dim == 0) throw std::invalid_argument("hash dimension must be positive");
  HashedQuery h;
  h.id = id;
  h.buckets.assign(dim, 0.0);
  for (TrigramId t : q.trigrams) h.buckets[trigram_hash(t) % dim] += 1.0;
  return h;
}

double bray_curtis(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("bray_curtis: size mismatch");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += std::abs(a[i] - b[i]);
    den += a[i] + b[i];
  }
  if (den == 0.0) throw std::invalid_argument("bray_curtis: both vectors are zero");
  return num / den;
}

double bray_curtis(const HashedQuery& a, const HashedQuery& b) {
  return bray_curtis(a.buckets, b.buckets);
}

void HashedStore::add(HashedQuery q) { items_.push_back(std::move(q)); }

std::vector<Neighbor> HashedStore::knn(const HashedQuery& probe, std::size_t k,
                                       std::optional<QueryId> exclude) const {
  std::vector<Neighbor> all;
  all.reserve(items_.size());
  for (const auto& item : items_) {
    if (exclude && item.id == *exclude) continue;
    all.push_back({item.id, bray_curtis(probe, item)});
  }
  if (k > all.size()) throw std::invalid_argument("knn: k exceeds store size");
  auto closer = [](const Neighbor& a, const Neighbor& b) {
    return a.score != b.score ? a.score < b.score : a.id < b.id;
  };
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(), closer);
  all.resize(k);
  return all;
}

}  // namespace attest
