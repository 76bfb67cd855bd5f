#include "attest/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "attest/kv_config.hpp"
#include "attest/parallel.hpp"

namespace attest {
namespace {

const std::vector<Purchase>& purchases_of(const PurchaseMap& purchases, QueryId q) {
  if (q >= purchases.size()) throw std::out_of_range("query has no purchase record");
  return purchases[q];
}

bool intersects(std::span<const ProductId> sorted_a, std::span<const ProductId> sorted_b) {
  auto a = sorted_a.begin();
  auto b = sorted_b.begin();
  while (a != sorted_a.end() && b != sorted_b.end()) {
    if (*a == *b) return true;
    if (*a < *b) ++a; else ++b;
  }
  return false;
}

std::vector<ProductId> sorted_top_k(const PurchaseMap& purchases, QueryId q, std::size_t k) {
  auto top = top_k_products(purchases_of(purchases, q), k);
  std::sort(top.begin(), top.end());
  return top;
}

// Subset enumeration state for the oracle.
struct OracleSearch {
  std::vector<std::uint8_t> relevant;
  std::vector<std::vector<std::uint64_t>> covers;  // bitset over q's top-K
  std::size_t target_bits = 0;
  std::size_t subset_size = 0;
  std::size_t best_relevant = 0;
  std::size_t best_covered = 0;

  static std::size_t popcount(std::span<const std::uint64_t> bits) {
    std::size_t n = 0;
    for (auto w : bits) n += static_cast<std::size_t>(__builtin_popcountll(w));
    return n;
  }

  void run(std::size_t start, std::size_t depth, std::size_t n_relevant,
           std::vector<std::uint64_t>& covered) {
    if (depth == subset_size) {
      best_relevant = std::max(best_relevant, n_relevant);
      best_covered = std::max(best_covered, popcount(covered));
      return;
    }
    if (best_relevant == subset_size && best_covered == target_bits) return;
    for (std::size_t c = start; c + (subset_size - depth) <= relevant.size(); ++c) {
      std::vector<std::uint64_t> next = covered;
      for (std::size_t w = 0; w < next.size(); ++w) next[w] |= covers[c][w];
      run(c + 1, depth + 1, n_relevant + relevant[c], next);
    }
  }
};

}  // namespace

std::vector<ProductId> top_k_products(std::span<const Purchase> purchases, std::size_t k) {
  std::vector<Purchase> sorted(purchases.begin(), purchases.end());
  std::sort(sorted.begin(), sorted.end(), [](const Purchase& a, const Purchase& b) {
    return a.count != b.count ? a.count > b.count : a.product < b.product;
  });
  std::vector<ProductId> out;
  for (std::size_t i = 0; i < sorted.size() && i < k; ++i) out.push_back(sorted[i].product);
  return out;
}

EmbeddingIndex::EmbeddingIndex(Matrix vectors, std::vector<QueryId> ids)
    : vectors_(std::move(vectors)), ids_(std::move(ids)) {
  if (vectors_.rows() != ids_.size()) {
    throw std::invalid_argument("EmbeddingIndex: one id per row required");
  }
}

std::vector<Neighbor> EmbeddingIndex::nearest(std::span<const double> probe, std::size_t count,
                                              std::optional<QueryId> exclude) const {
  std::vector<Neighbor> all;
  all.reserve(ids_.size());
  for (std::size_t r = 0; r < ids_.size(); ++r) {
    if (exclude && ids_[r] == *exclude) continue;
    all.push_back({ids_[r], dot(probe, vectors_.row(r))});
  }
  if (count > all.size()) throw std::invalid_argument("reformulate: store smaller than count");
  auto better = [](const Neighbor& a, const Neighbor& b) {
    return a.score != b.score ? a.score > b.score : a.id < b.id;
  };
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(count), all.end(),
                    better);
  all.resize(count);
  return all;
}

std::vector<QueryId> reformulate(const EmbeddingIndex& index, std::span<const double> probe,
                                 std::optional<QueryId> self, std::size_t count) {
  std::vector<QueryId> out;
  for (const auto& n : index.nearest(probe, count, self)) out.push_back(n.id);
  return out;
}

std::vector<QueryId> reformulate(const HashedStore& store, const HashedQuery& probe,
                                 std::optional<QueryId> self, std::size_t count) {
  std::vector<QueryId> out;
  for (const auto& n : store.knn(probe, count, self)) out.push_back(n.id);
  return out;
}

double query_precision_at_k(QueryId q, std::span<const QueryId> reformulations,
                            const PurchaseMap& purchases, std::size_t k) {
  if (reformulations.empty()) return 0.0;
  const auto target = sorted_top_k(purchases, q, k);
  std::size_t relevant = 0;
  for (QueryId r : reformulations) {
    if (intersects(target, sorted_top_k(purchases, r, k))) ++relevant;
  }
  return static_cast<double>(relevant) / static_cast<double>(reformulations.size());
}

double product_recall_at_k(QueryId q, std::span<const QueryId> reformulations,
                           const PurchaseMap& purchases, std::size_t k) {
  const auto target = sorted_top_k(purchases, q, k);
  if (target.empty()) return 0.0;
  std::vector<ProductId> pooled;
  for (QueryId r : reformulations) {
    const auto top = top_k_products(purchases_of(purchases, r), k);
    pooled.insert(pooled.end(), top.begin(), top.end());
  }
  std::sort(pooled.begin(), pooled.end());
  std::size_t found = 0;
  for (ProductId p : target) {
    if (std::binary_search(pooled.begin(), pooled.end(), p)) ++found;
  }
  return static_cast<double>(found) / static_cast<double>(target.size());
}

double f1(double precision, double recall) {
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

BestScores oracle_best_for_query(QueryId q, std::span<const QueryId> candidates,
                                 const PurchaseMap& purchases, std::size_t k,
                                 std::size_t pool_size, std::size_t count) {
  const auto target = sorted_top_k(purchases, q, k);
  struct Scored {
    QueryId id;
    std::size_t overlap;
    std::vector<std::uint64_t> bits;
  };
  const std::size_t words = (target.size() + 63) / 64;
  std::vector<Scored> scored;
  for (QueryId c : candidates) {
    if (c == q) continue;
    Scored s{c, 0, std::vector<std::uint64_t>(words, 0)};
    for (ProductId p : sorted_top_k(purchases, c, k)) {
      const auto it = std::lower_bound(target.begin(), target.end(), p);
      if (it != target.end() && *it == p) {
        const auto bit = static_cast<std::size_t>(it - target.begin());
        s.bits[bit / 64] |= std::uint64_t{1} << (bit % 64);
        ++s.overlap;
      }
    }
    scored.push_back(std::move(s));
  }
  std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
    return a.overlap != b.overlap ? a.overlap > b.overlap : a.id < b.id;
  });
  if (pool_size > 0 && scored.size() > pool_size) scored.resize(pool_size);

  OracleSearch search;
  search.target_bits = target.size();
  search.subset_size = std::min(count, scored.size());
  if (search.subset_size == 0 || target.empty()) return {};
  for (const auto& s : scored) {
    search.relevant.push_back(s.overlap > 0 ? 1 : 0);
    search.covers.push_back(s.bits);
  }
  std::vector<std::uint64_t> covered(words, 0);
  search.run(0, 0, 0, covered);
  return {static_cast<double>(search.best_relevant) / static_cast<double>(search.subset_size),
          static_cast<double>(search.best_covered) / static_cast<double>(target.size())};
}

BestScores oracle_best(std::span<const QueryId> test_queries, std::span<const QueryId> candidates,
                       const PurchaseMap& purchases, std::size_t k, std::size_t pool_size,
                       std::size_t count, std::size_t threads) {
  if (test_queries.empty()) return {};
  std::vector<BestScores> per(test_queries.size());
  parallel_for(test_queries.size(), threads, [&](std::size_t i) {
    per[i] = oracle_best_for_query(test_queries[i], candidates, purchases, k, pool_size, count);
  });
  BestScores total;
  for (const auto& b : per) {
    total.precision += b.precision;
    total.recall += b.recall;
  }
  const double n = static_cast<double>(per.size());
  return {total.precision / n, total.recall / n};
}

EvalReport evaluate(std::string model_name, std::span<const QueryId> test_queries,
                    const ReformulateFn& reformulate_fn, const PurchaseMap& purchases,
                    std::size_t k, const BestScores& best, std::size_t threads) {
  EvalReport report;
  report.model = std::move(model_name);
  report.k = k;
  report.best = best;
  report.per_query.resize(test_queries.size());
  parallel_for(test_queries.size(), threads, [&](std::size_t i) {
    QueryEval& e = report.per_query[i];
    e.query = test_queries[i];
    e.reformulations = reformulate_fn(e.query);
    e.precision = query_precision_at_k(e.query, e.reformulations, purchases, k);
    e.recall = product_recall_at_k(e.query, e.reformulations, purchases, k);
    e.f1 = f1(e.precision, e.recall);
  });
  if (report.per_query.empty()) return report;
  for (const auto& e : report.per_query) {
    report.mean_precision += e.precision;
    report.mean_recall += e.recall;
    report.mean_per_query_f1 += e.f1;
  }
  const double n = static_cast<double>(report.per_query.size());
  report.mean_precision /= n;
  report.mean_recall /= n;
  report.mean_per_query_f1 /= n;
  report.f1 = f1(report.mean_precision, report.mean_recall);
  report.normalized_precision = best.precision > 0.0 ? report.mean_precision / best.precision : 0.0;
  report.normalized_recall = best.recall > 0.0 ? report.mean_recall / best.recall : 0.0;
  report.normalized_f1 = f1(report.normalized_precision, report.normalized_recall);
  return report;
}

Split split_queries(std::size_t n, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction >= 0.0 && test_fraction <= 1.0)) {
    throw std::invalid_argument("test_fraction must lie in [0, 1]");
  }
  std::vector<QueryId> order(n);
  for (QueryId i = 0; i < n; ++i) order[i] = i;
  Rng rng = Rng::stream(seed, 0x5917);
  shuffle(std::span<QueryId>(order), rng);
  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
  Split split;
  split.test.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
  split.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
  std::sort(split.test.begin(), split.test.end());
  std::sort(split.train.begin(), split.train.end());
  return split;
}

void write_eval_csv(const EvalReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "query,reformulations,precision,recall,f1\n";
  for (const auto& e : report.per_query) {
    out << e.query << ',';
    for (std::size_t i = 0; i < e.reformulations.size(); ++i) {
      if (i) out << ';';
      out << e.reformulations[i];
    }
    out << ',' << format_double(e.precision) << ',' << format_double(e.recall) << ','
        << format_double(e.f1) << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::string format_summary(std::span<const EvalReport> reports) {
  std::string out;
  char line[256];
  const std::size_t k = reports.empty() ? kDefaultTopK : reports.front().k;
  std::snprintf(line, sizeof line, "%-16s %20s %20s %10s\n", "Model",
                ("Query Precision@" + std::to_string(k)).c_str(),
                ("Product Recall@" + std::to_string(k)).c_str(), "F1");
  out += line;
  for (const auto& r : reports) {
    std::snprintf(line, sizeof line, "%-16s %19.2f%% %19.2f%% %9.2f%%\n", r.model.c_str(),
                  100.0 * r.normalized_precision, 100.0 * r.normalized_recall,
                  100.0 * r.normalized_f1);
    out += line;
  }
  out += "\nraw aggregates (not normalized):\n";
  for (const auto& r : reports) {
    std::snprintf(line, sizeof line,
                  "%-16s precision=%.4f recall=%.4f f1=%.4f mean_query_f1=%.4f "
                  "best_precision=%.4f best_recall=%.4f queries=%zu\n",
                  r.model.c_str(), r.mean_precision, r.mean_recall, r.f1, r.mean_per_query_f1,
                  r.best.precision, r.best.recall, r.per_query.size());
    out += line;
  }
  return out;
}

}  // namespace attest
