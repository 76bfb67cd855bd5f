#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "attest/core.hpp"

namespace attest {

void GeneratorConfig::validate() const {
  auto fail = [](const std::string& what) {
    throw std::invalid_argument("GeneratorConfig: " + what);
  };
  if (d < 2) fail("d must be >= 2");
  if (m < 1) fail("m must be >= 1");
  if (max_length < 1) fail("N must be >= 1");
  if (!(lambda > 0.0) || !std::isfinite(lambda)) fail("lambda must be positive");
  if (alphas.size() != max_length) fail("alphas must have N entries");
  if (betas.size() != max_length) fail("betas must have N entries");
  for (double a : alphas) {
    if (!(a > 0.5 && a <= 1.0)) fail("every alpha must lie in (0.5, 1]");
  }
  for (double b : betas) {
    if (!(b >= 0.0) || !std::isfinite(b)) fail("every beta must be >= 0");
  }
  if (!(epsilon_p >= 0.0) || !std::isfinite(epsilon_p)) {
    fail("epsilon_p must be non-negative");
  }
  if (n_queries > 0 && n_products == 0) fail("queries need at least one product");
}

QueryGraph QueryGraph::from_edges(std::size_t n_nodes,
                                  std::span<const std::pair<QueryId, QueryId>> edges) {
  QueryGraph g(n_nodes);
  for (auto [u, v] : edges) {
    if (u >= n_nodes || v >= n_nodes) {
      throw std::invalid_argument("QueryGraph: edge endpoint out of range");
    }
    if (u == v) throw std::invalid_argument("QueryGraph: self-loop");
    g.adjacency_[u].push_back(v);
    g.adjacency_[v].push_back(u);
  }
  for (auto& list : g.adjacency_) {
    std::sort(list.begin(), list.end());
    if (std::adjacent_find(list.begin(), list.end()) != list.end()) {
      throw std::invalid_argument("QueryGraph: duplicate edge");
    }
  }
  return g;
}

std::size_t QueryGraph::num_edges() const noexcept {
  std::size_t total = 0;
  for (const auto& list : adjacency_) total += list.size();
  return total / 2;
}

bool QueryGraph::adjacent(QueryId a, QueryId b) const {
  const auto& list = adjacency_.at(a);
  return std::binary_search(list.begin(), list.end(), b);
}

std::vector<std::pair<QueryId, QueryId>> QueryGraph::edges() const {
  std::vector<std::pair<QueryId, QueryId>> out;
  out.reserve(num_edges());
  for (QueryId u = 0; u < adjacency_.size(); ++u) {
    for (QueryId v : adjacency_[u]) {
      if (u < v) out.emplace_back(u, v);
    }
  }
  return out;
}

bool QueryGraph::is_well_formed() const {
  for (QueryId u = 0; u < adjacency_.size(); ++u) {
    const auto& list = adjacency_[u];
    if (!std::is_sorted(list.begin(), list.end())) return false;
    if (std::adjacent_find(list.begin(), list.end()) != list.end()) return false;
    for (QueryId v : list) {
      if (v >= adjacency_.size() || v == u) return false;
      if (!adjacent(v, u)) return false;
    }
  }
  return true;
}

QueryGraph QueryGraph::induced(std::span<const QueryId> nodes) const {
  std::vector<QueryId> local(adjacency_.size(), ~QueryId{0});
  for (QueryId k = 0; k < nodes.size(); ++k) local.at(nodes[k]) = k;
  QueryGraph g(nodes.size());
  for (QueryId k = 0; k < nodes.size(); ++k) {
    for (QueryId v : adjacency_[nodes[k]]) {
      if (local[v] != ~QueryId{0}) g.adjacency_[k].push_back(local[v]);
    }
    std::sort(g.adjacency_[k].begin(), g.adjacency_[k].end());
  }
  return g;
}

Vec sample_unit_sphere(Rng& rng, std::size_t d) {
  Vec v(d);
  double len = 0.0;
  // A zero Gaussian vector has probability zero but would divide by zero.
  while (len == 0.0) {
    for (double& x : v) x = rng.normal();
    len = norm(v);
  }
  for (double& x : v) x /= len;
  return v;
}

Matrix sample_trigram_vocab(Rng& rng, std::size_t m, std::size_t d) {
  Matrix vocab(m, d);
  for (double& x : vocab.data()) x = rng.normal();
  return vocab;
}

}  // namespace attest
