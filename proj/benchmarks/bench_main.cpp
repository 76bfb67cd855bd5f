#include <benchmark/benchmark.h>

#include "attest/baseline.hpp"
#include "attest/embedder.hpp"
#include "attest/eval.hpp"
#include "attest/genmodel.hpp"
#include "attest/trainer.hpp"

namespace {

using namespace attest;

void BM_TrigramSamplerBuild(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const Matrix vocab = sample_trigram_vocab(rng, m, 16);
  const Vec p = sample_unit_sphere(rng, 16);
  for (auto _ : state) {
    TrigramSampler sampler(vocab, p, 2.0);
    benchmark::DoNotOptimize(sampler.partition());
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_TrigramSamplerBuild)->RangeMultiplier(10)->Range(100, 100000)->Complexity();

void BM_TrigramSamplerDraw(benchmark::State& state) {
  Rng rng(2);
  const Matrix vocab = sample_trigram_vocab(rng, 10000, 16);
  const Vec p = sample_unit_sphere(rng, 16);
  const TrigramSampler sampler(vocab, p, 2.0);
  for (auto _ : state) benchmark::DoNotOptimize(sampler.sample(rng, 0.8));
}
BENCHMARK(BM_TrigramSamplerDraw);

std::vector<Query> random_queries(Rng& rng, std::size_t n, std::size_t m, std::size_t n_max) {
  std::vector<Query> qs(n);
  for (auto& q : qs) {
    const std::size_t len = 1 + rng.below(n_max);
    for (std::size_t i = 0; i < len; ++i) q.trigrams.push_back(static_cast<TrigramId>(rng.below(m)));
  }
  return qs;
}

void BM_Forward(benchmark::State& state) {
  Rng rng(3);
  const auto model = AttentionModel::initialize(2000, 16, 10, rng);
  const auto qs = random_queries(rng, 256, 2000, 10);
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(embed_query(model, qs[i++ % qs.size()].trigrams));
}
BENCHMARK(BM_Forward);

void BM_LossGradient(benchmark::State& state) {
  Rng rng(4);
  auto model = AttentionModel::initialize(2000, 16, 10, rng);
  for (double& x : model.attn.data()) x = rng.normal();
  const auto qs = random_queries(rng, 64, 2000, 10);
  TrainingBatch batch{0, {}, {}};
  for (QueryId q = 1; q <= 30; ++q) batch.positives.push_back(q);
  for (QueryId q = 31; q < 64; ++q) batch.negatives.push_back(q);
  ModelGradient grad(2000, 16, 10);
  for (auto _ : state) {
    grad.clear();
    benchmark::DoNotOptimize(accumulate_loss_gradient(model, batch, qs, grad));
  }
}
BENCHMARK(BM_LossGradient);

void BM_BrayCurtisKnn(benchmark::State& state) {
  Rng rng(5);
  const auto qs = random_queries(rng, static_cast<std::size_t>(state.range(0)), 2000, 10);
  HashedStore store;
  for (QueryId i = 0; i < qs.size(); ++i) store.add(hash_query(qs[i], i));
  const auto probe = hash_query(qs[0], 0);
  for (auto _ : state) benchmark::DoNotOptimize(store.knn(probe, 5, QueryId{0}));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_BrayCurtisKnn)->RangeMultiplier(4)->Range(256, 16384)->Complexity();

void BM_EmbeddingNearest(benchmark::State& state) {
  Rng rng(6);
  const auto n = static_cast<std::size_t>(state.range(0));
  Matrix v(n, 16);
  for (double& x : v.data()) x = rng.normal();
  std::vector<QueryId> ids(n);
  for (QueryId i = 0; i < n; ++i) ids[i] = i;
  const EmbeddingIndex index(std::move(v), std::move(ids));
  const Vec probe = sample_unit_sphere(rng, 16);
  for (auto _ : state) benchmark::DoNotOptimize(index.nearest(probe, 5));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_EmbeddingNearest)->RangeMultiplier(4)->Range(256, 16384)->Complexity();

void BM_GenerateDesk(benchmark::State& state) {
  GeneratorConfig c;
  c.d = 16;
  c.m = 2000;
  c.max_length = 10;
  c.lambda = 4;
  c.alphas = linear_variance_alphas(10, 0.7);
  c.betas = std::vector<double>(10, 2.0);
  c.epsilon_p = 0.5;
  c.n_products = 200;
  c.n_queries = static_cast<std::size_t>(state.range(0));
  c.seed = 1;
  for (auto _ : state) benchmark::DoNotOptimize(generate_dataset(c).queries.size());
}
BENCHMARK(BM_GenerateDesk)->Arg(1000)->Arg(5000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
