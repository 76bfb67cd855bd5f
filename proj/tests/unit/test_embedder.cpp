#include <gtest/gtest.h>

#include <cmath>

#include "attest/embedder.hpp"
#include "gradcheck.hpp"
#include "test_util.hpp"

namespace attest {
namespace {

AttentionModel tiny_model() {
  AttentionModel model;
  model.emb = Matrix(3, 2);
  model.attn = Matrix(3, 2);
  model.emb(0, 0) = 1.0;
  model.emb(1, 1) = 2.0;
  model.emb(2, 0) = -1.0;
  model.emb(2, 1) = 0.5;
  return model;
}

TEST(Softmax, Examples) {
  const auto w = softmax(std::vector<double>{0, 0, 0});
  for (double x : w) EXPECT_NEAR(x, 1.0 / 3.0, 1e-15);
  const auto v = softmax(std::vector<double>{std::log(2.0), 0.0});
  EXPECT_NEAR(v[0], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(v[1], 1.0 / 3.0, 1e-15);
}

TEST(Softmax, ShiftInvarianceAndLargeScores) {
  const std::vector<double> s{0.3, -1.2, 2.0};
  std::vector<double> shifted = s;
  for (double& x : shifted) x += 500.0;
  const auto a = softmax(s);
  const auto b = softmax(shifted);
  double total = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_NEAR(a[i], b[i], 1e-12);
    EXPECT_GT(b[i], 0.0);
    total += b[i];
  }
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(EmbedQuery, SingleTrigramIsItsVector) {
  auto model = tiny_model();
  model.attn(0, 0) = 3.0;
  const std::vector<TrigramId> q{2};
  EXPECT_EQ(embed_query(model, q), (Vec{-1.0, 0.5}));
}

TEST(EmbedQuery, EqualScoresGiveUnweightedMean) {
  const auto model = tiny_model();
  const std::vector<TrigramId> q{0, 1, 2};
  const auto z = embed_query(model, q);
  EXPECT_NEAR(z[0], 0.0, 1e-15);
  EXPECT_NEAR(z[1], 2.5 / 3.0, 1e-15);
}

TEST(EmbedQuery, OrderSensitiveWithDistinctAttentionRows) {
  auto model = tiny_model();
  model.attn(0, 0) = 2.0;  // position 1 favours trigram 0
  model.attn(1, 1) = -1.0;
  const std::vector<TrigramId> ab{0, 1}, ba{1, 0};
  const auto z1 = embed_query(model, ab);
  const auto z2 = embed_query(model, ba);
  // Hand values: ab scores (2, -2) -> weights (e^4/(1+e^4), 1/(1+e^4)).
  const double w = std::exp(4.0) / (1.0 + std::exp(4.0));
  EXPECT_NEAR(z1[0], w, 1e-12);
  EXPECT_NEAR(z1[1], 2.0 * (1.0 - w), 1e-12);
  EXPECT_GT(std::abs(z1[0] - z2[0]), 0.1);
}

TEST(EmbedQuery, PermutationInvariantWithEqualAttentionRows) {
  auto model = tiny_model();
  for (std::size_t i = 0; i < 3; ++i) {
    model.attn(i, 0) = 0.4;
    model.attn(i, 1) = -0.9;
  }
  const std::vector<TrigramId> a{0, 1, 2}, b{2, 0, 1};
  const auto za = embed_query(model, a);
  const auto zb = embed_query(model, b);
  for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(za[j], zb[j], 1e-15);
}

TEST(EmbedQuery, RejectsBadQueries) {
  const auto model = tiny_model();
  EXPECT_THROW(embed_query(model, std::vector<TrigramId>{5}), std::out_of_range);
  EXPECT_THROW(embed_query(model, std::vector<TrigramId>{}), std::invalid_argument);
  EXPECT_THROW(embed_query(model, std::vector<TrigramId>{0, 0, 0, 0}), std::invalid_argument);
}

TEST(AttentionWeights, SumToOneAndPositive) {
  Rng rng(1);
  auto c = testing::random_grad_case(rng);
  for (const auto& q : c.queries) {
    const auto w = attention_weights(c.model, q.trigrams);
    double total = 0.0;
    for (double x : w) {
      EXPECT_GT(x, 0.0);
      EXPECT_LT(x, 1.0 + 1e-15);
      total += x;
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(NegLogSigmoid, StableAndClamped) {
  EXPECT_NEAR(neg_log_sigmoid(0.0), std::log(2.0), 1e-15);
  EXPECT_NEAR(neg_log_sigmoid(1.0), std::log1p(std::exp(-1.0)), 1e-15);
  EXPECT_NEAR(neg_log_sigmoid(-40.0), neg_log_sigmoid(-30.0), 0.0);
  EXPECT_TRUE(std::isfinite(neg_log_sigmoid(-1e300)));
  EXPECT_GE(neg_log_sigmoid(1e300), 0.0);
}

// Model whose query embeddings are chosen axis vectors.
struct LossFixture {
  AttentionModel model;
  std::vector<Query> queries;
};

LossFixture axis_fixture(double pos_dot, double neg_dot) {
  LossFixture f;
  f.model.emb = Matrix(3, 2);
  f.model.attn = Matrix(1, 2);
  f.model.emb(0, 0) = 1.0;        // anchor
  f.model.emb(1, 0) = pos_dot;    // positive
  f.model.emb(2, 0) = neg_dot;    // negative
  f.queries = {{{0}, 0}, {{1}, 0}, {{2}, 0}};
  return f;
}

TEST(Loss, OrthogonalGivesTwoLn2) {
  auto f = axis_fixture(0.0, 0.0);
  f.model.emb(1, 1) = 1.0;
  f.model.emb(2, 1) = -1.0;
  const TrainingBatch b{0, {1}, {2}};
  EXPECT_NEAR(loss(f.model, b, f.queries), 2.0 * std::log(2.0), 1e-12);
}

TEST(Loss, UnitDotsHandValue) {
  const auto f = axis_fixture(1.0, -1.0);
  const TrainingBatch b{0, {1}, {2}};
  EXPECT_NEAR(loss(f.model, b, f.queries), 2.0 * std::log1p(std::exp(-1.0)), 1e-12);
  EXPECT_NEAR(loss(f.model, b, f.queries), 0.6265, 5e-5);
}

TEST(Loss, SeparatedLimitIsZero) {
  const auto f = axis_fixture(1e6, -1e6);
  const TrainingBatch b{0, {1}, {2}};
  const double l = loss(f.model, b, f.queries);
  EXPECT_GE(l, 0.0);
  EXPECT_LT(l, 1e-12);
}

TEST(Loss, MeansOverSamples) {
  const auto f = axis_fixture(1.0, -1.0);
  const TrainingBatch one{0, {1}, {2}};
  const TrainingBatch many{0, {1, 1, 1}, {2, 2}};
  EXPECT_NEAR(loss(f.model, one, f.queries), loss(f.model, many, f.queries), 1e-15);
}

TEST(Loss, EmptySamplesThrow) {
  const auto f = axis_fixture(1.0, -1.0);
  EXPECT_THROW(loss(f.model, TrainingBatch{0, {}, {2}}, f.queries), std::invalid_argument);
  EXPECT_THROW(loss(f.model, TrainingBatch{0, {1}, {}}, f.queries), std::invalid_argument);
}

TEST(LossGradient, MatchesFiniteDifferences) {
  Rng rng(2024);
  auto c = testing::random_grad_case(rng, 20, 4, 5);
  const auto grad = loss_gradient(c.model, c.batch, c.queries);
  for (int k = 0; k < 100; ++k) {
    const bool attn = rng.bernoulli(0.3);
    const std::size_t row = rng.below(attn ? 5 : 20);
    const std::size_t col = rng.below(4);
    const double analytic = attn ? grad.attn()(row, col) : grad.emb()(row, col);
    const double numeric =
        testing::finite_difference(c.model, attn, row, col, c.batch, c.queries);
    EXPECT_LT(testing::relative_error(analytic, numeric), 1e-4)
        << (attn ? "attn(" : "emb(") << row << "," << col << ") analytic=" << analytic
        << " numeric=" << numeric;
  }
}

TEST(LossGradient, UnusedParametersHaveZeroGradient) {
  Rng rng(5);
  auto c = testing::random_grad_case(rng, 40, 3, 5, 8);
  const auto grad = loss_gradient(c.model, c.batch, c.queries);
  std::vector<bool> used_t(40, false), used_pos(5, false);
  std::vector<QueryId> ids{c.batch.anchor};
  ids.insert(ids.end(), c.batch.positives.begin(), c.batch.positives.end());
  ids.insert(ids.end(), c.batch.negatives.begin(), c.batch.negatives.end());
  for (QueryId q : ids) {
    for (std::size_t i = 0; i < c.queries[q].length(); ++i) {
      used_t[c.queries[q].trigrams[i]] = true;
      used_pos[i] = true;
    }
  }
  for (std::size_t t = 0; t < 40; ++t) {
    if (used_t[t]) continue;
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(grad.emb()(t, j), 0.0);
  }
  for (std::size_t i = 0; i < 5; ++i) {
    if (used_pos[i]) continue;
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(grad.attn()(i, j), 0.0);
  }
}

TEST(LossGradient, StationaryPointHasZeroDirectionalDerivative) {
  // Two identical single-trigram queries on opposite sides: anchor = positive
  // = negative embedding makes the dots equal; at v = 0 every derivative
  // vanishes because each term is quadratic in v.
  AttentionModel model;
  model.emb = Matrix(1, 2);
  model.attn = Matrix(1, 2);
  const std::vector<Query> queries{{{0}, 0}, {{0}, 0}, {{0}, 0}};
  const TrainingBatch b{0, {1}, {2}};
  const auto grad = loss_gradient(model, b, queries);
  for (double g : grad.emb().data()) EXPECT_NEAR(g, 0.0, 1e-12);
  for (std::size_t j = 0; j < 2; ++j) {
    EXPECT_NEAR(testing::finite_difference(model, false, 0, j, b, queries), 0.0, 1e-6);
  }
}

TEST(LossGradient, SmallStepDescends) {
  Rng rng(8);
  auto c = testing::random_grad_case(rng);
  const double before = loss(c.model, c.batch, c.queries);
  const auto grad = loss_gradient(c.model, c.batch, c.queries);
  AttentionModel next = c.model;
  for (std::size_t i = 0; i < next.emb.data().size(); ++i) next.emb.data()[i] -= 1e-3 * grad.emb().data()[i];
  for (std::size_t i = 0; i < next.attn.data().size(); ++i) next.attn.data()[i] -= 1e-3 * grad.attn().data()[i];
  EXPECT_LT(loss(next, c.batch, c.queries), before);
}

TEST(Initialize, ShapesAndDistribution) {
  Rng rng(3);
  const auto model = AttentionModel::initialize(2000, 8, 6, rng);
  EXPECT_EQ(model.vocab_size(), 2000u);
  EXPECT_EQ(model.dim(), 8u);
  EXPECT_EQ(model.max_length(), 6u);
  for (double x : model.attn.data()) EXPECT_EQ(x, 0.0);
  double sq = 0.0;
  for (double x : model.emb.data()) sq += x * x;
  EXPECT_NEAR(sq / double(model.emb.data().size()), 1.0 / 8.0, 0.01);
}

TEST(Checkpoint, RoundTripAndCorruption) {
  Rng rng(4);
  const auto c = testing::random_grad_case(rng);
  testing::TempDir dir("checkpoint");
  const auto path = dir.path() / "model.ckpt";
  save_checkpoint(c.model, path);
  EXPECT_EQ(load_checkpoint(path), c.model);
  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 3);
  EXPECT_THROW(load_checkpoint(path), std::runtime_error);
}

}  // namespace
}  // namespace attest
