#include "attest/embedder.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>

#include "attest/dataset_io.hpp"

namespace attest {
namespace {

void check_query(const AttentionModel& model, std::span<const TrigramId> trigrams) {
  if (trigrams.empty()) throw std::invalid_argument("query has no trigrams");
  if (trigrams.size() > model.max_length()) {
    throw std::invalid_argument("query longer than the model's maximum length");
  }
  for (TrigramId t : trigrams) {
    if (t >= model.vocab_size()) {
      throw std::out_of_range("trigram id " + std::to_string(t) + " out of range");
    }
  }
}

double sigmoid(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// d/dx of -log sigmoid(clamp(x)).
double neg_log_sigmoid_derivative(double x) noexcept {
  if (x < -kLogitClamp || x > kLogitClamp) return 0.0;
  return -sigmoid(-x);
}

const Query& query_at(std::span<const Query> queries, QueryId id) {
  if (id >= queries.size()) throw std::out_of_range("query id out of range");
  return queries[id];
}

void check_batch(const TrainingBatch& batch) {
  if (batch.positives.empty()) throw std::invalid_argument("batch has no positives");
  if (batch.negatives.empty()) throw std::invalid_argument("batch has no negatives");
}

// Backpropagates an upstream gradient g = dL/dz through one query's
// attention-weighted average.
void backprop_query(const AttentionModel& model, std::span<const TrigramId> trigrams,
                    const QueryForward& fwd, std::span<const double> g, ModelGradient& grad) {
  const double g_dot_z = dot(g, fwd.embedding);
  for (std::size_t i = 0; i < trigrams.size(); ++i) {
    const auto v = model.emb.row(trigrams[i]);
    const auto a = model.attn.row(i);
    const double w = fwd.weights[i];
    const double d_score = w * (dot(g, v) - g_dot_z);
    auto gv = grad.emb_row(trigrams[i]);
    axpy(w, g, gv);
    axpy(d_score, a, gv);
    axpy(d_score, v, grad.attn_row(static_cast<std::uint32_t>(i)));
  }
}

}  // namespace

AttentionModel AttentionModel::initialize(std::size_t m, std::size_t d, std::size_t max_length,
                                          Rng& rng) {
  AttentionModel model;
  model.emb = Matrix(m, d);
  model.attn = Matrix(max_length, d, 0.0);
  const double stddev = 1.0 / std::sqrt(static_cast<double>(d));
  for (double& x : model.emb.data()) x = stddev * rng.normal();
  return model;
}

std::vector<double> softmax(std::span<const double> scores) {
  std::vector<double> out(scores.begin(), scores.end());
  if (out.empty()) return out;
  const double peak = *std::max_element(out.begin(), out.end());
  double total = 0.0;
  for (double& x : out) {
    x = std::exp(x - peak);
    total += x;
  }
  for (double& x : out) x /= total;
  return out;
}

QueryForward forward(const AttentionModel& model, std::span<const TrigramId> trigrams) {
  check_query(model, trigrams);
  QueryForward fwd;
  fwd.scores.resize(trigrams.size());
  for (std::size_t i = 0; i < trigrams.size(); ++i) {
    fwd.scores[i] = dot(model.attn.row(i), model.emb.row(trigrams[i]));
  }
  fwd.weights = softmax(fwd.scores);
  fwd.embedding.assign(model.dim(), 0.0);
  for (std::size_t i = 0; i < trigrams.size(); ++i) {
    axpy(fwd.weights[i], model.emb.row(trigrams[i]), fwd.embedding);
  }
  return fwd;
}

Vec embed_query(const AttentionModel& model, std::span<const TrigramId> trigrams) {
  return forward(model, trigrams).embedding;
}

std::vector<double> attention_weights(const AttentionModel& model,
                                      std::span<const TrigramId> trigrams) {
  return forward(model, trigrams).weights;
}

double neg_log_sigmoid(double x) noexcept {
  const double y = -std::clamp(x, -kLogitClamp, kLogitClamp);
  // softplus(y) = log(1 + e^y), written to avoid overflow.
  return std::max(y, 0.0) + std::log1p(std::exp(-std::abs(y)));
}

double loss(const AttentionModel& model, const TrainingBatch& batch,
            std::span<const Query> queries) {
  check_batch(batch);
  const Vec za = embed_query(model, query_at(queries, batch.anchor).trigrams);
  double pos = 0.0;
  for (QueryId p : batch.positives) {
    pos += neg_log_sigmoid(dot(za, embed_query(model, query_at(queries, p).trigrams)));
  }
  double neg = 0.0;
  for (QueryId n : batch.negatives) {
    neg += neg_log_sigmoid(-dot(za, embed_query(model, query_at(queries, n).trigrams)));
  }
  return pos / static_cast<double>(batch.positives.size()) +
         neg / static_cast<double>(batch.negatives.size());
}

ModelGradient::ModelGradient(std::size_t m, std::size_t d, std::size_t max_length)
    : emb_(m, d), attn_(max_length, d), emb_mark_(m, 0), attn_mark_(max_length, 0) {}

std::span<double> ModelGradient::emb_row(TrigramId t) {
  if (!emb_mark_[t]) {
    emb_mark_[t] = 1;
    emb_rows_.push_back(t);
  }
  return emb_.row(t);
}

std::span<double> ModelGradient::attn_row(std::uint32_t position) {
  if (!attn_mark_[position]) {
    attn_mark_[position] = 1;
    attn_rows_.push_back(position);
  }
  return attn_.row(position);
}

void ModelGradient::scale(double factor) {
  for (TrigramId t : emb_rows_) {
    for (double& x : emb_.row(t)) x *= factor;
  }
  for (std::uint32_t i : attn_rows_) {
    for (double& x : attn_.row(i)) x *= factor;
  }
}

void ModelGradient::clear() {
  for (TrigramId t : emb_rows_) {
    std::fill(emb_.row(t).begin(), emb_.row(t).end(), 0.0);
    emb_mark_[t] = 0;
  }
  for (std::uint32_t i : attn_rows_) {
    std::fill(attn_.row(i).begin(), attn_.row(i).end(), 0.0);
    attn_mark_[i] = 0;
  }
  emb_rows_.clear();
  attn_rows_.clear();
}

double accumulate_loss_gradient(const AttentionModel& model, const TrainingBatch& batch,
                                std::span<const Query> queries, ModelGradient& grad,
                                double scale) {
  check_batch(batch);
  const auto& anchor = query_at(queries, batch.anchor).trigrams;
  const QueryForward fa = forward(model, anchor);
  Vec ga(model.dim(), 0.0);
  Vec g(model.dim());
  double total = 0.0;

  auto pair_term = [&](QueryId other, double sign, double weight) {
    const auto& trigrams = query_at(queries, other).trigrams;
    const QueryForward fo = forward(model, trigrams);
    const double x = sign * dot(fa.embedding, fo.embedding);
    total += weight * neg_log_sigmoid(x);
    const double c = scale * weight * sign * neg_log_sigmoid_derivative(x);
    if (c == 0.0) return;
    axpy(c, fo.embedding, ga);
    for (std::size_t k = 0; k < g.size(); ++k) g[k] = c * fa.embedding[k];
    backprop_query(model, trigrams, fo, g, grad);
  };

  const double wp = 1.0 / static_cast<double>(batch.positives.size());
  const double wn = 1.0 / static_cast<double>(batch.negatives.size());
  for (QueryId p : batch.positives) pair_term(p, 1.0, wp);
  for (QueryId n : batch.negatives) pair_term(n, -1.0, wn);
  backprop_query(model, anchor, fa, ga, grad);
  return total;
}

ModelGradient loss_gradient(const AttentionModel& model, const TrainingBatch& batch,
                            std::span<const Query> queries) {
  ModelGradient grad(model.vocab_size(), model.dim(), model.max_length());
  accumulate_loss_gradient(model, batch, queries, grad);
  return grad;
}

void save_checkpoint(const AttentionModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out.write(kCheckpointMagic.data(), kCheckpointMagic.size());
  const std::uint32_t header[4] = {
      kCheckpointVersion, static_cast<std::uint32_t>(model.vocab_size()),
      static_cast<std::uint32_t>(model.dim()), static_cast<std::uint32_t>(model.max_length())};
  out.write(reinterpret_cast<const char*>(header), sizeof header);
  write_matrix(out, model.emb);
  write_matrix(out, model.attn);
  if (!out) throw std::runtime_error("checkpoint write failed");
}

AttentionModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  std::array<char, 8> magic{};
  std::uint32_t header[4] = {};
  if (!in.read(magic.data(), magic.size()) || magic != kCheckpointMagic) {
    throw std::runtime_error("checkpoint: bad magic");
  }
  if (!in.read(reinterpret_cast<char*>(header), sizeof header)) {
    throw std::runtime_error("checkpoint: truncated header");
  }
  if (header[0] != kCheckpointVersion) throw std::runtime_error("checkpoint: unknown version");
  AttentionModel model;
  model.emb = read_matrix(in);
  model.attn = read_matrix(in);
  if (model.emb.rows() != header[1] || model.emb.cols() != header[2] ||
      model.attn.rows() != header[3] || model.attn.cols() != header[2]) {
    throw std::runtime_error("checkpoint: matrix shapes disagree with header");
  }
  return model;
}

}  // namespace attest
