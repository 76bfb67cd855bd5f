#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "attest/core.hpp"

namespace attest {

/// Trainable parameters: one embedding row per trigram and one score
/// vector per query position. The score of position i is <attn_i, v_t>.
struct AttentionModel {
  Matrix emb;   // m x d
  Matrix attn;  // N x d

  std::size_t vocab_size() const noexcept { return emb.rows(); }
  std::size_t dim() const noexcept { return emb.cols(); }
  std::size_t max_length() const noexcept { return attn.rows(); }

  /// Embeddings i.i.d. N(0, 1/d); attention rows zero (uniform weights).
  static AttentionModel initialize(std::size_t m, std::size_t d, std::size_t max_length,
                                   Rng& rng);

  friend bool operator==(const AttentionModel&, const AttentionModel&) = default;
};

/// Intermediate values of one query's forward pass.
struct QueryForward {
  std::vector<double> scores;
  std::vector<double> weights;
  Vec embedding;
};

/// Numerically stable softmax (max-shifted).
std::vector<double> softmax(std::span<const double> scores);

/// Throws std::out_of_range for an unknown trigram id and
/// std::invalid_argument for an empty or over-long query.
QueryForward forward(const AttentionModel& model, std::span<const TrigramId> trigrams);

Vec embed_query(const AttentionModel& model, std::span<const TrigramId> trigrams);
std::vector<double> attention_weights(const AttentionModel& model,
                                      std::span<const TrigramId> trigrams);

struct TrainingBatch {
  QueryId anchor = 0;
  std::vector<QueryId> positives;
  std::vector<QueryId> negatives;
};

/// Inputs to the sigmoid terms are clamped to this magnitude.
inline constexpr double kLogitClamp = 30.0;

/// -log(sigmoid(x)) with x clamped to [-kLogitClamp, kLogitClamp].
double neg_log_sigmoid(double x) noexcept;

/// mean_p -log s(<z_a, z_p>) + mean_n -log s(-<z_a, z_n>).
/// Throws std::invalid_argument when either sample list is empty.
double loss(const AttentionModel& model, const TrainingBatch& batch,
            std::span<const Query> queries);

/// Gradient storage shaped like the model. Rows written since the last
/// clear() are tracked so sparse updates and resets stay cheap.
class ModelGradient {
 public:
  ModelGradient() = default;
  ModelGradient(std::size_t m, std::size_t d, std::size_t max_length);

  const Matrix& emb() const noexcept { return emb_; }
  const Matrix& attn() const noexcept { return attn_; }
  std::span<const TrigramId> touched_emb_rows() const noexcept { return emb_rows_; }
  std::span<const std::uint32_t> touched_attn_rows() const noexcept { return attn_rows_; }

  std::span<double> emb_row(TrigramId t);
  std::span<double> attn_row(std::uint32_t position);

  void scale(double factor);
  void clear();

 private:
  Matrix emb_;
  Matrix attn_;
  std::vector<std::uint8_t> emb_mark_;
  std::vector<std::uint8_t> attn_mark_;
  std::vector<TrigramId> emb_rows_;
  std::vector<std::uint32_t> attn_rows_;
};

/// Adds scale * d(loss)/d(params) for one batch into `grad` and returns
/// the batch loss.
double accumulate_loss_gradient(const AttentionModel& model, const TrainingBatch& batch,
                                std::span<const Query> queries, ModelGradient& grad,
                                double scale = 1.0);

/// Exact gradient of loss() with respect to every entry of emb and attn.
ModelGradient loss_gradient(const AttentionModel& model, const TrainingBatch& batch,
                            std::span<const Query> queries);

/// Checkpoint layout (little-endian): magic "ATTCKPT1", then uint32 version,
/// m, d, N, followed by the emb and attn matrices in the binary matrix format.
inline constexpr std::array<char, 8> kCheckpointMagic{'A', 'T', 'T', 'C', 'K', 'P', 'T', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const AttentionModel& model, const std::filesystem::path& path);
AttentionModel load_checkpoint(const std::filesystem::path& path);

}  // namespace attest
