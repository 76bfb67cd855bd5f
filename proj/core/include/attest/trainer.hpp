#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "attest/embedder.hpp"
#include "attest/sampling.hpp"

namespace attest {

enum class Optimizer { kSgd, kAdam };

struct TrainConfig {
  double learning_rate = 0.05;
  /// Learning rate decays linearly from learning_rate to
  /// learning_rate * final_lr_fraction over the run; 1 keeps it constant.
  double final_lr_fraction = 1.0;
  std::size_t epochs = 10;
  std::size_t negatives_per_positive = 5;
  PositiveSampling positives;
  std::size_t batch_size = 32;  // anchors per parameter update
  std::uint64_t seed = 0;
  Optimizer optimizer = Optimizer::kSgd;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  /// Keeps every attention row at zero, i.e. plain-mean query embeddings.
  bool freeze_attention = false;

  void validate() const;
};

struct LossRecord {
  std::size_t epoch = 0;
  std::size_t batch = 0;
  double loss = 0.0;
};

struct TrainResult {
  AttentionModel model;
  std::vector<LossRecord> trace;
  std::vector<double> epoch_mean_loss;
};

/// Model initialization from a seed (stream distinct from the sampler's).
AttentionModel initial_model(std::size_t m, std::size_t d, std::size_t max_length,
                             std::uint64_t seed);

/// Draws positives and negatives for one anchor. Returns nullopt for anchors
/// without neighbors or without any non-neighbor.
std::optional<TrainingBatch> make_batch(const QueryGraph& graph, QueryId anchor,
                                        const TrainConfig& config, Rng& rng);

/// Applies averaged gradients to a model with the configured optimizer.
class Trainer {
 public:
  Trainer(AttentionModel model, TrainConfig config);

  /// One parameter update from the mean gradient over `batches`; returns
  /// the mean loss before the update.
  double step(std::span<const TrainingBatch> batches, std::span<const Query> queries,
              double learning_rate);

  const AttentionModel& model() const noexcept { return model_; }
  AttentionModel release() && { return std::move(model_); }

 private:
  void update_row(std::span<double> param, std::span<const double> grad,
                  std::span<double> m1, std::span<double> m2, double lr);

  AttentionModel model_;
  TrainConfig config_;
  ModelGradient grad_;
  Matrix adam_emb_m1_, adam_emb_m2_, adam_attn_m1_, adam_attn_m2_;
  std::uint64_t steps_ = 0;
};

/// Trains on every non-isolated query of `graph` for config.epochs epochs.
/// Throws std::runtime_error if a batch loss is not finite.
TrainResult train(AttentionModel model, std::span<const Query> queries,
                  const QueryGraph& graph, const TrainConfig& config);

/// Means of consecutive non-overlapping windows of batch losses (the last
/// window may be shorter).
std::vector<double> windowed_loss(std::span<const LossRecord> trace, std::size_t window);

/// CSV with header "epoch,batch,loss".
void write_loss_trace(std::span<const LossRecord> trace, const std::filesystem::path& path);

}  // namespace attest
