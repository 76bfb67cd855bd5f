#include "attest/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "attest/kv_config.hpp"

namespace attest {
namespace {

constexpr std::uint64_t kInitStream = 0x1417;
constexpr std::uint64_t kSampleStream = 0x5a3b;

}  // namespace

void TrainConfig::validate() const {
  auto fail = [](const char* what) { throw std::invalid_argument(std::string("TrainConfig: ") + what); };
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) fail("learning_rate must be >= 0");
  if (!(final_lr_fraction > 0.0 && final_lr_fraction <= 1.0)) fail("final_lr_fraction must lie in (0, 1]");
  if (negatives_per_positive == 0) fail("negatives_per_positive must be positive");
  if (batch_size == 0) fail("batch_size must be positive");
  if (positives.mode == PositiveMode::kWalks &&
      (positives.walk_length == 0 || positives.walks_per_node == 0)) {
    fail("walk_length and walks_per_node must be positive");
  }
  if (positives.mode == PositiveMode::kUniform && positives.uniform_count == 0) {
    fail("uniform_count must be positive");
  }
  if (optimizer == Optimizer::kAdam &&
      !(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0 &&
        adam_epsilon > 0.0)) {
    fail("invalid Adam parameters");
  }
}

AttentionModel initial_model(std::size_t m, std::size_t d, std::size_t max_length,
                             std::uint64_t seed) {
  Rng rng = Rng::stream(seed, kInitStream);
  return AttentionModel::initialize(m, d, max_length, rng);
}

std::optional<TrainingBatch> make_batch(const QueryGraph& graph, QueryId anchor,
                                        const TrainConfig& config, Rng& rng) {
  TrainingBatch batch;
  batch.anchor = anchor;
  batch.positives = sample_positives(graph, anchor, config.positives, rng);
  if (batch.positives.empty()) return std::nullopt;
  const std::size_t non_neighbors = graph.num_nodes() - 1 - graph.degree(anchor);
  if (non_neighbors == 0) return std::nullopt;
  const std::size_t k =
      std::min(non_neighbors, config.negatives_per_positive * batch.positives.size());
  batch.negatives = sample_negatives(graph, anchor, k, rng);
  return batch;
}

Trainer::Trainer(AttentionModel model, TrainConfig config)
    : model_(std::move(model)),
      config_(std::move(config)),
      grad_(model_.vocab_size(), model_.dim(), model_.max_length()) {
  config_.validate();
  if (config_.optimizer == Optimizer::kAdam) {
    adam_emb_m1_ = Matrix(model_.vocab_size(), model_.dim());
    adam_emb_m2_ = Matrix(model_.vocab_size(), model_.dim());
    adam_attn_m1_ = Matrix(model_.max_length(), model_.dim());
    adam_attn_m2_ = Matrix(model_.max_length(), model_.dim());
  }
}

void Trainer::update_row(std::span<double> param, std::span<const double> grad,
                         std::span<double> m1, std::span<double> m2, double lr) {
  if (config_.optimizer == Optimizer::kSgd) {
    axpy(-lr, grad, param);
    return;
  }
  // Lazy Adam: moments of rows absent from a step are left untouched.
  const double b1 = config_.adam_beta1;
  const double b2 = config_.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  for (std::size_t k = 0; k < param.size(); ++k) {
    m1[k] = b1 * m1[k] + (1.0 - b1) * grad[k];
    m2[k] = b2 * m2[k] + (1.0 - b2) * grad[k] * grad[k];
    param[k] -= lr * (m1[k] / c1) / (std::sqrt(m2[k] / c2) + config_.adam_epsilon);
  }
}

double Trainer::step(std::span<const TrainingBatch> batches, std::span<const Query> queries,
                     double learning_rate) {
  if (batches.empty()) return 0.0;
  grad_.clear();
  const double scale = 1.0 / static_cast<double>(batches.size());
  double total = 0.0;
  for (const TrainingBatch& b : batches) {
    total += accumulate_loss_gradient(model_, b, queries, grad_, scale);
  }
  const double mean_loss = total * scale;
  if (!std::isfinite(mean_loss)) return mean_loss;

  ++steps_;
  const bool adam = config_.optimizer == Optimizer::kAdam;
  for (TrigramId t : grad_.touched_emb_rows()) {
    update_row(model_.emb.row(t), grad_.emb().row(t),
               adam ? adam_emb_m1_.row(t) : std::span<double>{},
               adam ? adam_emb_m2_.row(t) : std::span<double>{}, learning_rate);
  }
  if (!config_.freeze_attention) {
    for (std::uint32_t i : grad_.touched_attn_rows()) {
      update_row(model_.attn.row(i), grad_.attn().row(i),
                 adam ? adam_attn_m1_.row(i) : std::span<double>{},
                 adam ? adam_attn_m2_.row(i) : std::span<double>{}, learning_rate);
    }
  }
  return mean_loss;
}

TrainResult train(AttentionModel model, std::span<const Query> queries,
                  const QueryGraph& graph, const TrainConfig& config) {
  config.validate();
  if (graph.num_nodes() != queries.size()) {
    throw std::invalid_argument("train: graph and query list sizes differ");
  }
  Trainer trainer(std::move(model), config);
  TrainResult result;

  std::vector<QueryId> anchors;
  for (QueryId q = 0; q < graph.num_nodes(); ++q) {
    if (graph.degree(q) > 0) anchors.push_back(q);
  }
  const std::size_t steps_per_epoch =
      (anchors.size() + config.batch_size - 1) / config.batch_size;
  const double total_steps = static_cast<double>(std::max<std::size_t>(1, steps_per_epoch * config.epochs));

  Rng rng = Rng::stream(config.seed, kSampleStream);
  std::vector<TrainingBatch> batches;
  std::size_t global_step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle(std::span<QueryId>(anchors), rng);
    double epoch_total = 0.0;
    std::size_t epoch_batches = 0;
    for (std::size_t start = 0; start < anchors.size(); start += config.batch_size) {
      batches.clear();
      const std::size_t stop = std::min(anchors.size(), start + config.batch_size);
      for (std::size_t k = start; k < stop; ++k) {
        if (auto b = make_batch(graph, anchors[k], config, rng)) batches.push_back(std::move(*b));
      }
      if (batches.empty()) continue;
      const double progress = static_cast<double>(global_step) / total_steps;
      const double lr =
          config.learning_rate * (1.0 - (1.0 - config.final_lr_fraction) * progress);
      const double batch_loss = trainer.step(batches, queries, lr);
      if (!std::isfinite(batch_loss)) {
        std::ostringstream msg;
        msg << "non-finite loss at epoch " << epoch << ", batch " << epoch_batches
            << " (first anchor " << batches.front().anchor << ", lr " << lr << ")";
        throw std::runtime_error(msg.str());
      }
      result.trace.push_back({epoch, epoch_batches, batch_loss});
      epoch_total += batch_loss;
      ++epoch_batches;
      ++global_step;
    }
    result.epoch_mean_loss.push_back(epoch_batches ? epoch_total / static_cast<double>(epoch_batches)
                                                   : 0.0);
  }
  result.model = std::move(trainer).release();
  return result;
}

std::vector<double> windowed_loss(std::span<const LossRecord> trace, std::size_t window) {
  if (window == 0) throw std::invalid_argument("window must be positive");
  std::vector<double> out;
  for (std::size_t start = 0; start < trace.size(); start += window) {
    const std::size_t stop = std::min(trace.size(), start + window);
    double sum = 0.0;
    for (std::size_t k = start; k < stop; ++k) sum += trace[k].loss;
    out.push_back(sum / static_cast<double>(stop - start));
  }
  return out;
}

void write_loss_trace(std::span<const LossRecord> trace, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "epoch,batch,loss\n";
  for (const auto& r : trace) out << r.epoch << ',' << r.batch << ',' << format_double(r.loss) << '\n';
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace attest
