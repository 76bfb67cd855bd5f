#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "attest/kv_config.hpp"
#include "attest/theory.hpp"
#include "attest/trainer.hpp"

namespace attest::cli {

/// Flags shared by every subcommand. A seed given here overrides the
/// config's `seed` key.
struct CommonOptions {
  std::filesystem::path config;
  std::filesystem::path out;
  std::optional<std::uint64_t> seed;
  std::size_t threads = 1;
};

struct SplitSpec {
  double test_fraction = 0.0;
  std::uint64_t split_seed = 0;
};

/// Training keys: learning_rate, final_lr_fraction, epochs,
/// negatives_per_positive, positive_mode (walks|uniform), walk_length,
/// walks_per_node, uniform_count, batch_size, optimizer (sgd|adam),
/// freeze_attention (0|1), seed; adam_beta1/adam_beta2/adam_epsilon when the
/// optimizer is adam. All are required.
TrainConfig train_config_from_kv(const KeyValueConfig& kv);
SplitSpec split_from_kv(const KeyValueConfig& kv);

/// Returns the process exit code: 0 on success, 1 when a check fails.
/// Configuration and IO problems throw.
int cmd_generate(const CommonOptions& opts);

/// Writes model.ckpt, loss.csv and manifest.txt to opts.out. Trains on the
/// training side of the split given by test_fraction / split_seed.
int cmd_train(const CommonOptions& opts, const std::filesystem::path& dataset_dir);

/// `models` holds training output directories or the word "baseline".
/// Writes eval_<name>.csv per model, summary.txt and manifest.txt.
int cmd_eval(const CommonOptions& opts, const std::filesystem::path& dataset_dir,
             const std::vector<std::string>& models, std::optional<std::size_t> k);

/// Runs one suite (mean, variance, partition, pmi, blue, figure1), writes
/// report.txt (and figure CSVs for figure1), and prints the report.
int cmd_validate(const CommonOptions& opts, const std::string& suite);

inline const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names{"mean", "variance", "partition",
                                              "pmi", "blue", "figure1"};
  return names;
}

MeanSuiteParams mean_params_from_kv(const KeyValueConfig& kv);
VarianceSuiteParams variance_params_from_kv(const KeyValueConfig& kv);
PartitionSuiteParams partition_params_from_kv(const KeyValueConfig& kv);
PmiSuiteParams pmi_params_from_kv(const KeyValueConfig& kv);
AttentionSuiteParams attention_params_from_kv(const KeyValueConfig& kv);

}  // namespace attest::cli
