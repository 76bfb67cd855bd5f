#include "commands.hpp"

#include <chrono>
#include <cstdio>
#include <iostream>
#include <stdexcept>

#include "attest/baseline.hpp"
#include "attest/dataset_io.hpp"
#include "attest/embedder.hpp"
#include "attest/eval.hpp"
#include "attest/genmodel.hpp"
#include "manifest.hpp"

namespace attest::cli {
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

KeyValueConfig load_config(const CommonOptions& opts) {
  if (opts.config.empty()) throw std::invalid_argument("--config is required");
  auto kv = KeyValueConfig::load(opts.config);
  if (opts.seed) kv.set("seed", std::to_string(*opts.seed));
  return kv;
}

void prepare_out(const fs::path& out) {
  if (out.empty()) throw std::invalid_argument("--out is required");
  fs::create_directories(out);
}

bool get_flag(const KeyValueConfig& kv, std::string_view key) {
  const auto v = kv.get_uint(key);
  if (v > 1) throw std::invalid_argument(std::string(key) + " must be 0 or 1");
  return v == 1;
}

std::vector<std::size_t> get_sizes(const KeyValueConfig& kv, std::string_view key) {
  std::vector<std::size_t> out;
  for (double x : kv.get_doubles(key)) {
    if (!(x >= 1.0) || x != static_cast<double>(static_cast<std::size_t>(x))) {
      throw std::invalid_argument(std::string(key) + " must list positive integers");
    }
    out.push_back(static_cast<std::size_t>(x));
  }
  return out;
}

struct TrainingSet {
  std::vector<QueryId> ids;
  std::vector<Query> queries;
  QueryGraph graph;
};

TrainingSet training_side(const SyntheticDataset& ds, const Split& split) {
  TrainingSet t;
  t.ids = split.train;
  for (QueryId q : split.train) t.queries.push_back(ds.queries[q]);
  t.graph = ds.graph.induced(split.train);
  return t;
}

}  // namespace

TrainConfig train_config_from_kv(const KeyValueConfig& kv) {
  TrainConfig c;
  c.learning_rate = kv.get_double("learning_rate");
  c.final_lr_fraction = kv.get_double("final_lr_fraction");
  c.epochs = kv.get_uint("epochs");
  c.negatives_per_positive = kv.get_uint("negatives_per_positive");
  const auto& mode = kv.get_string("positive_mode");
  if (mode == "walks") c.positives.mode = PositiveMode::kWalks;
  else if (mode == "uniform") c.positives.mode = PositiveMode::kUniform;
  else throw std::invalid_argument("positive_mode must be walks or uniform");
  c.positives.walk_length = kv.get_uint("walk_length");
  c.positives.walks_per_node = kv.get_uint("walks_per_node");
  c.positives.uniform_count = kv.get_uint("uniform_count");
  c.batch_size = kv.get_uint("batch_size");
  const auto& opt = kv.get_string("optimizer");
  if (opt == "sgd") {
    c.optimizer = Optimizer::kSgd;
  } else if (opt == "adam") {
    c.optimizer = Optimizer::kAdam;
    c.adam_beta1 = kv.get_double("adam_beta1");
    c.adam_beta2 = kv.get_double("adam_beta2");
    c.adam_epsilon = kv.get_double("adam_epsilon");
  } else {
    throw std::invalid_argument("optimizer must be sgd or adam");
  }
  c.freeze_attention = get_flag(kv, "freeze_attention");
  c.seed = kv.get_uint("seed");
  c.validate();
  return c;
}

SplitSpec split_from_kv(const KeyValueConfig& kv) {
  SplitSpec s{kv.get_double("test_fraction"), kv.get_uint("split_seed")};
  if (!(s.test_fraction >= 0.0 && s.test_fraction < 1.0)) {
    throw std::invalid_argument("test_fraction must lie in [0, 1)");
  }
  return s;
}

int cmd_generate(const CommonOptions& opts) {
  const auto start = Clock::now();
  const auto kv = load_config(opts);
  const auto config = generator_config_from_kv(kv);
  prepare_out(opts.out);
  const auto ds = generate_dataset(config, opts.threads);
  save_dataset(ds, opts.out);

  RunManifest m;
  m.command = "generate";
  m.config = generator_config_to_kv(config);
  m.seed = config.seed;
  m.threads = opts.threads;
  m.inputs = {{"config", opts.config.string()}};
  m.outputs = {{"dataset", opts.out.string()}};
  m.checksum_directory(opts.out);
  m.duration_seconds = seconds_since(start);
  m.write(opts.out);
  std::printf("generated %zu queries, %zu products, %zu edges in %.2fs -> %s\n",
              ds.queries.size(), ds.products.rows(), ds.graph.num_edges(), m.duration_seconds,
              opts.out.string().c_str());
  return 0;
}

int cmd_train(const CommonOptions& opts, const fs::path& dataset_dir) {
  const auto start = Clock::now();
  const auto kv = load_config(opts);
  const auto config = train_config_from_kv(kv);
  const auto split_spec = split_from_kv(kv);
  verify_manifest(dataset_dir);
  const auto ds = load_dataset(dataset_dir);
  prepare_out(opts.out);

  const auto split = split_queries(ds.queries.size(), split_spec.test_fraction,
                                   split_spec.split_seed);
  const auto side = training_side(ds, split);
  auto model = initial_model(ds.config.m, ds.config.d, ds.config.max_length, config.seed);
  const auto result = train(std::move(model), side.queries, side.graph, config);
  save_checkpoint(result.model, opts.out / "model.ckpt");
  write_loss_trace(result.trace, opts.out / "loss.csv");

  RunManifest m;
  m.command = "train";
  m.config = kv;
  m.seed = config.seed;
  m.threads = opts.threads;
  m.inputs = {{"config", opts.config.string()}, {"dataset", dataset_dir.string()}};
  m.outputs = {{"checkpoint", (opts.out / "model.ckpt").string()},
               {"loss_trace", (opts.out / "loss.csv").string()}};
  m.checksum_directory(opts.out);
  m.duration_seconds = seconds_since(start);
  m.write(opts.out);
  const double last = result.epoch_mean_loss.empty() ? 0.0 : result.epoch_mean_loss.back();
  std::printf("trained on %zu queries for %zu epochs (final epoch loss %.5f) in %.2fs -> %s\n",
              side.queries.size(), config.epochs, last, m.duration_seconds,
              opts.out.string().c_str());
  return 0;
}

int cmd_eval(const CommonOptions& opts, const fs::path& dataset_dir,
             const std::vector<std::string>& models, std::optional<std::size_t> k_flag) {
  const auto start = Clock::now();
  auto kv = load_config(opts);
  if (k_flag) kv.set("k", std::to_string(*k_flag));
  const std::size_t k = kv.get_uint("k");
  const std::size_t count = kv.get_uint("reformulations");
  const std::size_t pool = kv.get_uint("oracle_pool");
  const auto split_spec = split_from_kv(kv);
  if (models.empty()) throw std::invalid_argument("at least one --model is required");
  verify_manifest(dataset_dir);
  const auto ds = load_dataset(dataset_dir);
  prepare_out(opts.out);

  const auto split = split_queries(ds.queries.size(), split_spec.test_fraction,
                                   split_spec.split_seed);
  if (split.test.empty()) throw std::invalid_argument("test split is empty");
  const auto best = oracle_best(split.test, split.train, ds.purchases, k, pool, count,
                                opts.threads);

  RunManifest m;
  m.command = "eval";
  m.config = kv;
  m.seed = split_spec.split_seed;
  m.threads = opts.threads;
  m.inputs = {{"config", opts.config.string()}, {"dataset", dataset_dir.string()}};

  std::vector<EvalReport> reports;
  for (std::size_t i = 0; i < models.size(); ++i) {
    const std::string& name = models[i];
    if (name == "baseline") {
      HashedStore store;
      for (QueryId q : split.train) store.add(hash_query(ds.queries[q], q));
      auto fn = [&](QueryId q) {
        return reformulate(store, hash_query(ds.queries[q], q), q, count);
      };
      reports.push_back(evaluate("Trigram Hash", split.test, fn, ds.purchases, k, best,
                                 opts.threads));
    } else {
      const fs::path dir(name);
      const auto train_manifest = verify_manifest(dir);
      const auto trained_split = split_from_kv(train_manifest.config);
      if (trained_split.test_fraction != split_spec.test_fraction ||
          trained_split.split_seed != split_spec.split_seed) {
        throw std::invalid_argument("model " + name + " was trained on a different split");
      }
      const auto model = load_checkpoint(dir / "model.ckpt");
      if (model.vocab_size() != ds.config.m || model.max_length() < ds.config.max_length) {
        throw std::invalid_argument("model " + name + " does not match the dataset");
      }
      Matrix vectors(split.train.size(), model.dim());
      for (std::size_t r = 0; r < split.train.size(); ++r) {
        const auto z = embed_query(model, ds.queries[split.train[r]].trigrams);
        std::copy(z.begin(), z.end(), vectors.row(r).begin());
      }
      const EmbeddingIndex index(std::move(vectors), split.train);
      auto fn = [&](QueryId q) {
        return reformulate(index, embed_query(model, ds.queries[q].trigrams), q, count);
      };
      reports.push_back(evaluate("Attention", split.test, fn, ds.purchases, k, best,
                                 opts.threads));
      m.inputs.emplace_back("model" + std::to_string(i), name);
    }
    const auto csv = opts.out / ("eval_" + std::to_string(i) + ".csv");
    write_eval_csv(reports.back(), csv);
    m.outputs.emplace_back("report" + std::to_string(i), csv.string());
  }
  const auto summary = format_summary(reports);
  std::FILE* f = std::fopen((opts.out / "summary.txt").string().c_str(), "wb");
  if (!f) throw std::runtime_error("cannot write summary.txt");
  std::fputs(summary.c_str(), f);
  std::fclose(f);
  m.outputs.emplace_back("summary", (opts.out / "summary.txt").string());
  m.checksum_directory(opts.out);
  m.duration_seconds = seconds_since(start);
  m.write(opts.out);
  std::fputs(summary.c_str(), stdout);
  return 0;
}

MeanSuiteParams mean_params_from_kv(const KeyValueConfig& kv) {
  MeanSuiteParams p;
  p.d = kv.get_uint("d");
  p.m = kv.get_uint("m");
  p.samples = kv.get_uint("samples");
  p.alphas = kv.get_doubles("alphas");
  p.betas = kv.get_doubles("betas");
  p.min_cosine = kv.get_double("min_cosine");
  p.max_relative_error = kv.get_double("max_relative_error");
  p.seed = kv.get_uint("seed");
  return p;
}

VarianceSuiteParams variance_params_from_kv(const KeyValueConfig& kv) {
  VarianceSuiteParams p;
  p.d = kv.get_uint("d");
  p.m = kv.get_uint("m");
  p.samples = kv.get_uint("samples");
  p.alpha = kv.get_double("alpha");
  p.betas = kv.get_doubles("betas");
  p.anchor_tolerance = kv.get_double("anchor_tolerance");
  p.seed = kv.get_uint("seed");
  return p;
}

PartitionSuiteParams partition_params_from_kv(const KeyValueConfig& kv) {
  PartitionSuiteParams p;
  p.d = kv.get_uint("d");
  p.vocab_sizes = get_sizes(kv, "vocab_sizes");
  p.n_products = kv.get_uint("n_products");
  p.beta = kv.get_double("beta");
  p.seed = kv.get_uint("seed");
  return p;
}

PmiSuiteParams pmi_params_from_kv(const KeyValueConfig& kv) {
  PmiSuiteParams p;
  // The universe reuses the generator keys; product/query counts are unused.
  KeyValueConfig gen = kv;
  if (!gen.has("n_products")) gen.set("n_products", "1");
  if (!gen.has("n_queries")) gen.set("n_queries", "0");
  p.universe = generator_config_from_kv(gen);
  p.extra_queries = kv.get_uint("extra_queries");
  p.product_pairs = kv.get_uint("product_pairs");
  p.events = kv.get_uint("events");
  p.min_correlation = kv.get_double("min_correlation");
  p.min_within_3se = kv.get_double("min_within_3se");
  p.seed = kv.get_uint("seed");
  return p;
}

AttentionSuiteParams attention_params_from_kv(const KeyValueConfig& kv) {
  AttentionSuiteParams p;
  p.dataset = generator_config_from_kv(kv);
  p.train = train_config_from_kv(kv);
  p.blue.variance_products = kv.get_uint("variance_products");
  p.blue.variance_samples = kv.get_uint("variance_samples");
  p.blue.seed = kv.get_uint("seed");
  p.uniform_tolerance = kv.get_double("uniform_tolerance");
  p.min_correlation = kv.get_double("min_correlation");
  return p;
}

int cmd_validate(const CommonOptions& opts, const std::string& suite) {
  const auto start = Clock::now();
  const auto kv = load_config(opts);
  prepare_out(opts.out);
  ValidationReport report;
  std::optional<Figure1Data> figure;
  if (suite == "mean") {
    auto p = mean_params_from_kv(kv);
    p.threads = opts.threads;
    report = run_mean_suite(p);
  } else if (suite == "variance") {
    report = run_variance_suite(variance_params_from_kv(kv));
  } else if (suite == "partition") {
    report = run_partition_suite(partition_params_from_kv(kv));
  } else if (suite == "pmi") {
    auto p = pmi_params_from_kv(kv);
    p.threads = opts.threads;
    report = run_pmi_suite(p);
  } else if (suite == "blue") {
    auto p = attention_params_from_kv(kv);
    p.threads = opts.threads;
    report = run_blue_suite(p);
  } else if (suite == "figure1") {
    auto p = attention_params_from_kv(kv);
    p.threads = opts.threads;
    figure.emplace();
    report = run_figure1_suite(p, &*figure);
  } else {
    throw std::invalid_argument("unknown suite '" + suite + "'");
  }

  const auto text = report.to_string();
  {
    std::FILE* f = std::fopen((opts.out / "report.txt").string().c_str(), "wb");
    if (!f) throw std::runtime_error("cannot write report.txt");
    std::fputs(text.c_str(), f);
    std::fclose(f);
  }
  RunManifest m;
  m.command = "validate " + suite;
  m.config = kv;
  m.seed = kv.get_uint("seed");
  m.threads = opts.threads;
  m.inputs = {{"config", opts.config.string()}};
  m.outputs = {{"report", (opts.out / "report.txt").string()}};
  if (figure) {
    const auto paths = write_figure1_csvs(*figure, opts.out);
    const char* panels[] = {"figure1_a", "figure1_b", "figure1_c"};
    for (std::size_t i = 0; i < paths.size(); ++i) m.outputs.emplace_back(panels[i], paths[i].string());
    write_loss_trace(figure->training.trace, opts.out / "loss.csv");
  }
  m.checksum_directory(opts.out);
  m.duration_seconds = seconds_since(start);
  m.write(opts.out);
  std::fputs(text.c_str(), stdout);
  return report.passed() ? 0 : 1;
}

}  // namespace attest::cli
