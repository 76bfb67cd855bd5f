#include <CLI11.hpp>

#include <exception>
#include <iostream>

#include "commands.hpp"

namespace {

void add_common(CLI::App* cmd, attest::cli::CommonOptions& opts, std::uint64_t& seed) {
  cmd->add_option("--config", opts.config, "key = value config file")->required();
  cmd->add_option("--out", opts.out, "output directory")->required();
  cmd->add_option("--seed", seed, "overrides the config's seed key");
  cmd->add_option("--threads", opts.threads, "worker threads")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"attest: synthetic query embeddings with attention"};
  app.require_subcommand(1);

  attest::cli::CommonOptions opts;
  std::uint64_t seed = 0;
  std::string dataset;
  std::vector<std::string> models;
  std::size_t k = 0;
  std::string suite;

  auto* gen = app.add_subcommand("generate", "generate a synthetic dataset");
  add_common(gen, opts, seed);

  auto* tr = app.add_subcommand("train", "train attention embeddings");
  add_common(tr, opts, seed);
  tr->add_option("--dataset", dataset, "dataset directory")->required();

  auto* ev = app.add_subcommand("eval", "evaluate reformulations");
  add_common(ev, opts, seed);
  ev->add_option("--dataset", dataset, "dataset directory")->required();
  ev->add_option("--model", models, "training output directory or 'baseline'")->required();
  auto* k_opt = ev->add_option("--k", k, "top-K products (overrides the config's k)");

  auto* va = app.add_subcommand("validate", "run a theory validation suite");
  add_common(va, opts, seed);
  va->add_option("suite", suite, "suite name")
      ->required()
      ->check(CLI::IsMember(attest::cli::suite_names()));

  CLI11_PARSE(app, argc, argv);

  try {
    CLI::App* used = app.get_subcommands().front();
    if (used->count("--seed") > 0) opts.seed = seed;
    if (used == gen) return attest::cli::cmd_generate(opts);
    if (used == tr) return attest::cli::cmd_train(opts, dataset);
    if (used == ev) {
      std::optional<std::size_t> kk;
      if (k_opt->count() > 0) kk = k;
      return attest::cli::cmd_eval(opts, dataset, models, kk);
    }
    return attest::cli::cmd_validate(opts, suite);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
