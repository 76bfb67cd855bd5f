#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "attest/dataset_io.hpp"
#include "attest/embedder.hpp"
#include "attest/trainer.hpp"
#include "commands.hpp"
#include "manifest.hpp"
#include "test_util.hpp"

namespace attest::cli {
namespace {

namespace fs = std::filesystem;
using attest::testing::TempDir;

const char* kGenerate = R"(d = 4
m = 60
N = 4
lambda = 2
alphas = linear_variance(0.5)
betas = 1.5
epsilon_p = 0.5
n_products = 10
n_queries = 120
seed = 3
)";

const char* kTrain = R"(learning_rate = 0.01
final_lr_fraction = 1
epochs = 2
negatives_per_positive = 3
positive_mode = walks
walk_length = 2
walks_per_node = 2
uniform_count = 5
batch_size = 8
optimizer = adam
adam_beta1 = 0.9
adam_beta2 = 0.999
adam_epsilon = 1e-8
freeze_attention = 0
test_fraction = 0.1
split_seed = 7
seed = 1
)";

const char* kEval = R"(k = 20
reformulations = 5
oracle_pool = 25
test_fraction = 0.1
split_seed = 7
)";

fs::path write_text(const fs::path& path, const std::string& text) {
  std::ofstream(path, std::ios::binary) << text;
  return path;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Every output file except the manifest, which records wall-clock time.
void expect_same_outputs(const fs::path& a, const fs::path& b) {
  std::size_t compared = 0;
  for (const auto& entry : fs::directory_iterator(a)) {
    const auto name = entry.path().filename();
    if (name == "manifest.txt") continue;
    ASSERT_TRUE(fs::exists(b / name)) << name;
    EXPECT_EQ(sha256_file(entry.path()), sha256_file(b / name)) << name;
    ++compared;
  }
  EXPECT_GT(compared, 0u);
}

struct CliTest : ::testing::Test {
  TempDir tmp{"cli"};
  fs::path gen_cfg = write_text(tmp.path() / "gen.cfg", kGenerate);
  fs::path train_cfg = write_text(tmp.path() / "train.cfg", kTrain);
  fs::path eval_cfg = write_text(tmp.path() / "eval.cfg", kEval);

  fs::path generate(const std::string& name, std::size_t threads = 1) {
    const CommonOptions o{gen_cfg, tmp.path() / name, std::nullopt, threads};
    EXPECT_EQ(cmd_generate(o), 0);
    return o.out;
  }
  fs::path train(const fs::path& data, const std::string& name, const fs::path& cfg) {
    const CommonOptions o{cfg, tmp.path() / name, std::nullopt, 1};
    EXPECT_EQ(cmd_train(o, data), 0);
    return o.out;
  }
};

TEST_F(CliTest, GenerateIsReproducibleAcrossThreadCounts) {
  const auto a = generate("a");
  const auto b = generate("b", 3);
  expect_same_outputs(a, b);
  EXPECT_NO_THROW(verify_manifest(a));
  const auto m = RunManifest::read(a);
  EXPECT_EQ(m.command, "generate");
  EXPECT_EQ(m.seed, 3u);
  EXPECT_FALSE(m.checksums.empty());
}

TEST_F(CliTest, SeedFlagOverridesConfig) {
  const auto a = generate("a");
  const CommonOptions o{gen_cfg, tmp.path() / "b", 4, 1};
  cmd_generate(o);
  EXPECT_NE(sha256_file(a / "vocab.bin"), sha256_file(o.out / "vocab.bin"));
  EXPECT_EQ(RunManifest::read(o.out).seed, 4u);
}

TEST_F(CliTest, ManifestDetectsCorruption) {
  const auto a = generate("a");
  {
    std::fstream f(a / "products.bin", std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(-1, std::ios::end);
    f.put('\x7f');
  }
  EXPECT_THROW(verify_manifest(a), std::runtime_error);
  const auto b = generate("b");
  fs::remove(b / "edges.tsv");
  EXPECT_THROW(verify_manifest(b), std::runtime_error);
  EXPECT_THROW(verify_manifest(tmp.path() / "missing"), std::runtime_error);
}

TEST_F(CliTest, TrainIsReproducible) {
  const auto data = generate("data");
  const auto a = train(data, "m1", train_cfg);
  const auto b = train(data, "m2", train_cfg);
  expect_same_outputs(a, b);
  EXPECT_NO_THROW(verify_manifest(a));
  const auto model = load_checkpoint(a / "model.ckpt");
  EXPECT_EQ(model.vocab_size(), 60u);
  EXPECT_EQ(model.dim(), 4u);
}

TEST_F(CliTest, ZeroEpochsSavesInitialModel) {
  const auto data = generate("data");
  std::string text = kTrain;
  text.replace(text.find("epochs = 2"), 10, "epochs = 0");
  const auto cfg = write_text(tmp.path() / "zero.cfg", text);
  const auto out = train(data, "m0", cfg);
  EXPECT_EQ(load_checkpoint(out / "model.ckpt"), initial_model(60, 4, 4, 1));
}

TEST_F(CliTest, EmptyDatasetGenerates) {
  std::string text = kGenerate;
  text.replace(text.find("n_queries = 120"), 15, "n_queries = 0");
  gen_cfg = write_text(tmp.path() / "empty.cfg", text);
  const auto out = generate("empty");
  EXPECT_TRUE(load_dataset(out).queries.empty());
}

TEST_F(CliTest, EvalWritesSummaryForBothModels) {
  const auto data = generate("data");
  const auto model = train(data, "m1", train_cfg);
  const CommonOptions o{eval_cfg, tmp.path() / "eval", std::nullopt, 2};
  EXPECT_EQ(cmd_eval(o, data, {model.string(), "baseline"}, std::nullopt), 0);
  const auto summary = read_text(o.out / "summary.txt");
  EXPECT_NE(summary.find("Attention"), std::string::npos);
  EXPECT_NE(summary.find("Trigram Hash"), std::string::npos);
  const auto csv = read_text(o.out / "eval_0.csv");
  EXPECT_EQ(csv.rfind("query,reformulations,precision,recall,f1\n", 0), 0u);
  EXPECT_NO_THROW(verify_manifest(o.out));
}

TEST_F(CliTest, EvalRejectsMismatchedSplit) {
  const auto data = generate("data");
  const auto model = train(data, "m1", train_cfg);
  std::string text = kEval;
  text.replace(text.find("split_seed = 7"), 14, "split_seed = 8");
  const auto cfg = write_text(tmp.path() / "other.cfg", text);
  const CommonOptions o{cfg, tmp.path() / "eval", std::nullopt, 1};
  EXPECT_THROW(cmd_eval(o, data, {model.string()}, std::nullopt), std::invalid_argument);
}

TEST_F(CliTest, ValidateExitCodes) {
  const std::string base = "d = 4\nm = 200\nsamples = 2000\nalphas = 1\nbetas = 0.5\nseed = 1\n";
  const auto ok = write_text(tmp.path() / "ok.cfg", base + "min_cosine = -1\nmax_relative_error = 1e9\n");
  const auto bad = write_text(tmp.path() / "bad.cfg", base + "min_cosine = 1.5\nmax_relative_error = 1e9\n");
  EXPECT_EQ(cmd_validate({ok, tmp.path() / "v1", std::nullopt, 1}, "mean"), 0);
  EXPECT_EQ(cmd_validate({bad, tmp.path() / "v2", std::nullopt, 1}, "mean"), 1);
  EXPECT_NE(read_text(tmp.path() / "v2" / "report.txt").find("FAIL mean/"), std::string::npos);
  EXPECT_THROW(cmd_validate({ok, tmp.path() / "v3", std::nullopt, 1}, "nope"), std::invalid_argument);
}

TEST_F(CliTest, MissingKeysAreReported) {
  const auto cfg = write_text(tmp.path() / "partial.cfg", "learning_rate = 0.1\n");
  try {
    train_config_from_kv(KeyValueConfig::load(cfg));
    FAIL() << "expected an exception";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("final_lr_fraction"), std::string::npos);
  }
}

TEST(Sha256, KnownDigest) {
  TempDir tmp("sha");
  const auto p = write_text(tmp.path() / "abc.txt", "abc");
  EXPECT_EQ(sha256_file(p), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

}  // namespace
}  // namespace attest::cli
