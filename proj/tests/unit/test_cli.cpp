#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "metagen/csv.hpp"
#include "metagen/hash.hpp"
#include "metagen/metrics.hpp"
#include "metagen/training.hpp"
#include "metagen_cli/cli.hpp"

namespace metagen {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result cli(std::vector<std::string> args) {
  args.insert(args.begin(), "metagen");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = fs::temp_directory_path() / "metagen_unit_cli";
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  static void TearDownTestSuite() { fs::remove_all(root_); }

  static std::string path(const std::string& name) { return (root_ / name).string(); }

  static inline fs::path root_;
};

TEST_F(CliTest, MissingSubcommandIsAUsageError) {
  EXPECT_EQ(cli({}).code, cli::kUsage);
  EXPECT_EQ(cli({"frobnicate"}).code, cli::kUsage);
}

TEST_F(CliTest, HelpExitsCleanly) {
  const auto r = cli({"--help"});
  EXPECT_EQ(r.code, cli::kOk);
  EXPECT_NE(r.out.find("gen-data"), std::string::npos);
}

TEST_F(CliTest, ZeroRecordsIsAUsageError) {
  const auto r = cli({"gen-data", "--n", "0", "--out", path("zero.jsonl")});
  EXPECT_EQ(r.code, cli::kUsage);
  EXPECT_FALSE(fs::exists(path("zero.jsonl")));
}

TEST_F(CliTest, GenDataIsReproducible) {
  ASSERT_EQ(cli({"gen-data", "--n", "300", "--seed", "7", "--out", path("a.jsonl")}).code, cli::kOk);
  ASSERT_EQ(cli({"gen-data", "--n", "300", "--seed", "7", "--out", path("b.jsonl")}).code, cli::kOk);
  ASSERT_EQ(cli({"gen-data", "--n", "300", "--seed", "8", "--out", path("c.jsonl")}).code, cli::kOk);
  EXPECT_EQ(sha256_file(path("a.jsonl")), sha256_file(path("b.jsonl")));
  EXPECT_NE(sha256_file(path("a.jsonl")), sha256_file(path("c.jsonl")));
}

TEST_F(CliTest, MissingDatasetNamesThePath) {
  const std::string missing = path("nowhere.jsonl");
  const auto r = cli({"train", "--data", missing, "--out", path("exp_missing")});
  EXPECT_EQ(r.code, cli::kValidation);
  EXPECT_NE(r.err.find(missing), std::string::npos);
}

TEST_F(CliTest, CorruptDatasetIsAValidationError) {
  std::ofstream(path("bad.jsonl")) << "{\"schema_version\":1,\"seed\":0,\"n_records\":1}\n{\"r_ext1\":";
  const auto r = cli({"train", "--data", path("bad.jsonl"), "--out", path("exp_bad"), "--quiet"});
  EXPECT_EQ(r.code, cli::kValidation);
  EXPECT_NE(r.err.find("line 2"), std::string::npos);
}

TEST_F(CliTest, UnknownModelIsAUsageError) {
  ASSERT_EQ(cli({"gen-data", "--n", "300", "--out", path("m.jsonl")}).code, cli::kOk);
  EXPECT_EQ(cli({"train", "--data", path("m.jsonl"), "--out", path("exp_m"), "--models", "diffusion"}).code,
            cli::kUsage);
}

TEST_F(CliTest, TrainMetaOnlyTrainsMarginalsPlusOneRunAndResumes) {
  ASSERT_EQ(cli({"gen-data", "--n", "600", "--seed", "1", "--out", path("meta.jsonl")}).code, cli::kOk);
  const std::vector<std::string> args = {"train",    "--data",   path("meta.jsonl"), "--out", path("exp_meta"),
                                         "--models", "meta-vae", "--seeds",          "0",     "--epochs",
                                         "2",        "--marginal-epochs", "2",       "--quiet"};
  const auto first = cli(args);
  ASSERT_EQ(first.code, cli::kOk) << first.err;
  EXPECT_NE(first.out.find("trained 5, skipped 0, failed 0"), std::string::npos) << first.out;
  const auto manifest = Manifest::load(root_ / "exp_meta" / "manifest.json");
  EXPECT_EQ(manifest.runs.size(), 5u);
  EXPECT_TRUE(manifest.runs.contains("meta-vae-seed0"));

  const auto ckpt = root_ / "exp_meta" / manifest.runs.at("meta-vae-seed0").checkpoint;
  const auto mtime = fs::last_write_time(ckpt);
  const auto second = cli(args);
  ASSERT_EQ(second.code, cli::kOk);
  EXPECT_NE(second.out.find("trained 0, skipped 5, failed 0"), std::string::npos) << second.out;
  EXPECT_EQ(fs::last_write_time(ckpt), mtime);

  // Report with only Meta-VAE: a table, no verdicts, and no ordering to assert.
  ASSERT_EQ(cli({"evaluate", "--exp", path("exp_meta"), "--samples", "500", "--quiet"}).code, cli::kOk);
  const auto rep = cli({"report", "--eval", path("exp_meta/eval")});
  EXPECT_EQ(rep.code, cli::kOk);
  EXPECT_NE(rep.out.find("meta-vae"), std::string::npos);
  EXPECT_EQ(rep.out.find("winner="), std::string::npos);
  EXPECT_EQ(cli({"report", "--eval", path("exp_meta/eval"), "--assert-paper-ordering"}).code, cli::kRunFailure);
}

TEST_F(CliTest, FullPipelineProducesOneRowPerModelSeedMetric) {
  ASSERT_EQ(cli({"gen-data", "--n", "600", "--seed", "2", "--out", path("full.jsonl")}).code, cli::kOk);
  const auto train = cli({"train", "--data", path("full.jsonl"), "--out", path("exp_full"), "--seeds", "0,1", "--epochs",
                          "2", "--marginal-epochs", "2", "--quiet"});
  ASSERT_EQ(train.code, cli::kOk) << train.err;
  const auto ev = cli({"evaluate", "--exp", path("exp_full"), "--samples", "400", "--quiet"});
  ASSERT_EQ(ev.code, cli::kOk) << ev.err;

  const auto report = EvalReport::read_csv(root_ / "exp_full" / "eval" / "eval_report.csv");
  EXPECT_EQ(report.rows().size(), 4u * 2u * report_metric_names().size());
  const CsvTable fits = read_csv_file(root_ / "exp_full" / "eval" / "residual_fit.csv");
  EXPECT_EQ(fits.rows.size(), 8u);
  EXPECT_TRUE(fs::exists(root_ / "exp_full" / "eval" / "residuals" / "vanilla-gan_seed1.csv"));

  const auto rep = cli({"report", "--eval", path("exp_full/eval")});
  EXPECT_EQ(rep.code, cli::kOk);
  EXPECT_NE(rep.out.find("mean_abs_ep: winner="), std::string::npos);
  EXPECT_NE(rep.out.find("mean_abs_ep ordering"), std::string::npos);
  EXPECT_TRUE(fs::exists(root_ / "exp_full" / "eval" / "verdicts.txt"));

  // Evaluating twice yields byte-identical outputs.
  ASSERT_EQ(cli({"evaluate", "--exp", path("exp_full"), "--out", path("exp_full/eval2"), "--samples", "400", "--quiet",
                 "--threads", "2"})
                .code,
            cli::kOk);
  for (const char* f : {"eval_report.csv", "histograms.csv", "residual_fit.csv", "error_histograms.csv"}) {
    EXPECT_EQ(sha256_file(root_ / "exp_full" / "eval" / f), sha256_file(root_ / "exp_full" / "eval2" / f)) << f;
  }
}

TEST_F(CliTest, ConfigFileSuppliesDefaultsAndFlagsWin) {
  std::ofstream(path("gen.ini")) << "[gen-data]\nn = 50\nseed = 3\n";
  ASSERT_EQ(cli({"gen-data", "--config", path("gen.ini"), "--out", path("cfg1.jsonl")}).code, cli::kOk);
  ASSERT_EQ(cli({"gen-data", "--n", "50", "--seed", "3", "--out", path("cfg2.jsonl")}).code, cli::kOk);
  EXPECT_EQ(sha256_file(path("cfg1.jsonl")), sha256_file(path("cfg2.jsonl")));
  ASSERT_EQ(cli({"gen-data", "--config", path("gen.ini"), "--seed", "4", "--out", path("cfg3.jsonl")}).code, cli::kOk);
  EXPECT_NE(sha256_file(path("cfg1.jsonl")), sha256_file(path("cfg3.jsonl")));

  std::ofstream(path("bad.ini")) << "[gen-data]\nflavour = strawberry\n";
  EXPECT_EQ(cli({"gen-data", "--config", path("bad.ini"), "--out", path("cfg4.jsonl")}).code, cli::kUsage);
  EXPECT_EQ(cli({"gen-data", "--config", path("absent.ini"), "--out", path("cfg5.jsonl")}).code, cli::kValidation);
}

}  // namespace
}  // namespace metagen
