#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "safrlm/cli.hpp"
#include "safrlm/train.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace safrlm;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli_main(args, out, err);
  return {code, out.str(), err.str()};
}

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

fs::path write_config(const fs::path& dir, const RunConfig& c) {
  const auto path = dir / "config_in.json";
  std::ofstream(path) << c.to_json().dump(2);
  return path;
}

}  // namespace

TEST(Cli, GenerateWritesOneLinePerRecord) {
  const auto dir = oracle::scratch_dir("cli_generate");
  std::ofstream(dir / "s.json") << R"({"n_records": 100, "d_text": 4, "d_audio": 2, "seed": 3})";
  const auto r = run({"generate", "--spec", (dir / "s.json").string(), "--out", (dir / "d.jsonl").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  std::ifstream in(dir / "d.jsonl");
  int lines = 0;
  for (std::string line; std::getline(in, line);) ++lines;
  EXPECT_EQ(lines, 100);
}

TEST(Cli, UnknownSubcommandIsUsageError) {
  const auto r = run({"foo"});
  EXPECT_EQ(r.code, kExitValidation);
  EXPECT_NE(r.err.find("Usage"), std::string::npos) << r.err;
  EXPECT_TRUE(r.out.empty());
}

TEST(Cli, UnknownFlagAndMissingSubcommand) {
  EXPECT_EQ(run({"gradcheck", "--bogus"}).code, kExitValidation);
  EXPECT_EQ(run({}).code, kExitValidation);
}

TEST(Cli, HelpExitsZero) {
  const auto r = run({"--help"});
  EXPECT_EQ(r.code, kExitOk);
  EXPECT_NE(r.out.find("sweep-blocks"), std::string::npos);
}

TEST(Cli, GradcheckReportsEveryGroup) {
  const auto dir = oracle::scratch_dir("cli_gradcheck");
  const auto r = run({"gradcheck", "--output-dir", dir.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  for (const char* g : {"align.text.conv", "align.audio.bigru0", "fusion.weights", "xadjust.ta_prime.embedding",
                        "xadjust.t_prime_a.second.block0", "heads.self.ta_prime.block0", "heads.local.t_prime_a",
                        "heads.global"}) {
    EXPECT_NE(r.out.find(std::string("PASS ") + g), std::string::npos) << g;
  }
  EXPECT_TRUE(fs::exists(dir / "config.json"));
  EXPECT_EQ(run({"gradcheck", "--tolerance", "0", "--output-dir", dir.string()}).code, kExitRuntime);
}

TEST(Cli, TrainEvalAndResolvedConfig) {
  const auto dir = oracle::scratch_dir("cli_train");
  auto cfg = fixtures::toy_run(dir, 10, 4, 4, 0.1);
  const auto cfg_path = write_config(dir, cfg);
  ::setenv("SAFRLM_SEED", "31", 1);
  const auto r = run({"train", "--config", cfg_path.string(), "--set", "train.epochs=1"});
  ::unsetenv("SAFRLM_SEED");
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const fs::path out = cfg.output_dir;
  for (const char* f : {"checkpoint.json", "checkpoint_last.json", "history.json", "config.json"})
    EXPECT_TRUE(fs::exists(out / f)) << f;
  const auto resolved = read_json(out / "config.json");
  EXPECT_EQ(resolved["train"]["seed"].get<int>(), 31);
  EXPECT_EQ(resolved["train"]["epochs"].get<int>(), 1);
  EXPECT_EQ(read_json(out / "history.json")["train_loss"].size(), 1u);

  const auto e = run({"eval", "--config", cfg_path.string(), "--checkpoint", (out / "checkpoint.json").string(),
                      "--data", cfg.data.test, "--out", (dir / "eval" / "metrics.json").string()});
  ASSERT_EQ(e.code, kExitOk) << e.err;
  const auto metrics = read_json(dir / "eval" / "metrics.json");
  EXPECT_EQ(metrics["count"].get<int>(), 4);
  EXPECT_NE(e.out.find("\"mae\""), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "eval" / "config.json"));
}

TEST(Cli, SweepWritesTable) {
  const auto dir = oracle::scratch_dir("cli_sweep");
  auto cfg = fixtures::toy_run(dir, 8, 4, 4, 0.1);
  cfg.train.epochs = 1;
  cfg.seeds = {1};
  const auto cfg_path = write_config(dir, cfg);
  const auto r = run({"sweep-blocks", "--config", cfg_path.string(), "--n", "2,4"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  std::ifstream in(fs::path(cfg.output_dir) / "sweep_blocks.csv");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "n,acc7,acc2,f1,mae,corr");
  EXPECT_EQ(run({"sweep-blocks", "--config", cfg_path.string(), "--n", "3"}).code, kExitValidation);
}

TEST(Cli, ErrorExitCodes) {
  const auto dir = oracle::scratch_dir("cli_errors");
  auto cfg = fixtures::toy_config();
  cfg.data.train = (dir / "missing.jsonl").string();
  cfg.data.validation = cfg.data.train;
  const auto cfg_path = write_config(dir, cfg);
  const auto missing = run({"train", "--config", cfg_path.string()});
  EXPECT_EQ(missing.code, kExitRuntime);
  EXPECT_NE(missing.err.find("missing.jsonl"), std::string::npos);
  std::ofstream(dir / "bad.json") << R"({"train": {"epochz": 1}})";
  EXPECT_EQ(run({"train", "--config", (dir / "bad.json").string()}).code, kExitValidation);
  EXPECT_EQ(run({"train"}).code, kExitValidation);
}
