#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "json.hpp"
#include "sherlock/checkpoint.hpp"
#include "sherlock/cli.hpp"
#include "sherlock/dataset.hpp"
#include "synthetic_corpus.hpp"

namespace sherlock::cli {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code;
  std::string out, err;
};

Result run_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / "sherlock_cli_test";
    fs::create_directories(dir_);
    save_corpus(dir_ / "corpus.ndjson", testing::synthetic_corpus({.count = 60, .seed = 11}));
    std::ofstream(dir_ / "foo.c") << testing::strcpy_fixture();
    const auto r = run_cli({"train", "--data", path("corpus.ndjson"), "--out", path("m.shlk"),
                            "--epochs", "1", "--filters", "8", "--max-len", "200", "--batch-size",
                            "16", "--history", path("history.ndjson")});
    ASSERT_EQ(r.code, kExitOk) << r.err;
  }
  static void TearDownTestSuite() { fs::remove_all(dir_); }
  static std::string path(const std::string& name) { return (dir_ / name).string(); }

  static inline fs::path dir_;
};

TEST_F(CliTest, NoArgumentsIsUsageError) {
  const auto r = run_cli({});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("build-vocab"), std::string::npos) << r.err;
}

TEST_F(CliTest, UnknownSubcommandIsUsageError) {
  const auto r = run_cli({"frobnicate"});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("Usage"), std::string::npos) << r.err;
}

TEST_F(CliTest, MissingRequiredOptionIsUsageError) {
  EXPECT_EQ(run_cli({"train", "--data", path("corpus.ndjson")}).code, kExitUsage);
}

TEST_F(CliTest, HelpExitsZero) {
  const auto r = run_cli({"--help"});
  EXPECT_EQ(r.code, kExitOk);
  EXPECT_NE(r.out.find("scan"), std::string::npos);
}

TEST_F(CliTest, TrainWroteModelAndHistory) {
  const auto saved = load_model(path("m.shlk"));
  EXPECT_EQ(saved.model.hp.conv_filters, 8u);
  EXPECT_EQ(saved.model.hp.max_len, 200u);
  std::ifstream h(path("history.ndjson"));
  std::string line;
  ASSERT_TRUE(std::getline(h, line));
  EXPECT_EQ(nlohmann::json::parse(line)["epoch"], 1);
}

TEST_F(CliTest, BuildVocab) {
  const auto r = run_cli({"build-vocab", "--data", path("corpus.ndjson"), "--out",
                          path("vocab.tsv"), "--top-k", "5"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto v = Vocabulary::load(path("vocab.tsv"));
  EXPECT_EQ(v.size(), build_vocabulary({}, 0).size() + 5);
}

TEST_F(CliTest, EvalPrintsReportAndComparison) {
  const auto r = run_cli({"eval", "--model", path("m.shlk"), "--data", path("corpus.ndjson"),
                          "--baseline", "Code2vec + MLP,0.06,0.87,0.12", "--metrics-out",
                          path("metrics.ndjson")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("Metric (CWE)    Accuracy Precision    Recall  F1 Score       AUC"),
            std::string::npos)
      << r.out;
  for (auto head : kHeadNames) EXPECT_NE(r.out.find(std::string(head)), std::string::npos);
  EXPECT_NE(r.out.find("Code2vec + MLP"), std::string::npos);
  EXPECT_TRUE(fs::exists(path("metrics.ndjson")));
}

TEST_F(CliTest, ScanFile) {
  const auto r = run_cli({"scan", "--model", path("m.shlk"), "--file", path("foo.c")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  for (auto head : kHeadNames) EXPECT_NE(r.out.find(std::string(head)), std::string::npos);
  const auto j = run_cli({"scan", "--model", path("m.shlk"), "--file", path("foo.c"), "--json"});
  const auto parsed = nlohmann::json::parse(j.out);
  EXPECT_EQ(parsed["probabilities"].size(), kHeadCount);
  EXPECT_EQ(parsed["model_format_version"], kModelFormatVersion);
}

TEST_F(CliTest, ModelFromEnvironment) {
  ::setenv("SHERLOCK_MODEL", path("m.shlk").c_str(), 1);
  const auto r = run_cli({"scan", "--file", path("foo.c")});
  ::unsetenv("SHERLOCK_MODEL");
  EXPECT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(run_cli({"scan", "--file", path("foo.c")}).code, kExitRuntime);
}

TEST_F(CliTest, RuntimeErrorsExitTwo) {
  const auto r = run_cli({"scan", "--model", path("missing.shlk"), "--file", path("foo.c")});
  EXPECT_EQ(r.code, kExitRuntime);
  EXPECT_NE(r.err.find("error:"), std::string::npos);
  EXPECT_EQ(run_cli({"stats", "--data", path("missing.ndjson")}).code, kExitRuntime);
  EXPECT_EQ(run_cli({"scan", "--model", path("corpus.ndjson"), "--file", path("foo.c")}).code,
            kExitRuntime);
}

TEST_F(CliTest, Stats) {
  const auto r = run_cli({"stats", "--data", path("corpus.ndjson")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("CWE-469"), std::string::npos);
}

TEST_F(CliTest, ConfigFileSuppliesDefaultsAndFlagsWin) {
  std::ofstream(path("run.cfg")) << "top_k = 3\nseed = 5\n";
  auto r = run_cli({"--config", path("run.cfg"), "build-vocab", "--data", path("corpus.ndjson"),
                    "--out", path("v3.tsv")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(Vocabulary::load(path("v3.tsv")).size(), build_vocabulary({}, 0).size() + 3);
  r = run_cli({"--config", path("run.cfg"), "build-vocab", "--data", path("corpus.ndjson"),
               "--out", path("v4.tsv"), "--top-k", "4"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(Vocabulary::load(path("v4.tsv")).size(), build_vocabulary({}, 0).size() + 4);

  std::ofstream(path("bad.cfg")) << "not a pair\n";
  EXPECT_EQ(run_cli({"--config", path("bad.cfg"), "stats", "--data", path("corpus.ndjson")}).code,
            kExitRuntime);
}

TEST_F(CliTest, LenientLoadingReportsBadLines) {
  std::ofstream(path("mixed.ndjson"))
      << R"({"code": "a", "labels": [0, 0, 0, 0, 0]})" << "\n"
      << R"({"code": "b", "labels": [0, 0, 0, 0]})" << "\n";
  const auto r = run_cli({"stats", "--data", path("mixed.ndjson")});
  EXPECT_EQ(r.code, kExitOk);
  EXPECT_NE(r.err.find(":2:"), std::string::npos) << r.err;
  EXPECT_EQ(run_cli({"stats", "--data", path("mixed.ndjson"), "--strict"}).code, kExitRuntime);
}

}  // namespace
}  // namespace sherlock::cli
