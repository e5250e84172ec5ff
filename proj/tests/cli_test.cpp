#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>

#include <httplib.h>

#include "knm/datastore.hpp"
#include "test_util.hpp"

namespace knm {
namespace {

namespace fs = std::filesystem;

struct Run {
  int code = -1;
  std::string out;
};

Run knm_cli(const std::string& args, const fs::path& dir) {
  const auto out = dir / "stdout.txt";
  const std::string cmd = std::string(KNM_CLI) + " " + args + " > " + out.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = fs::exists(out) ? testing::read_text(out.string()) : "";
  return r;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override { dir = testing::scratch_dir("cli"); }
  fs::path dir;
  std::string p(const std::string& name) const { return (dir / name).string(); }
};

TEST_F(Cli, UsageErrorsExitWithConfigCode) {
  EXPECT_EQ(knm_cli("", dir).code, 2);
  EXPECT_EQ(knm_cli("frobnicate", dir).code, 2);
  EXPECT_EQ(knm_cli("eval", dir).code, 2);
  EXPECT_EQ(knm_cli("eval --config " + p("missing.conf"), dir).code, 2);
  EXPECT_EQ(knm_cli("--help", dir).code, 0);
}

TEST_F(Cli, BadConfigAndMissingDataExitCodes) {
  binary::write_file(p("bad.conf"), "db_corpus = a\ntest_corpus = b\nlm_train_corpus = c\nk = 0\n");
  EXPECT_EQ(knm_cli("eval --config " + p("bad.conf"), dir).code, 2);
  binary::write_file(p("nodata.conf"), "db_corpus = a\ntest_corpus = b\nlm_train_corpus = c\n");
  const auto r = knm_cli("eval --config " + p("nodata.conf"), dir);
  EXPECT_EQ(r.code, 4);
  EXPECT_NE(r.out.find("data error"), std::string::npos) << r.out;
}

TEST_F(Cli, UnreachableRemoteModelExitsWithBackendCode) {
  int port = 0;
  {
    httplib::Server probe;
    port = probe.bind_to_any_port("127.0.0.1");
  }
  ASSERT_EQ(knm_cli("gen-suite --out-dir " + p("suite"), dir).code, 0);
  binary::write_file(p("vocab.txt"), "<eol>\n<unk>\nx\n");
  const auto r = knm_cli("build-db --corpus " + p("suite/db.jsonl") + " --lm url:http://127.0.0.1:" +
                             std::to_string(port) + " --vocab " + p("vocab.txt") + " --timeout 1 --out " +
                             p("db.knmds"),
                         dir);
  EXPECT_EQ(r.code, 3) << r.out;
}

TEST_F(Cli, TrainBuildCompletePipeline) {
  ASSERT_EQ(knm_cli("gen-suite --out-dir " + p("suite"), dir).code, 0);
  ASSERT_EQ(knm_cli("train-lm --corpus " + p("suite/train.jsonl") + " --vocab-corpus " + p("suite/db.jsonl") +
                        " --smoothing-k 0.01 --out " + p("lm.knmlm") + " --vocab-out " + p("vocab.txt"),
                    dir)
                .code,
            0);
  const std::string model = " --lm ref:" + p("lm.knmlm") + " --vocab " + p("vocab.txt");
  auto r = knm_cli("build-db --corpus " + p("suite/db.jsonl") + model + " --out " + p("dec.knmds"), dir);
  ASSERT_EQ(r.code, 0) << r.out;
  r = knm_cli("build-db --corpus " + p("suite/db.jsonl") + model + " --mode full --out " + p("full.knmds"), dir);
  ASSERT_EQ(r.code, 0) << r.out;
  const auto dec = Datastore::load(p("dec.knmds"));
  const auto full = Datastore::load(p("full.knmds"));
  EXPECT_EQ(dec.mode(), DatastoreMode::decoupled);
  EXPECT_EQ(full.size(), dec.total_tokens());
  EXPECT_LT(dec.size(), full.size());

  binary::write_file(p("ctx.java"), "int count = 0 ;\nsvc3 . ");
  r = knm_cli("complete --db " + p("dec.knmds") + model + " --context-file " + p("ctx.java"), dir);
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(r.out.rfind("invoke3\n", 0), 0u) << r.out;
  r = knm_cli("complete --db " + p("dec.knmds") + model + " --context-file " + p("ctx.java") + " --line", dir);
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(r.out.rfind("invoke3 (", 0), 0u) << r.out;

  r = knm_cli("complete --db " + p("dec.knmds") + model + " --context-file " + p("ctx.java") + " --mode nope", dir);
  EXPECT_EQ(r.code, 2);
  binary::write_file(p("broken.knmds"), testing::read_text(p("dec.knmds")).substr(0, 100));
  r = knm_cli("complete --db " + p("broken.knmds") + model + " --context-file " + p("ctx.java"), dir);
  EXPECT_EQ(r.code, 4);
}

TEST_F(Cli, SweepWritesCsv) {
  ASSERT_EQ(knm_cli("gen-suite --out-dir " + p("suite"), dir).code, 0);
  // shrink the run: token task only, two modes
  auto conf = testing::read_text(p("suite/suite.conf"));
  conf += "line_task = false\nmodes = lm_only, knm_bayesian\n";
  binary::write_file(p("suite/suite.conf"), conf);
  const auto r = knm_cli("sweep --config " + p("suite/suite.conf") + " --axis N --values 2,8 --out " + p("s.csv"), dir);
  ASSERT_EQ(r.code, 0) << r.out;
  const auto csv = testing::read_text(p("s.csv"));
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
  EXPECT_NE(csv.find("\nN,8,knm_bayesian,"), std::string::npos);
  EXPECT_EQ(knm_cli("sweep --config " + p("suite/suite.conf") + " --axis N --values 2.5", dir).code, 2);
}

}  // namespace
}  // namespace knm
