#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "lcs2s/cli.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path& work_dir() {
  static const fs::path dir = fs::temp_directory_path() / "lcs2s_cli_tests";
  return dir;
}

std::string quote(const std::string& s) { return "'" + s + "'"; }

/// Runs the tool with stdout/stderr captured to files; returns the exit code.
int run(const std::string& args, std::string* out = nullptr) {
  const fs::path log = work_dir() / "last_run.txt";
  const std::string cmd = quote(LCS2S_TOOL_PATH) + " " + args + " > " + quote(log.string()) + " 2>&1";
  const int status = std::system(cmd.c_str());
  if (out != nullptr) {
    std::ifstream in(log);
    std::stringstream s;
    s << in.rdbuf();
    *out = s.str();
  }
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string p(const std::string& name) { return quote((work_dir() / name).string()); }

constexpr const char* kTrainFlags =
    "--embed-dim 12 --label-embed-dim 4 --hidden-dim 16 --batch-size 8 --lr 0.01 "
    "--check-interval 10 --patience 5 --max-batches 30 --seed 3";

class Pipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    fs::remove_all(work_dir());
    fs::create_directories(work_dir());
    ASSERT_EQ(run("gen-data --out-dir " + p("data") + " --train-size 80 --dev-size 12 --test-size 6 --seed 5"), 0);
    ASSERT_EQ(run("build-vocab --train " + p("data/train.jsonl") + " --out-dir " + p("vocab")), 0);
    ASSERT_EQ(run("train --train " + p("data/train.jsonl") + " --dev " + p("data/dev.jsonl") + " --vocab-dir " +
                  p("vocab") + " --out-dir " + p("model") + " " + kTrainFlags),
              0);
  }

  static std::string generate_args(const std::string& output) {
    return "generate --checkpoint " + p("model/best.ckpt") + " --vocab-dir " + p("vocab") + " --input " +
           p("data/test.jsonl") + " --output " + p(output) + " --max-len 20";
  }
};

}  // namespace

TEST_F(Pipeline, WritesArtifactsAndResolvedConfigs) {
  for (const char* f : {"data/train.jsonl", "data/dev.jsonl", "data/test.jsonl", "data/synth_spec.json",
                        "data/gen-data.config.toml", "vocab/src.vocab", "vocab/tgt.vocab", "vocab/charges.txt",
                        "vocab/build-vocab.config.toml", "model/best.ckpt", "model/train.log",
                        "model/train.config.toml"}) {
    EXPECT_TRUE(fs::exists(work_dir() / f)) << f;
  }
  const std::string cfg = slurp(work_dir() / "model/train.config.toml");
  EXPECT_NE(cfg.find("hidden-dim=16"), std::string::npos) << cfg;
  EXPECT_NE(cfg.find("clip=5"), std::string::npos) << cfg;
}

TEST_F(Pipeline, ConfigReloadReproducesTraining) {
  ASSERT_EQ(run("--config " + p("model/train.config.toml") + " train --out-dir " + p("model_again")), 0);
  EXPECT_EQ(slurp(work_dir() / "model/best.ckpt"), slurp(work_dir() / "model_again/best.ckpt"));
  EXPECT_EQ(slurp(work_dir() / "model/train.log"), slurp(work_dir() / "model_again/train.log"));
}

TEST_F(Pipeline, BeamOneMatchesGreedyBytewise) {
  ASSERT_EQ(run(generate_args("beam1.jsonl") + " --beam 1"), 0);
  ASSERT_EQ(run(generate_args("greedy.jsonl") + " --greedy"), 0);
  const std::string beam = slurp(work_dir() / "beam1.jsonl");
  EXPECT_FALSE(beam.empty());
  EXPECT_EQ(beam, slurp(work_dir() / "greedy.jsonl"));
}

TEST_F(Pipeline, GenerateRecordsAndAttention) {
  ASSERT_EQ(run(generate_args("beam5.jsonl") + " --dump-attention " + p("attn")), 0);
  std::ifstream in(work_dir() / "beam5.jsonl");
  int lines = 0;
  for (std::string line; std::getline(in, line); ++lines) {
    const auto j = nlohmann::json::parse(line);
    for (const char* key : {"fact", "rationale", "charge", "generated"}) EXPECT_TRUE(j.contains(key)) << key;
    for (const auto& tok : j.at("generated")) EXPECT_NE(tok.get<std::string>(), "</s>");
  }
  EXPECT_EQ(lines, 6);
  EXPECT_TRUE(fs::exists(work_dir() / "attn/0.csv"));
  EXPECT_TRUE(fs::exists(work_dir() / "beam5.jsonl.config.toml"));
}

TEST_F(Pipeline, ChargeOverrideIsRecorded) {
  std::ifstream charges(work_dir() / "vocab/charges.txt");
  std::string first;
  std::getline(charges, first);
  ASSERT_EQ(run(generate_args("override.jsonl") + " --charge-override " + first), 0);
  std::ifstream in(work_dir() / "override.jsonl");
  std::string line;
  ASSERT_TRUE(std::getline(in, line));
  EXPECT_EQ(nlohmann::json::parse(line).at("conditioned_charge"), first);
  EXPECT_EQ(run(generate_args("bad.jsonl") + " --charge-override no_such_charge"), lcs2s::kExitData);
}

TEST_F(Pipeline, EvaluateReferencesAgainstThemselves) {
  std::string out;
  ASSERT_EQ(run("evaluate --predictions " + p("data/test.jsonl") + " --json " + p("self.json"), &out), 0);
  const auto j = nlohmann::json::parse(slurp(work_dir() / "self.json"));
  EXPECT_EQ(j.at("bleu4").get<double>(), 1.0);
  EXPECT_EQ(j.at("rougeL_f1").get<double>(), 1.0);
  EXPECT_NE(out.find("bleu4 1.000000"), std::string::npos) << out;

  ASSERT_EQ(run(generate_args("for_eval.jsonl") + " --greedy"), 0);
  ASSERT_EQ(run("evaluate --predictions " + p("for_eval.jsonl") + " --json " + p("gen.json")), 0);
  const auto g = nlohmann::json::parse(slurp(work_dir() / "gen.json"));
  EXPECT_GE(g.at("bleu4").get<double>(), 0.0);
  EXPECT_LE(g.at("bleu4").get<double>(), 1.0);
}

TEST_F(Pipeline, AblationsTrain) {
  ASSERT_EQ(run("train --train " + p("data/train.jsonl") + " --dev " + p("data/dev.jsonl") + " --vocab-dir " +
                p("vocab") + " --out-dir " + p("no_charge") + " --label-mode no_charge --no-attention " +
                kTrainFlags),
            0);
  const std::string cfg = slurp(work_dir() / "no_charge/train.config.toml");
  EXPECT_NE(cfg.find("no_charge"), std::string::npos) << cfg;
  ASSERT_EQ(run("generate --checkpoint " + p("no_charge/best.ckpt") + " --vocab-dir " + p("vocab") + " --input " +
                p("data/test.jsonl") + " --output " + p("nc.jsonl") + " --dump-attention " + p("nc_attn")),
            0);
  EXPECT_FALSE(fs::exists(work_dir() / "nc_attn/0.csv"));
}

TEST_F(Pipeline, BaselinesWriteOutputs) {
  std::string out;
  ASSERT_EQ(run("baseline --train " + p("data/train.jsonl") + " --test " + p("data/test.jsonl") + " --out-dir " +
                    p("baselines"),
                &out),
            0);
  for (const char* m : {"rand", "rand+charge", "bm25", "bm25+charge"}) {
    EXPECT_TRUE(fs::exists(work_dir() / "baselines" / (std::string(m) + ".jsonl"))) << m;
    EXPECT_TRUE(fs::exists(work_dir() / "baselines" / (std::string(m) + ".eval.json"))) << m;
  }
}

TEST(CliErrors, ExitCodes) {
  fs::create_directories(work_dir());
  EXPECT_EQ(run(""), lcs2s::kExitUsage);
  EXPECT_EQ(run("--help"), lcs2s::kExitOk);
  EXPECT_EQ(run("train --train x"), lcs2s::kExitUsage);
  EXPECT_EQ(run("generate --checkpoint a --vocab-dir b --input c --output d --precision f16"), lcs2s::kExitUsage);
  EXPECT_EQ(run("generate --checkpoint a --vocab-dir b --input c --output d --beam 0"), lcs2s::kExitUsage);
  std::string out;
  EXPECT_EQ(run("evaluate --predictions /nonexistent/pred.jsonl", &out), lcs2s::kExitData);
  EXPECT_NE(out.find("error:"), std::string::npos) << out;
}
