#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "stemgen/stemgen.hpp"

using namespace stemgen;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

const fs::path& work() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / ("stemgen_cli_" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

Run cli(const std::string& args, const std::string& env = "") {
  const auto log = work() / "last_output.txt";
  const std::string cmd =
      env + (env.empty() ? "" : " ") + "'" STEMGEN_CLI_PATH "' " + args + " > '" + log.string() + "' 2>&1";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream is(log);
  std::stringstream ss;
  ss << is.rdbuf();
  r.out = ss.str();
  return r;
}

std::string p(const std::string& name) { return (work() / name).string(); }

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    ASSERT_EQ(cli("synth-data --n 60 --seed 5 --out " + p("ds")).code, 0);
    std::ofstream(p("tiny.json")) << R"({
      "model": {"d_model": 16, "n_layers": 1, "n_heads": 2, "ff_mult": 2, "max_frames": 80},
      "optimization": {"steps": 4, "batch_size": 2, "lr": 0.003, "warmup_steps": 1, "log_every": 2,
                       "eval_every": 0, "checkpoint_every": 0, "precision": 32},
      "data": {"eval_songs": 2}
    })";
    const auto r = cli("train-lm --config " + p("tiny.json") + " --dataset " + p("ds") + " --out " + p("run"),
                       "STEMGEN_LOG_LEVEL=quiet");
    ASSERT_EQ(r.code, 0) << r.out;
  }
};

}  // namespace

TEST_F(Cli, ParseErrorsExitWithTwo) {
  EXPECT_EQ(cli("").code, 2);
  EXPECT_EQ(cli("frobnicate").code, 2);
  EXPECT_EQ(cli("generate --checkpoint x --out y --bogus").code, 2);
  EXPECT_EQ(cli("edit --checkpoint x --in y --out z --mask bass --mode sideways").code, 2);
  EXPECT_EQ(cli("inspect " + p("ds"), "STEMGEN_LOG_LEVEL=loud").code, 2);
  EXPECT_EQ(cli("synth-data --n 5 --codebook 12 --out " + p("ds12")).code, 2);
  EXPECT_EQ(cli("--help").code, 0);
}

TEST_F(Cli, MissingFilesExitWithThree) {
  EXPECT_EQ(cli("inspect " + p("nope.tok")).code, 3);
  EXPECT_EQ(cli("generate --checkpoint " + p("nope.sgck") + " --out " + p("g.tok")).code, 3);
  EXPECT_EQ(cli("train-lm --config " + p("nope.json") + " --dataset " + p("ds") + " --out " + p("r2")).code, 3);
}

TEST_F(Cli, BadConfigIsAnArgumentError) {
  std::ofstream(p("bad.json")) << R"({"optimization": {"stepz": 3}})";
  EXPECT_EQ(cli("train-lm --config " + p("bad.json") + " --dataset " + p("ds") + " --out " + p("r3")).code, 2);
}

TEST_F(Cli, MalformedFilesExitWithFive) {
  std::ofstream(p("garbage.tok")) << "this is not a token file\n";
  EXPECT_EQ(cli("inspect " + p("garbage.tok")).code, 5);
  std::ofstream(p("garbage.sgck")) << "SGCK-truncated";
  EXPECT_EQ(cli("inspect " + p("garbage.sgck")).code, 5);
}

TEST_F(Cli, LayoutMismatchExitsWithFour) {
  ASSERT_EQ(cli("synth-data --n 40 --codebook 32 --out " + p("ds32")).code, 0);
  const auto r = cli("evaluate --dataset " + p("ds32") + " --checkpoint " + p("run/checkpoint.sgck") +
                     " --task t2m --out " + p("mm.json"));
  EXPECT_EQ(r.code, 4) << r.out;
  EXPECT_EQ(cli("edit --checkpoint " + p("run/checkpoint.sgck") + " --in " + p("ds32/song_00000.tok") +
                " --out " + p("mm.tok") + " --mask bass")
                .code,
            4);
}

TEST_F(Cli, TrainingWritesRunArtifacts) {
  EXPECT_TRUE(fs::exists(p("run/checkpoint.sgck")));
  EXPECT_TRUE(fs::exists(p("run/metrics.jsonl")));
  EXPECT_TRUE(fs::exists(p("ds/run.json")));
  std::ifstream is(p("run/run.json"));
  const auto manifest = nlohmann::json::parse(is);
  EXPECT_EQ(manifest.at("command"), "train-lm");
  EXPECT_EQ(manifest.at("config_hash").get<std::string>().size(), 16u);
  std::ifstream sm(p("run/summary.json"));
  const auto summary = nlohmann::json::parse(sm);
  EXPECT_EQ(summary.at("step"), 4);
  EXPECT_EQ(summary.at("test_ce").size(), 6u);
}

TEST_F(Cli, GenerateIsDeterministic) {
  const std::string base = "generate --checkpoint " + p("run/checkpoint.sgck") + " --cond 1 --frames 20 --seed 9";
  ASSERT_EQ(cli(base + " --out " + p("g1.tok")).code, 0);
  ASSERT_EQ(cli(base + " --out " + p("g2.tok")).code, 0);
  const auto a = load_grid(p("g1.tok"));
  const auto b = load_grid(p("g2.tok"));
  EXPECT_EQ(a.frames(), 20);
  EXPECT_EQ(a.data(), b.data());
  EXPECT_TRUE(fs::exists(p("g1.tok.run.json")));
  const auto r = cli("inspect " + p("g1.tok"));
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("bass:1"), std::string::npos);
}

TEST_F(Cli, OutputRootAppliesToRelativePaths) {
  fs::create_directories(p("root"));
  const auto r = cli("generate --checkpoint " + p("run/checkpoint.sgck") + " --frames 8 --out rel.tok",
                     "STEMGEN_OUTPUT_ROOT='" + p("root") + "'");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_TRUE(fs::exists(p("root/rel.tok")));
}

TEST_F(Cli, ForcedEditKeepsUnmaskedStreams) {
  const auto src = p("ds/song_00019.tok");
  const auto r = cli("edit --checkpoint " + p("run/checkpoint.sgck") + " --in " + src + " --out " +
                     p("e.tok") + " --mask bass --mask drums --seed 3");
  ASSERT_EQ(r.code, 0) << r.out;
  const auto a = load_grid(src);
  const auto b = load_grid(p("e.tok"));
  ASSERT_EQ(a.frames(), b.frames());
  for (int s = 2; s < 6; ++s)
    for (int t = 0; t < a.frames(); ++t) ASSERT_EQ(a.at(s, t), b.at(s, t));
}

TEST_F(Cli, EvaluateEditReport) {
  const auto r = cli("evaluate --dataset " + p("ds") + " --checkpoint " + p("run/checkpoint.sgck") +
                     " --task edit:bass --songs 3 --out " + p("rep.json"));
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("HAR"), std::string::npos);
  std::ifstream is(p("rep.json"));
  const auto rep = nlohmann::json::parse(is);
  EXPECT_EQ(rep.at("songs"), 3);
  EXPECT_DOUBLE_EQ(rep.at("preservation").get<double>(), 1.0);
  EXPECT_TRUE(rep.contains("har"));
  EXPECT_TRUE(rep.contains("beat_stderr"));
  EXPECT_EQ(rep.at("rows").size(), 3u);
  EXPECT_EQ(cli("evaluate --dataset " + p("ds") + " --checkpoint " + p("run/checkpoint.sgck") +
                " --task edit:vocals --out " + p("rep2.json"))
                .code,
            2);
}

TEST_F(Cli, TrainCodecAndInspect) {
  const auto r = cli("train-codec --dataset " + p("ds") + " --stem bass --stages 1 --codebook 8 --songs 10 --out " +
                     p("bass.sgcb"));
  ASSERT_EQ(r.code, 0) << r.out;
  const auto cb = load_codebooks(p("bass.sgcb"));
  EXPECT_EQ(cb.n_stages(), 1);
  EXPECT_EQ(cb.codebook_size(), 8);
  EXPECT_EQ(cli("inspect " + p("bass.sgcb")).code, 0);
  EXPECT_EQ(cli("inspect " + p("run/checkpoint.sgck")).code, 0);
  EXPECT_EQ(cli("inspect " + p("ds")).code, 0);
}
