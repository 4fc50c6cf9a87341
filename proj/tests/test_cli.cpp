#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "fdgan/image_io.hpp"

namespace fs = std::filesystem;

namespace {

struct RunResult {
  int code = -1;
  std::string output;
};

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("fdgan_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

RunResult run(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(FDGAN_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.output = slurp(log);
  return r;
}

constexpr const char* kTiny =
    " --set image_size=16 --set train_count=4 --set eval_count=2 --set batch_size=2"
    " --set iterations=4 --set checkpoint_every=2 --set net_stem=4 --set net_growth=4"
    " --set net_bottleneck=8 --set net_decoder=8,8,4 --set net_disc=4,8,8,8";

}  // namespace

TEST(Cli, HelpAndUsageErrors) {
  const auto dir = scratch("usage");
  EXPECT_EQ(run("--help", dir / "h.txt").code, 0);
  EXPECT_EQ(run("", dir / "none.txt").code, 1);
  EXPECT_EQ(run("frobnicate", dir / "bad.txt").code, 1);
  const auto zero = run("synth --count 0 --out " + (dir / "c").string(), dir / "zero.txt");
  EXPECT_EQ(zero.code, 1);
  EXPECT_NE(zero.output.find("count"), std::string::npos) << zero.output;
  const auto unknown = run("train --out " + (dir / "t").string() + " --set learning_rate=1", dir / "k.txt");
  EXPECT_EQ(unknown.code, 1);
  EXPECT_NE(unknown.output.find("learning_rate"), std::string::npos) << unknown.output;
  EXPECT_EQ(run("train --out " + (dir / "t").string() + " --variant fusion", dir / "v.txt").code, 1);
}

TEST(Cli, SynthWritesCorpusAndDecomposeSplitsIt) {
  const auto dir = scratch("synth");
  const auto r = run("synth --count 3 --size 32 --seed 5 --out " + (dir / "c").string(), dir / "s.txt");
  ASSERT_EQ(r.code, 0) << r.output;
  const auto corpus = fdgan::read_corpus(dir / "c");
  ASSERT_EQ(corpus.size(), 3u);
  EXPECT_EQ(corpus[0].hazy.shape(), (fdgan::Shape{1, 3, 32, 32}));
  EXPECT_NE(slurp(dir / "c" / "config.txt").find("seed = 5"), std::string::npos);

  const auto again = run("synth --count 3 --size 32 --seed 5 --out " + (dir / "d").string(), dir / "s2.txt");
  ASSERT_EQ(again.code, 0);
  EXPECT_EQ(slurp(dir / "c" / "manifest.txt"), slurp(dir / "d" / "manifest.txt"));

  const fs::path img = dir / "c" / "00000_hazy.png";
  const auto d = run("decompose " + img.string() + " --out " + (dir / "split").string(), dir / "d.txt");
  ASSERT_EQ(d.code, 0) << d.output;
  EXPECT_EQ(fdgan::read_png(dir / "split" / "lf.png").shape(), corpus[0].hazy.shape());
  EXPECT_EQ(fdgan::read_png(dir / "split" / "hf.png").shape(), corpus[0].hazy.shape());
}

TEST(Cli, TrainEvalDehazeRoundTrip) {
  const auto dir = scratch("train");
  const auto t = run(std::string("train --variant fusion-lf --out ") + (dir / "run").string() + kTiny,
                     dir / "t.txt");
  ASSERT_EQ(t.code, 0) << t.output;
  EXPECT_TRUE(fs::exists(dir / "run" / "final.bin"));
  EXPECT_TRUE(fs::exists(dir / "run" / "checkpoints" / "ckpt_000004.bin"));
  EXPECT_NE(slurp(dir / "run" / "config.txt").find("mode = fusion-lf"), std::string::npos);

  std::istringstream log(slurp(dir / "run" / "train_log.jsonl"));
  std::string line;
  int lines = 0;
  while (std::getline(log, line)) {
    const auto j = nlohmann::json::parse(line);
    for (const char* k : {"step", "l1", "ssim_loss", "perceptual", "adversarial", "d_loss", "total", "wall_time"}) {
      EXPECT_TRUE(j.contains(k)) << k;
    }
    ++lines;
  }
  EXPECT_EQ(lines, 4);

  const std::string ck = (dir / "run" / "final.bin").string();
  const auto e = run("eval --checkpoint " + ck + " --out " + (dir / "ev").string() + kTiny, dir / "e.txt");
  ASSERT_EQ(e.code, 0) << e.output;
  EXPECT_NE(e.output.find("mean"), std::string::npos);
  EXPECT_NE(slurp(dir / "ev" / "metrics.jsonl").find("\"psnr\""), std::string::npos);

  const auto clear = run(std::string("eval --input clear --out ") + (dir / "ev2").string() + kTiny,
                         dir / "e2.txt");
  ASSERT_EQ(clear.code, 0) << clear.output;
  EXPECT_NE(slurp(dir / "ev2" / "metrics.jsonl").find("\"inf\""), std::string::npos);

  const auto mismatch = run("eval --checkpoint " + ck + " --variant fusion-full" + kTiny, dir / "m.txt");
  EXPECT_EQ(mismatch.code, 2);
  EXPECT_NE(mismatch.output.find("fusion-lf"), std::string::npos) << mismatch.output;
  EXPECT_NE(mismatch.output.find("fusion-full"), std::string::npos) << mismatch.output;

  ASSERT_EQ(run("synth --count 1 --size 24 --out " + (dir / "img").string(), dir / "i.txt").code, 0);
  ASSERT_EQ(fdgan::read_corpus(dir / "img").size(), 1u);
  const fs::path hazy = dir / "img" / "00000_hazy.png";
  const auto h = run("dehaze --checkpoint " + ck + " " + hazy.string() + " --out " +
                         (dir / "restored.png").string(),
                     dir / "h.txt");
  ASSERT_EQ(h.code, 0) << h.output;
  EXPECT_EQ(fdgan::read_png(dir / "restored.png").shape(), (fdgan::Shape{1, 3, 24, 24}));

  const auto missing = run("dehaze --checkpoint " + ck + " " + (dir / "nope.png").string(), dir / "n.txt");
  EXPECT_EQ(missing.code, 2);
}

TEST(Cli, TrainIsBitReproducible) {
  const auto dir = scratch("repro");
  for (const char* name : {"a", "b"}) {
    const auto r = run(std::string("train --seed 3 --out ") + (dir / name).string() + kTiny,
                       dir / (std::string(name) + ".txt"));
    ASSERT_EQ(r.code, 0) << r.output;
  }
  EXPECT_EQ(slurp(dir / "a" / "final.bin"), slurp(dir / "b" / "final.bin"));
}

TEST(Cli, AblateWritesEveryMode) {
  const auto dir = scratch("ablate");
  const auto r = run(std::string("ablate --out ") + (dir / "ab").string() + kTiny + " --set iterations=2",
                     dir / "a.txt");
  ASSERT_EQ(r.code, 0) << r.output;
  std::istringstream in(slurp(dir / "ab" / "ablation.jsonl"));
  std::string line;
  std::vector<std::string> modes;
  while (std::getline(in, line)) modes.push_back(nlohmann::json::parse(line)["mode"]);
  EXPECT_EQ(modes, (std::vector<std::string>{"hazy-input", "baseline", "gan", "fusion-hf", "fusion-lf",
                                             "fusion-full"}));
}
