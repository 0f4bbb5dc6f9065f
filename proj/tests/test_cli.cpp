#include "doctest.h"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "core/image_io.hpp"
#include "core/rng.hpp"

using namespace dlsvm;
namespace fs = std::filesystem;

namespace {

struct RunResult {
  int code = -1;
  std::string out, err;
};

struct TempDir {
  fs::path path;
  explicit TempDir(const char* tag) {
    path = fs::temp_directory_path() / (std::string("dlsvm_cli_") + tag);
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str(const char* rel) const { return (path / rel).string(); }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.good()) return {};
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void spit(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

const char* cli_path() { return std::getenv("DLSVM_CLI"); }

#define NEED_CLI()                                             \
  do {                                                         \
    if (!cli_path()) {                                         \
      MESSAGE("DLSVM_CLI not set; skipping CLI test");         \
      return;                                                  \
    }                                                          \
  } while (0)

RunResult run_cli(const TempDir& tmp, const std::string& args) {
  static int counter = 0;
  std::string out = tmp.str(("stdout" + std::to_string(counter)).c_str());
  std::string err = tmp.str(("stderr" + std::to_string(counter)).c_str());
  ++counter;
  std::string cmd =
      std::string("\"") + cli_path() + "\" " + args + " >\"" + out + "\" 2>\"" + err + "\"";
  int status = std::system(cmd.c_str());
  RunResult res;
  res.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  res.out = slurp(out);
  res.err = slurp(err);
  return res;
}

std::vector<std::string> lines_of(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string line;
  while (std::getline(in, line)) out.push_back(line);
  return out;
}

void write_image_tree(const fs::path& root) {
  Rng rng(91);
  fs::create_directories(root / "dark");
  fs::create_directories(root / "light");
  for (int i = 0; i < 16; ++i) {
    GrayImage img;
    img.h = img.w = 32;
    img.pixels.resize(32 * 32);
    for (auto& p : img.pixels) p = uint8_t(rng.next_below(60));
    char name[32];
    std::snprintf(name, sizeof(name), "d%02d.pgm", i);
    write_pgm((root / "dark" / name).string(), img);
  }
  for (int i = 0; i < 16; ++i) {
    GrayImage img;
    img.h = img.w = 32;
    img.pixels.resize(32 * 32);
    for (auto& p : img.pixels) p = uint8_t(180 + rng.next_below(60));
    char name[32];
    std::snprintf(name, sizeof(name), "l%02d.pgm", i);
    write_pgm((root / "light" / name).string(), img);
  }
}

}  // namespace

TEST_CASE("cli reports a version and usage errors exit with code 3") {
  NEED_CLI();
  TempDir tmp("basic");
  RunResult ver = run_cli(tmp, "--version");
  CHECK(ver.code == 0);
  CHECK(ver.out.find('.') != std::string::npos);

  CHECK(run_cli(tmp, "--help").code == 0);
  CHECK(run_cli(tmp, "").code == 3);                  // a subcommand is required
  CHECK(run_cli(tmp, "train --bogus x").code == 3);   // unknown option
  CHECK(run_cli(tmp, "frobnicate").code == 3);        // unknown subcommand
}

TEST_CASE("preprocess, duplicate seeded training, eval, and predict chain together") {
  NEED_CLI();
  TempDir tmp("pipeline");
  write_image_tree(tmp.path / "root");

  RunResult prep = run_cli(tmp, "preprocess -d " + tmp.str("root") + " -o " + tmp.str("data.ds") +
                                    " --ratio 0.75 --batch 8 --seed 3");
  CHECK(prep.code == 0);
  CHECK(prep.out.find("samples 32") != std::string::npos);
  CHECK(prep.out.find("split train 24 test 8 holdout 0") != std::string::npos);
  CHECK(prep.out.find("wrote " + tmp.str("data.ds")) != std::string::npos);

  std::string train_flags = " -m mlp-svm --epochs 2 --batch 8 --seed 5 -d " + tmp.str("data.ds");
  RunResult t1 = run_cli(tmp, "train" + train_flags + " -o " + tmp.str("m1.ckpt") + " --log " +
                                  tmp.str("log1.csv"));
  CHECK(t1.code == 0);
  CHECK(t1.out.find("data: 32 samples, 1024 features, 2 classes (train 24 / test 8 / holdout 0)") !=
        std::string::npos);
  CHECK(t1.out.find("final training accuracy: ") != std::string::npos);
  CHECK(t1.out.find("wrote " + tmp.str("m1.ckpt")) != std::string::npos);

  RunResult t2 = run_cli(tmp, "train" + train_flags + " -o " + tmp.str("m2.ckpt") + " --log " +
                                  tmp.str("log2.csv"));
  CHECK(t2.code == 0);

  // the same seed and data reproduce the checkpoint and the log byte for byte
  std::string ck1 = slurp(tmp.str("m1.ckpt")), ck2 = slurp(tmp.str("m2.ckpt"));
  REQUIRE_FALSE(ck1.empty());
  CHECK(ck1 == ck2);
  std::string log1 = slurp(tmp.str("log1.csv"));
  CHECK_FALSE(log1.empty());
  CHECK(log1 == slurp(tmp.str("log2.csv")));
  CHECK(log1.rfind("step,epoch,loss,batch_accuracy,wall_ms\n", 0) == 0);
  CHECK(lines_of(log1).size() == 7);  // header + 3 steps/epoch * 2 epochs

  RunResult ev = run_cli(tmp, "eval -c " + tmp.str("m1.ckpt") + " -d " + tmp.str("data.ds") +
                                  " --split test --report " + tmp.str("report.csv") +
                                  " --confusion " + tmp.str("conf.csv") + " --heatmap " +
                                  tmp.str("heat.svg"));
  CHECK(ev.code == 0);
  CHECK(ev.out.find("test accuracy: ") != std::string::npos);
  CHECK(slurp(tmp.str("report.csv")).rfind("name,support,precision,recall,f1\n", 0) == 0);
  CHECK(slurp(tmp.str("conf.csv")).rfind("true\\predicted,dark,light\n", 0) == 0);
  CHECK(slurp(tmp.str("heat.svg")).rfind("<svg", 0) == 0);

  RunResult pr = run_cli(tmp, "predict -c " + tmp.str("m1.ckpt") + " -i " +
                                  (tmp.path / "root" / "dark" / "d00.pgm").string());
  CHECK(pr.code == 0);
  auto pr_lines = lines_of(pr.out);
  REQUIRE(pr_lines.size() == 3);  // verdict plus one score line per class
  CHECK(pr_lines[0].rfind("predicted: ", 0) == 0);

  // raw binary input takes the render path
  spit(tmp.str("raw.bin"), std::string(2000, '\x42'));
  RunResult raw = run_cli(tmp, "predict -c " + tmp.str("m1.ckpt") + " -i " + tmp.str("raw.bin"));
  CHECK(raw.code == 0);
  CHECK(raw.out.rfind("predicted: ", 0) == 0);

  RunResult gc = run_cli(tmp, "gradcheck -m mlp-svm");
  CHECK(gc.code == 0);
  CHECK(gc.out.find("PASS") != std::string::npos);
}

TEST_CASE("convert mirrors a directory into pgm files with a manifest") {
  NEED_CLI();
  TempDir tmp("convert");
  fs::create_directories(tmp.path / "bin" / "sub");
  {
    std::ofstream a(tmp.str("bin/a.exe"), std::ios::binary);
    for (int i = 0; i < 100; ++i) a.put(char(i));
    std::ofstream b((tmp.path / "bin" / "sub" / "b.dll").string(), std::ios::binary);
    for (int i = 0; i < 2000; ++i) b.put(char(i % 17));
    std::ofstream c(tmp.str("bin/tiny.dat"), std::ios::binary);
    c << "abc";  // smaller than one row: skipped with a warning
  }

  RunResult res = run_cli(tmp, "convert -i " + tmp.str("bin") + " -o " + tmp.str("img") +
                                   " --width 32");
  CHECK(res.code == 0);
  CHECK(res.out.find("rendered 2 file(s), skipped 1") != std::string::npos);
  CHECK(res.err.find("tiny.dat") != std::string::npos);

  GrayImage a = read_gray_image(tmp.str("img/a.exe.pgm"));
  CHECK(a.w == 32);
  CHECK(a.h == 3);
  GrayImage b = read_gray_image((tmp.path / "img" / "sub" / "b.dll.pgm").string());
  CHECK(b.w == 32);
  CHECK(b.h == 62);

  std::string manifest = slurp(tmp.str("img/manifest.csv"));
  auto rows = lines_of(manifest);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0] == "source,width,height");
  CHECK(manifest.find("a.exe,32,3") != std::string::npos);
  CHECK(manifest.find("b.dll,32,62") != std::string::npos);

  // single-file form renders exactly one image
  RunResult one = run_cli(tmp, "convert -i " + tmp.str("bin/a.exe") + " -o " +
                                   tmp.str("one.pgm") + " --width auto");
  CHECK(one.code == 0);
  GrayImage img = read_gray_image(tmp.str("one.pgm"));
  CHECK(img.w == 32);

  CHECK(run_cli(tmp, "convert -i " + tmp.str("nonexistent") + " -o " + tmp.str("x")).code == 2);
}

TEST_CASE("failure modes map to their documented exit codes") {
  NEED_CLI();
  TempDir tmp("failures");

  // missing dataset file -> input error
  RunResult t = run_cli(tmp, "train -d " + tmp.str("missing.ds") + " -m mlp-svm -o " +
                                 tmp.str("out.ckpt"));
  CHECK(t.code == 2);
  CHECK(t.err.find("error:") != std::string::npos);

  // corrupt checkpoint -> format error
  spit(tmp.str("broken.ckpt"), "not a checkpoint at all");
  write_image_tree(tmp.path / "root");
  RunResult prep = run_cli(tmp, "preprocess -d " + tmp.str("root") + " -o " + tmp.str("d.ds") +
                                    " --ratio 0.75 --batch 8");
  REQUIRE(prep.code == 0);
  RunResult ev = run_cli(tmp, "eval -c " + tmp.str("broken.ckpt") + " -d " + tmp.str("d.ds"));
  CHECK(ev.code == 4);

  // bad option value -> config error
  CHECK(run_cli(tmp, "preprocess -d " + tmp.str("root") + " -o " + tmp.str("x.ds") +
                         " --ratio 1.5 --batch 8")
            .code == 3);
  CHECK(run_cli(tmp, "eval -c " + tmp.str("broken.ckpt") + " -d " + tmp.str("d.ds") +
                         " --split bogus")
            .code == 3);

  // missing checkpoint for predict -> input error
  CHECK(run_cli(tmp, "predict -c " + tmp.str("nothing.ckpt") + " -i " + tmp.str("d.ds")).code ==
        2);
}

TEST_CASE("options load from a config file") {
  NEED_CLI();
  TempDir tmp("config");
  write_image_tree(tmp.path / "root");
  spit(tmp.str("prep.conf"), "[preprocess]\nratio = 0.5\nbatch = 8\nseed = 11\n");

  RunResult res = run_cli(tmp, "preprocess -d " + tmp.str("root") + " -o " + tmp.str("c.ds") +
                                   " --config " + tmp.str("prep.conf"));
  CHECK(res.code == 0);
  CHECK(res.out.find("split train 16 test 16 holdout 0") != std::string::npos);
  CHECK(res.out.find("seed 11") != std::string::npos);

  // command-line values win over the file
  RunResult over = run_cli(tmp, "preprocess -d " + tmp.str("root") + " -o " + tmp.str("c2.ds") +
                                    " --config " + tmp.str("prep.conf") + " --seed 12");
  CHECK(over.code == 0);
  CHECK(over.out.find("seed 12") != std::string::npos);

  // a missing config file is a usage error
  CHECK(run_cli(tmp, "preprocess -d " + tmp.str("root") + " -o " + tmp.str("c3.ds") +
                         " --config " + tmp.str("absent.conf"))
            .code == 3);
}
