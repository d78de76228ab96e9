// End-to-end tests of the sphclass binary: exit codes, pipeline consistency,
// config-file precedence, and byte-level reproducibility.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "sphclass/bench.hpp"

namespace fs = std::filesystem;

namespace {

const char* kCli = SPHCLASS_CLI_PATH;

int run_cli(const std::string& args, const std::string& out_file = "") {
  std::string cmd = std::string(kCli) + " " + args;
  if (!out_file.empty()) cmd += " > " + out_file + " 2>&1";
  else cmd += " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  REQUIRE(is.good());
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

bool same_bytes(const fs::path& a, const fs::path& b) { return slurp(a) == slurp(b); }

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& p) const { return (path / p).string(); }
};

const std::string kTinyNet =
    " --filters 4 --shells 3 --resolution 16 --degree 4 --hidden 32 --epochs 2 --batch 8";

}  // namespace

TEST_CASE("unknown flags and missing subcommands exit nonzero") {
  CHECK(run_cli("--definitely-not-a-flag") != 0);
  CHECK(run_cli("") != 0);
  CHECK(run_cli("train") != 0);              // missing required options
  CHECK(run_cli("eval --model nope.ckpt --data nowhere") != 0);
}

TEST_CASE("generate/train/eval/bench pipeline is self-consistent") {
  TempDir tmp("sphclass_cli_pipeline");
  const std::string data = tmp / "ds";

  REQUIRE(run_cli("generate --out " + data +
                  " --classes sphere,cube,torus --per-class 10 --points 256 --seed 7") == 0);
  REQUIRE(run_cli("train --data " + data + " --out " + (tmp / "m.ckpt") + " --history " +
                  (tmp / "h.csv") + kTinyNet + " --seed 7") == 0);

  const std::string eval_out = tmp / "eval.txt";
  REQUIRE(run_cli("eval --model " + (tmp / "m.ckpt") + " --data " + data + " --split test",
                  eval_out) == 0);
  const std::string eval_text = slurp(eval_out);
  const std::size_t pos = eval_text.find("accuracy ");
  REQUIRE(pos != std::string::npos);
  const double eval_acc = std::stod(eval_text.substr(pos + 9));

  REQUIRE(run_cli("bench --data " + data + " --model " + (tmp / "m.ckpt") +
                  " --suite sweep --axis outlier_fraction --levels 0,0.5 --trials 2" +
                  " --out-dir " + (tmp / "bench") + " --no-stamp --seed 7") == 0);
  const sphclass::ResultTable table =
      sphclass::parse_result_csv(tmp / "bench/sweep_outlier_fraction.csv");
  REQUIRE(table.rows.size() == 2);
  CHECK(table.rows[0].condition == "clean");
  CHECK(table.rows[0].mean == doctest::Approx(eval_acc).epsilon(1e-9));

  // History CSV has one row per epoch plus the header.
  std::ifstream hist(tmp / "h.csv");
  std::string line;
  int lines = 0;
  while (std::getline(hist, line)) ++lines;
  CHECK(lines == 3);
}

TEST_CASE("identical seeds produce byte-identical artifacts") {
  TempDir tmp("sphclass_cli_determinism");
  for (const std::string run : {"a", "b"}) {
    const std::string dir = tmp / run;
    fs::create_directories(dir);
    REQUIRE(run_cli("generate --out " + dir + "/ds --classes sphere,cube --per-class 6" +
                    " --points 128 --seed 11") == 0);
    REQUIRE(run_cli("train --data " + dir + "/ds --out " + dir + "/m.ckpt --history " + dir +
                    "/h.csv" + kTinyNet + " --seed 11 --threads " + (run == "a" ? "1" : "2")) ==
            0);
  }
  CHECK(same_bytes(tmp.path / "a/m.ckpt", tmp.path / "b/m.ckpt"));
  CHECK(same_bytes(tmp.path / "a/h.csv", tmp.path / "b/h.csv"));
  CHECK(same_bytes(tmp.path / "a/ds/manifest.json", tmp.path / "b/ds/manifest.json"));
  CHECK(same_bytes(tmp.path / "a/ds/sphere/train/cloud_00000.bin",
                   tmp.path / "b/ds/sphere/train/cloud_00000.bin"));
}

TEST_CASE("config file values apply and command-line flags win") {
  TempDir tmp("sphclass_cli_config");
  const std::string data = tmp / "ds";
  REQUIRE(run_cli("generate --out " + data +
                  " --classes sphere,cube --per-class 6 --points 128 --seed 3") == 0);

  {
    // Options of a subcommand live in a section named after it.
    std::ofstream cfg(tmp / "run.cfg");
    cfg << "[train]\n"
        << "epochs = 1\nfilters = 4\nshells = 3\nresolution = 16\ndegree = 4\nhidden = 32\n";
  }

  REQUIRE(run_cli("train --config " + (tmp / "run.cfg") + " --data " + data + " --out " +
                  (tmp / "m1.ckpt") + " --history " + (tmp / "h1.csv") + " --seed 3") == 0);
  {
    std::ifstream hist(tmp / "h1.csv");
    std::string line;
    int lines = 0;
    while (std::getline(hist, line)) ++lines;
    CHECK(lines == 2);  // header + 1 epoch from the config file
  }

  REQUIRE(run_cli("train --config " + (tmp / "run.cfg") + " --epochs 2 --data " + data +
                  " --out " + (tmp / "m2.ckpt") + " --history " + (tmp / "h2.csv") +
                  " --seed 3") == 0);
  {
    std::ifstream hist(tmp / "h2.csv");
    std::string line;
    int lines = 0;
    while (std::getline(hist, line)) ++lines;
    CHECK(lines == 3);  // the flag overrides the config file
  }
}

TEST_CASE("SPHCLASS_SEED is used when no seed is given") {
  TempDir tmp("sphclass_cli_env");
  const std::string out = tmp / "echo.txt";
  setenv("SPHCLASS_SEED", "123", 1);
  REQUIRE(run_cli("generate --out " + (tmp / "ds") +
                  " --classes sphere --per-class 5 --points 64", out) == 0);
  unsetenv("SPHCLASS_SEED");
  CHECK(slurp(out).find("# config: seed=123") != std::string::npos);

  setenv("SPHCLASS_SEED", "not_a_number", 1);
  CHECK(run_cli("generate --out " + (tmp / "ds2") + " --classes sphere --per-class 5" +
                " --points 64") != 0);
  unsetenv("SPHCLASS_SEED");
}
