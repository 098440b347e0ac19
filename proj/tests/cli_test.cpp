#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "nnviterbi/dataset.hpp"
#include "nnviterbi/segmentation.hpp"

using namespace nnviterbi;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("nnviterbi_cli_test_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

// Exit status of the CLI run from inside `dir`, output silenced.
int run_cli(const fs::path& dir, const std::string& args) {
  const std::string cmd = "cd \"" + dir.string() + "\" && \"" +
                          NNVITERBI_CLI_PATH + "\" " + args +
                          " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  REQUIRE(out.good());
}

// Small synthetic dataset + short training run under root; returns 0 on
// full success.
int make_pipeline(const fs::path& root, int iterations = 15) {
  fs::create_directories(root);
  write_file(root / "synth.cfg", "num_train = 10\nnum_test = 5\n");
  if (const int c = run_cli(root, "synth --config synth.cfg --out data --seed 7"))
    return c;
  return run_cli(root, "train --dataset data --out run --seed 7 --iterations " +
                           std::to_string(iterations) + " --sampling-ratio 2");
}

}  // namespace

TEST_CASE("synth train eval pipeline succeeds and is reproducible") {
  TempDir tmp;
  const fs::path a = tmp.path / "a";
  const fs::path b = tmp.path / "b";
  REQUIRE(make_pipeline(a) == 0);
  REQUIRE(make_pipeline(b) == 0);
  CHECK(run_cli(a, "eval --dataset data --checkpoint run/model.ckpt "
                   "--out evalout --jobs 3") == 0);
  CHECK(run_cli(b, "eval --dataset data --checkpoint run/model.ckpt "
                   "--out evalout --jobs 3") == 0);

  for (const char* file : {"data/labels.txt", "run/model.ckpt",
                           "run/train_log.csv", "run/run.json",
                           "evalout/report.csv", "evalout/run.json"}) {
    CAPTURE(file);
    REQUIRE(fs::exists(a / file));
    CHECK(file_bytes(a / file) == file_bytes(b / file));
  }

  // The report has one line per test video plus header and pooled row.
  std::istringstream report(file_bytes(a / "evalout/report.csv"));
  std::string line;
  int lines = 0;
  while (std::getline(report, line)) ++lines;
  CHECK(lines == 1 + 5 + 1);
}

TEST_CASE("align outputs contract to the transcripts") {
  TempDir tmp;
  REQUIRE(make_pipeline(tmp.path) == 0);
  REQUIRE(run_cli(tmp.path, "align --dataset data --checkpoint run/model.ckpt "
                            "--out alignout") == 0);

  const Dataset ds = load_dataset(tmp.path / "data");
  REQUIRE(!ds.test_indices.empty());
  for (int index : ds.test_indices) {
    const Video& video = ds.videos[index];
    std::ifstream in(tmp.path / "alignout" / (video.id + ".txt"));
    REQUIRE(in.good());
    std::vector<int> labels;
    std::string name;
    while (std::getline(in, name)) labels.push_back(ds.label_index(name));
    CHECK(static_cast<int>(labels.size()) == video.frames());
    CHECK(contract_framewise(labels).labels == video.transcript);
  }
}

TEST_CASE("segment outputs one class name per frame") {
  TempDir tmp;
  REQUIRE(make_pipeline(tmp.path) == 0);
  REQUIRE(run_cli(tmp.path, "segment --dataset data --checkpoint "
                            "run/model.ckpt --out segout") == 0);
  const Dataset ds = load_dataset(tmp.path / "data");
  for (int index : ds.test_indices) {
    const Video& video = ds.videos[index];
    std::ifstream in(tmp.path / "segout" / (video.id + ".txt"));
    REQUIRE(in.good());
    int frames = 0;
    std::string name;
    while (std::getline(in, name)) {
      CHECK(ds.label_index(name) >= 0);
      ++frames;
    }
    CHECK(frames == video.frames());
  }
}

TEST_CASE("eval without ground truth exits with a diagnostic") {
  TempDir tmp;
  REQUIRE(make_pipeline(tmp.path) == 0);
  fs::remove_all(tmp.path / "data/groundtruth");
  CHECK(run_cli(tmp.path, "eval --dataset data --checkpoint run/model.ckpt "
                          "--out evalout") == 1);
}

TEST_CASE("grammar estimate covers the training transcripts") {
  TempDir tmp;
  REQUIRE(make_pipeline(tmp.path, 1) == 0);
  REQUIRE(run_cli(tmp.path, "grammar-estimate --dataset data --out gram") == 0);
  CHECK(fs::exists(tmp.path / "gram/grammar.txt"));
  CHECK(fs::exists(tmp.path / "gram/run.json"));
  CHECK(file_bytes(tmp.path / "gram/grammar.txt").find("start") !=
        std::string::npos);
}

TEST_CASE("bad invocations exit 2 and runtime failures exit 1") {
  TempDir tmp;
  CHECK(run_cli(tmp.path, "") == 2);                    // missing subcommand
  CHECK(run_cli(tmp.path, "segment --bogus x") == 2);   // unknown flag
  CHECK(run_cli(tmp.path, "synth") == 2);               // missing --out
  CHECK(run_cli(tmp.path, "--help") == 0);

  write_file(tmp.path / "typo.cfg", "iteratoins = 5\n");
  CHECK(run_cli(tmp.path, "synth --config typo.cfg --out data") == 1);
  write_file(tmp.path / "noval.cfg", "iterations\n");
  CHECK(run_cli(tmp.path, "synth --config noval.cfg --out data") == 1);
  CHECK(run_cli(tmp.path, "train --dataset missing --out run") == 1);
  CHECK(run_cli(tmp.path, "eval --dataset missing --checkpoint nope "
                          "--out evalout") == 1);
}

TEST_CASE("flags override config file values") {
  TempDir tmp;
  fs::create_directories(tmp.path);
  write_file(tmp.path / "synth.cfg", "num_train = 6\nnum_test = 2\n");
  REQUIRE(run_cli(tmp.path, "synth --config synth.cfg --out data --seed 3") ==
          0);
  write_file(tmp.path / "train.cfg",
             "dataset = data\nout = run\niterations = 9\nseed = 3\n"
             "sampling_ratio = 1\nhidden_size = 8\n");
  REQUIRE(run_cli(tmp.path, "train --config train.cfg --iterations 4") == 0);

  const std::string record = file_bytes(tmp.path / "run/run.json");
  CHECK(record.find("\"iterations\": 4") != std::string::npos);
  CHECK(record.find("\"hidden_size\": 8") != std::string::npos);

  std::istringstream log(file_bytes(tmp.path / "run/train_log.csv"));
  std::string line;
  int lines = 0;
  while (std::getline(log, line)) ++lines;
  CHECK(lines == 1 + 4);  // header + one line per iteration
}
