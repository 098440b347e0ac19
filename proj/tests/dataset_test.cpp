#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "nnviterbi/dataset.hpp"

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <vector>

#include "nnviterbi/errors.hpp"
#include "nnviterbi/segmentation.hpp"

using namespace nnviterbi;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() /
           ("nnviterbi_test_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

SynthConfig small_config(std::uint64_t seed) {
  SynthConfig config = default_synth_config();
  config.num_train = 6;
  config.num_test = 3;
  config.seed = seed;
  return config;
}

Dataset minimal_dataset() {
  Dataset ds;
  ds.label_names = {"walk", "run"};
  Video v;
  v.id = "clip0";
  v.features.resize(2, 3);
  v.features << 0.25, -1.5, 2.0, 0.0, 4.75, -0.125;
  v.transcript = {0};
  v.ground_truth = {0, 0};
  ds.videos.push_back(v);
  ds.train_indices = {0};
  ds.test_indices = {};
  return ds;
}

}  // namespace

TEST_CASE("minimal dataset round-trips through save and load") {
  TempDir dir("minimal");
  const Dataset ds = minimal_dataset();
  save_dataset(dir.path, ds);
  const Dataset loaded = load_dataset(dir.path);
  CHECK(loaded == ds);
  CHECK(loaded.num_classes() == 2);
  CHECK(loaded.feature_dim() == 3);
  CHECK(loaded.find_video("clip0") == 0);
  CHECK(loaded.find_video("absent") == -1);
  CHECK(loaded.label_index("run") == 1);
  CHECK(loaded.label_index("fly") == -1);
}

TEST_CASE("generated dataset round-trips field by field") {
  TempDir dir("roundtrip");
  Dataset ds = generate_synthetic(small_config(5));
  std::vector<Transcript> train_transcripts;
  for (int i : ds.train_indices)
    train_transcripts.push_back(ds.videos[i].transcript);
  ds.grammar = Grammar::estimate(train_transcripts, ds.num_classes());
  save_dataset(dir.path, ds);
  const Dataset loaded = load_dataset(dir.path);
  CHECK(loaded == ds);
}

TEST_CASE("generation is deterministic in the seed") {
  const Dataset a = generate_synthetic(small_config(17));
  const Dataset b = generate_synthetic(small_config(17));
  const Dataset c = generate_synthetic(small_config(18));
  CHECK(a == b);
  CHECK(!(a == c));
}

TEST_CASE("ground truth contracts to the drawn transcript") {
  const Dataset ds = generate_synthetic(small_config(23));
  CHECK(ds.videos.size() == 9);
  for (const Video& video : ds.videos) {
    REQUIRE(static_cast<int>(video.ground_truth.size()) == video.frames());
    CHECK(contract_framewise(video.ground_truth).labels == video.transcript);
  }
}

TEST_CASE("empirical segment lengths match the conditioned Poisson mean") {
  SynthConfig config = default_synth_config();
  config.num_train = 700;  // ~7000 segments per class pair
  config.num_test = 0;
  config.seed = 31;
  const Dataset ds = generate_synthetic(config);

  std::vector<double> sum(3, 0.0);
  std::vector<int> count(3, 0);
  for (const Video& video : ds.videos) {
    const Segmentation seg = contract_framewise(video.ground_truth);
    for (int n = 0; n < seg.num_segments(); ++n) {
      sum[seg.labels[n]] += seg.lengths[n];
      count[seg.labels[n]] += 1;
    }
  }
  for (int c = 0; c < 3; ++c) {
    CAPTURE(c);
    REQUIRE(count[c] >= 1000);
    const double mean = sum[c] / count[c];
    const double expected = poisson_conditional_mean(config.true_lambda[c]);
    CHECK(std::abs(mean - expected) / expected < 0.05);
  }
}

TEST_CASE("conditioned mean formula is visibly above small lambdas") {
  CHECK(poisson_conditional_mean(1.5) ==
        doctest::Approx(1.5 / (1.0 - std::exp(-1.5))));
  CHECK(poisson_conditional_mean(1.5) > 1.5);
  CHECK(poisson_conditional_mean(20.0) == doctest::Approx(20.0).epsilon(1e-6));
}

TEST_CASE("well-separated clusters are trivially classifiable") {
  // Guards the acceptance experiments: if a nearest-class-mean rule fails
  // here, learning experiments would measure feature difficulty instead of
  // the weak-supervision machinery.
  SynthConfig config = default_synth_config();
  config.num_train = 30;
  config.num_test = 10;
  config.seed = 41;
  const Dataset ds = generate_synthetic(config);

  Eigen::MatrixXd means = Eigen::MatrixXd::Zero(3, ds.feature_dim());
  std::vector<int> counts(3, 0);
  for (int i : ds.train_indices) {
    const Video& video = ds.videos[i];
    for (int t = 0; t < video.frames(); ++t) {
      means.row(video.ground_truth[t]) += video.features.row(t);
      counts[video.ground_truth[t]] += 1;
    }
  }
  for (int c = 0; c < 3; ++c) means.row(c) /= counts[c];

  int hits = 0, total = 0;
  for (int i : ds.test_indices) {
    const Video& video = ds.videos[i];
    for (int t = 0; t < video.frames(); ++t, ++total) {
      int best = 0;
      double best_dist = (video.features.row(t) - means.row(0)).squaredNorm();
      for (int c = 1; c < 3; ++c) {
        const double dist =
            (video.features.row(t) - means.row(c)).squaredNorm();
        if (dist < best_dist) {
          best_dist = dist;
          best = c;
        }
      }
      hits += best == video.ground_truth[t];
    }
  }
  CHECK(static_cast<double>(hits) / total >= 0.99);
}

TEST_CASE("load errors name the offending file") {
  TempDir dir("errors");
  const SynthConfig config = small_config(47);

  SUBCASE("missing feature file") {
    save_dataset(dir.path, generate_synthetic(config));
    fs::remove(dir.path / "features" / "train0002.feat");
    CHECK_THROWS_WITH_AS(load_dataset(dir.path),
                         doctest::Contains("train0002.feat"), IoError);
  }
  SUBCASE("unknown class name in a transcript") {
    save_dataset(dir.path, generate_synthetic(config));
    std::ofstream(dir.path / "transcripts" / "test0001.txt", std::ios::app)
        << "mystery\n";
    CHECK_THROWS_WITH_AS(load_dataset(dir.path),
                         doctest::Contains("mystery"), IoError);
  }
  SUBCASE("ground truth length mismatch") {
    save_dataset(dir.path, generate_synthetic(config));
    std::ofstream(dir.path / "groundtruth" / "train0000.txt", std::ios::app)
        << "c0\n";
    CHECK_THROWS_WITH_AS(load_dataset(dir.path),
                         doctest::Contains("train0000.txt"), IoError);
  }
  SUBCASE("feature dim mismatch across videos") {
    Dataset ds = minimal_dataset();
    Video second = ds.videos[0];
    second.id = "clip1";
    second.features.resize(2, 4);
    second.features.setZero();
    ds.videos.push_back(second);
    ds.train_indices = {0, 1};
    save_dataset(dir.path, ds);
    CHECK_THROWS_WITH_AS(load_dataset(dir.path),
                         doctest::Contains("clip1.feat"), IoError);
  }
  SUBCASE("corrupt feature magic") {
    save_dataset(dir.path, minimal_dataset());
    std::ofstream(dir.path / "features" / "clip0.feat", std::ios::binary)
        << "NOPE!";
    CHECK_THROWS_WITH_AS(load_dataset(dir.path), doctest::Contains("magic"),
                         IoError);
  }
}

TEST_CASE("generator validates its configuration") {
  SynthConfig config = default_synth_config();
  SUBCASE("lambda below one") {
    config.true_lambda[1] = 0.5;
    CHECK_THROWS_AS(generate_synthetic(config), std::invalid_argument);
  }
  SUBCASE("empty transcript") {
    config.transcripts.push_back({});
    CHECK_THROWS_AS(generate_synthetic(config), std::invalid_argument);
  }
  SUBCASE("transcript label out of range") {
    config.transcripts.push_back({0, 3});
    CHECK_THROWS_AS(generate_synthetic(config), std::invalid_argument);
  }
  SUBCASE("weight count mismatch") {
    config.transcript_weights = {1.0};
    CHECK_THROWS_AS(generate_synthetic(config), std::invalid_argument);
  }
  SUBCASE("no videos") {
    config.num_train = 0;
    config.num_test = 0;
    CHECK_THROWS_AS(generate_synthetic(config), std::invalid_argument);
  }
  SUBCASE("means shape mismatch") {
    config.class_means.resize(2, 2);
    CHECK_THROWS_AS(generate_synthetic(config), std::invalid_argument);
  }
}
