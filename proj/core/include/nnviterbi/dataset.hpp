#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nnviterbi/grammar.hpp"
#include "nnviterbi/types.hpp"

namespace nnviterbi {

struct Video {
  std::string id;
  FrameSequence features;
  Transcript transcript;
  std::vector<int> ground_truth;  // empty when not annotated

  int frames() const { return static_cast<int>(features.rows()); }
  bool operator==(const Video& other) const;
};

// An immutable corpus: named classes, videos sorted by id, and train/test
// splits referencing videos by index in split-file order.
struct Dataset {
  std::vector<std::string> label_names;
  std::vector<Video> videos;
  std::vector<int> train_indices;
  std::vector<int> test_indices;
  std::optional<Grammar> grammar;

  int num_classes() const { return static_cast<int>(label_names.size()); }
  int feature_dim() const {
    return videos.empty() ? 0 : static_cast<int>(videos[0].features.cols());
  }
  int find_video(const std::string& id) const;
  int label_index(const std::string& name) const;
  bool operator==(const Dataset& other) const;
};

// Directory layout: labels.txt (one class name per line), train.txt and
// test.txt (video ids), features/<id>.feat (binary: magic FEAT1, u32 T, u32
// D, T*D little-endian f32 row major), transcripts/<id>.txt (one class name
// per line), optional groundtruth/<id>.txt (one class name per frame),
// optional grammar.txt.
Dataset load_dataset(const std::filesystem::path& root);
void save_dataset(const std::filesystem::path& root, const Dataset& dataset);

struct SynthConfig {
  int num_classes = 3;
  int feature_dim = 2;
  Eigen::MatrixXd class_means;        // num_classes x feature_dim
  double spread = 1.0;                // per-dimension Gaussian sigma
  std::vector<double> true_lambda;    // per-class Poisson length mean, >= 1
  std::vector<Transcript> transcripts;
  std::vector<double> transcript_weights;  // empty = uniform
  int num_train = 60;
  int num_test = 20;
  std::uint64_t seed = 1;
};

// Three well-separated 2-D clusters, lambda {8,12,20}, transcripts that mix
// pairwise class subsets so pure online training keeps revisiting stale
// classes; mean video length about 100 frames.
SynthConfig default_synth_config();

// Each video: a transcript drawn by weight, segment lengths from the class's
// Poisson conditioned on >= 1, frame features from the class cluster (values
// rounded to f32 so datasets survive save/load bit-exactly). Ground truth is
// recorded. Deterministic given config.seed.
Dataset generate_synthetic(const SynthConfig& config);

// E[length | length >= 1] = lambda / (1 - exp(-lambda)): the mean the
// generator actually realizes, for tolerance checks against empirical data.
double poisson_conditional_mean(double lambda);

}  // namespace nnviterbi
