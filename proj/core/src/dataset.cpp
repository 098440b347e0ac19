#include "nnviterbi/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "binary_io.hpp"
#include "nnviterbi/errors.hpp"
#include "nnviterbi/rng.hpp"
#include "nnviterbi/segmentation.hpp"

namespace nnviterbi {

namespace fs = std::filesystem;

namespace {

constexpr char kFeatureMagic[5] = {'F', 'E', 'A', 'T', '1'};

[[noreturn]] void fail(const fs::path& file, const std::string& what) {
  throw IoError(file.string() + ": " + what);
}

// Lines with trailing CR stripped; blank lines dropped.
std::vector<std::string> read_lines(const fs::path& file) {
  std::ifstream in(file);
  if (!in) fail(file, "cannot open");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

void write_lines(const fs::path& file, const std::vector<std::string>& lines) {
  std::ofstream out(file);
  if (!out) fail(file, "cannot open for writing");
  for (const std::string& line : lines) out << line << '\n';
  if (!out) fail(file, "write failed");
}

FrameSequence read_features(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) fail(file, "cannot open");
  char magic[5];
  if (!in.read(magic, 5) || !std::equal(magic, magic + 5, kFeatureMagic))
    fail(file, "bad magic, expected FEAT1");
  std::uint32_t rows = 0, cols = 0;
  if (!io::read_scalar(in, rows) || !io::read_scalar(in, cols))
    fail(file, "truncated header");
  if (rows == 0 || cols == 0) fail(file, "empty dimension");
  FrameSequence seq(rows, cols);
  for (std::uint32_t t = 0; t < rows; ++t) {
    for (std::uint32_t d = 0; d < cols; ++d) {
      float value = 0.0f;
      if (!io::read_scalar(in, value)) fail(file, "truncated data");
      seq(t, d) = value;
    }
  }
  if (in.get() != std::ifstream::traits_type::eof())
    fail(file, "trailing bytes after feature data");
  if (!seq.allFinite()) fail(file, "non-finite feature values");
  return seq;
}

void write_features(const fs::path& file, const FrameSequence& seq) {
  std::ofstream out(file, std::ios::binary);
  if (!out) fail(file, "cannot open for writing");
  out.write(kFeatureMagic, 5);
  io::write_scalar(out, static_cast<std::uint32_t>(seq.rows()));
  io::write_scalar(out, static_cast<std::uint32_t>(seq.cols()));
  for (Eigen::Index t = 0; t < seq.rows(); ++t)
    for (Eigen::Index d = 0; d < seq.cols(); ++d)
      io::write_scalar(out, static_cast<float>(seq(t, d)));
  if (!out) fail(file, "write failed");
}

std::vector<int> read_label_lines(
    const fs::path& file,
    const std::unordered_map<std::string, int>& label_index) {
  std::vector<int> labels;
  for (const std::string& name : read_lines(file)) {
    const auto it = label_index.find(name);
    if (it == label_index.end()) fail(file, "unknown class name '" + name + "'");
    labels.push_back(it->second);
  }
  return labels;
}

std::vector<int> split_indices(const fs::path& file, const Dataset& ds) {
  std::vector<int> indices;
  for (const std::string& id : read_lines(file)) {
    const int index = ds.find_video(id);
    if (index < 0) fail(file, "video id '" + id + "' has no loaded video");
    indices.push_back(index);
  }
  return indices;
}

void check_video(const fs::path& root, const Video& video) {
  if (video.transcript.empty())
    fail(root / "transcripts" / (video.id + ".txt"), "empty transcript");
  if (video.ground_truth.empty()) return;
  const fs::path file = root / "groundtruth" / (video.id + ".txt");
  if (static_cast<int>(video.ground_truth.size()) != video.frames())
    fail(file, "ground truth has " +
                   std::to_string(video.ground_truth.size()) +
                   " lines for " + std::to_string(video.frames()) + " frames");
  const Segmentation contracted = contract_framewise(video.ground_truth);
  if (contracted.labels != video.transcript)
    fail(file, "ground truth does not contract to the transcript");
}

}  // namespace

bool Video::operator==(const Video& other) const {
  return id == other.id && features.rows() == other.features.rows() &&
         features.cols() == other.features.cols() &&
         (features.array() == other.features.array()).all() &&
         transcript == other.transcript && ground_truth == other.ground_truth;
}

int Dataset::find_video(const std::string& id) const {
  const auto it = std::partition_point(
      videos.begin(), videos.end(),
      [&](const Video& v) { return v.id < id; });
  if (it == videos.end() || it->id != id) return -1;
  return static_cast<int>(it - videos.begin());
}

int Dataset::label_index(const std::string& name) const {
  const auto it = std::find(label_names.begin(), label_names.end(), name);
  return it == label_names.end() ? -1
                                 : static_cast<int>(it - label_names.begin());
}

bool Dataset::operator==(const Dataset& other) const {
  return label_names == other.label_names && videos == other.videos &&
         train_indices == other.train_indices &&
         test_indices == other.test_indices && grammar == other.grammar;
}

Dataset load_dataset(const fs::path& root) {
  Dataset ds;
  ds.label_names = read_lines(root / "labels.txt");
  if (ds.label_names.empty()) fail(root / "labels.txt", "no classes");
  std::unordered_map<std::string, int> label_index;
  for (std::size_t i = 0; i < ds.label_names.size(); ++i)
    if (!label_index.emplace(ds.label_names[i], static_cast<int>(i)).second)
      fail(root / "labels.txt",
           "duplicate class name '" + ds.label_names[i] + "'");

  std::vector<std::string> ids;
  for (const fs::path split : {root / "train.txt", root / "test.txt"})
    for (const std::string& id : read_lines(split)) ids.push_back(id);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  if (ids.empty()) fail(root / "train.txt", "no videos listed");

  for (const std::string& id : ids) {
    Video video;
    video.id = id;
    video.features = read_features(root / "features" / (id + ".feat"));
    video.transcript =
        read_label_lines(root / "transcripts" / (id + ".txt"), label_index);
    const fs::path gt = root / "groundtruth" / (id + ".txt");
    if (fs::exists(gt)) video.ground_truth = read_label_lines(gt, label_index);
    if (!ds.videos.empty() &&
        video.features.cols() != ds.videos[0].features.cols())
      fail(root / "features" / (id + ".feat"),
           "feature dim " + std::to_string(video.features.cols()) +
               " differs from " +
               std::to_string(ds.videos[0].features.cols()));
    check_video(root, video);
    ds.videos.push_back(std::move(video));
  }

  ds.train_indices = split_indices(root / "train.txt", ds);
  ds.test_indices = split_indices(root / "test.txt", ds);

  const fs::path grammar_file = root / "grammar.txt";
  if (fs::exists(grammar_file)) {
    std::ifstream in(grammar_file);
    if (!in) fail(grammar_file, "cannot open");
    try {
      ds.grammar = Grammar::parse(in, ds.label_names);
    } catch (const ParseError& e) {
      fail(grammar_file, e.what());
    }
  }
  return ds;
}

void save_dataset(const fs::path& root, const Dataset& dataset) {
  fs::create_directories(root / "features");
  fs::create_directories(root / "transcripts");
  std::vector<std::string> names;

  write_lines(root / "labels.txt", dataset.label_names);
  for (const std::vector<int>* split :
       {&dataset.train_indices, &dataset.test_indices}) {
    names.clear();
    for (int index : *split) names.push_back(dataset.videos[index].id);
    write_lines(split == &dataset.train_indices ? root / "train.txt"
                                                : root / "test.txt",
                names);
  }

  for (const Video& video : dataset.videos) {
    write_features(root / "features" / (video.id + ".feat"), video.features);
    names.clear();
    for (int label : video.transcript)
      names.push_back(dataset.label_names[label]);
    write_lines(root / "transcripts" / (video.id + ".txt"), names);
    if (!video.ground_truth.empty()) {
      fs::create_directories(root / "groundtruth");
      names.clear();
      for (int label : video.ground_truth)
        names.push_back(dataset.label_names[label]);
      write_lines(root / "groundtruth" / (video.id + ".txt"), names);
    }
  }

  if (dataset.grammar) {
    std::ofstream out(root / "grammar.txt");
    if (!out) fail(root / "grammar.txt", "cannot open for writing");
    dataset.grammar->serialize(out, dataset.label_names);
    if (!out) fail(root / "grammar.txt", "write failed");
  }
}

SynthConfig default_synth_config() {
  SynthConfig config;
  config.class_means.resize(3, 2);
  const double radius = 4.0;
  for (int c = 0; c < 3; ++c) {
    const double angle = 2.0 * M_PI * c / 3.0;
    config.class_means(c, 0) = radius * std::cos(angle);
    config.class_means(c, 1) = radius * std::sin(angle);
  }
  config.true_lambda = {8.0, 12.0, 20.0};
  config.transcripts = {
      {0, 1, 0, 1, 0, 1, 0, 1, 0, 1},
      {1, 2, 1, 2, 1, 2},
      {0, 2, 0, 2, 0, 2, 0, 2},
      {2, 1, 0, 2, 1, 0},
  };
  return config;
}

double poisson_conditional_mean(double lambda) {
  return lambda / (1.0 - std::exp(-lambda));
}

Dataset generate_synthetic(const SynthConfig& config) {
  if (config.num_classes < 1 || config.feature_dim < 1)
    throw std::invalid_argument("num_classes and feature_dim must be >= 1");
  if (config.class_means.rows() != config.num_classes ||
      config.class_means.cols() != config.feature_dim)
    throw std::invalid_argument("class_means must be num_classes x feature_dim");
  if (static_cast<int>(config.true_lambda.size()) != config.num_classes)
    throw std::invalid_argument("true_lambda must have one entry per class");
  for (double lam : config.true_lambda)
    if (!(lam >= 1.0)) throw std::invalid_argument("true lambda must be >= 1");
  if (config.transcripts.empty())
    throw std::invalid_argument("at least one transcript required");
  for (const Transcript& t : config.transcripts) {
    if (t.empty()) throw std::invalid_argument("empty transcript");
    for (int label : t)
      if (label < 0 || label >= config.num_classes)
        throw std::invalid_argument("transcript label out of range");
  }
  std::vector<double> weights = config.transcript_weights;
  if (weights.empty()) weights.assign(config.transcripts.size(), 1.0);
  if (weights.size() != config.transcripts.size())
    throw std::invalid_argument("one weight per transcript required");
  double total_weight = 0.0;
  for (double w : weights) {
    if (!(w > 0.0)) throw std::invalid_argument("weights must be positive");
    total_weight += w;
  }
  if (config.num_train < 0 || config.num_test < 0 ||
      config.num_train + config.num_test < 1)
    throw std::invalid_argument("need at least one video");

  std::mt19937_64 gen(config.seed);
  const auto draw_transcript = [&]() -> const Transcript& {
    double u = rng::uniform_unit(gen) * total_weight;
    for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
      u -= weights[i];
      if (u < 0.0) return config.transcripts[i];
    }
    return config.transcripts.back();
  };

  Dataset ds;
  for (int c = 0; c < config.num_classes; ++c)
    ds.label_names.push_back("c" + std::to_string(c));

  const auto make_video = [&](const std::string& id) {
    Video video;
    video.id = id;
    video.transcript = draw_transcript();
    std::vector<int> lengths;
    int frames = 0;
    for (int label : video.transcript) {
      int len = 0;
      while (len < 1)
        len = static_cast<int>(rng::poisson(gen, config.true_lambda[label]));
      lengths.push_back(len);
      frames += len;
    }
    video.features.resize(frames, config.feature_dim);
    video.ground_truth.reserve(frames);
    int t = 0;
    for (std::size_t n = 0; n < video.transcript.size(); ++n) {
      const int label = video.transcript[n];
      for (int i = 0; i < lengths[n]; ++i, ++t) {
        video.ground_truth.push_back(label);
        for (int d = 0; d < config.feature_dim; ++d)
          video.features(t, d) = static_cast<float>(
              config.class_means(label, d) + config.spread * rng::normal(gen));
      }
    }
    return video;
  };

  std::vector<std::string> train_ids, test_ids;
  char id[32];
  for (int i = 0; i < config.num_train; ++i) {
    std::snprintf(id, sizeof id, "train%04d", i);
    train_ids.emplace_back(id);
    ds.videos.push_back(make_video(train_ids.back()));
  }
  for (int i = 0; i < config.num_test; ++i) {
    std::snprintf(id, sizeof id, "test%04d", i);
    test_ids.emplace_back(id);
    ds.videos.push_back(make_video(test_ids.back()));
  }
  std::sort(ds.videos.begin(), ds.videos.end(),
            [](const Video& a, const Video& b) { return a.id < b.id; });
  for (const std::string& vid : train_ids)
    ds.train_indices.push_back(ds.find_video(vid));
  for (const std::string& vid : test_ids)
    ds.test_indices.push_back(ds.find_video(vid));
  return ds;
}

}  // namespace nnviterbi
