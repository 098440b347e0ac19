#pragma once

#include <cstdint>
#include <deque>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "nnviterbi/class_prior.hpp"
#include "nnviterbi/dataset.hpp"
#include "nnviterbi/length_model.hpp"
#include "nnviterbi/network.hpp"

namespace nnviterbi {

// FIFO store of recently decoded sequences: the video's index in the dataset
// plus its inferred framewise labels. Capacity counts sequences; 0 means
// unlimited.
class ReplayBuffer {
 public:
  struct Entry {
    int video_index = 0;
    std::vector<int> labels;
  };

  explicit ReplayBuffer(std::size_t capacity = 0) : capacity_(capacity) {}

  void append(int video_index, std::vector<int> labels);
  std::size_t size() const { return entries_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::uint64_t total_frames() const { return total_frames_; }
  const Entry& entry(std::size_t i) const { return entries_[i]; }

  // (entry index, frame index) pairs drawn uniformly with replacement over
  // every (sequence, frame) pair currently stored. Empty buffer -> empty.
  std::vector<std::pair<int, int>> sample(std::size_t count,
                                          std::mt19937_64& gen) const;

 private:
  std::size_t capacity_;
  std::deque<Entry> entries_;
  std::uint64_t total_frames_ = 0;
};

struct TrainConfig {
  int iterations = 2000;
  double lr_initial = 0.01;       // two-phase schedule
  int lr_drop_iteration = 2500;
  double lr_dropped = 0.001;
  int sampling_ratio = 25;        // buffered frames per sequence frame (K)
  std::size_t buffer_capacity = 0;  // sequences; 0 = unlimited
  int minibatch_frames = 512;
  int max_len = 2000;
  int batch_size = 1;             // sequences per update
  int hidden_size = 32;
  double clip_threshold = 100.0;
  bool use_length_model = true;
  UnseenLengthInit length_init = UnseenLengthInit::kSegmentsOverFrames;
  std::uint64_t seed = 1;
  int checkpoint_period = 0;      // iterations between checkpoints; 0 = final only
};

struct TrainerState {
  NetParams params;
  ClassPrior prior;
  LengthModel lengths;
  ReplayBuffer buffer;
  std::uint64_t iteration = 0;
  std::mt19937_64 rng;

  TrainerState(int num_classes, std::size_t buffer_capacity)
      : prior(num_classes),
        lengths(num_classes),
        buffer(buffer_capacity) {}
};

TrainerState init_trainer_state(const Dataset& dataset,
                                const TrainConfig& config);

struct IterationStats {
  double loss = 0.0;
  double lr = 0.0;
  int frames = 0;
  int segments = 0;
  int skipped = 0;
};

// One update: decode every batch sequence with the pre-update model, then
// walk chunks of minibatch_frames doing one SGD step per chunk position
// (gradients averaged over the batch sequences that reach it, hidden states
// carried forward, gradients truncated at chunk boundaries), each chunk
// carrying sampling_ratio buffered frames per sequence frame; finally update
// prior, length model, and buffer from the decoded segmentations. Sequences
// whose transcript cannot tile their frames under max_len are skipped
// untouched.
IterationStats train_iteration(TrainerState& state, const Dataset& dataset,
                               std::span<const int> batch,
                               const TrainConfig& config);

// Advances `state` until it has run config.iterations updates, drawing train
// videos uniformly (or cycling `order` if non-empty), appending a CSV line
// per iteration to `log` when given, and checkpointing to `checkpoint_path`
// every checkpoint_period iterations plus at the end when the path is
// non-empty. Starting from a restored state resumes the exact trajectory.
void continue_training(TrainerState& state, const Dataset& dataset,
                       const TrainConfig& config,
                       std::span<const int> order = {},
                       std::ostream* log = nullptr,
                       const std::string& checkpoint_path = "");

// init_trainer_state + continue_training from iteration 0.
TrainerState train(const Dataset& dataset, const TrainConfig& config,
                   std::span<const int> order = {}, std::ostream* log = nullptr,
                   const std::string& checkpoint_path = "");

inline const char* kTrainLogHeader = "iteration,loss,lr,frames,segments,skipped";

}  // namespace nnviterbi
