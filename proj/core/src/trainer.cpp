#include "nnviterbi/trainer.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <utility>

#include "nnviterbi/checkpoint.hpp"
#include "nnviterbi/grammar.hpp"
#include "nnviterbi/rng.hpp"
#include "nnviterbi/segmentation.hpp"
#include "nnviterbi/viterbi.hpp"

namespace nnviterbi {

void ReplayBuffer::append(int video_index, std::vector<int> labels) {
  total_frames_ += labels.size();
  entries_.push_back(Entry{video_index, std::move(labels)});
  while (capacity_ > 0 && entries_.size() > capacity_) {
    total_frames_ -= entries_.front().labels.size();
    entries_.pop_front();
  }
}

std::vector<std::pair<int, int>> ReplayBuffer::sample(
    std::size_t count, std::mt19937_64& gen) const {
  std::vector<std::pair<int, int>> out;
  if (entries_.empty()) return out;
  // Cumulative frame counts so a uniform draw over pooled frames maps to a
  // uniform draw over (sequence, frame) pairs.
  std::vector<std::uint64_t> cum(entries_.size() + 1, 0);
  for (std::size_t i = 0; i < entries_.size(); ++i)
    cum[i + 1] = cum[i] + entries_[i].labels.size();
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const std::uint64_t pick = rng::uniform_index(gen, cum.back());
    const std::size_t entry =
        std::upper_bound(cum.begin(), cum.end(), pick) - cum.begin() - 1;
    out.emplace_back(static_cast<int>(entry),
                     static_cast<int>(pick - cum[entry]));
  }
  return out;
}

namespace {

void check_config(const TrainConfig& config) {
  if (config.iterations < 1)
    throw std::invalid_argument("iterations must be >= 1");
  if (config.sampling_ratio < 0)
    throw std::invalid_argument("sampling_ratio must be >= 0");
  if (config.minibatch_frames < 1)
    throw std::invalid_argument("minibatch_frames must be >= 1");
  if (config.batch_size < 1)
    throw std::invalid_argument("batch_size must be >= 1");
  if (config.max_len < 1) throw std::invalid_argument("max_len must be >= 1");
  if (config.hidden_size < 1)
    throw std::invalid_argument("hidden_size must be >= 1");
  if (!(config.lr_initial > 0.0) || !(config.lr_dropped > 0.0))
    throw std::invalid_argument("learning rates must be > 0");
}

double schedule_lr(const TrainConfig& config, std::uint64_t iteration) {
  return iteration < static_cast<std::uint64_t>(config.lr_drop_iteration)
             ? config.lr_initial
             : config.lr_dropped;
}

}  // namespace

TrainerState init_trainer_state(const Dataset& dataset,
                                const TrainConfig& config) {
  check_config(config);
  if (dataset.videos.empty()) throw std::invalid_argument("empty dataset");
  TrainerState state(dataset.num_classes(), config.buffer_capacity);
  std::uint64_t stream = config.seed;
  state.params = init_params(rng::split_seed(stream), dataset.feature_dim(),
                             config.hidden_size, dataset.num_classes());
  state.rng.seed(rng::split_seed(stream));
  return state;
}

IterationStats train_iteration(TrainerState& state, const Dataset& dataset,
                               std::span<const int> batch,
                               const TrainConfig& config) {
  check_config(config);
  if (batch.empty()) throw std::invalid_argument("empty batch");
  IterationStats stats;
  stats.lr = schedule_lr(config, state.iteration);
  const DecodeOptions options{config.max_len, config.use_length_model};

  // Decode every sequence with the pre-update model before any SGD step.
  struct Job {
    const Video* video = nullptr;
    int video_index = 0;
    Segmentation seg;
    std::vector<int> labels;
    Eigen::RowVectorXd hidden;
  };
  std::vector<Job> jobs;
  for (int index : batch) {
    if (index < 0 || index >= static_cast<int>(dataset.videos.size()))
      throw std::invalid_argument("batch index out of range");
    const Video& video = dataset.videos[index];
    const auto segments = static_cast<std::int64_t>(video.transcript.size());
    const std::int64_t frames = video.frames();
    if (segments < 1 || segments > frames ||
        segments * config.max_len < frames) {
      ++stats.skipped;  // transcript cannot tile the frames
      continue;
    }
    state.lengths.init_unseen(video.transcript, video.frames(),
                              config.length_init);
    const ScoreMatrix scores =
        hybrid_scores(log_posteriors(state.params, video.features),
                      state.prior);
    const Grammar chain = Grammar::chain_from_transcript(
        video.transcript, dataset.num_classes());
    Job job;
    job.video = &video;
    job.video_index = index;
    job.seg = viterbi_decode(scores, chain, state.lengths, options);
    job.labels = expand_framewise(job.seg);
    job.hidden = Eigen::RowVectorXd::Zero(config.hidden_size);
    stats.frames += video.frames();
    stats.segments += job.seg.num_segments();
    jobs.push_back(std::move(job));
  }

  if (!jobs.empty()) {
    int max_chunks = 0;
    for (const Job& job : jobs)
      max_chunks = std::max(
          max_chunks, (job.video->frames() + config.minibatch_frames - 1) /
                          config.minibatch_frames);

    for (int chunk = 0; chunk < max_chunks; ++chunk) {
      const int begin = chunk * config.minibatch_frames;
      NetParams grad = zeros_like(state.params);
      int present = 0;
      for (Job& job : jobs) {
        const int frames = job.video->frames();
        if (begin >= frames) continue;
        const int len = std::min(config.minibatch_frames, frames - begin);
        const std::span<const int> labels(job.labels.data() + begin, len);

        const auto picks = state.buffer.sample(
            static_cast<std::size_t>(config.sampling_ratio) * len, state.rng);
        FrameSequence extra(picks.size(), dataset.feature_dim());
        std::vector<int> extra_labels(picks.size());
        for (std::size_t k = 0; k < picks.size(); ++k) {
          const ReplayBuffer::Entry& entry = state.buffer.entry(picks[k].first);
          extra.row(k) =
              dataset.videos[entry.video_index].features.row(picks[k].second);
          extra_labels[k] = entry.labels[picks[k].second];
        }

        LossGrad lg = loss_and_gradient(
            state.params, job.video->features.middleRows(begin, len), labels,
            extra, extra_labels, job.hidden);
        job.hidden = std::move(lg.final_hidden);
        for (auto member : NetParams::kTensors)
          grad.*member += lg.grad.*member;
        stats.loss += lg.loss;
        ++present;
      }
      if (present > 1)
        for (auto member : NetParams::kTensors)
          grad.*member /= present;
      sgd_step(state.params, grad, stats.lr, config.clip_threshold);
    }

    for (Job& job : jobs) {
      state.prior.observe(job.labels);
      state.lengths.observe(job.seg);
      state.buffer.append(job.video_index, std::move(job.labels));
    }
  }
  ++state.iteration;
  return stats;
}

void continue_training(TrainerState& state, const Dataset& dataset,
                       const TrainConfig& config, std::span<const int> order,
                       std::ostream* log, const std::string& checkpoint_path) {
  check_config(config);
  if (order.empty() && dataset.train_indices.empty())
    throw std::invalid_argument("no train split and no explicit order");
  for (int index : order)
    if (index < 0 || index >= static_cast<int>(dataset.videos.size()))
      throw std::invalid_argument("order index out of range");

  std::vector<int> batch(config.batch_size);
  while (state.iteration < static_cast<std::uint64_t>(config.iterations)) {
    for (int b = 0; b < config.batch_size; ++b) {
      if (order.empty()) {
        batch[b] = dataset.train_indices[rng::uniform_index(
            state.rng, dataset.train_indices.size())];
      } else {
        batch[b] = order[(state.iteration * config.batch_size + b) %
                         order.size()];
      }
    }
    const IterationStats stats =
        train_iteration(state, dataset, batch, config);
    if (log) {
      char line[160];
      std::snprintf(line, sizeof line, "%llu,%.9g,%g,%d,%d,%d\n",
                    static_cast<unsigned long long>(state.iteration),
                    stats.loss, stats.lr, stats.frames, stats.segments,
                    stats.skipped);
      *log << line;
    }
    if (!checkpoint_path.empty() && config.checkpoint_period > 0 &&
        state.iteration %
                static_cast<std::uint64_t>(config.checkpoint_period) ==
            0)
      save_checkpoint(state, checkpoint_path);
  }
  if (!checkpoint_path.empty()) save_checkpoint(state, checkpoint_path);
}

TrainerState train(const Dataset& dataset, const TrainConfig& config,
                   std::span<const int> order, std::ostream* log,
                   const std::string& checkpoint_path) {
  TrainerState state = init_trainer_state(dataset, config);
  continue_training(state, dataset, config, order, log, checkpoint_path);
  return state;
}

}  // namespace nnviterbi
