#include "nnviterbi/evaluate.hpp"

#include <atomic>
#include <cstdio>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "nnviterbi/metrics.hpp"

namespace nnviterbi {

Segmentation segment_sequence(const NetParams& params, const ClassPrior& prior,
                              const LengthModel& lengths,
                              const FrameSequence& frames,
                              const Grammar& grammar,
                              const DecodeOptions& options) {
  const ScoreMatrix scores = hybrid_scores(log_posteriors(params, frames), prior);
  return viterbi_decode(scores, grammar, lengths, options);
}

Segmentation align_sequence(const NetParams& params, const ClassPrior& prior,
                            const LengthModel& lengths,
                            const FrameSequence& frames,
                            const Transcript& transcript,
                            const DecodeOptions& options) {
  const Grammar chain =
      Grammar::chain_from_transcript(transcript, params.num_classes());
  return segment_sequence(params, prior, lengths, frames, chain, options);
}

namespace {

VideoEval evaluate_video(const NetParams& params, const ClassPrior& prior,
                         const LengthModel& lengths, const Video& video,
                         EvalTask task, const Grammar& grammar,
                         const DecodeOptions& options) {
  if (video.ground_truth.empty())
    throw std::invalid_argument("video '" + video.id +
                                "' has no ground truth to evaluate against");
  const Segmentation pred =
      task == EvalTask::kSegment
          ? segment_sequence(params, prior, lengths, video.features, grammar,
                             options)
          : align_sequence(params, prior, lengths, video.features,
                           video.transcript, options);
  const std::vector<int> pred_frames = expand_framewise(pred);
  const Segmentation gt = contract_framewise(video.ground_truth);

  VideoEval eval;
  eval.id = video.id;
  eval.frames = video.frames();
  eval.frame_accuracy = frame_accuracy(pred_frames, video.ground_truth);
  eval.jaccard_iod = jaccard_iod(pred, gt);
  eval.unit_accuracy = unit_accuracy(pred.labels, gt.labels);
  return eval;
}

}  // namespace

EvalReport evaluate_dataset(const NetParams& params, const ClassPrior& prior,
                            const LengthModel& lengths, const Dataset& dataset,
                            std::span<const int> video_indices, EvalTask task,
                            const Grammar& grammar,
                            const DecodeOptions& options, int jobs) {
  if (video_indices.empty())
    throw std::invalid_argument("no videos to evaluate");

  EvalReport report;
  report.videos.resize(video_indices.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_lock;

  const auto worker = [&]() {
    for (std::size_t i = next.fetch_add(1); i < video_indices.size();
         i = next.fetch_add(1)) {
      try {
        report.videos[i] =
            evaluate_video(params, prior, lengths,
                           dataset.videos[video_indices[i]], task, grammar,
                           options);
      } catch (...) {
        const std::lock_guard<std::mutex> hold(failure_lock);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };

  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    const int count =
        std::min<int>(jobs, static_cast<int>(video_indices.size()));
    for (int i = 0; i < count; ++i) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  double hits = 0.0;
  long total_frames = 0;
  for (const VideoEval& v : report.videos) {
    hits += v.frame_accuracy * v.frames;
    total_frames += v.frames;
    report.jaccard_iod += v.jaccard_iod;
    report.unit_accuracy += v.unit_accuracy;
  }
  report.frame_accuracy = hits / total_frames;
  report.jaccard_iod /= report.videos.size();
  report.unit_accuracy /= report.videos.size();
  return report;
}

namespace {

std::string format_row(const char* fmt, const std::string& id, int frames,
                       double fa, double jc, double ua) {
  char buffer[160];
  std::snprintf(buffer, sizeof buffer, fmt, id.c_str(), frames, fa, jc, ua);
  return buffer;
}

}  // namespace

std::string EvalReport::to_csv() const {
  std::string out = "id,frames,frame_accuracy,jaccard_iod,unit_accuracy\n";
  long total_frames = 0;
  for (const VideoEval& v : videos) {
    total_frames += v.frames;
    out += format_row("%s,%d,%.6f,%.6f,%.6f\n", v.id, v.frames,
                      v.frame_accuracy, v.jaccard_iod, v.unit_accuracy);
  }
  out += format_row("%s,%d,%.6f,%.6f,%.6f\n", "ALL",
                    static_cast<int>(total_frames), frame_accuracy,
                    jaccard_iod, unit_accuracy);
  return out;
}

std::string EvalReport::to_text() const {
  char buffer[200];
  std::snprintf(buffer, sizeof buffer,
                "videos: %zu\nframe accuracy: %.4f\njaccard IoD: %.4f\n"
                "unit accuracy: %.4f\n",
                videos.size(), frame_accuracy, jaccard_iod, unit_accuracy);
  return buffer;
}

}  // namespace nnviterbi
