#pragma once

#include <span>
#include <string>
#include <vector>

#include "nnviterbi/class_prior.hpp"
#include "nnviterbi/dataset.hpp"
#include "nnviterbi/grammar.hpp"
#include "nnviterbi/length_model.hpp"
#include "nnviterbi/network.hpp"
#include "nnviterbi/segmentation.hpp"
#include "nnviterbi/viterbi.hpp"

namespace nnviterbi {

// Decode a sequence under an arbitrary grammar using hybrid scores (network
// posterior divided by the class prior) and the length model.
Segmentation segment_sequence(const NetParams& params, const ClassPrior& prior,
                              const LengthModel& lengths,
                              const FrameSequence& frames,
                              const Grammar& grammar,
                              const DecodeOptions& options);

// Segmentation constrained to the given transcript: only the segment
// lengths are inferred. The result's labels always equal the transcript.
Segmentation align_sequence(const NetParams& params, const ClassPrior& prior,
                            const LengthModel& lengths,
                            const FrameSequence& frames,
                            const Transcript& transcript,
                            const DecodeOptions& options);

enum class EvalTask { kSegment, kAlign };

struct VideoEval {
  std::string id;
  int frames = 0;
  double frame_accuracy = 0.0;
  double jaccard_iod = 0.0;
  double unit_accuracy = 0.0;
};

struct EvalReport {
  double frame_accuracy = 0.0;  // pooled over all frames
  double jaccard_iod = 0.0;     // mean over videos
  double unit_accuracy = 0.0;   // mean over videos
  std::vector<VideoEval> videos;

  std::string to_csv() const;
  std::string to_text() const;
};

// Decode and score every listed video against its ground truth. kSegment
// decodes under `grammar`; kAlign uses each video's own transcript chain.
// Videos are processed across `jobs` threads; the aggregation is invariant
// to scheduling.
EvalReport evaluate_dataset(const NetParams& params, const ClassPrior& prior,
                            const LengthModel& lengths, const Dataset& dataset,
                            std::span<const int> video_indices, EvalTask task,
                            const Grammar& grammar,
                            const DecodeOptions& options, int jobs = 1);

}  // namespace nnviterbi
