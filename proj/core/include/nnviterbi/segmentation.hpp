#pragma once

#include <utility>
#include <vector>

namespace nnviterbi {

// A labeling of a sequence as consecutive segments. labels[n] is the class
// of segment n, lengths[n] its frame count (>= 1). score is the log score
// of the segmentation under the model that produced it.
struct Segmentation {
  std::vector<int> labels;
  std::vector<int> lengths;
  double score = 0.0;

  int num_segments() const { return static_cast<int>(labels.size()); }
  int total_frames() const;
  bool operator==(const Segmentation&) const = default;
};

// Frame-level labels: segment n's class repeated lengths[n] times.
std::vector<int> expand_framewise(const Segmentation& seg);

// Inverse of expand_framewise: merge runs of equal labels into segments.
// The score of the result is 0.
Segmentation contract_framewise(const std::vector<int>& frame_labels);

}  // namespace nnviterbi
