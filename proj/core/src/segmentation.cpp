#include "nnviterbi/segmentation.hpp"

#include <numeric>
#include <stdexcept>

namespace nnviterbi {

int Segmentation::total_frames() const {
  return std::accumulate(lengths.begin(), lengths.end(), 0);
}

std::vector<int> expand_framewise(const Segmentation& seg) {
  if (seg.labels.size() != seg.lengths.size())
    throw std::invalid_argument("segmentation labels/lengths size mismatch");
  std::vector<int> frames;
  frames.reserve(seg.total_frames());
  for (std::size_t n = 0; n < seg.labels.size(); ++n) {
    if (seg.lengths[n] < 1)
      throw std::invalid_argument("segment length must be >= 1");
    frames.insert(frames.end(), seg.lengths[n], seg.labels[n]);
  }
  return frames;
}

Segmentation contract_framewise(const std::vector<int>& frame_labels) {
  Segmentation seg;
  for (int label : frame_labels) {
    if (!seg.labels.empty() && seg.labels.back() == label) {
      ++seg.lengths.back();
    } else {
      seg.labels.push_back(label);
      seg.lengths.push_back(1);
    }
  }
  return seg;
}

}  // namespace nnviterbi
