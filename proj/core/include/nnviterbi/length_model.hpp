#pragma once

#include <cstdint>
#include <vector>

#include "nnviterbi/segmentation.hpp"
#include "nnviterbi/types.hpp"

namespace nnviterbi {

// How to seed lambda for a class that has never been decoded. The default
// uses segments/frames of the current sample; the alternative (frames per
// segment) is kept for ablation runs.
enum class UnseenLengthInit {
  kSegmentsOverFrames,  // lambda = N / T
  kFramesOverSegments,  // lambda = T / N
};

// Class-conditional Poisson model over segment lengths. lambda of a class is
// the running mean of all decoded segment lengths of that class since
// training started; before the first observation it can be seeded from a
// sample's transcript. The pmf is NOT renormalized over a finite range, and
// length 0 is outside the domain.
class LengthModel {
 public:
  explicit LengthModel(int num_classes);

  int num_classes() const { return static_cast<int>(counts_.size()); }
  bool initialized(int c) const;
  double lambda(int c) const;

  // log Poisson(length; lambda_c) = length*log(lambda) - lambda - log(length!)
  double log_pmf(int length, int c) const;

  // Fold one decoded segmentation into the running means.
  void observe(const Segmentation& seg);

  // Seed lambda for the transcript's classes that have no observations yet.
  void init_unseen(const Transcript& transcript, int num_frames,
                   UnseenLengthInit mode = UnseenLengthInit::kSegmentsOverFrames);

  // Raw state, for checkpointing.
  std::uint64_t segment_count(int c) const;
  double length_sum(int c) const;
  double seed_lambda(int c) const;  // 0 if never seeded
  static LengthModel restore(std::vector<std::uint64_t> counts,
                             std::vector<double> sums,
                             std::vector<double> seeds);

 private:
  void check_class(int c) const;
  std::vector<std::uint64_t> counts_;
  std::vector<double> sums_;
  std::vector<double> seeds_;
};

}  // namespace nnviterbi
