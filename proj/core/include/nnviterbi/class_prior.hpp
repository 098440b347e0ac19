#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "nnviterbi/types.hpp"

namespace nnviterbi {

// Class prior estimated from the frame labels of all decoded training
// sequences so far. A class with no counts yet evaluates to 1/num_classes
// so dividing by the prior never blows up on fresh classes.
class ClassPrior {
 public:
  explicit ClassPrior(int num_classes);

  int num_classes() const { return static_cast<int>(counts_.size()); }
  void observe(std::span<const int> frame_labels);

  double prob(int c) const;
  double log_prob(int c) const;

  std::uint64_t frame_count(int c) const;
  std::uint64_t total_frames() const { return total_; }
  static ClassPrior restore(std::vector<std::uint64_t> counts);

 private:
  void check_class(int c) const;
  std::vector<std::uint64_t> counts_;
  std::uint64_t total_ = 0;
};

// log p(x|c) up to a class-independent constant: the posterior of the frame
// classifier divided by the class prior, in log space.
double log_visual_score(double log_posterior, const ClassPrior& prior, int c);

// Apply log_visual_score to a whole T x C matrix of log posteriors.
ScoreMatrix hybrid_scores(const Eigen::MatrixXd& log_posteriors,
                          const ClassPrior& prior);

}  // namespace nnviterbi
