#include "nnviterbi/class_prior.hpp"

#include <cmath>
#include <stdexcept>

namespace nnviterbi {

ClassPrior::ClassPrior(int num_classes) {
  if (num_classes < 1)
    throw std::invalid_argument("num_classes must be >= 1");
  counts_.assign(num_classes, 0);
}

void ClassPrior::check_class(int c) const {
  if (c < 0 || c >= num_classes())
    throw std::invalid_argument("class index out of range");
}

void ClassPrior::observe(std::span<const int> frame_labels) {
  for (int c : frame_labels) check_class(c);
  for (int c : frame_labels) ++counts_[c];
  total_ += frame_labels.size();
}

double ClassPrior::prob(int c) const {
  check_class(c);
  if (counts_[c] == 0) return 1.0 / num_classes();
  return static_cast<double>(counts_[c]) / static_cast<double>(total_);
}

double ClassPrior::log_prob(int c) const {
  check_class(c);
  if (counts_[c] == 0) return -std::log(static_cast<double>(num_classes()));
  return std::log(static_cast<double>(counts_[c])) -
         std::log(static_cast<double>(total_));
}

std::uint64_t ClassPrior::frame_count(int c) const {
  check_class(c);
  return counts_[c];
}

ClassPrior ClassPrior::restore(std::vector<std::uint64_t> counts) {
  if (counts.empty())
    throw std::invalid_argument("prior state must be non-empty");
  ClassPrior prior(static_cast<int>(counts.size()));
  prior.counts_ = std::move(counts);
  for (std::uint64_t c : prior.counts_) prior.total_ += c;
  return prior;
}

double log_visual_score(double log_posterior, const ClassPrior& prior, int c) {
  return log_posterior - prior.log_prob(c);
}

ScoreMatrix hybrid_scores(const Eigen::MatrixXd& log_posteriors,
                          const ClassPrior& prior) {
  if (log_posteriors.cols() != prior.num_classes())
    throw std::invalid_argument("posterior/prior class count mismatch");
  ScoreMatrix scores = log_posteriors;
  for (int c = 0; c < scores.cols(); ++c)
    scores.col(c).array() -= prior.log_prob(c);
  return scores;
}

}  // namespace nnviterbi
