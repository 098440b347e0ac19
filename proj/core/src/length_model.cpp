#include "nnviterbi/length_model.hpp"

#include <cmath>
#include <stdexcept>

#include "nnviterbi/errors.hpp"

namespace nnviterbi {

LengthModel::LengthModel(int num_classes) {
  if (num_classes < 1)
    throw std::invalid_argument("num_classes must be >= 1");
  counts_.assign(num_classes, 0);
  sums_.assign(num_classes, 0.0);
  seeds_.assign(num_classes, 0.0);
}

void LengthModel::check_class(int c) const {
  if (c < 0 || c >= num_classes())
    throw std::invalid_argument("class index out of range");
}

bool LengthModel::initialized(int c) const {
  check_class(c);
  return counts_[c] > 0 || seeds_[c] > 0.0;
}

double LengthModel::lambda(int c) const {
  check_class(c);
  if (counts_[c] > 0) return sums_[c] / static_cast<double>(counts_[c]);
  if (seeds_[c] > 0.0) return seeds_[c];
  throw UninitializedClassError("length model has no lambda for class " +
                                std::to_string(c));
}

double LengthModel::log_pmf(int length, int c) const {
  if (length < 1)
    throw std::invalid_argument("segment length must be >= 1");
  const double lam = lambda(c);
  return length * std::log(lam) - lam - std::lgamma(length + 1.0);
}

void LengthModel::observe(const Segmentation& seg) {
  if (seg.labels.size() != seg.lengths.size())
    throw std::invalid_argument("segmentation labels/lengths size mismatch");
  for (std::size_t n = 0; n < seg.labels.size(); ++n) {
    check_class(seg.labels[n]);
    if (seg.lengths[n] < 1)
      throw std::invalid_argument("segment length must be >= 1");
    ++counts_[seg.labels[n]];
    sums_[seg.labels[n]] += seg.lengths[n];
  }
}

void LengthModel::init_unseen(const Transcript& transcript, int num_frames,
                              UnseenLengthInit mode) {
  if (transcript.empty())
    throw std::invalid_argument("transcript must be non-empty");
  if (num_frames < 1)
    throw std::invalid_argument("num_frames must be >= 1");
  const double n = static_cast<double>(transcript.size());
  const double t = static_cast<double>(num_frames);
  const double value =
      mode == UnseenLengthInit::kSegmentsOverFrames ? n / t : t / n;
  for (int c : transcript) {
    check_class(c);
    if (counts_[c] == 0) seeds_[c] = value;
  }
}

std::uint64_t LengthModel::segment_count(int c) const {
  check_class(c);
  return counts_[c];
}

double LengthModel::length_sum(int c) const {
  check_class(c);
  return sums_[c];
}

double LengthModel::seed_lambda(int c) const {
  check_class(c);
  return seeds_[c];
}

LengthModel LengthModel::restore(std::vector<std::uint64_t> counts,
                                 std::vector<double> sums,
                                 std::vector<double> seeds) {
  if (counts.empty() || counts.size() != sums.size() ||
      counts.size() != seeds.size())
    throw std::invalid_argument("length model state size mismatch");
  LengthModel model(static_cast<int>(counts.size()));
  model.counts_ = std::move(counts);
  model.sums_ = std::move(sums);
  model.seeds_ = std::move(seeds);
  return model;
}

}  // namespace nnviterbi
