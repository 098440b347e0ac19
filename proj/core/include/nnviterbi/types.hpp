#pragma once

#include <Eigen/Core>
#include <vector>

namespace nnviterbi {

// One row per frame, one column per feature dimension.
using FrameSequence = Eigen::MatrixXd;

// T x C matrix of log visual scores (or log posteriors / posteriors,
// depending on context). Rows are frames, columns are classes.
using ScoreMatrix = Eigen::MatrixXd;
using PosteriorMatrix = Eigen::MatrixXd;

// Ordered class labels of a sequence, one entry per segment.
using Transcript = std::vector<int>;

// Stand-in for log(0). Kept finite so score arithmetic never produces NaN;
// any path through a zero-probability event loses to every real path.
constexpr double kLogZero = -1e30;

inline const char* kVersion = "0.1.0";

}  // namespace nnviterbi
